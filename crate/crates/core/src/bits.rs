//! MSB-first bit packing over byte buffers.

/// Appends fixed-width unsigned fields, most significant bit first.
#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: usize,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of bits written so far.
    pub fn bit_len(&self) -> usize {
        self.len
    }

    pub fn push_bit(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let idx = self.len / 8;
            self.bytes[idx] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    /// Writes the low `width` bits of `value`. Panics in debug builds when
    /// `value` does not fit; callers validate ranges beforehand.
    pub fn push_uint(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        debug_assert!(width == 64 || value >> width == 0, "{value} does not fit in {width} bits");
        for shift in (0..width).rev() {
            self.push_bit((value >> shift) & 1 == 1);
        }
    }

    /// Appends `len` bits, set at the given offsets into the run and clear
    /// elsewhere.
    pub fn push_flags(&mut self, len: usize, set: impl IntoIterator<Item = usize>) {
        let base = self.len;
        self.len += len;
        self.bytes.resize(self.len.div_ceil(8), 0);
        for i in set {
            assert!(i < len, "flag {i} outside a run of {len}");
            let at = base + i;
            self.bytes[at / 8] |= 0x80 >> (at % 8);
        }
    }

    /// Consumes the writer. The final partial byte is zero-filled.
    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Error raised when a read runs past the end of the buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutOfBits {
    /// Bit offset at which the failed read started.
    pub offset: usize,
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Current bit offset from the start of the buffer.
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() * 8 - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool, OutOfBits> {
        if self.remaining() == 0 {
            return Err(OutOfBits { offset: self.pos });
        }
        let byte = self.bytes[self.pos / 8];
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    /// Reads a run of `len` bits and returns the offsets of the set ones.
    pub fn read_flags(&mut self, len: usize) -> Result<Vec<usize>, OutOfBits> {
        if self.remaining() < len {
            return Err(OutOfBits { offset: self.pos });
        }
        let mut set = Vec::new();
        for i in 0..len {
            let at = self.pos + i;
            if self.bytes[at / 8] & (0x80 >> (at % 8)) != 0 {
                set.push(i);
            }
        }
        self.pos += len;
        Ok(set)
    }

    pub fn read_uint(&mut self, width: u32) -> Result<u64, OutOfBits> {
        debug_assert!(width <= 64);
        if self.remaining() < width as usize {
            return Err(OutOfBits { offset: self.pos });
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.read_bit()?);
        }
        Ok(v)
    }
}
