//! Vendor-set section: `max_vendor_id(16) ∥ is_range(1) ∥ body`.
//!
//! The body is either a bitfield of `max_vendor_id` bits (bit `i` set means
//! vendor `i + 1` is in the set) or `num_entries(12)` followed by entries of
//! `is_interval(1) ∥ start(16) [∥ end(16)]`. The encoder emits whichever is
//! shorter; ties go to the bitfield.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use serde::Serialize;

use super::CodecError;
use crate::bits::{BitReader, BitWriter};

pub(crate) const MAX_VENDOR_ID_BITS: u32 = 16;
pub(crate) const NUM_ENTRIES_BITS: u32 = 12;
const VENDOR_ID_BITS: u32 = 16;
const MAX_ENTRIES: usize = (1 << NUM_ENTRIES_BITS) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VendorEncoding {
    Bitfield,
    Range,
}

/// Sizes of both candidate encodings for one vendor set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SectionLayout {
    pub chosen: VendorEncoding,
    pub bitfield_bits: usize,
    /// `None` when the set needs more entries than the count field can hold.
    pub range_bits: Option<usize>,
    pub entries: Vec<RangeInclusive<u16>>,
}

impl SectionLayout {
    pub fn emitted_bits(&self) -> usize {
        match self.chosen {
            VendorEncoding::Bitfield => self.bitfield_bits,
            VendorEncoding::Range => self.range_bits.expect("range chosen only when available"),
        }
    }
}

/// Maximal runs of consecutive ids.
pub fn runs(ids: &BTreeSet<u16>) -> Vec<RangeInclusive<u16>> {
    let mut out: Vec<RangeInclusive<u16>> = Vec::new();
    for &id in ids {
        match out.last_mut() {
            Some(r) if u32::from(*r.end()) + 1 == u32::from(id) => *r = *r.start()..=id,
            _ => out.push(id..=id),
        }
    }
    out
}

pub fn layout(ids: &BTreeSet<u16>) -> SectionLayout {
    let max = ids.last().copied().unwrap_or(0);
    let header = (MAX_VENDOR_ID_BITS + 1) as usize;
    let bitfield_bits = header + usize::from(max);
    let entries = runs(ids);
    let range_bits = (entries.len() <= MAX_ENTRIES).then(|| {
        header
            + NUM_ENTRIES_BITS as usize
            + entries
                .iter()
                .map(|r| if r.start() == r.end() { 1 + VENDOR_ID_BITS } else { 1 + 2 * VENDOR_ID_BITS } as usize)
                .sum::<usize>()
    });
    let chosen = match range_bits {
        Some(rb) if rb < bitfield_bits => VendorEncoding::Range,
        _ => VendorEncoding::Bitfield,
    };
    SectionLayout { chosen, bitfield_bits, range_bits, entries }
}

pub(crate) fn write(w: &mut BitWriter, ids: &BTreeSet<u16>) {
    let plan = layout(ids);
    let max = ids.last().copied().unwrap_or(0);
    w.push_uint(max.into(), MAX_VENDOR_ID_BITS);
    match plan.chosen {
        VendorEncoding::Bitfield => {
            w.push_bit(false);
            w.push_flags(max.into(), ids.iter().map(|&id| usize::from(id) - 1));
        }
        VendorEncoding::Range => {
            w.push_bit(true);
            w.push_uint(plan.entries.len() as u64, NUM_ENTRIES_BITS);
            for r in &plan.entries {
                let single = r.start() == r.end();
                w.push_bit(!single);
                w.push_uint((*r.start()).into(), VENDOR_ID_BITS);
                if !single {
                    w.push_uint((*r.end()).into(), VENDOR_ID_BITS);
                }
            }
        }
    }
}

pub(crate) fn read(r: &mut BitReader<'_>, field: &'static str) -> Result<BTreeSet<u16>, CodecError> {
    let truncated = |e: crate::bits::OutOfBits| CodecError::TruncatedBitstream { field, offset_bits: e.offset };
    let max = r.read_uint(MAX_VENDOR_ID_BITS).map_err(truncated)? as u16;
    let is_range = r.read_bit().map_err(truncated)?;
    if !is_range {
        let set = r.read_flags(max.into()).map_err(truncated)?;
        return Ok(set.into_iter().map(|i| i as u16 + 1).collect());
    }
    let mut ids = Vec::new();
    let count = r.read_uint(NUM_ENTRIES_BITS).map_err(truncated)?;
    for _ in 0..count {
        let entry_at = r.position();
        let interval = r.read_bit().map_err(truncated)?;
        let start = r.read_uint(VENDOR_ID_BITS).map_err(truncated)? as u16;
        let end = if interval { r.read_uint(VENDOR_ID_BITS).map_err(truncated)? as u16 } else { start };
        if start == 0 || start > end || end > max {
            return Err(CodecError::RangeViolation { field, offset_bits: entry_at });
        }
        ids.extend(start..=end);
    }
    Ok(ids.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set_is_bitfield() {
        let l = layout(&BTreeSet::new());
        assert_eq!(l.chosen, VendorEncoding::Bitfield);
        assert_eq!(l.bitfield_bits, 17);
        assert_eq!(l.range_bits, Some(29));
    }

    #[test]
    fn runs_split_on_gaps() {
        let ids: BTreeSet<u16> = [1, 2, 3, 7, 9, 10].into();
        assert_eq!(runs(&ids), vec![1..=3, 7..=7, 9..=10]);
    }

    #[test]
    fn range_at_top_of_id_space() {
        let ids: BTreeSet<u16> = [u16::MAX - 1, u16::MAX].into();
        assert_eq!(runs(&ids), vec![u16::MAX - 1..=u16::MAX]);
        assert_eq!(layout(&ids).chosen, VendorEncoding::Range);
    }

    #[test]
    fn bad_range_entry_is_rejected() {
        // max=5, range, 1 entry, single, start=6
        let mut w = BitWriter::new();
        w.push_uint(5, 16);
        w.push_bit(true);
        w.push_uint(1, 12);
        w.push_bit(false);
        w.push_uint(6, 16);
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes);
        assert_eq!(read(&mut r, "vendors_consent"), Err(CodecError::RangeViolation { field: "vendors_consent", offset_bits: 29 }));
    }
}
