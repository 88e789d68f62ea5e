//! Test-only reader for the core segment, written without the library's
//! bit or base64 helpers.

#![allow(dead_code)]

use std::collections::BTreeSet;

const ALPHABET: &[u8; 64] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

/// Sextets of a base64url segment as bits, MSB first.
pub fn segment_bits(segment: &str) -> Vec<bool> {
    let mut bits = Vec::with_capacity(segment.len() * 6);
    for c in segment.bytes() {
        let v = ALPHABET.iter().position(|&a| a == c).expect("base64url character") as u8;
        for i in (0..6).rev() {
            bits.push(v >> i & 1 == 1);
        }
    }
    bits
}

pub struct Cursor {
    bits: Vec<bool>,
    pub pos: usize,
}

impl Cursor {
    pub fn new(segment: &str) -> Self {
        Cursor { bits: segment_bits(segment), pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> u64 {
        let mut v = 0;
        for _ in 0..n {
            v = v << 1 | u64::from(self.bits[self.pos]);
            self.pos += 1;
        }
        v
    }

    pub fn flags(&mut self, n: usize) -> BTreeSet<u16> {
        (1..=n as u16).filter(|_| self.take(1) == 1).collect()
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct Section {
    pub is_range: bool,
    pub bits: usize,
    pub ids: BTreeSet<u16>,
}

pub fn read_section(c: &mut Cursor) -> Section {
    let start = c.pos;
    let max = c.take(16) as u16;
    let is_range = c.take(1) == 1;
    let ids = if is_range {
        let n = c.take(12);
        let mut ids = BTreeSet::new();
        for _ in 0..n {
            let interval = c.take(1) == 1;
            let a = c.take(16) as u16;
            let b = if interval { c.take(16) as u16 } else { a };
            ids.extend(a..=b);
        }
        ids
    } else {
        c.flags(max.into())
    };
    Section { is_range, bits: c.pos - start, ids }
}

#[derive(Debug)]
pub struct CoreFields {
    pub version: u64,
    pub created: u64,
    pub last_updated: u64,
    pub cmp_id: u64,
    pub cmp_version: u64,
    pub consent_screen: u64,
    pub language: String,
    pub vendor_list_version: u64,
    pub policy_version: u64,
    pub service_specific: bool,
    pub special_features: BTreeSet<u16>,
    pub purposes_consent: BTreeSet<u16>,
    pub purposes_li: BTreeSet<u16>,
    pub vendors_consent: Section,
    pub vendors_li: Section,
}

/// Bits before the first vendor section.
pub const FIXED_BITS: usize = 199;

pub fn read_core(signal: &str) -> CoreFields {
    let core = signal.split('.').next().unwrap();
    let mut c = Cursor::new(core);
    let version = c.take(6);
    let created = c.take(36);
    let last_updated = c.take(36);
    let cmp_id = c.take(12);
    let cmp_version = c.take(12);
    let consent_screen = c.take(6);
    let language = [c.take(6), c.take(6)].iter().map(|&l| (b'A' + l as u8) as char).collect();
    let vendor_list_version = c.take(12);
    let policy_version = c.take(6);
    let service_specific = c.take(1) == 1;
    let special_features = c.flags(12);
    let purposes_consent = c.flags(24);
    let purposes_li = c.flags(24);
    assert_eq!(c.pos, FIXED_BITS);
    let vendors_consent = read_section(&mut c);
    let vendors_li = read_section(&mut c);
    CoreFields {
        version,
        created,
        last_updated,
        cmp_id,
        cmp_version,
        consent_screen,
        language,
        vendor_list_version,
        policy_version,
        service_specific,
        special_features,
        purposes_consent,
        purposes_li,
        vendors_consent,
        vendors_li,
    }
}

/// Bit lengths of both encodings for a vendor set, counted from scratch.
/// The range length is `None` above 4095 entries.
pub fn candidate_bits(ids: &BTreeSet<u16>) -> (usize, Option<usize>) {
    let max = ids.iter().max().copied().unwrap_or(0) as usize;
    let bitfield = 16 + 1 + max;
    let mut entries = 0usize;
    let mut body = 0usize;
    let sorted: Vec<u16> = ids.iter().copied().collect();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[j] + 1 {
            j += 1;
        }
        entries += 1;
        body += if i == j { 17 } else { 33 };
        i = j + 1;
    }
    let range = (entries < 4096).then_some(16 + 1 + 12 + body);
    (bitfield, range)
}

pub fn fixture(name: &str) -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/");
    std::fs::read_to_string(format!("{path}{name}")).unwrap_or_else(|e| panic!("{name}: {e}"))
}
