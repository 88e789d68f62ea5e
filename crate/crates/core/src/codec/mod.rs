//! Consent signal codec.
//!
//! A signal is one or more unpadded base64url segments joined by `.`. The
//! first segment is the core record, packed MSB-first as:
//!
//! ```text
//! version(6) created(36) last_updated(36) cmp_id(12) cmp_version(12)
//! consent_screen(6) consent_language(6+6, A=0) vendor_list_version(12)
//! policy_version(6) service_specific(1) special_feature_optins(12)
//! purposes_consent(24) purposes_li(24) vendors_consent(..) vendors_li(..)
//! ```
//!
//! Id sets of fixed size are bitfields where bit `i` stands for id `i + 1`.
//! The two vendor sections are described in [`vendor_section`]. The last
//! byte is zero-filled. Further segments are not interpreted; they are kept
//! verbatim in [`ConsentRecord::opaque_segments`] and re-emitted on encode.

mod error;
mod record;
mod validate;
pub mod vendor_section;

use std::collections::BTreeSet;
use std::fmt;

use base64::alphabet;
use base64::engine::{DecodePaddingMode, GeneralPurpose, GeneralPurposeConfig};
use base64::Engine;
use serde::{Deserialize, Serialize};

pub use error::CodecError;
pub use record::{ConsentRecord, Deciseconds, Language, SignalCounts, FORMAT_VERSION, MAX_PURPOSE, MAX_SPECIAL_FEATURE};
pub use validate::{validate, Violation};

use crate::bits::{BitReader, BitWriter, OutOfBits};

/// Field widths of the core segment, in bits.
pub(crate) mod layout {
    pub const VERSION: u32 = 6;
    pub const CREATED: u32 = 36;
    pub const LAST_UPDATED: u32 = 36;
    pub const CMP_ID: u32 = 12;
    pub const CMP_VERSION: u32 = 12;
    pub const CONSENT_SCREEN: u32 = 6;
    pub const LANGUAGE_LETTER: u32 = 6;
    pub const VENDOR_LIST_VERSION: u32 = 12;
    pub const POLICY_VERSION: u32 = 6;
    pub const SPECIAL_FEATURES: u32 = 12;
    pub const PURPOSES: u32 = 24;
}

/// Segment separator.
pub const SEGMENT_SEPARATOR: char = '.';

pub(crate) const BASE64URL: GeneralPurpose = GeneralPurpose::new(
    &alphabet::URL_SAFE,
    GeneralPurposeConfig::new()
        .with_encode_padding(false)
        .with_decode_padding_mode(DecodePaddingMode::RequireNone)
        .with_decode_allow_trailing_bits(true),
);

pub(crate) fn is_base64url_segment(s: &str) -> bool {
    !s.is_empty() && BASE64URL.decode(s).is_ok()
}

/// Encoded signal text: unpadded base64url segments separated by `.`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EncodedSignal(String);

impl EncodedSignal {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for EncodedSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for EncodedSignal {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

fn write_id_bitfield(w: &mut BitWriter, ids: &BTreeSet<u8>, width: u32) {
    for id in 1..=width {
        w.push_bit(ids.contains(&(id as u8)));
    }
}

/// Packs the core segment. Returns the writer so callers can inspect the
/// bit length.
pub(crate) fn pack_core(record: &ConsentRecord) -> Result<BitWriter, CodecError> {
    use layout as l;
    record.check().map_err(|field| CodecError::InvalidRecord { field })?;
    let mut w = BitWriter::new();
    w.push_uint(record.version.into(), l::VERSION);
    w.push_uint(record.created.0, l::CREATED);
    w.push_uint(record.last_updated.0, l::LAST_UPDATED);
    w.push_uint(record.cmp_id.into(), l::CMP_ID);
    w.push_uint(record.cmp_version.into(), l::CMP_VERSION);
    w.push_uint(record.consent_screen.into(), l::CONSENT_SCREEN);
    for letter in record.consent_language.letter_indices() {
        w.push_uint(letter.into(), l::LANGUAGE_LETTER);
    }
    w.push_uint(record.vendor_list_version.into(), l::VENDOR_LIST_VERSION);
    w.push_uint(record.policy_version.into(), l::POLICY_VERSION);
    w.push_bit(record.service_specific);
    write_id_bitfield(&mut w, &record.special_feature_optins, l::SPECIAL_FEATURES);
    write_id_bitfield(&mut w, &record.purposes_consent, l::PURPOSES);
    write_id_bitfield(&mut w, &record.purposes_li, l::PURPOSES);
    vendor_section::write(&mut w, &record.vendors_consent);
    vendor_section::write(&mut w, &record.vendors_li);
    Ok(w)
}

/// Encodes a record. Output is deterministic for equal records.
pub fn encode(record: &ConsentRecord) -> Result<EncodedSignal, CodecError> {
    let core = pack_core(record)?;
    let mut text = BASE64URL.encode(core.into_bytes());
    for seg in &record.opaque_segments {
        text.push(SEGMENT_SEPARATOR);
        text.push_str(seg);
    }
    Ok(EncodedSignal(text))
}

struct FieldReader<'a> {
    bits: BitReader<'a>,
}

impl FieldReader<'_> {
    fn uint(&mut self, field: &'static str, width: u32) -> Result<u64, CodecError> {
        self.bits
            .read_uint(width)
            .map_err(|OutOfBits { offset }| CodecError::TruncatedBitstream { field, offset_bits: offset })
    }

    fn id_set(&mut self, field: &'static str, width: u32) -> Result<BTreeSet<u8>, CodecError> {
        let raw = self.uint(field, width)?;
        Ok((1..=width).filter(|id| raw >> (width - id) & 1 == 1).map(|id| id as u8).collect())
    }
}

fn decode_segment(seg: &str, base_offset_chars: usize) -> Result<Vec<u8>, CodecError> {
    BASE64URL.decode(seg).map_err(|e| {
        let at = match e {
            base64::DecodeError::InvalidByte(i, _) | base64::DecodeError::InvalidLastSymbol(i, _) => {
                Some((base_offset_chars + i) * 6)
            }
            base64::DecodeError::InvalidLength(len) => Some((base_offset_chars + len) * 6),
            base64::DecodeError::InvalidPadding => None,
        };
        CodecError::MalformedBase64 { offset_bits: at }
    })
}

/// Decodes signal text. Any input is accepted; failures come back as a
/// single [`CodecError`].
pub fn decode(text: &str) -> Result<ConsentRecord, CodecError> {
    use layout as l;
    let mut segments = text.split(SEGMENT_SEPARATOR);
    let core_text = segments.next().unwrap_or_default();
    let bytes = decode_segment(core_text, 0)?;
    let mut opaque_segments = Vec::new();
    let mut offset_chars = core_text.len() + 1;
    for seg in segments {
        if seg.is_empty() {
            return Err(CodecError::MalformedBase64 { offset_bits: Some(offset_chars * 6) });
        }
        decode_segment(seg, offset_chars)?;
        offset_chars += seg.len() + 1;
        opaque_segments.push(seg.to_owned());
    }

    let mut r = FieldReader { bits: BitReader::new(&bytes) };
    let version = r.uint("version", l::VERSION)? as u8;
    if version != FORMAT_VERSION {
        return Err(CodecError::UnsupportedVersion { version });
    }
    let created = Deciseconds(r.uint("created", l::CREATED)?);
    let updated_at = r.bits.position();
    let last_updated = Deciseconds(r.uint("last_updated", l::LAST_UPDATED)?);
    if created > last_updated {
        return Err(CodecError::RangeViolation { field: "last_updated", offset_bits: updated_at });
    }
    let cmp_id = r.uint("cmp_id", l::CMP_ID)? as u16;
    let cmp_version = r.uint("cmp_version", l::CMP_VERSION)? as u16;
    let consent_screen = r.uint("consent_screen", l::CONSENT_SCREEN)? as u8;
    let lang_at = r.bits.position();
    let a = r.uint("consent_language", l::LANGUAGE_LETTER)? as u8;
    let b = r.uint("consent_language", l::LANGUAGE_LETTER)? as u8;
    if a > 25 || b > 25 {
        return Err(CodecError::RangeViolation { field: "consent_language", offset_bits: lang_at });
    }
    let vendor_list_version = r.uint("vendor_list_version", l::VENDOR_LIST_VERSION)? as u16;
    let policy_version = r.uint("policy_version", l::POLICY_VERSION)? as u8;
    let service_specific = r.uint("service_specific", 1)? == 1;
    let special_feature_optins = r.id_set("special_feature_optins", l::SPECIAL_FEATURES)?;
    let purposes_consent = r.id_set("purposes_consent", l::PURPOSES)?;
    let purposes_li = r.id_set("purposes_li", l::PURPOSES)?;
    let vendors_consent = vendor_section::read(&mut r.bits, "vendors_consent")?;
    let vendors_li = vendor_section::read(&mut r.bits, "vendors_li")?;

    Ok(ConsentRecord {
        version,
        created,
        last_updated,
        cmp_id,
        cmp_version,
        consent_screen,
        consent_language: Language::from_letter_indices(a, b),
        vendor_list_version,
        policy_version,
        service_specific,
        special_feature_optins,
        purposes_consent,
        purposes_li,
        vendors_consent,
        vendors_li,
        opaque_segments,
    })
}
