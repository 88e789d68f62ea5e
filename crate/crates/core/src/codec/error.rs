use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

/// Failure to encode or decode a consent signal.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("record field `{field}` violates its invariant")]
    InvalidRecord { field: &'static str },
    #[error("input is not unpadded base64url")]
    MalformedBase64 { offset_bits: Option<usize> },
    #[error("bitstream ends while reading `{field}` at bit {offset_bits}")]
    TruncatedBitstream { field: &'static str, offset_bits: usize },
    #[error("unsupported format version {version}")]
    UnsupportedVersion { version: u8 },
    #[error("`{field}` holds an out-of-range value at bit {offset_bits}")]
    RangeViolation { field: &'static str, offset_bits: usize },
}

impl CodecError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            CodecError::InvalidRecord { .. } => "invalid_record",
            CodecError::MalformedBase64 { .. } => "malformed_base64",
            CodecError::TruncatedBitstream { .. } => "truncated_bitstream",
            CodecError::UnsupportedVersion { .. } => "unsupported_version",
            CodecError::RangeViolation { .. } => "range_violation",
        }
    }

    pub fn field(&self) -> Option<&'static str> {
        match self {
            CodecError::InvalidRecord { field }
            | CodecError::TruncatedBitstream { field, .. }
            | CodecError::RangeViolation { field, .. } => Some(field),
            CodecError::UnsupportedVersion { .. } => Some("version"),
            CodecError::MalformedBase64 { .. } => None,
        }
    }

    pub fn offset_bits(&self) -> Option<usize> {
        match self {
            CodecError::MalformedBase64 { offset_bits } => *offset_bits,
            CodecError::TruncatedBitstream { offset_bits, .. } | CodecError::RangeViolation { offset_bits, .. } => {
                Some(*offset_bits)
            }
            CodecError::UnsupportedVersion { .. } => Some(0),
            CodecError::InvalidRecord { .. } => None,
        }
    }
}

/// Serializes as `{code, field, offset_bits}`.
impl Serialize for CodecError {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("CodecError", 3)?;
        st.serialize_field("code", self.code())?;
        st.serialize_field("field", &self.field())?;
        st.serialize_field("offset_bits", &self.offset_bits())?;
        st.end()
    }
}
