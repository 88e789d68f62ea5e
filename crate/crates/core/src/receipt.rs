//! Integrity-protected consent receipts.
//!
//! A receipt binds an encoded consent signal to a digest of the banner it
//! was collected under, authenticated with HMAC-SHA256. The canonical banner
//! form and the tagged byte layout are described in `docs/receipt-format.md`.

use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::URL_SAFE_NO_PAD as BASE64URL;
use base64::Engine;
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{self, CodecError, ConsentRecord, Deciseconds};
use crate::rules::BannerDescriptor;

type HmacSha256 = Hmac<Sha256>;

pub const DIGEST_LEN: usize = 32;
pub const TAG_LEN: usize = 32;
const TAG_CONTEXT: &[u8] = b"tcfkit-receipt-v1";

/// Canonical serialization of a banner: compact JSON with object keys in
/// lexicographic order, absent optionals as `null`, and each layer's
/// controls sorted by `order_index`.
pub fn canonical_banner(b: &BannerDescriptor) -> Vec<u8> {
    let mut b = b.clone();
    for layer in &mut b.layers {
        layer.controls.sort_by_key(|c| c.order_index);
    }
    // Value maps are BTreeMap-backed, which sorts keys.
    let value = serde_json::to_value(&b).expect("banner serializes");
    serde_json::to_vec(&value).expect("value serializes")
}

pub fn digest_banner(b: &BannerDescriptor) -> [u8; DIGEST_LEN] {
    Sha256::digest(canonical_banner(b)).into()
}

/// A MAC key and the identifier receipts carry for it.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiptKey {
    pub key_id: String,
    /// Secret bytes, base64url without padding in JSON.
    #[serde(with = "b64")]
    pub secret: Vec<u8>,
}

impl fmt::Debug for ReceiptKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReceiptKey").field("key_id", &self.key_id).finish_non_exhaustive()
    }
}

mod b64 {
    use super::{Engine, BASE64URL};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&BASE64URL.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        BASE64URL.decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReceiptError {
    #[error("receipt key secret is empty")]
    EmptyKey,
    #[error("key id must be non-empty and free of `.` and whitespace")]
    BadKeyId,
    #[error(transparent)]
    Codec(#[from] CodecError),
}

fn key_id_ok(id: &str) -> bool {
    !id.is_empty() && !id.contains('.') && !id.chars().any(char::is_whitespace)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsentReceipt {
    /// ASCII bytes of the encoded consent signal.
    pub payload: Vec<u8>,
    pub ui_digest: Vec<u8>,
    pub issued_at: Deciseconds,
    pub key_id: String,
    pub tag: Vec<u8>,
}

fn compute_tag(secret: &[u8], payload: &[u8], digest: &[u8], issued_at: u64, key_id: &str) -> HmacSha256 {
    let mut mac = HmacSha256::new_from_slice(secret).expect("HMAC accepts any key length");
    mac.update(TAG_CONTEXT);
    mac.update(&(payload.len() as u32).to_be_bytes());
    mac.update(payload);
    mac.update(&(digest.len() as u32).to_be_bytes());
    mac.update(digest);
    mac.update(&issued_at.to_be_bytes());
    mac.update(&(key_id.len() as u32).to_be_bytes());
    mac.update(key_id.as_bytes());
    mac
}

/// Issues a receipt stamped with the record's `last_updated` time.
pub fn issue(record: &ConsentRecord, banner: &BannerDescriptor, key: &ReceiptKey) -> Result<ConsentReceipt, ReceiptError> {
    issue_at(record, banner, key, record.last_updated)
}

pub fn issue_at(
    record: &ConsentRecord,
    banner: &BannerDescriptor,
    key: &ReceiptKey,
    issued_at: Deciseconds,
) -> Result<ConsentReceipt, ReceiptError> {
    if key.secret.is_empty() {
        return Err(ReceiptError::EmptyKey);
    }
    if !key_id_ok(&key.key_id) {
        return Err(ReceiptError::BadKeyId);
    }
    let payload = codec::encode(record)?.into_string().into_bytes();
    let ui_digest = digest_banner(banner).to_vec();
    let tag = compute_tag(&key.secret, &payload, &ui_digest, issued_at.get(), &key.key_id).finalize().into_bytes().to_vec();
    Ok(ConsentReceipt { payload, ui_digest, issued_at, key_id: key.key_id.clone(), tag })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    BadTag,
    UnknownKey,
    Malformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Verification {
    Valid,
    Invalid(InvalidReason),
}

impl Verification {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verification::Valid)
    }
}

impl ConsentReceipt {
    /// The consent record carried in the payload, if it decodes.
    pub fn record(&self) -> Result<ConsentRecord, CodecError> {
        let text = std::str::from_utf8(&self.payload).map_err(|_| CodecError::MalformedBase64 { offset_bits: None })?;
        codec::decode(text)
    }

    pub fn ui_matches(&self, banner: &BannerDescriptor) -> bool {
        self.ui_digest == digest_banner(banner)
    }
}

/// Checks structure, then the key id, then the tag in constant time.
pub fn verify(receipt: &ConsentReceipt, key: &ReceiptKey) -> Verification {
    if receipt.ui_digest.len() != DIGEST_LEN
        || receipt.tag.len() != TAG_LEN
        || !key_id_ok(&receipt.key_id)
        || receipt.record().is_err()
    {
        return Verification::Invalid(InvalidReason::Malformed);
    }
    if receipt.key_id != key.key_id || key.secret.is_empty() {
        return Verification::Invalid(InvalidReason::UnknownKey);
    }
    let mac = compute_tag(&key.secret, &receipt.payload, &receipt.ui_digest, receipt.issued_at.get(), &receipt.key_id);
    match mac.verify_slice(&receipt.tag) {
        Ok(()) => Verification::Valid,
        Err(_) => Verification::Invalid(InvalidReason::BadTag),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed receipt: {0}")]
pub struct ParseReceiptError(&'static str);

impl fmt::Display for ConsentReceipt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{}.{}.{}.{}",
            BASE64URL.encode(&self.payload),
            BASE64URL.encode(&self.ui_digest),
            self.issued_at.get(),
            self.key_id,
            BASE64URL.encode(&self.tag)
        )
    }
}

impl FromStr for ConsentReceipt {
    type Err = ParseReceiptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split('.').collect();
        let [payload, digest, issued_at, key_id, tag] = parts[..] else {
            return Err(ParseReceiptError("expected five dot-separated fields"));
        };
        let b64 = |field: &str, what| BASE64URL.decode(field).map_err(|_| ParseReceiptError(what));
        if !issued_at.bytes().all(|c| c.is_ascii_digit()) {
            return Err(ParseReceiptError("issued_at is not a decimal integer"));
        }
        Ok(ConsentReceipt {
            payload: b64(payload, "payload is not base64url")?,
            ui_digest: b64(digest, "ui_digest is not base64url")?,
            issued_at: Deciseconds(issued_at.parse().map_err(|_| ParseReceiptError("issued_at out of range"))?),
            key_id: key_id.to_owned(),
            tag: b64(tag, "tag is not base64url")?,
        })
    }
}

impl Serialize for ConsentReceipt {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConsentReceipt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}
