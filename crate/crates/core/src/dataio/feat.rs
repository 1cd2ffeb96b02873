//! FEAT embedding files.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FEAT"
//! 4       1     version (1)
//! 5       4     header length H, u32 little-endian
//! 9       H     UTF-8 JSON {"n","d","modality","person_ids","camera_ids"}
//! 9+H     4nd   row-major f32 little-endian embeddings
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureSet, Modality};
use crate::error::{Error, FormatError, Result};

pub const FEAT_MAGIC: [u8; 4] = *b"FEAT";
pub const FEAT_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    n: usize,
    d: usize,
    modality: Modality,
    person_ids: Vec<i64>,
    camera_ids: Vec<i64>,
}

/// Splits `magic | version | len | header` off the front of `bytes`,
/// returning the header bytes and the remaining payload.
pub(super) fn split_container<'a>(bytes: &'a [u8], magic: [u8; 4], version: u8) -> Result<(&'a [u8], &'a [u8])> {
    let truncated = |what, expected, found| FormatError::Truncated {
        what,
        expected,
        found,
    };
    if bytes.len() < 4 {
        return Err(truncated("magic", 4, bytes.len()).into());
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != magic {
        return Err(FormatError::BadMagic { expected: magic, found }.into());
    }
    let Some(&v) = bytes.get(4) else {
        return Err(truncated("version", 1, 0).into());
    };
    if v != version {
        return Err(FormatError::UnsupportedVersion(v).into());
    }
    if bytes.len() < 9 {
        return Err(truncated("header length", 4, bytes.len() - 5).into());
    }
    let h = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let rest = &bytes[9..];
    if rest.len() < h {
        return Err(truncated("header", h, rest.len()).into());
    }
    Ok(rest.split_at(h))
}

pub(super) fn write_container(magic: [u8; 4], version: u8, header: &[u8], payload_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + header.len() + payload_len);
    out.extend_from_slice(&magic);
    out.push(version);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    out
}

pub(super) fn check_payload(payload: &[u8], expected: usize) -> Result<()> {
    if payload.len() < expected {
        return Err(FormatError::Truncated {
            what: "payload",
            expected,
            found: payload.len(),
        }
        .into());
    }
    if payload.len() > expected {
        return Err(FormatError::SizeMismatch {
            expected,
            found: payload.len(),
        }
        .into());
    }
    Ok(())
}

pub fn encode_features(fs: &FeatureSet) -> Vec<u8> {
    let header = Header {
        n: fs.len(),
        d: fs.dim(),
        modality: fs.modality(),
        person_ids: fs.person_ids().to_vec(),
        camera_ids: fs.camera_ids().to_vec(),
    };
    let header = serde_json::to_vec(&header).expect("header serialises");
    let mut out = write_container(FEAT_MAGIC, FEAT_VERSION, &header, fs.raw().len() * 4);
    for v in fs.raw() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureSet> {
    let (header, payload) = split_container(bytes, FEAT_MAGIC, FEAT_VERSION)?;
    let header: Header =
        serde_json::from_slice(header).map_err(|e| FormatError::Header(e.to_string()))?;
    if header.person_ids.len() != header.n || header.camera_ids.len() != header.n {
        return Err(FormatError::Header(format!(
            "n = {} but {} person ids and {} camera ids",
            header.n,
            header.person_ids.len(),
            header.camera_ids.len()
        ))
        .into());
    }
    if header.n == 0 || header.d == 0 {
        return Err(FormatError::Header("n and d must be at least 1".into()).into());
    }
    let count = header
        .n
        .checked_mul(header.d)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| FormatError::Header("n * d overflows".into()))?;
    check_payload(payload, count)?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureSet::new(header.d, data, header.person_ids, header.camera_ids, header.modality)
}

pub fn save_features(fs: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_features(fs)).map_err(Error::from)
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    decode_features(&fs::read(path)?)
}
