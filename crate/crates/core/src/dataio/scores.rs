//! Score matrix files written by `crossrank rerank`.
//!
//! Same container as FEAT with magic `"SCOR"`; the JSON header is
//! `{"nq","ng","method","higher_is_better"}` and the payload holds
//! `nq * ng` row-major f64 little-endian values.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::feat::{check_payload, split_container, write_container};
use crate::dense::Matrix;
use crate::error::{Error, FormatError, Result};
use crate::metrics::ScoreOrder;

pub const SCORE_MAGIC: [u8; 4] = *b"SCOR";
const SCORE_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    nq: usize,
    ng: usize,
    method: String,
    higher_is_better: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFile {
    pub method: String,
    pub order: ScoreOrder,
    pub scores: Matrix,
}

pub fn encode_scores(sf: &ScoreFile) -> Vec<u8> {
    let header = Header {
        nq: sf.scores.rows(),
        ng: sf.scores.cols(),
        method: sf.method.clone(),
        higher_is_better: sf.order == ScoreOrder::HigherIsBetter,
    };
    let header = serde_json::to_vec(&header).expect("header serialises");
    let payload = sf.scores.as_slice();
    let mut out = write_container(SCORE_MAGIC, SCORE_VERSION, &header, payload.len() * 8);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_scores(bytes: &[u8]) -> Result<ScoreFile> {
    let (header, payload) = split_container(bytes, SCORE_MAGIC, SCORE_VERSION)?;
    let header: Header =
        serde_json::from_slice(header).map_err(|e| FormatError::Header(e.to_string()))?;
    let expected = header
        .nq
        .checked_mul(header.ng)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| FormatError::Header("nq * ng overflows".into()))?;
    check_payload(payload, expected)?;
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(ScoreFile {
        method: header.method,
        order: if header.higher_is_better {
            ScoreOrder::HigherIsBetter
        } else {
            ScoreOrder::LowerIsBetter
        },
        scores: Matrix::new(header.nq, header.ng, data)?,
    })
}

pub fn save_scores(sf: &ScoreFile, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_scores(sf)).map_err(Error::from)
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreFile> {
    decode_scores(&fs::read(path)?)
}
