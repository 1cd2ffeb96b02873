//! Labelled embedding sets, their on-disk formats, and the synthetic
//! two-modality generator.

mod feat;
mod scores;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dense::Matrix;
use crate::error::{Error, Result};

pub use feat::{decode_features, encode_features, load_features, save_features, FEAT_MAGIC, FEAT_VERSION};
pub use scores::{decode_scores, encode_scores, load_scores, save_scores, ScoreFile, SCORE_MAGIC};
pub use synth::{synth_generate, SynthSpec, INFRARED_OFFSET_STREAM, VISIBLE_OFFSET_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visible,
    Infrared,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Visible => "visible",
            Modality::Infrared => "infrared",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "visible" => Ok(Modality::Visible),
            "infrared" => Ok(Modality::Infrared),
            other => Err(Error::param(format!("unknown modality {other:?}"))),
        }
    }
}

/// One modality's embeddings plus identity and camera labels.
///
/// Embeddings are stored as `f32` row-major; [`FeatureSet::embeddings`]
/// widens them to an `f64` [`Matrix`] for computation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    data: Vec<f32>,
    person_ids: Vec<i64>,
    camera_ids: Vec<i64>,
    modality: Modality,
}

impl FeatureSet {
    pub fn new(
        dim: usize,
        data: Vec<f32>,
        person_ids: Vec<i64>,
        camera_ids: Vec<i64>,
        modality: Modality,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::dim("feature dimension must be at least 1"));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::dim(format!(
                "{} values do not form a non-empty set of {dim}-dimensional rows",
                data.len()
            )));
        }
        let n = data.len() / dim;
        if person_ids.len() != n || camera_ids.len() != n {
            return Err(Error::dim(format!(
                "{n} rows but {} person ids and {} camera ids",
                person_ids.len(),
                camera_ids.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("embedding contains a non-finite value".into()));
        }
        Ok(Self {
            dim,
            data,
            person_ids,
            camera_ids,
            modality,
        })
    }

    /// Builds a set from an `f64` matrix, narrowing to `f32`. Every row
    /// gets person id equal to its index and camera id 0.
    pub fn from_matrix(m: &Matrix, modality: Modality) -> Result<Self> {
        let n = m.rows() as i64;
        Self::new(
            m.cols(),
            m.as_slice().iter().map(|&v| v as f32).collect(),
            (0..n).collect(),
            vec![0; m.rows()],
            modality,
        )
    }

    pub fn len(&self) -> usize {
        self.person_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.person_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn person_ids(&self) -> &[i64] {
        &self.person_ids
    }

    pub fn camera_ids(&self) -> &[i64] {
        &self.camera_ids
    }

    pub fn raw(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn embeddings(&self) -> Matrix {
        Matrix::from_raw(
            self.len(),
            self.dim,
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
    }

    /// Returns a copy whose row `i` is row `order[i]` of `self`.
    pub fn select_rows(&self, order: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(order.len() * self.dim);
        for &i in order {
            if i >= self.len() {
                return Err(Error::dim(format!("row {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(
            self.dim,
            data,
            order.iter().map(|&i| self.person_ids[i]).collect(),
            order.iter().map(|&i| self.camera_ids[i]).collect(),
            self.modality,
        )
    }

    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::new(
            self.dim,
            self.data.iter().map(|v| v * factor).collect(),
            self.person_ids.clone(),
            self.camera_ids.clone(),
            self.modality,
        )
    }
}
