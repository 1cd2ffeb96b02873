//! Seeded synthetic two-modality embeddings.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) keyed with
//! `seed_from_u64(seed)`. Each identity draws from its own stream (stream
//! number = identity index) and each modality offset from a reserved
//! stream, so the output does not depend on generation order. Normal
//! variates use the Box-Muller transform on `f64` uniforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureSet, Modality};
use crate::error::{Error, Result};

pub const VISIBLE_OFFSET_STREAM: u64 = 1 << 63;
pub const INFRARED_OFFSET_STREAM: u64 = (1 << 63) + 1;

pub const VISIBLE_CAMERA: i64 = 1;
pub const INFRARED_CAMERA: i64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_identities: usize,
    pub per_identity_per_modality: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub modality_offset_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_identities == 0 || self.per_identity_per_modality == 0 {
            return Err(Error::param("identity and per-identity counts must be at least 1"));
        }
        if self.dim < 2 {
            return Err(Error::param("dim must be at least 2"));
        }
        for (name, v) in [
            ("noise_sigma", self.noise_sigma),
            ("modality_offset_sigma", self.modality_offset_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

struct Normal {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl Normal {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    fn next(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        // 1 - U keeps the radius argument in (0, 1]
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    fn vector(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.next()).collect()
    }
}

/// Generates a (visible, infrared) pair.
///
/// Each identity gets a unit-norm prototype; each modality a fixed
/// Gaussian offset scaled by `modality_offset_sigma`; each sample is
/// prototype + modality offset + N(0, noise_sigma^2) per coordinate.
/// Rows are grouped by identity. Visible rows carry camera 1, infrared
/// rows camera 2.
pub fn synth_generate(spec: &SynthSpec) -> Result<(FeatureSet, FeatureSet)> {
    spec.validate()?;
    let d = spec.dim;
    let offset = |stream| -> Vec<f64> {
        Normal::new(spec.seed, stream)
            .vector(d)
            .into_iter()
            .map(|v| v * spec.modality_offset_sigma)
            .collect()
    };
    let offsets = [offset(VISIBLE_OFFSET_STREAM), offset(INFRARED_OFFSET_STREAM)];

    let per = spec.per_identity_per_modality;
    let rows = spec.num_identities * per;
    let mut data = [Vec::with_capacity(rows * d), Vec::with_capacity(rows * d)];
    let mut pids = Vec::with_capacity(rows);
    for id in 0..spec.num_identities {
        let mut normal = Normal::new(spec.seed, id as u64);
        let mut proto = normal.vector(d);
        let norm = proto.iter().map(|v| v * v).sum::<f64>().sqrt();
        proto.iter_mut().for_each(|v| *v /= norm);
        for (modality, out) in data.iter_mut().enumerate() {
            for _ in 0..per {
                for (p, o) in proto.iter().zip(&offsets[modality]) {
                    out.push((p + o + spec.noise_sigma * normal.next()) as f32);
                }
            }
        }
        pids.extend(std::iter::repeat(id as i64).take(per));
    }
    let [vis, ir] = data;
    Ok((
        FeatureSet::new(d, vis, pids.clone(), vec![VISIBLE_CAMERA; rows], Modality::Visible)?,
        FeatureSet::new(d, ir, pids, vec![INFRARED_CAMERA; rows], Modality::Infrared)?,
    ))
}
