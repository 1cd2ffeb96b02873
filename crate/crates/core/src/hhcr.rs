//! Two-stage heterogeneous / homogeneous consistency re-ranking.
//!
//! Stage one works on the joint similarity matrix of the concatenated
//! visible and infrared sets. A top-k neighbour graph `W` (k1 for visible
//! rows, k4 for infrared rows, optionally symmetrised with its transpose)
//! aggregates value-preserving top-k candidate rows (k2 / k5) after a
//! local query expansion over each row's own candidates.
//!
//! Stage two builds one row-stochastic smoothing operator per modality
//! from the intra-modal block (binary size k2 / k5, value size k3 / k6)
//! and applies it both to the stage-one rows and to the raw embeddings.
//!
//! The final score blends cosine similarity of the refined rank rows with
//! cosine similarity of the refined embeddings:
//!
//! ```text
//! S = (1 - lambda) * cos(Phi_v H_v, Phi_r H_r) + lambda * cos(Phi_v X_v, Phi_r X_r)
//! ```
//!
//! Negative similarities carry no neighbourhood evidence: value matrices
//! are clamped at zero before they enter an averaging step, so every
//! aggregation operator stays non-negative.

use serde::{Deserialize, Serialize};

use crate::dataio::FeatureSet;
use crate::dense::{
    cosine_similarity, matmul, row_normalize, self_cosine_similarity, topk_binary, topk_values,
    Matrix,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HhcrParams {
    /// Cross-modal neighbourhood size for visible rows of `W`.
    pub k1: usize,
    /// Visible candidate size; also the binary size of the visible filter.
    pub k2: usize,
    /// Value size of the visible filter.
    pub k3: usize,
    /// Cross-modal neighbourhood size for infrared rows of `W`.
    pub k4: usize,
    /// Infrared candidate size; also the binary size of the infrared filter.
    pub k5: usize,
    /// Value size of the infrared filter.
    pub k6: usize,
    pub lambda: f64,
    /// Symmetrise the neighbour graph as `B + B^T`.
    pub rtf_enabled: bool,
    /// Average candidate rows over their neighbours before aggregation.
    pub lqe_enabled: bool,
}

impl Default for HhcrParams {
    fn default() -> Self {
        Self {
            k1: 20,
            k2: 6,
            k3: 6,
            k4: 20,
            k5: 6,
            k6: 6,
            lambda: 0.3,
            rtf_enabled: true,
            lqe_enabled: true,
        }
    }
}

impl HhcrParams {
    /// Checks every constraint for a problem with `nv` visible and `nr`
    /// infrared items. Sizes are rejected, never clamped.
    pub fn validate(&self, nv: usize, nr: usize) -> Result<()> {
        let n = nv + nr;
        let ks = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("k5", self.k5),
            ("k6", self.k6),
        ];
        if let Some((name, _)) = ks.iter().find(|(_, k)| *k == 0) {
            return Err(Error::param(format!("{name} must be at least 1")));
        }
        if self.k1 <= self.k2 {
            return Err(Error::param(format!(
                "constraint k1 > k2 violated (k1 = {}, k2 = {})",
                self.k1, self.k2
            )));
        }
        if self.k4 <= self.k5 {
            return Err(Error::param(format!(
                "constraint k4 > k5 violated (k4 = {}, k5 = {})",
                self.k4, self.k5
            )));
        }
        for (name, k, limit, what) in [
            ("k1", self.k1, n, "total item count"),
            ("k4", self.k4, n, "total item count"),
            ("k2", self.k2, nv, "visible count"),
            ("k3", self.k3, nv, "visible count"),
            ("k5", self.k5, nr, "infrared count"),
            ("k6", self.k6, nr, "infrared count"),
        ] {
            if k > limit {
                return Err(Error::param(format!("{name} = {k} exceeds the {what} {limit}")));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::param(format!("lambda = {} outside [0, 1]", self.lambda)));
        }
        Ok(())
    }
}

/// Cosine similarity of `[X_v; X_r]` with itself; visible items first.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSimilarity {
    s: Matrix,
    nv: usize,
}

impl JointSimilarity {
    /// Wraps a precomputed joint matrix after checking its shape,
    /// symmetry and unit diagonal (tolerance 1e-6).
    pub fn new(s: Matrix, nv: usize) -> Result<Self> {
        let n = s.rows();
        if s.cols() != n {
            return Err(Error::dim("joint similarity must be square"));
        }
        if nv == 0 || nv >= n {
            return Err(Error::dim(format!("visible count {nv} must lie in 1..{n}")));
        }
        if !s.is_symmetric(1e-6) || (0..n).any(|i| (s.get(i, i) - 1.0).abs() > 1e-6) {
            return Err(Error::Domain(
                "joint similarity must be symmetric with unit diagonal".into(),
            ));
        }
        Ok(Self { s, nv })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.s
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn nr(&self) -> usize {
        self.s.rows() - self.nv
    }

    pub fn len(&self) -> usize {
        self.s.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.s.rows() == 0
    }

    pub fn visible_block(&self) -> Matrix {
        self.s.block(0..self.nv, 0..self.nv)
    }

    pub fn infrared_block(&self) -> Matrix {
        let n = self.len();
        self.s.block(self.nv..n, self.nv..n)
    }
}

/// Output of the heterogeneous stage.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroOutput {
    /// Aggregated rows of the visible items, `nv x N`.
    pub fv_rank: Matrix,
    /// Aggregated rows of the infrared items, `nr x N`.
    pub fr_rank: Matrix,
    /// Neighbour graph used for aggregation, `N x N`.
    pub w: Matrix,
}

/// Output of the homogeneous stage.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousOutput {
    pub fv_rank: Matrix,
    pub fr_rank: Matrix,
    pub fv: Matrix,
    pub fr: Matrix,
}

pub fn build_joint_similarity(xv: &FeatureSet, xr: &FeatureSet) -> Result<JointSimilarity> {
    if xv.dim() != xr.dim() {
        return Err(Error::dim(format!(
            "visible dim {} differs from infrared dim {}",
            xv.dim(),
            xr.dim()
        )));
    }
    let joint = xv.embeddings().vstack(&xr.embeddings())?;
    let s = self_cosine_similarity(&joint)?;
    if let Some(i) = (0..s.rows()).find(|&i| s.get(i, i) == 0.0) {
        return Err(Error::Domain(format!("item {i} has a zero embedding")));
    }
    Ok(JointSimilarity { s, nv: xv.len() })
}

fn check_k(name: &str, k: usize, limit: usize) -> Result<()> {
    if k == 0 || k > limit {
        return Err(Error::param(format!("{name} = {k} outside 1..={limit}")));
    }
    Ok(())
}

/// Applies a per-row top-k selector with one size for the visible rows
/// and another for the infrared rows, then restacks.
fn split_rows(
    m: &Matrix,
    nv: usize,
    (vis_name, k_vis): (&str, usize),
    (ir_name, k_ir): (&str, usize),
    select: fn(&Matrix, usize) -> Result<Matrix>,
) -> Result<Matrix> {
    check_k(vis_name, k_vis, m.cols())?;
    check_k(ir_name, k_ir, m.cols())?;
    let top = select(&m.row_range(0..nv), k_vis)?;
    let bottom = select(&m.row_range(nv..m.rows()), k_ir)?;
    top.vstack(&bottom)
}

/// Neighbour graph over the joint set: binary top-k1 rows for visible
/// items and top-k4 rows for infrared items, plus its transpose when
/// `rtf_enabled` (mutual neighbours get weight 2).
pub fn heterogeneous_adjacency(js: &JointSimilarity, p: &HhcrParams) -> Result<Matrix> {
    let b = split_rows(&js.s, js.nv, ("k1", p.k1), ("k4", p.k4), topk_binary)?;
    if p.rtf_enabled {
        b.add(&b.transpose())
    } else {
        Ok(b)
    }
}

/// Value-preserving top-k2 (visible) / top-k5 (infrared) rows of the
/// joint similarity.
pub fn candidate_features(js: &JointSimilarity, p: &HhcrParams) -> Result<Matrix> {
    split_rows(&js.s, js.nv, ("k2", p.k2), ("k5", p.k5), topk_values)
}

/// Local query expansion: row `i` of the result is the mean of the rows
/// of `m` selected by row `i` of `neighbors` (weighted by its entries).
pub fn lqe(m: &Matrix, neighbors: &Matrix) -> Result<Matrix> {
    if neighbors.rows() != neighbors.cols() || neighbors.cols() != m.rows() {
        return Err(Error::dim(format!(
            "neighbour matrix {:?} does not match {} feature rows",
            neighbors.shape(),
            m.rows()
        )));
    }
    matmul(&row_normalize(neighbors)?, m)
}

fn clamp_nonneg(m: &Matrix) -> Matrix {
    m.map(|v| v.max(0.0))
}

/// Heterogeneous stage: `H = rownorm(W) * lqe(C+)`, split into visible
/// and infrared rows.
pub fn heterogeneous_rerank(js: &JointSimilarity, p: &HhcrParams) -> Result<HeteroOutput> {
    let w = heterogeneous_adjacency(js, p)?;
    let c = candidate_features(js, p)?;
    let features = clamp_nonneg(&c);
    let h0 = if p.lqe_enabled {
        // the candidate support itself; re-selecting from C would pick
        // zero entries by index whenever a candidate value is negative
        let neighbors = split_rows(&js.s, js.nv, ("k2", p.k2), ("k5", p.k5), topk_binary)?;
        lqe(&features, &neighbors)?
    } else {
        features
    };
    let h = matmul(&row_normalize(&w)?, &h0)?;
    let n = js.len();
    Ok(HeteroOutput {
        fv_rank: h.row_range(0..js.nv),
        fr_rank: h.row_range(js.nv..n),
        w,
    })
}

/// Row-stochastic intra-modal smoothing operator.
///
/// The top-`k_val` values of `block` are masked by its top-`k_bin`
/// indicator, clamped at zero, expanded over the top-`k_bin` neighbours
/// and row-normalised.
pub fn homogeneous_filter(block: &Matrix, k_bin: usize, k_val: usize) -> Result<Matrix> {
    if block.rows() != block.cols() {
        return Err(Error::dim("intra-modal block must be square"));
    }
    let binary = topk_binary(block, k_bin)?;
    let masked = topk_values(block, k_val)?.hadamard(&binary)?;
    row_normalize(&lqe(&clamp_nonneg(&masked), &binary)?)
}

/// Homogeneous stage: smooths the heterogeneous rows and the raw
/// embeddings of each modality with that modality's filter.
pub fn apply_homogeneous_filters(
    h: &HeteroOutput,
    js: &JointSimilarity,
    xv: &FeatureSet,
    xr: &FeatureSet,
    p: &HhcrParams,
) -> Result<HomogeneousOutput> {
    if xv.len() != js.nv() || xr.len() != js.nr() {
        return Err(Error::dim(format!(
            "feature sets ({}, {}) do not match the joint split ({}, {})",
            xv.len(),
            xr.len(),
            js.nv(),
            js.nr()
        )));
    }
    let phi_v = homogeneous_filter(&js.visible_block(), p.k2, p.k3)?;
    let phi_r = homogeneous_filter(&js.infrared_block(), p.k5, p.k6)?;
    Ok(HomogeneousOutput {
        fv_rank: matmul(&phi_v, &h.fv_rank)?,
        fr_rank: matmul(&phi_r, &h.fr_rank)?,
        fv: matmul(&phi_v, &xv.embeddings())?,
        fr: matmul(&phi_r, &xr.embeddings())?,
    })
}

/// Runs the full pipeline and returns the refined `nv x nr` similarity.
pub fn hhcr_final(xv: &FeatureSet, xr: &FeatureSet, p: &HhcrParams) -> Result<Matrix> {
    p.validate(xv.len(), xr.len())?;
    let js = build_joint_similarity(xv, xr)?;
    let hetero = heterogeneous_rerank(&js, p)?;
    let refined = apply_homogeneous_filters(&hetero, &js, xv, xr, p)?;
    let rank_term = cosine_similarity(&refined.fv_rank, &refined.fr_rank)?;
    let feature_term = cosine_similarity(&refined.fv, &refined.fr)?;
    rank_term
        .scale(1.0 - p.lambda)
        .add(&feature_term.scale(p.lambda))
}
