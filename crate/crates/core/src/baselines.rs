//! Reference re-rankers: plain cosine, k-reciprocal (Jaccard) and
//! expanded cross neighbourhood distance.
//!
//! The two neighbourhood methods operate on the joint query + gallery set
//! and return query x gallery distances (lower is better).

use serde::{Deserialize, Serialize};

use crate::dataio::FeatureSet;
use crate::dense::{argsort_desc, cosine_similarity, self_cosine_similarity, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KReciprocalParams {
    pub k1: usize,
    pub k2: usize,
    pub lambda: f64,
}

impl Default for KReciprocalParams {
    fn default() -> Self {
        Self {
            k1: 20,
            k2: 6,
            lambda: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcnParams {
    /// Length of each item's own neighbour list.
    pub t: usize,
    /// Neighbours appended per list entry.
    pub q: usize,
}

impl Default for EcnParams {
    fn default() -> Self {
        Self { t: 3, q: 8 }
    }
}

/// Plain cross-modal cosine similarity (no re-ranking).
pub fn cosine_rank(xv: &FeatureSet, xr: &FeatureSet) -> Result<Matrix> {
    if xv.dim() != xr.dim() {
        return Err(Error::dim(format!("query dim {} differs from gallery dim {}", xv.dim(), xr.dim())));
    }
    cosine_similarity(&xv.embeddings(), &xr.embeddings())
}

fn joint_cosine(q: &FeatureSet, g: &FeatureSet) -> Result<Matrix> {
    if q.dim() != g.dim() {
        return Err(Error::dim(format!("query dim {} differs from gallery dim {}", q.dim(), g.dim())));
    }
    self_cosine_similarity(&q.embeddings().vstack(&g.embeddings())?)
}

/// Euclidean distance between L2-normalised rows of the joint set, with
/// an exact zero diagonal.
fn joint_euclidean(q: &FeatureSet, g: &FeatureSet) -> Result<Matrix> {
    let s = joint_cosine(q, g)?;
    let n = s.rows();
    let mut d = s.map(|c| (2.0 - 2.0 * c).max(0.0).sqrt()).into_vec();
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    Matrix::new(n, n, d)
}

/// Query x gallery Euclidean distance of L2-normalised features; the
/// distance that k-reciprocal re-ranking starts from.
pub fn original_distance(q: &FeatureSet, g: &FeatureSet) -> Result<Matrix> {
    let d = joint_euclidean(q, g)?;
    let nq = q.len();
    Ok(d.block(0..nq, nq..d.rows()))
}

fn argsort_asc(row: &[f64]) -> Vec<usize> {
    let neg: Vec<f64> = row.iter().map(|v| -v).collect();
    argsort_desc(&neg)
}

/// Members of `ranked[i][..=k]` whose own top-(k+1) list contains `i`.
fn reciprocal_neighbors(ranked: &[Vec<usize>], i: usize, k: usize) -> Vec<usize> {
    ranked[i][..=k]
        .iter()
        .copied()
        .filter(|&j| ranked[j][..=k].contains(&i))
        .collect()
}

/// k-reciprocal re-ranking with Jaccard distance.
///
/// For every item `x` of the joint set the reciprocal set `R(x, k1)` is
/// expanded with `R(c, ceil(k1 / 2))` of each member `c` whenever at
/// least two thirds of that smaller set already lies in `R(x, k1)`.
/// Members get Gaussian weights `exp(-d)` normalised to sum 1, the weight
/// vectors are averaged over each item's top-`k2` list, and the Jaccard
/// distance between weight vectors is blended with the original distance:
/// `d = (1 - lambda) * d_J + lambda * d_orig`.
pub fn kreciprocal_rerank(q: &FeatureSet, g: &FeatureSet, p: &KReciprocalParams) -> Result<Matrix> {
    let n = q.len() + g.len();
    if p.k1 == 0 || p.k2 == 0 {
        return Err(Error::param("k-reciprocal k1 and k2 must be at least 1"));
    }
    if p.k2 > p.k1 {
        return Err(Error::param(format!(
            "constraint k2 <= k1 violated (k1 = {}, k2 = {})",
            p.k1, p.k2
        )));
    }
    if p.k1 >= n {
        return Err(Error::param(format!(
            "k-reciprocal k1 = {} must be below the joint set size {n}",
            p.k1
        )));
    }
    if !(0.0..=1.0).contains(&p.lambda) {
        return Err(Error::param(format!("lambda = {} outside [0, 1]", p.lambda)));
    }

    let dist = joint_euclidean(q, g)?;
    let ranked: Vec<Vec<usize>> = dist.iter_rows().map(argsort_asc).collect();
    let half = p.k1.div_ceil(2);

    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        let base = reciprocal_neighbors(&ranked, i, p.k1);
        let mut expanded = base.clone();
        for &c in &base {
            let cand = reciprocal_neighbors(&ranked, c, half);
            let shared = cand.iter().filter(|j| base.contains(j)).count();
            if 3 * shared >= 2 * cand.len() {
                expanded.extend(cand);
            }
        }
        expanded.sort_unstable();
        expanded.dedup();
        let row = &mut weights[i * n..(i + 1) * n];
        let mut total = 0.0;
        for &j in &expanded {
            row[j] = (-dist.get(i, j)).exp();
            total += row[j];
        }
        for &j in &expanded {
            row[j] /= total;
        }
    }

    let mut expanded_weights = vec![0.0; n * n];
    for i in 0..n {
        let out = &mut expanded_weights[i * n..(i + 1) * n];
        for &j in &ranked[i][..p.k2] {
            for (o, w) in out.iter_mut().zip(&weights[j * n..(j + 1) * n]) {
                *o += w;
            }
        }
        out.iter_mut().for_each(|v| *v /= p.k2 as f64);
    }

    let nq = q.len();
    let ng = g.len();
    let mut out = Vec::with_capacity(nq * ng);
    for i in 0..nq {
        let vi = &expanded_weights[i * n..(i + 1) * n];
        for j in nq..n {
            let vj = &expanded_weights[j * n..(j + 1) * n];
            let (mut inter, mut union) = (0.0, 0.0);
            for (a, b) in vi.iter().zip(vj) {
                inter += a.min(*b);
                union += a.max(*b);
            }
            let jaccard = if union > 0.0 { 1.0 - inter / union } else { 1.0 };
            out.push((1.0 - p.lambda) * jaccard + p.lambda * dist.get(i, j));
        }
    }
    Matrix::new(nq, ng, out)
}

/// Expanded cross neighbourhood distance on `1 - cosine`.
///
/// The expanded list of an item holds its `t` nearest other items followed
/// by the `q` nearest other items of each of those (duplicates kept). The
/// distance between query `a` and gallery `b` averages the distances from
/// `b` to every entry of `a`'s list and from `a` to every entry of `b`'s.
pub fn ecn_rerank(q: &FeatureSet, g: &FeatureSet, p: &EcnParams) -> Result<Matrix> {
    let n = q.len() + g.len();
    if p.t == 0 || p.q == 0 {
        return Err(Error::param("ECN t and q must be at least 1"));
    }
    if p.t >= n || p.q >= n {
        return Err(Error::param(format!(
            "ECN t = {} and q = {} must be below the joint set size {n}",
            p.t, p.q
        )));
    }
    let s = joint_cosine(q, g)?;
    let mut d = s.map(|c| 1.0 - c).into_vec();
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    let dist = Matrix::new(n, n, d)?;

    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| argsort_asc(dist.row(i)).into_iter().filter(|&j| j != i).collect())
        .collect();
    let expanded: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let top = &neighbors[i][..p.t];
            let mut list = top.to_vec();
            for &j in top {
                list.extend_from_slice(&neighbors[j][..p.q]);
            }
            list
        })
        .collect();

    let nq = q.len();
    let m = (p.t + p.t * p.q) as f64;
    let mut out = Vec::with_capacity(nq * g.len());
    for a in 0..nq {
        for b in nq..n {
            let from_a: f64 = expanded[a].iter().map(|&x| dist.get(x, b)).sum();
            let from_b: f64 = expanded[b].iter().map(|&y| dist.get(y, a)).sum();
            out.push((from_a + from_b) / (2.0 * m));
        }
    }
    Matrix::new(nq, g.len(), out)
}
