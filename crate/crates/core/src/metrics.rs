//! Re-identification evaluation: CMC, mAP and mINP.
//!
//! For each query the gallery is ranked by score, gallery items that share
//! both the query's identity and its camera are dropped, and the remaining
//! items with the query's identity count as relevant. Queries with no
//! relevant item left are skipped.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dense::{argsort_desc, Matrix};
use crate::error::{Error, Result};

/// Direction of a score matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreOrder {
    /// Similarities.
    HigherIsBetter,
    /// Distances.
    LowerIsBetter,
}

/// Per-query gallery orderings, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    pub indices: Vec<Vec<usize>>,
    pub scores: Vec<Vec<f64>>,
}

/// Ranks each row by descending similarity, ties toward the lower
/// gallery index.
pub fn rank_gallery(sim: &Matrix) -> Result<RankingResult> {
    rank_gallery_by(sim, ScoreOrder::HigherIsBetter)
}

pub fn rank_gallery_by(scores: &Matrix, order: ScoreOrder) -> Result<RankingResult> {
    if scores.is_empty() {
        return Err(Error::dim("cannot rank an empty score matrix"));
    }
    let mut indices = Vec::with_capacity(scores.rows());
    let mut sorted = Vec::with_capacity(scores.rows());
    for row in scores.iter_rows() {
        let idx = match order {
            ScoreOrder::HigherIsBetter => argsort_desc(row),
            ScoreOrder::LowerIsBetter => {
                let neg: Vec<f64> = row.iter().map(|v| -v).collect();
                argsort_desc(&neg)
            }
        };
        sorted.push(idx.iter().map(|&j| row[j]).collect());
        indices.push(idx);
    }
    Ok(RankingResult {
        indices,
        scores: sorted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rank1: f64,
    pub rank5: f64,
    pub rank10: f64,
    pub rank20: f64,
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "mINP")]
    pub minp: f64,
    /// `cmc[k - 1]` is the Rank-k accuracy.
    pub cmc: Vec<f64>,
    pub num_queries_evaluated: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Flat `key<TAB>value` lines; the CMC curve is comma separated.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("rank1", self.rank1),
            ("rank5", self.rank5),
            ("rank10", self.rank10),
            ("rank20", self.rank20),
            ("mAP", self.map),
            ("mINP", self.minp),
        ] {
            writeln!(out, "{k}\t{v:.6}").unwrap();
        }
        writeln!(out, "num_queries_evaluated\t{}", self.num_queries_evaluated).unwrap();
        let cmc: Vec<String> = self.cmc.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(out, "cmc\t{}", cmc.join(",")).unwrap();
        out
    }
}

/// Per-query outcome before averaging.
#[derive(Debug, Clone, Copy, PartialEq)]
struct QueryStats {
    /// Zero-based position of the first relevant item among kept items.
    first_hit: usize,
    ap: f64,
    inp: f64,
}

// AP is accumulated as an unevaluated sum hi + lo so the final value is
// the correctly rounded mean of the precisions in all practical cases.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn add_ratio((hi, lo): (f64, f64), num: f64, den: f64) -> (f64, f64) {
    let q = num / den;
    let r = (-q).mul_add(den, num) / den;
    let (s, e) = two_sum(hi, q);
    (s, lo + e + r)
}

fn div_rounded((hi, lo): (f64, f64), den: f64) -> f64 {
    let q = hi / den;
    let r = (-q).mul_add(den, hi);
    q + (r + lo) / den
}

fn query_stats(ranked: &[usize], qid: i64, qcam: i64, g_ids: &[i64], g_cams: &[i64]) -> Option<QueryStats> {
    let mut pos = 0;
    let mut hits = 0usize;
    let mut first_hit = None;
    let mut last_hit = 0;
    let mut precision_sum = (0.0, 0.0);
    for &g in ranked {
        if g_ids[g] == qid && g_cams[g] == qcam {
            continue;
        }
        if g_ids[g] == qid {
            hits += 1;
            first_hit.get_or_insert(pos);
            last_hit = pos;
            precision_sum = add_ratio(precision_sum, hits as f64, (pos + 1) as f64);
        }
        pos += 1;
    }
    first_hit.map(|first_hit| QueryStats {
        first_hit,
        ap: div_rounded(precision_sum, hits as f64),
        inp: hits as f64 / (last_hit + 1) as f64,
    })
}

/// Scores a query x gallery matrix against identity and camera labels.
pub fn evaluate(
    scores: &Matrix,
    order: ScoreOrder,
    q_ids: &[i64],
    g_ids: &[i64],
    q_cams: &[i64],
    g_cams: &[i64],
) -> Result<EvalReport> {
    let (nq, ng) = scores.shape();
    if q_ids.len() != nq || q_cams.len() != nq || g_ids.len() != ng || g_cams.len() != ng {
        return Err(Error::dim(format!(
            "labels ({} query ids, {} query cams, {} gallery ids, {} gallery cams) do not match a {nq}x{ng} score matrix",
            q_ids.len(),
            q_cams.len(),
            g_ids.len(),
            g_cams.len()
        )));
    }
    let ranking = rank_gallery_by(scores, order)?;
    let stats: Vec<QueryStats> = ranking
        .indices
        .iter()
        .enumerate()
        .filter_map(|(q, ranked)| query_stats(ranked, q_ids[q], q_cams[q], g_ids, g_cams))
        .collect();
    if stats.is_empty() {
        return Err(Error::Evaluation(
            "no query has a relevant gallery item after same-camera exclusion".into(),
        ));
    }
    let n = stats.len() as f64;
    let mut cmc = vec![0.0; ng];
    for s in &stats {
        cmc[s.first_hit] += 1.0;
    }
    let mut acc = 0.0;
    for c in cmc.iter_mut() {
        acc += *c;
        *c = acc / n;
    }
    let at = |k: usize| cmc[k.min(ng) - 1];
    Ok(EvalReport {
        rank1: at(1),
        rank5: at(5),
        rank10: at(10),
        rank20: at(20),
        map: stats.iter().map(|s| s.ap).sum::<f64>() / n,
        minp: stats.iter().map(|s| s.inp).sum::<f64>() / n,
        cmc,
        num_queries_evaluated: stats.len(),
    })
}
