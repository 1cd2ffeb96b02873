//! Test-only reference implementations.
//!
//! Everything here works on plain `Vec<Vec<f64>>` with naive loops and full
//! sorts. Nothing calls into the library's kernels, so agreement between
//! these and the library is an independent check.

#![allow(dead_code)]

use std::collections::BTreeSet;

use crossrank::{FeatureSet, Matrix, Modality};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random feature set with entries in [-1, 1) and labels drawn from
/// `0..num_ids`.
pub fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize, num_ids: i64, cam: i64, modality: Modality) -> FeatureSet {
    loop {
        let data: Vec<f32> = (0..n * d).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let ok = data.chunks(d).all(|r| r.iter().map(|v| v * v).sum::<f32>() > 1e-3);
        if ok {
            let ids = (0..n).map(|_| rng.gen_range(0..num_ids)).collect();
            return FeatureSet::new(d, data, ids, vec![cam; n], modality).unwrap();
        }
    }
}

pub fn to_dense(m: &Matrix) -> Dense {
    m.iter_rows().map(|r| r.to_vec()).collect()
}

pub fn rows_of(fs: &FeatureSet) -> Dense {
    (0..fs.len()).map(|i| fs.row(i).iter().map(|&v| f64::from(v)).collect()).collect()
}

pub fn max_diff(a: &Dense, b: &Matrix) -> f64 {
    assert_eq!(a.len(), b.rows(), "row count");
    let mut worst = 0.0f64;
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.len(), b.cols(), "col count");
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - b.get(i, j)).abs());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// dense primitives

pub fn cosine(a: &Dense, b: &Dense) -> Dense {
    let unit = |r: &Vec<f64>| {
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n < 1e-12 {
            r.clone()
        } else {
            r.iter().map(|v| v / n).collect::<Vec<_>>()
        }
    };
    let ua: Dense = a.iter().map(unit).collect();
    let ub: Dense = b.iter().map(unit).collect();
    ua.iter()
        .map(|x| ub.iter().map(|y| x.iter().zip(y).map(|(p, q)| p * q).sum()).collect())
        .collect()
}

/// Column indices of the k largest entries, ties toward the lower index.
pub fn top_set(row: &[f64], k: usize) -> BTreeSet<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
    idx.into_iter().take(k).collect()
}

pub fn top_binary_rows(m: &Dense, k: usize) -> Dense {
    m.iter()
        .map(|row| {
            let s = top_set(row, k);
            (0..row.len()).map(|j| if s.contains(&j) { 1.0 } else { 0.0 }).collect()
        })
        .collect()
}

pub fn top_value_rows(m: &Dense, k: usize) -> Dense {
    m.iter()
        .map(|row| {
            let s = top_set(row, k);
            (0..row.len()).map(|j| if s.contains(&j) { row[j] } else { 0.0 }).collect()
        })
        .collect()
}

pub fn row_norm(m: &Dense) -> Dense {
    let square = m.len() == m.first().map_or(0, |r| r.len());
    m.iter()
        .enumerate()
        .map(|(i, row)| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|v| v / s).collect()
            } else if square {
                (0..row.len()).map(|j| if i == j { 1.0 } else { 0.0 }).collect()
            } else {
                vec![1.0 / row.len() as f64; row.len()]
            }
        })
        .collect()
}

pub fn mm(a: &Dense, b: &Dense) -> Dense {
    let cols = b[0].len();
    a.iter()
        .map(|ar| {
            (0..cols)
                .map(|j| ar.iter().enumerate().map(|(k, v)| v * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Row `i` is the plain average of the rows of `m` listed in `sets[i]`.
pub fn average_rows(m: &Dense, sets: &[BTreeSet<usize>]) -> Dense {
    sets.iter()
        .map(|s| {
            let mut acc = vec![0.0; m[0].len()];
            for &j in s {
                for (a, v) in acc.iter_mut().zip(&m[j]) {
                    *a += v;
                }
            }
            acc.iter().map(|v| v / s.len() as f64).collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// HHCR, written out step by step

pub struct OracleParams {
    pub k: [usize; 6],
    pub lambda: f64,
    pub rtf: bool,
    pub lqe: bool,
}

impl From<&crossrank::HhcrParams> for OracleParams {
    fn from(p: &crossrank::HhcrParams) -> Self {
        OracleParams {
            k: [p.k1, p.k2, p.k3, p.k4, p.k5, p.k6],
            lambda: p.lambda,
            rtf: p.rtf_enabled,
            lqe: p.lqe_enabled,
        }
    }
}

pub struct OracleTrace {
    pub joint: Dense,
    pub w: Dense,
    pub candidates: Dense,
    pub h: Dense,
    pub phi_v: Dense,
    pub phi_r: Dense,
    pub fv_rank: Dense,
    pub fr_rank: Dense,
    pub fv: Dense,
    pub fr: Dense,
    pub final_scores: Dense,
}

fn split_k(i: usize, nv: usize, vis: usize, ir: usize) -> usize {
    if i < nv {
        vis
    } else {
        ir
    }
}

fn filter(block: &Dense, k_bin: usize, k_val: usize) -> Dense {
    let n = block.len();
    let bins: Vec<BTreeSet<usize>> = block.iter().map(|r| top_set(r, k_bin)).collect();
    let vals: Vec<BTreeSet<usize>> = block.iter().map(|r| top_set(r, k_val)).collect();
    let masked: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if bins[i].contains(&j) && vals[i].contains(&j) {
                        block[i][j].max(0.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    row_norm(&average_rows(&masked, &bins))
}

pub fn hhcr_trace(xv: &Dense, xr: &Dense, p: &OracleParams) -> OracleTrace {
    let [k1, k2, k3, k4, k5, k6] = p.k;
    let nv = xv.len();
    let n = nv + xr.len();
    let mut all = xv.clone();
    all.extend(xr.iter().cloned());
    let s = cosine(&all, &all);

    // neighbour graph
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in top_set(&s[i], split_k(i, nv, k1, k4)) {
            b[i][j] = 1.0;
        }
    }
    let w: Dense = (0..n)
        .map(|i| (0..n).map(|j| if p.rtf { b[i][j] + b[j][i] } else { b[i][j] }).collect())
        .collect();

    // candidates and their local expansion
    let cand_sets: Vec<BTreeSet<usize>> = (0..n).map(|i| top_set(&s[i], split_k(i, nv, k2, k5))).collect();
    let c: Dense = (0..n)
        .map(|i| (0..n).map(|j| if cand_sets[i].contains(&j) { s[i][j] } else { 0.0 }).collect())
        .collect();
    let c_pos: Dense = c.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect();
    let h0 = if p.lqe {
        average_rows(&c_pos, &cand_sets)
    } else {
        c_pos
    };
    let h = mm(&row_norm(&w), &h0);

    // intra-modal filters
    let vv: Dense = s[..nv].iter().map(|r| r[..nv].to_vec()).collect();
    let rr: Dense = s[nv..].iter().map(|r| r[nv..].to_vec()).collect();
    let phi_v = filter(&vv, k2, k3);
    let phi_r = filter(&rr, k5, k6);
    let fv_rank = mm(&phi_v, &h[..nv].to_vec());
    let fr_rank = mm(&phi_r, &h[nv..].to_vec());
    let fv = mm(&phi_v, xv);
    let fr = mm(&phi_r, xr);

    let rank_term = cosine(&fv_rank, &fr_rank);
    let feat_term = cosine(&fv, &fr);
    let final_scores = rank_term
        .iter()
        .zip(&feat_term)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - p.lambda) * x + p.lambda * y).collect())
        .collect();

    OracleTrace {
        joint: s,
        w,
        candidates: c,
        h,
        phi_v,
        phi_r,
        fv_rank,
        fr_rank,
        fv,
        fr,
        final_scores,
    }
}

// ---------------------------------------------------------------------------
// baselines

fn joint_rows(q: &Dense, g: &Dense) -> Dense {
    let mut all = q.clone();
    all.extend(g.iter().cloned());
    all
}

fn ascending(row: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap().then(a.cmp(&b)));
    idx
}

pub fn euclidean_of_unit(q: &Dense, g: &Dense) -> Dense {
    let all = joint_rows(q, g);
    let s = cosine(&all, &all);
    let n = all.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { (2.0 - 2.0 * s[i][j]).max(0.0).sqrt() })
                .collect()
        })
        .collect()
}

/// k-reciprocal re-ranking with explicit set arithmetic.
pub fn kreciprocal(q: &Dense, g: &Dense, k1: usize, k2: usize, lambda: f64) -> Dense {
    let d = euclidean_of_unit(q, g);
    let n = d.len();
    let ranked: Vec<Vec<usize>> = d.iter().map(|r| ascending(r)).collect();
    let topk = |i: usize, k: usize| -> BTreeSet<usize> { ranked[i][..=k].iter().copied().collect() };
    let recip = |i: usize, k: usize| -> BTreeSet<usize> {
        topk(i, k).into_iter().filter(|&j| topk(j, k).contains(&i)).collect()
    };
    let half = (k1 + 1) / 2;

    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        let r = recip(i, k1);
        let mut star = r.clone();
        for &c in &r {
            let rc = recip(c, half);
            let inter = rc.intersection(&r).count();
            if 3 * inter >= 2 * rc.len() {
                star.extend(rc);
            }
        }
        let total: f64 = star.iter().map(|&j| (-d[i][j]).exp()).sum();
        for &j in &star {
            v[i][j] = (-d[i][j]).exp() / total;
        }
    }
    let vq: Dense = (0..n)
        .map(|i| {
            let mut acc = vec![0.0; n];
            for &j in &ranked[i][..k2] {
                for t in 0..n {
                    acc[t] += v[j][t];
                }
            }
            acc.iter().map(|x| x / k2 as f64).collect()
        })
        .collect();
    let nq = q.len();
    (0..nq)
        .map(|i| {
            (nq..n)
                .map(|j| {
                    let inter: f64 = (0..n).map(|t| vq[i][t].min(vq[j][t])).sum();
                    let union: f64 = (0..n).map(|t| vq[i][t].max(vq[j][t])).sum();
                    (1.0 - lambda) * (1.0 - inter / union) + lambda * d[i][j]
                })
                .collect()
        })
        .collect()
}

/// ECN with explicit neighbour lists.
pub fn ecn(q: &Dense, g: &Dense, t: usize, qn: usize) -> Dense {
    let all = joint_rows(q, g);
    let s = cosine(&all, &all);
    let n = all.len();
    let d: Dense = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 - s[i][j] }).collect())
        .collect();
    let others = |i: usize| -> Vec<usize> { ascending(&d[i]).into_iter().filter(|&j| j != i).collect() };
    let list = |i: usize| -> Vec<usize> {
        let mut out = Vec::new();
        let first = others(i)[..t].to_vec();
        out.extend(&first);
        for j in first {
            out.extend(&others(j)[..qn]);
        }
        out
    };
    let nq = q.len();
    let lists: Vec<Vec<usize>> = (0..n).map(list).collect();
    (0..nq)
        .map(|a| {
            (nq..n)
                .map(|b| {
                    let mut total = 0.0;
                    let mut count = 0usize;
                    for &x in &lists[a] {
                        total += d[x][b];
                        count += 1;
                    }
                    for &y in &lists[b] {
                        total += d[y][a];
                        count += 1;
                    }
                    total / count as f64
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// metrics

pub struct OracleEval {
    pub cmc: Vec<f64>,
    pub map: f64,
    pub minp: f64,
    pub evaluated: usize,
}

/// Brute-force evaluation over a similarity matrix (higher is better).
pub fn evaluate(sim: &Dense, q_ids: &[i64], g_ids: &[i64], q_cams: &[i64], g_cams: &[i64]) -> Option<OracleEval> {
    let ng = g_ids.len();
    let mut cmc = vec![0.0; ng];
    let (mut ap_sum, mut inp_sum, mut evaluated) = (0.0, 0.0, 0usize);
    for (q, row) in sim.iter().enumerate() {
        let mut order: Vec<usize> = (0..ng).collect();
        order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&g| !(g_ids[g] == q_ids[q] && g_cams[g] == q_cams[q]))
            .collect();
        let relevant: Vec<usize> = (0..kept.len()).filter(|&r| g_ids[kept[r]] == q_ids[q]).collect();
        if relevant.is_empty() {
            continue;
        }
        evaluated += 1;
        for k in 0..ng {
            if relevant[0] <= k {
                cmc[k] += 1.0;
            }
        }
        let mut ap = 0.0;
        for (found, &r) in relevant.iter().enumerate() {
            ap += (found + 1) as f64 / (r + 1) as f64;
        }
        ap_sum += ap / relevant.len() as f64;
        inp_sum += relevant.len() as f64 / (*relevant.last().unwrap() + 1) as f64;
    }
    (evaluated > 0).then(|| OracleEval {
        cmc: cmc.iter().map(|c| c / evaluated as f64).collect(),
        map: ap_sum / evaluated as f64,
        minp: inp_sum / evaluated as f64,
        evaluated,
    })
}
