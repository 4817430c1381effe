//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's own implementations of the quantity being checked.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use refdx::corpus::{generate_synthetic, Corpus, SyntheticSpec};
use refdx::numerics::rng_from_seed;

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let mut uv = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for (a, b) in u.iter().zip(v) {
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    uv / (uu.sqrt() * vv.sqrt())
}

/// Central-difference gradient of `loss` over every entry of every tensor
/// exposed by `params`, compared with `analytic`. Returns the worst relative
/// error `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn finite_difference_error<M: Clone>(
    model: &M,
    analytic: &[Vec<f64>],
    params: impl Fn(&mut M) -> Vec<&mut [f64]>,
    loss: impl Fn(&M) -> f64,
    h: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    let sizes: Vec<usize> = params(&mut probe).iter().map(|t| t.len()).collect();
    assert_eq!(sizes.len(), analytic.len(), "tensor count");
    for (t, &size) in sizes.iter().enumerate() {
        assert_eq!(size, analytic[t].len(), "tensor {t} size");
        for i in 0..size {
            let orig = params(&mut probe)[t][i];
            params(&mut probe)[t][i] = orig + h;
            let up = loss(&probe);
            params(&mut probe)[t][i] = orig - h;
            let down = loss(&probe);
            params(&mut probe)[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Per-class counts read straight off the confusion matrix.
fn confusion(preds: &[usize], truths: &[usize], n: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; n]; n];
    for (&p, &t) in preds.iter().zip(truths) {
        m[t][p] += 1;
    }
    m
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// (tp, fp, fn, tn) for class `c`.
fn counts(m: &[Vec<usize>], c: usize) -> (usize, usize, usize, usize) {
    let n = m.len();
    let mut tp = 0;
    let mut fp = 0;
    let mut fneg = 0;
    let mut tn = 0;
    for t in 0..n {
        for p in 0..n {
            let v = m[t][p];
            match (t == c, p == c) {
                (true, true) => tp += v,
                (false, true) => fp += v,
                (true, false) => fneg += v,
                (false, false) => tn += v,
            }
        }
    }
    (tp, fp, fneg, tn)
}

fn class_scores(m: &[Vec<usize>], c: usize) -> [f64; 4] {
    let (tp, fp, fneg, tn) = counts(m, c);
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fneg);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    [p, r, f1, ratio(tn, tn + fp)]
}

/// Accuracy and macro precision / recall / F1 / specificity, averaged over
/// the classes that occur in either `preds` or `truths`.
pub fn macro_metrics_oracle(preds: &[usize], truths: &[usize], n: usize) -> [f64; 5] {
    let m = confusion(preds, truths, n);
    let correct: usize = (0..n).map(|c| m[c][c]).sum();
    let present: Vec<usize> = (0..n)
        .filter(|&c| preds.contains(&c) || truths.contains(&c))
        .collect();
    let mut sums = [0.0; 4];
    for &c in &present {
        for (s, v) in sums.iter_mut().zip(class_scores(&m, c)) {
            *s += v;
        }
    }
    let k = present.len() as f64;
    [
        ratio(correct, preds.len()),
        sums[0] / k,
        sums[1] / k,
        sums[2] / k,
        sums[3] / k,
    ]
}

/// Accuracy plus the positive class's precision / recall / F1 / specificity.
pub fn binary_metrics_oracle(preds: &[usize], truths: &[usize], positive: usize) -> [f64; 5] {
    let m = confusion(preds, truths, 2);
    let correct = m[0][0] + m[1][1];
    let [p, r, f1, spec] = class_scores(&m, positive);
    [ratio(correct, preds.len()), p, r, f1, spec]
}

/// Indices of the `k` most similar rows by full sort on (similarity desc, index asc).
pub fn top_k_oracle(query: &[f64], rows: &[Vec<f64>], k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = rows.iter().map(|r| cosine(query, r)).enumerate().collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

pub fn nearest_centroid(x: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, m) in centroids.iter().enumerate() {
        let d: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Reference corpus plus disjoint validation and test corpora drawn from the
/// same class means.
pub struct SyntheticSplits {
    pub refs: Corpus,
    pub val: Corpus,
    pub test: Corpus,
}

pub fn synthetic_splits(
    dim: usize,
    separation: f64,
    per_class: [usize; 3],
    seed: u64,
) -> SyntheticSplits {
    let make = |n: usize, s: u64, prefix: &str| {
        generate_synthetic(&SyntheticSpec::new(4, n, dim, separation, s).with_prefix(prefix)).unwrap()
    };
    SyntheticSplits {
        refs: make(per_class[0], seed, "ref"),
        val: make(per_class[1], seed + 1_000, "val"),
        test: make(per_class[2], seed + 2_000, "test"),
    }
}

pub fn rng(seed: u64) -> impl Rng {
    rng_from_seed(seed)
}
