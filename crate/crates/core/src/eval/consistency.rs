use serde::{Deserialize, Serialize};

use crate::corpus::{Abnormality, ClassLabel, Corpus, Dementia, Task};
use crate::error::{domain_err, Result};
use crate::eval::metrics::compute_metrics;
use crate::retrieval::{all_similarities, rank_all};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyPoint {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCurve {
    pub abnormality: Vec<ConsistencyPoint>,
    pub dementia: Vec<ConsistencyPoint>,
}

/// For each `k` in `1..=k_max`, every (query, retrieved case) pair among the
/// top `k` counts as one prediction: the retrieved label is predicted, the
/// query label is the truth. Macro P/R/F1 over the pooled pairs.
pub fn retrieval_consistency(
    references: &Corpus,
    queries: &Corpus,
    k_max: usize,
) -> Result<ConsistencyCurve> {
    if queries.is_empty() {
        return domain_err("consistency needs at least one query");
    }
    if references.is_empty() || k_max == 0 {
        return domain_err("consistency needs a non-empty reference corpus and k_max >= 1");
    }
    let rankings = queries
        .cases()
        .iter()
        .map(|q| Ok(rank_all(&all_similarities(&q.image, references)?)))
        .collect::<Result<Vec<_>>>()?;
    let k_max = k_max.min(references.len());
    let refs = references.cases();
    let mut curve = ConsistencyCurve {
        abnormality: Vec::with_capacity(k_max),
        dementia: Vec::with_capacity(k_max),
    };
    for k in 1..=k_max {
        let mut abn = (Vec::new(), Vec::new());
        let mut dx = (Vec::new(), Vec::new());
        for (q, ranking) in queries.cases().iter().zip(&rankings) {
            for &i in &ranking[..k] {
                abn.0.push(refs[i].abnormality.index());
                abn.1.push(q.abnormality.index());
                dx.0.push(refs[i].dementia.index());
                dx.1.push(q.dementia.index());
            }
        }
        let a = compute_metrics(&abn.0, &abn.1, Abnormality::ALL.len())?;
        let d = compute_metrics(&dx.0, &dx.1, Dementia::ALL.len())?;
        curve.abnormality.push(ConsistencyPoint {
            k,
            precision: a.precision,
            recall: a.recall,
            f1: a.f1,
        });
        curve.dementia.push(ConsistencyPoint {
            k,
            precision: d.precision,
            recall: d.recall,
            f1: d.f1,
        });
    }
    Ok(curve)
}

pub const HISTOGRAM_BINS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumStats {
    pub count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Counts over 64 equal bins spanning [-1, 1].
    pub histogram: Vec<usize>,
}

impl StratumStats {
    fn from_values(values: &[f64]) -> Self {
        let mut histogram = vec![0usize; HISTOGRAM_BINS];
        for &v in values {
            histogram[histogram_bin(v)] += 1;
        }
        if values.is_empty() {
            return StratumStats {
                count: 0,
                mean: None,
                std: None,
                min: None,
                max: None,
                histogram,
            };
        }
        let (mean, std) = crate::numerics::mean_std(values);
        StratumStats {
            count: values.len(),
            mean: Some(mean),
            std: Some(std),
            min: values.iter().copied().reduce(f64::min),
            max: values.iter().copied().reduce(f64::max),
            histogram,
        }
    }
}

/// Bin index for a similarity; 1.0 falls in the last bin.
pub fn histogram_bin(sim: f64) -> usize {
    let width = 2.0 / HISTOGRAM_BINS as f64;
    (((sim + 1.0) / width).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDistribution {
    pub k: usize,
    pub task: Task,
    pub matched: StratumStats,
    pub mismatched: StratumStats,
}

impl SimilarityDistribution {
    /// `bin_low,bin_high,count_match,count_mismatch`, one row per bin.
    pub fn to_csv(&self) -> String {
        let width = 2.0 / HISTOGRAM_BINS as f64;
        let mut out = String::from("bin_low,bin_high,count_match,count_mismatch\n");
        for b in 0..HISTOGRAM_BINS {
            let low = -1.0 + b as f64 * width;
            out.push_str(&format!(
                "{:.5},{:.5},{},{}\n",
                low,
                low + width,
                self.matched.histogram[b],
                self.mismatched.histogram[b]
            ));
        }
        out
    }
}

/// Similarities of the top-`k` references for each query, split by whether
/// the reference shares the query's `task` label.
pub fn similarity_distribution(
    references: &Corpus,
    queries: &Corpus,
    k: usize,
    task: Task,
) -> Result<SimilarityDistribution> {
    if queries.is_empty() || references.is_empty() || k == 0 {
        return domain_err("similarity distribution needs queries, references and k >= 1");
    }
    let mut matched = Vec::new();
    let mut mismatched = Vec::new();
    let refs = references.cases();
    for q in queries.cases() {
        let Some(label) = q.label_for(task) else {
            continue;
        };
        let sims = all_similarities(&q.image, references)?;
        for i in rank_all(&sims).into_iter().take(k) {
            match refs[i].label_for(task) {
                Some(l) if l == label => matched.push(sims[i]),
                Some(_) => mismatched.push(sims[i]),
                None => {}
            }
        }
    }
    Ok(SimilarityDistribution {
        k,
        task,
        matched: StratumStats::from_values(&matched),
        mismatched: StratumStats::from_values(&mismatched),
    })
}
