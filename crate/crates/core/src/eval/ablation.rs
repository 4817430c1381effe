use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Result};
use crate::eval::fewshot::{train_and_score, Splits};
use crate::eval::metrics::MetricsBundle;
use crate::evidence::{AblationMask, HeadConfig};
use crate::numerics::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub name: String,
    pub mask: AblationMask,
    pub mean: MetricsBundle,
    pub std: MetricsBundle,
    /// `mean` minus the full model's mean.
    pub delta: MetricsBundle,
    /// Per-run F1 difference to the full model trained with the same seed.
    pub paired_f1_delta: Vec<f64>,
    pub runs: Vec<MetricsBundle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub full: VariantResult,
    pub variants: Vec<VariantResult>,
}

impl AblationReport {
    pub fn variant(&self, name: &str) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.name == name)
    }
}

/// Retrains the full model and every variant from scratch for each run,
/// using the same seed schedule across variants.
pub fn run_ablation(
    splits: Splits<'_>,
    head: &HeadConfig,
    variants: &[AblationMask],
    runs: usize,
    seed: u64,
) -> Result<AblationReport> {
    if runs == 0 {
        return domain_err("ablation needs runs >= 1");
    }
    let evaluate = |mask: AblationMask| -> Result<Vec<MetricsBundle>> {
        (0..runs)
            .map(|r| {
                let cfg = HeadConfig {
                    mask,
                    seed: derive_seed(seed, r as u64),
                    ..head.clone()
                };
                train_and_score(splits, &cfg)
            })
            .collect()
    };
    let full_runs = evaluate(AblationMask::FULL)?;
    let (full_mean, full_std) = MetricsBundle::aggregate(&full_runs);
    let summarize = |mask: AblationMask, runs: Vec<MetricsBundle>| {
        let (mean, std) = MetricsBundle::aggregate(&runs);
        VariantResult {
            name: mask.to_string(),
            mask,
            mean,
            std,
            delta: mean.sub(&full_mean),
            paired_f1_delta: runs.iter().zip(&full_runs).map(|(v, f)| v.f1 - f.f1).collect(),
            runs,
        }
    };
    let mut out = Vec::with_capacity(variants.len());
    for &mask in variants {
        let mask = mask.effective();
        let runs = if mask.is_full() {
            full_runs.clone()
        } else {
            evaluate(mask)?
        };
        out.push(summarize(mask, runs));
    }
    let full = VariantResult {
        std: full_std,
        ..summarize(AblationMask::FULL, full_runs.clone())
    };
    Ok(AblationReport {
        full,
        variants: out,
    })
}
