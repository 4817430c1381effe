use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Task};
use crate::error::{domain_err, Error, Result};
use crate::eval::metrics::{metrics_for_task, MetricsBundle};
use crate::evidence::{train_head, HeadConfig, HeadExample};
use crate::numerics::{derive_seed, rng_from_seed};

pub const DEFAULT_SHOTS: [usize; 5] = [5, 10, 20, 50, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotConfig {
    pub shots: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
}

impl Default for FewShotConfig {
    fn default() -> Self {
        FewShotConfig {
            shots: DEFAULT_SHOTS.to_vec(),
            runs: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotPoint {
    pub shots: usize,
    pub mean: MetricsBundle,
    pub std: MetricsBundle,
    pub runs: Vec<MetricsBundle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotReport {
    pub task: Task,
    pub points: Vec<FewShotPoint>,
}

/// Prepared examples for one experiment, all retrieved against `corpus`.
#[derive(Debug, Clone, Copy)]
pub struct Splits<'a> {
    pub train: &'a [HeadExample],
    pub val: &'a [HeadExample],
    pub test: &'a [HeadExample],
    pub corpus: &'a Corpus,
}

impl<'a> Splits<'a> {
    pub fn with_train(self, train: &'a [HeadExample]) -> Self {
        Splits { train, ..self }
    }
}

/// Trains on `train`, stops early on `val`, scores on `test`.
pub fn train_and_score(splits: Splits<'_>, config: &HeadConfig) -> Result<MetricsBundle> {
    let (model, _) = train_head(splits.train, splits.val, splits.corpus, config)?;
    let preds = model.predict_examples(splits.test, splits.corpus)?;
    let truths: Vec<usize> = splits.test.iter().map(|e| e.label).collect();
    metrics_for_task(config.task, &preds, &truths)
}

/// Per run and shot count, samples `min(k, available)` training examples
/// per class without replacement from `splits.train`, trains a fresh head
/// and evaluates it on the fixed test split.
pub fn few_shot(
    splits: Splits<'_>,
    head: &HeadConfig,
    config: &FewShotConfig,
) -> Result<FewShotReport> {
    let pool = splits.train;
    if config.runs == 0 || config.shots.is_empty() || config.shots.contains(&0) {
        return domain_err("few-shot needs runs >= 1 and shot counts >= 1");
    }
    if splits.test.is_empty() {
        return domain_err("few-shot needs a non-empty test split");
    }
    let arity = head.task.arity();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); arity];
    for (i, ex) in pool.iter().enumerate() {
        by_class
            .get_mut(ex.label)
            .ok_or_else(|| Error::Domain(format!("label {} out of range", ex.label)))?
            .push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        let name = head.task.class_display_name(c).unwrap_or("?");
        return domain_err(format!("class `{name}` has no training candidates"));
    }
    let mut points = Vec::with_capacity(config.shots.len());
    for (si, &shots) in config.shots.iter().enumerate() {
        let mut runs = Vec::with_capacity(config.runs);
        for run in 0..config.runs {
            let run_seed = derive_seed(config.seed, (si as u64) << 32 | run as u64);
            let mut rng = rng_from_seed(run_seed);
            let mut train = Vec::new();
            for members in &by_class {
                let take = shots.min(members.len());
                train.extend(members.choose_multiple(&mut rng, take).map(|&i| pool[i].clone()));
            }
            let cfg = HeadConfig {
                seed: run_seed,
                ..head.clone()
            };
            runs.push(train_and_score(splits.with_train(&train), &cfg)?);
        }
        let (mean, std) = MetricsBundle::aggregate(&runs);
        points.push(FewShotPoint {
            shots,
            mean,
            std,
            runs,
        });
    }
    Ok(FewShotReport {
        task: head.task,
        points,
    })
}
