use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabeledQuery, Task};
use crate::error::{domain_err, Result};
use crate::evidence::{AblationMask, EvidenceModel, HeadGrads, HIDDEN_WIDTH};
use crate::numerics::{derive_seed, rng_from_seed, Adam, AdamConfig, Matrix};
use crate::retrieval::{top_k_excluding, DEFAULT_K};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadConfig {
    pub task: Task,
    pub k: usize,
    pub hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Smallest validation-loss decrease that counts as an improvement.
    pub min_delta: f64,
    pub seed: u64,
    pub mask: AblationMask,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            task: Task::Abnormality,
            k: DEFAULT_K,
            hidden: HIDDEN_WIDTH,
            lr: 5e-5,
            batch_size: 4,
            max_epochs: 100,
            patience: 5,
            min_delta: 0.0,
            seed: 0,
            mask: AblationMask::FULL,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return domain_err(format!("learning rate must be >= 0, got {}", self.lr));
        }
        if self.k == 0 || self.batch_size == 0 || self.max_epochs == 0 || self.hidden == 0 {
            return domain_err("k, batch size, hidden width and max epochs must be >= 1");
        }
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return domain_err("min_delta must be >= 0");
        }
        Ok(())
    }
}

/// A labelled query with its retrieved references, as `(corpus index, sim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadExample {
    pub query: Vec<f64>,
    pub hits: Vec<(usize, f64)>,
    pub label: usize,
}

/// Runs retrieval once per query. Queries that are corpus members never
/// retrieve themselves.
pub fn prepare_examples(
    queries: &[LabeledQuery],
    corpus: &Corpus,
    k: usize,
) -> Result<Vec<HeadExample>> {
    queries
        .iter()
        .map(|q| {
            let hits = top_k_excluding(&q.embedding, corpus, k, q.exclude)?;
            Ok(HeadExample {
                query: q.embedding.clone(),
                hits: hits.into_iter().map(|h| (h.index, h.sim)).collect(),
                label: q.label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial_val_loss: f64,
    /// Mean minibatch loss per epoch.
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    /// 0 when the initial parameters were never beaten.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.val_losses.len()
    }
}

struct Prepared {
    query: Vec<f64>,
    x: Matrix,
    label: usize,
}

fn prepare(model: &EvidenceModel, examples: &[HeadExample], corpus: &Corpus) -> Result<Vec<Prepared>> {
    examples
        .iter()
        .map(|ex| {
            Ok(Prepared {
                query: ex.query.clone(),
                x: model.evidence_inputs(&ex.hits, corpus)?,
                label: ex.label,
            })
        })
        .collect()
}

fn mean_loss(model: &EvidenceModel, set: &[Prepared]) -> Result<f64> {
    let mut total = 0.0;
    for p in set {
        let trace = model.forward_trace(&p.query, &p.x)?;
        total += -trace.probs[p.label].max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / set.len() as f64)
}

/// Joint training of evidence encoder and head with cross-entropy and Adam,
/// early stopping on validation loss and best-checkpoint restore.
pub fn train_head(
    train: &[HeadExample],
    val: &[HeadExample],
    corpus: &Corpus,
    config: &HeadConfig,
) -> Result<(EvidenceModel, TrainHistory)> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return domain_err("training and validation sets must be non-empty");
    }
    let arity = config.task.arity();
    if let Some(bad) = train.iter().chain(val).find(|e| e.label >= arity) {
        return domain_err(format!(
            "label {} out of range for {} ({arity} classes)",
            bad.label, config.task
        ));
    }
    if train.iter().all(|e| e.label == train[0].label) {
        tracing::warn!(label = train[0].label, "training set holds a single class");
    }
    let mut init_rng = rng_from_seed(derive_seed(config.seed, 1));
    let mut model = EvidenceModel::new(
        corpus.dim(),
        config.task,
        config.k,
        config.hidden,
        config.mask,
        &mut init_rng,
    )?;
    let train_set = prepare(&model, train, corpus)?;
    let val_set = prepare(&model, val, corpus)?;

    let mut adam = Adam::new(&model.parameter_sizes(), AdamConfig::with_lr(config.lr))?;
    let mut shuffle_rng = rng_from_seed(derive_seed(config.seed, 2));
    let initial_val_loss = mean_loss(&model, &val_set)?;
    let mut best = (initial_val_loss, 0usize, model.clone());
    let mut history = TrainHistory {
        initial_val_loss,
        train_losses: Vec::new(),
        val_losses: Vec::new(),
        best_epoch: 0,
        best_val_loss: initial_val_loss,
        stopped_early: false,
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stale = 0usize;
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut grads = HeadGrads::zeros_like(&model);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let p = &train_set[i];
                let trace = model.forward_trace(&p.query, &p.x)?;
                epoch_loss += model.backward_into(&p.query, &trace, p.label, scale, &mut grads)?;
            }
            adam.step(model.parameters_mut(), grads.tensors())?;
        }
        history.train_losses.push(epoch_loss / train_set.len() as f64);
        let val_loss = mean_loss(&model, &val_set)?;
        history.val_losses.push(val_loss);
        if val_loss < best.0 - config.min_delta {
            best = (val_loss, epoch, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                history.stopped_early = epoch < config.max_epochs;
                break;
            }
        }
    }
    history.best_epoch = best.1;
    history.best_val_loss = best.0;
    Ok((best.2, history))
}

impl EvidenceModel {
    pub fn predict_examples(&self, examples: &[HeadExample], corpus: &Corpus) -> Result<Vec<usize>> {
        examples
            .iter()
            .map(|ex| {
                let x = self.evidence_inputs(&ex.hits, corpus)?;
                let trace = self.forward_trace(&ex.query, &x)?;
                Ok(crate::numerics::argmax(&trace.probs).expect("non-empty"))
            })
            .collect()
    }

    pub fn mean_loss(&self, examples: &[HeadExample], corpus: &Corpus) -> Result<f64> {
        if examples.is_empty() {
            return domain_err("empty example set");
        }
        mean_loss(self, &prepare(self, examples, corpus)?)
    }
}
