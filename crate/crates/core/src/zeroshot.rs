//! Zero-shot classification by nearest text anchor.

use serde::{Deserialize, Serialize};

use crate::corpus::{AnchorSet, BinaryDementia, ClassLabel, Corpus, Task};
use crate::error::{domain_err, shape_err, Error, Result};
use crate::numerics::{argmax, cosine_sim, softmax};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotResult {
    pub task: Task,
    pub predicted: usize,
    pub sims: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ZeroShotResult {
    pub fn predicted_key(&self) -> &'static str {
        self.task.class_keys()[self.predicted]
    }

    pub fn confidence(&self) -> f64 {
        self.probs[self.predicted]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryResult {
    pub label: BinaryDementia,
    /// Clamped to [0, 1].
    pub p_dementia: f64,
    /// Before clamping; differs only when similarities are negative.
    pub raw_p_dementia: f64,
}

pub fn classify(query: &[f64], anchors: &AnchorSet) -> Result<ZeroShotResult> {
    let emb = anchors.embeddings();
    if emb.len() < 2 {
        return domain_err("zero-shot classification needs at least 2 anchors");
    }
    if query.len() != anchors.dim() {
        return shape_err(format!(
            "query has dimension {}, anchors {}",
            query.len(),
            anchors.dim()
        ));
    }
    let sims = emb
        .iter()
        .map(|a| cosine_sim(query, a))
        .collect::<Result<Vec<_>>>()?;
    let predicted = argmax(&sims).expect("non-empty");
    let probs = softmax(&sims)?;
    Ok(ZeroShotResult {
        task: anchors.task(),
        predicted,
        sims,
        probs,
    })
}

/// Demented unless the closest abnormality anchor is Normal. The score is
/// built from raw similarities, not softmax probabilities.
pub fn binary_from_abnormality(abn: &ZeroShotResult) -> Result<BinaryResult> {
    if abn.task != Task::Abnormality {
        return domain_err(format!(
            "binary dementia is derived from the abnormality task, got {}",
            abn.task
        ));
    }
    let closest = abn.sims[abn.predicted];
    let (label, raw) = if abn.predicted == 0 {
        (BinaryDementia::NonDemented, 1.0 - closest)
    } else {
        (BinaryDementia::Demented, closest)
    };
    if raw.clamp(0.0, 1.0) != raw {
        tracing::debug!(raw, "p_dementia clamped");
    }
    Ok(BinaryResult {
        label,
        p_dementia: raw.clamp(0.0, 1.0),
        raw_p_dementia: raw,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotPredictions {
    pub abnormality: ZeroShotResult,
    pub binary: BinaryResult,
    pub dementia_type: ZeroShotResult,
    pub severity: ZeroShotResult,
}

impl ZeroShotPredictions {
    /// Per-task class index, with the binary label as task `BinaryDementia`.
    pub fn predicted(&self, task: Task) -> usize {
        match task {
            Task::Abnormality => self.abnormality.predicted,
            Task::BinaryDementia => self.binary.label.index(),
            Task::DementiaType => self.dementia_type.predicted,
            Task::Severity => self.severity.predicted,
        }
    }
}

pub fn predict_all(query: &[f64], anchors: &[AnchorSet]) -> Result<ZeroShotPredictions> {
    let find = |task: Task| {
        anchors
            .iter()
            .find(|a| a.task() == task)
            .ok_or_else(|| Error::Config(format!("missing anchor set for task {task}")))
    };
    let abnormality = classify(query, find(Task::Abnormality)?)?;
    let binary = binary_from_abnormality(&abnormality)?;
    Ok(ZeroShotPredictions {
        dementia_type: classify(query, find(Task::DementiaType)?)?,
        severity: classify(query, find(Task::Severity)?)?,
        abnormality,
        binary,
    })
}

/// Zero-shot accuracy of `task` over the image embeddings of `corpus`, using
/// the corpus's own anchors. Cases without a label for `task` are skipped.
pub fn zero_shot_accuracy(corpus: &Corpus, task: Task) -> Result<f64> {
    let anchors = corpus
        .anchor_set(task)
        .ok_or_else(|| Error::Config(format!("missing anchor set for task {task}")))?;
    let mut hits = 0usize;
    let mut total = 0usize;
    for case in corpus.cases() {
        let Some(label) = case.label_for(task) else {
            continue;
        };
        total += 1;
        if classify(&case.image, anchors)?.predicted == label {
            hits += 1;
        }
    }
    if total == 0 {
        return domain_err(format!("no cases carry a {task} label"));
    }
    Ok(hits as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    fn abn_result(sims: [f64; 4]) -> ZeroShotResult {
        ZeroShotResult {
            task: Task::Abnormality,
            predicted: argmax(&sims).unwrap(),
            sims: sims.to_vec(),
            probs: softmax(&sims).unwrap(),
        }
    }

    #[test]
    fn orthonormal_anchors() {
        let anchors = AnchorSet::new(Task::Abnormality, (0..4).map(|i| one_hot(4, i)).collect())
            .unwrap();
        let r = classify(&one_hot(4, 2), &anchors).unwrap();
        assert_eq!(r.predicted, 2);
        let want = [0.17488, 0.17488, 0.47536, 0.17488];
        for (p, w) in r.probs.iter().zip(want) {
            assert!((p - w).abs() < 1e-5);
        }
    }

    #[test]
    fn equidistant_query_takes_first_class() {
        let anchors = AnchorSet::new(Task::Abnormality, (0..4).map(|i| one_hot(4, i)).collect())
            .unwrap();
        let r = classify(&[1.0, 1.0, 1.0, 1.0], &anchors).unwrap();
        assert_eq!(r.predicted, 0);
        for p in &r.probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let anchors = AnchorSet::new(Task::DementiaType, (0..3).map(|i| one_hot(3, i)).collect())
            .unwrap();
        assert!(matches!(classify(&[1.0, 0.0], &anchors), Err(Error::Shape(_))));
    }

    #[test]
    fn binary_rule_cases() {
        let r = binary_from_abnormality(&abn_result([0.9, 0.3, 0.2, 0.1])).unwrap();
        assert_eq!(r.label, BinaryDementia::NonDemented);
        assert!((r.p_dementia - 0.1).abs() < 1e-12);
        let r = binary_from_abnormality(&abn_result([0.2, 0.8, 0.1, 0.0])).unwrap();
        assert_eq!(r.label, BinaryDementia::Demented);
        assert!((r.p_dementia - 0.8).abs() < 1e-12);
        let r = binary_from_abnormality(&abn_result([0.5; 4])).unwrap();
        assert_eq!(r.label, BinaryDementia::NonDemented);
    }

    #[test]
    fn negative_similarity_is_clamped() {
        let r = binary_from_abnormality(&abn_result([-0.9, -0.95, -0.99, -1.0])).unwrap();
        assert_eq!(r.label, BinaryDementia::NonDemented);
        assert_eq!(r.p_dementia, 1.0);
        assert!((r.raw_p_dementia - 1.9).abs() < 1e-12);
        let r = binary_from_abnormality(&abn_result([-0.9, -0.2, -0.5, -1.0])).unwrap();
        assert_eq!(r.p_dementia, 0.0);
        assert!((r.raw_p_dementia + 0.2).abs() < 1e-12);
    }

    #[test]
    fn binary_requires_abnormality_source() {
        let mut r = abn_result([0.1, 0.2, 0.3, 0.4]);
        r.task = Task::Severity;
        assert!(binary_from_abnormality(&r).is_err());
    }

    #[test]
    fn missing_anchor_set_is_config_error() {
        let anchors = vec![AnchorSet::new(Task::Abnormality, (0..4).map(|i| one_hot(4, i)).collect())
            .unwrap()];
        assert!(matches!(
            predict_all(&one_hot(4, 0), &anchors),
            Err(Error::Config(_))
        ));
    }
}
