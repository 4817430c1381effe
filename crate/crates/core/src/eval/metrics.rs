use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::error::{domain_err, shape_err, Result};
use crate::numerics::mean_std;

/// Accuracy plus per-class precision, recall, F1 and specificity, averaged
/// over classes (or taken for one positive class in binary mode).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub specificity: f64,
}

impl MetricsBundle {
    pub const NAMES: [&'static str; 5] = ["accuracy", "precision", "recall", "f1", "specificity"];

    pub fn values(&self) -> [f64; 5] {
        [self.accuracy, self.precision, self.recall, self.f1, self.specificity]
    }

    pub fn from_values(v: [f64; 5]) -> Self {
        MetricsBundle {
            accuracy: v[0],
            precision: v[1],
            recall: v[2],
            f1: v[3],
            specificity: v[4],
        }
    }

    /// Element-wise mean and population standard deviation.
    pub fn aggregate(runs: &[MetricsBundle]) -> (MetricsBundle, MetricsBundle) {
        let mut mean = [0.0; 5];
        let mut std = [0.0; 5];
        for i in 0..5 {
            let col: Vec<f64> = runs.iter().map(|r| r.values()[i]).collect();
            (mean[i], std[i]) = mean_std(&col);
        }
        (Self::from_values(mean), Self::from_values(std))
    }

    pub fn sub(&self, other: &MetricsBundle) -> MetricsBundle {
        let (a, b) = (self.values(), other.values());
        Self::from_values(std::array::from_fn(|i| a[i] - b[i]))
    }
}

/// `m[t][p]` counts items with truth `t` predicted as `p`.
pub fn confusion_matrix(preds: &[usize], truths: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    if preds.len() != truths.len() {
        return shape_err(format!(
            "{} predictions for {} ground-truth labels",
            preds.len(),
            truths.len()
        ));
    }
    if preds.is_empty() {
        return domain_err("metrics need at least one prediction");
    }
    let mut m = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in preds.iter().zip(truths) {
        if p >= n_classes || t >= n_classes {
            return domain_err(format!("label {} out of range for {n_classes} classes", p.max(t)));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

struct ClassStats {
    precision: f64,
    recall: f64,
    f1: f64,
    specificity: f64,
}

fn class_stats(m: &[Vec<usize>], c: usize, total: usize) -> ClassStats {
    let tp = m[c][c];
    let fp: usize = (0..m.len()).filter(|&t| t != c).map(|t| m[t][c]).sum();
    let fn_: usize = (0..m.len()).filter(|&p| p != c).map(|p| m[c][p]).sum();
    let tn = total - tp - fp - fn_;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassStats {
        precision,
        recall,
        f1,
        specificity: ratio(tn, tn + fp),
    }
}

/// Macro-averaged metrics. Averages run over the classes that occur in
/// `truths` or `preds`; undefined per-class ratios count as 0.
pub fn compute_metrics(preds: &[usize], truths: &[usize], n_classes: usize) -> Result<MetricsBundle> {
    let m = confusion_matrix(preds, truths, n_classes)?;
    let total = preds.len();
    let present: Vec<usize> = (0..n_classes)
        .filter(|&c| m[c].iter().sum::<usize>() > 0 || m.iter().any(|row| row[c] > 0))
        .collect();
    let n = present.len() as f64;
    let mut acc = [0.0; 4];
    for &c in &present {
        let s = class_stats(&m, c, total);
        acc[0] += s.precision;
        acc[1] += s.recall;
        acc[2] += s.f1;
        acc[3] += s.specificity;
    }
    let correct: usize = (0..n_classes).map(|c| m[c][c]).sum();
    Ok(MetricsBundle {
        accuracy: ratio(correct, total),
        precision: acc[0] / n,
        recall: acc[1] / n,
        f1: acc[2] / n,
        specificity: acc[3] / n,
    })
}

/// Precision, recall, F1 and specificity of the `positive` class alone.
pub fn compute_binary_metrics(preds: &[usize], truths: &[usize], positive: usize) -> Result<MetricsBundle> {
    let m = confusion_matrix(preds, truths, 2)?;
    if positive > 1 {
        return domain_err("positive class must be 0 or 1");
    }
    let s = class_stats(&m, positive, preds.len());
    Ok(MetricsBundle {
        accuracy: ratio(m[0][0] + m[1][1], preds.len()),
        precision: s.precision,
        recall: s.recall,
        f1: s.f1,
        specificity: s.specificity,
    })
}

/// Binary dementia reports the Demented class; other tasks are macro-averaged.
pub fn metrics_for_task(task: Task, preds: &[usize], truths: &[usize]) -> Result<MetricsBundle> {
    match task {
        Task::BinaryDementia => compute_binary_metrics(preds, truths, 1),
        _ => compute_metrics(preds, truths, task.arity()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-4
    }

    #[test]
    fn perfect_predictions() {
        let m = compute_metrics(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(m.values(), [1.0; 5]);
    }

    #[test]
    fn hand_worked_two_class_case() {
        let m = compute_metrics(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert!(close(m.accuracy, 0.75));
        assert!(close(m.precision, 0.8333));
        assert!(close(m.recall, 0.75));
        assert!(close(m.f1, 0.7333));
        assert!(close(m.specificity, 0.75));
    }

    #[test]
    fn binary_mode_uses_positive_class() {
        // class 1: tp=2 fp=1 fn=0 tn=1
        let m = compute_binary_metrics(&[0, 1, 1, 1], &[0, 0, 1, 1], 1).unwrap();
        assert!(close(m.precision, 2.0 / 3.0));
        assert_eq!(m.recall, 1.0);
        assert!(close(m.f1, 0.8));
        assert_eq!(m.specificity, 0.5);
        assert_eq!(m.accuracy, 0.75);
    }

    #[test]
    fn never_predicted_class_scores_zero_precision() {
        let m = compute_metrics(&[0, 0], &[0, 1], 2).unwrap();
        // class 0: p=0.5 r=1; class 1: p=0 r=0
        assert!(close(m.precision, 0.25));
        assert!(close(m.recall, 0.5));
    }

    #[test]
    fn single_class_is_perfect() {
        let m = compute_metrics(&[2, 2, 2], &[2, 2, 2], 4).unwrap();
        assert_eq!(m.f1, 1.0);
    }

    #[test]
    fn errors() {
        assert!(compute_metrics(&[0], &[0, 1], 2).is_err());
        assert!(compute_metrics(&[], &[], 2).is_err());
        assert!(compute_metrics(&[3], &[0], 2).is_err());
    }

    #[test]
    fn aggregate_mean_and_std() {
        let a = MetricsBundle::from_values([1.0; 5]);
        let b = MetricsBundle::from_values([0.5; 5]);
        let (mean, std) = MetricsBundle::aggregate(&[a, b]);
        assert_eq!(mean.f1, 0.75);
        assert_eq!(std.f1, 0.25);
    }
}
