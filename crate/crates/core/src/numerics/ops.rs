use crate::error::{domain_err, shape_err, Error, Result};
use crate::numerics::matrix::{dot, norm};

/// Cosine similarity `u·v / (‖u‖‖v‖)`, clamped to `[-1, 1]`.
pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return shape_err(format!("cosine of lengths {} and {}", u.len(), v.len()));
    }
    if u.is_empty() {
        return shape_err("cosine of empty vectors");
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return domain_err("cosine similarity of a zero vector");
    }
    let c = dot(u, v) / (nu * nv);
    if !c.is_finite() {
        return Err(Error::Numeric("non-finite cosine similarity".into()));
    }
    Ok(c.clamp(-1.0, 1.0))
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return shape_err("softmax of an empty vector");
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("softmax input is not finite".into()));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Gradient of `softmax` given the forward output `probs` and the upstream
/// gradient with respect to the probabilities.
pub fn softmax_backward(probs: &[f64], upstream: &[f64]) -> Vec<f64> {
    let inner = dot(probs, upstream);
    probs
        .iter()
        .zip(upstream)
        .map(|(p, g)| p * (g - inner))
        .collect()
}

/// `log(Σ exp(s))`, max-subtracted.
pub fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// Softmax cross-entropy. Returns the loss and its gradient with respect to
/// the logits (`softmax(logits) − onehot(true_class)`).
pub fn cross_entropy(logits: &[f64], true_class: usize) -> Result<(f64, Vec<f64>)> {
    if true_class >= logits.len() {
        return domain_err(format!(
            "class index {true_class} out of range for {} logits",
            logits.len()
        ));
    }
    let mut grad = softmax(logits)?;
    let loss = log_sum_exp(logits) - logits[true_class];
    grad[true_class] -= 1.0;
    Ok((loss.max(0.0), grad))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// L2-normalizes `x`, returning the unit vector and the original norm.
pub fn l2_normalize(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = norm(x);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Numeric(
            "cannot L2-normalize a zero or non-finite vector".into(),
        ));
    }
    Ok((x.iter().map(|v| v / n).collect(), n))
}

/// Backward pass of `u = x/‖x‖`: `dx = (du − u (u·du)) / ‖x‖`.
pub fn l2_normalize_backward(unit: &[f64], input_norm: f64, upstream: &[f64]) -> Vec<f64> {
    let inner = dot(unit, upstream);
    unit.iter()
        .zip(upstream)
        .map(|(u, g)| (g - u * inner) / input_norm)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_sim(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_sim(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_sim(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(cosine_sim(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(cosine_sim(&[1.0], &[1.0, 0.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax(&[1.0, 0.0]).unwrap();
        assert!((p[0] - 0.731_058_6).abs() < 1e-7);
        assert!((p[1] - 0.268_941_4).abs() < 1e-7);
        assert!(matches!(softmax(&[]), Err(Error::Shape(_))));
    }

    #[test]
    fn softmax_shift_invariance() {
        let s = [0.3, -1.2, 2.5, 0.0];
        let shifted: Vec<f64> = s.iter().map(|v| v + 17.0).collect();
        let a = softmax(&s).unwrap();
        let b = softmax(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_examples() {
        let (loss, _) = cross_entropy(&[0.0; 4], 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        let (loss, grad) = cross_entropy(&[1000.0, 0.0], 0).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|g| g.abs() < 1e-12));
        let (loss, _) = cross_entropy(&[0.0, 0.0], 1).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-7);
        assert!(matches!(cross_entropy(&[0.0, 0.0], 2), Err(Error::Domain(_))));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.5, 0.5, 0.1]), Some(0));
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn normalize_backward_matches_finite_differences() {
        let x = [0.3, -1.1, 2.0];
        let up = [0.7, 0.2, -0.4];
        let (u, n) = l2_normalize(&x).unwrap();
        let analytic = l2_normalize_backward(&u, n, &up);
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fp = dot(&l2_normalize(&xp).unwrap().0, &up);
            let fm = dot(&l2_normalize(&xm).unwrap().0, &up);
            assert!(((fp - fm) / (2.0 * h) - analytic[i]).abs() < 1e-8);
        }
    }
}
