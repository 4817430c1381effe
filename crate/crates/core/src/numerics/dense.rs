use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numerics::init::kaiming_uniform_init;
use crate::numerics::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

/// Values retained by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Matrix,
    /// Pre-activation `xW + b`.
    pub pre: Matrix,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// `act(xW + b)` for a batch `x` of row vectors. Also returns the cache
/// needed by [`dense_backward`].
pub fn dense_forward(
    x: &Matrix,
    weight: &Matrix,
    bias: &[f64],
    activation: Activation,
) -> Result<(Matrix, DenseCache)> {
    if bias.len() != weight.cols() {
        return shape_err(format!(
            "bias of length {} for a {}x{} weight",
            bias.len(),
            weight.rows(),
            weight.cols()
        ));
    }
    let mut pre = x.matmul(weight)?;
    for r in 0..pre.rows() {
        for (v, b) in pre.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
    pre.ensure_finite("dense layer output")?;
    let out = apply_activation(&pre, activation);
    Ok((
        out,
        DenseCache {
            input: x.clone(),
            pre,
            activation,
        },
    ))
}

fn apply_activation(pre: &Matrix, activation: Activation) -> Matrix {
    match activation {
        Activation::None => pre.clone(),
        Activation::Relu => {
            let mut out = pre.clone();
            for v in out.as_mut_slice() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            out
        }
    }
}

/// Analytic gradients of `act(xW + b)` with respect to `x`, `W` and `b`.
/// The ReLU subgradient at exactly zero is zero.
pub fn dense_backward(
    upstream: &Matrix,
    cache: &DenseCache,
    weight: &Matrix,
) -> Result<(Matrix, DenseGrads)> {
    if upstream.shape() != cache.pre.shape() {
        return shape_err(format!(
            "upstream gradient {:?} does not match forward output {:?}",
            upstream.shape(),
            cache.pre.shape()
        ));
    }
    if cache.input.cols() != weight.rows() || cache.pre.cols() != weight.cols() {
        return shape_err("cache does not belong to this weight matrix");
    }
    let mut delta = upstream.clone();
    if cache.activation == Activation::Relu {
        for (d, &p) in delta.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
            if p <= 0.0 {
                *d = 0.0;
            }
        }
    }
    let grad_weight = cache.input.t_matmul(&delta)?;
    let mut grad_bias = vec![0.0; weight.cols()];
    for row in delta.iter_rows() {
        for (g, d) in grad_bias.iter_mut().zip(row) {
            *g += d;
        }
    }
    let grad_x = delta.matmul_t(weight)?;
    Ok((
        grad_x,
        DenseGrads {
            weight: grad_weight,
            bias: grad_bias,
        },
    ))
}

/// Fully connected layer with an optional cached forward pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
    #[serde(skip)]
    cache: Option<DenseCache>,
}

impl PartialEq for Dense {
    fn eq(&self, other: &Self) -> bool {
        self.weight == other.weight
            && self.bias == other.bias
            && self.activation == other.activation
    }
}

impl Dense {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.cols() {
            return shape_err(format!(
                "bias of length {} for {} outputs",
                bias.len(),
                weight.cols()
            ));
        }
        Ok(Dense {
            weight,
            bias,
            activation,
            cache: None,
        })
    }

    /// Kaiming-uniform weights, zero bias.
    pub fn kaiming<R: Rng + ?Sized>(
        fan_in: usize,
        fan_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = kaiming_uniform_init(fan_in, (fan_in, fan_out), rng)?;
        Dense::new(weight, vec![0.0; fan_out], activation)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    /// Forward pass without retaining a cache.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        dense_forward(x, &self.weight, &self.bias, self.activation).map(|(out, _)| out)
    }

    /// Single row vector through the layer.
    pub fn apply_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.weight.left_mul(x)?;
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
            if self.activation == Activation::Relu && *o < 0.0 {
                *o = 0.0;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite dense layer output".into()));
        }
        Ok(out)
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let (out, cache) = dense_forward(x, &self.weight, &self.bias, self.activation)?;
        self.cache = Some(cache);
        Ok(out)
    }

    pub fn backward(&self, upstream: &Matrix) -> Result<(Matrix, DenseGrads)> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        dense_backward(upstream, cache, &self.weight)
    }

    pub fn param_count(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn forward_examples() {
        let (y, _) = dense_forward(
            &m(&[vec![1.0, 2.0]]),
            &m(&[vec![1.0], vec![1.0]]),
            &[0.0],
            Activation::Relu,
        )
        .unwrap();
        assert_eq!(y.as_slice(), &[3.0]);

        let (y, _) = dense_forward(&m(&[vec![-5.0]]), &m(&[vec![1.0]]), &[0.0], Activation::Relu)
            .unwrap();
        assert_eq!(y.as_slice(), &[0.0]);

        let x = m(&[vec![0.5, -2.0, 3.0]]);
        let (y, _) = dense_forward(&x, &Matrix::identity(3), &[0.0; 3], Activation::None).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn scalar_chain_rule() {
        let x = m(&[vec![1.0]]);
        let w = m(&[vec![2.0]]);
        let (_, cache) = dense_forward(&x, &w, &[0.5], Activation::None).unwrap();
        let (gx, g) = dense_backward(&m(&[vec![3.0]]), &cache, &w).unwrap();
        assert_eq!(g.weight.as_slice(), &[3.0]);
        assert_eq!(g.bias, vec![3.0]);
        assert_eq!(gx.as_slice(), &[6.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let x = m(&[vec![1.0, -1.0], vec![0.5, 2.0]]);
        let w = m(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 1.0]]);
        let (_, cache) = dense_forward(&x, &w, &[0.1, 0.2, 0.3], Activation::Relu).unwrap();
        let (gx, g) = dense_backward(&Matrix::zeros(2, 3), &cache, &w).unwrap();
        assert!(gx.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.weight.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let x = m(&[vec![1.0]]);
        let w = m(&[vec![1.0]]);
        let (_, cache) = dense_forward(&x, &w, &[-1.0], Activation::Relu).unwrap();
        let (gx, g) = dense_backward(&m(&[vec![1.0]]), &cache, &w).unwrap();
        assert_eq!(gx.as_slice(), &[0.0]);
        assert_eq!(g.weight.as_slice(), &[0.0]);
    }

    #[test]
    fn backward_without_forward_is_a_state_error() {
        let layer = Dense::new(Matrix::identity(2), vec![0.0; 2], Activation::None).unwrap();
        assert!(matches!(
            layer.backward(&Matrix::zeros(1, 2)),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn apply_vec_matches_batched_forward() {
        let layer = Dense::new(
            m(&[vec![1.0, -2.0], vec![0.5, 1.0], vec![3.0, 0.0]]),
            vec![0.1, -0.3],
            Activation::Relu,
        )
        .unwrap();
        let x = [0.2, -1.0, 0.7];
        assert_eq!(
            layer.apply_vec(&x).unwrap(),
            layer.apply(&Matrix::row_vector(&x)).unwrap().into_vec()
        );
    }
}
