//! Evidence encoding of retrieved references and the attention head that
//! classifies a query from them.

mod checkpoint;
mod mask;
mod train;

pub use checkpoint::{load_head, save_head, HeadCheckpoint};
pub use mask::AblationMask;
pub use train::{prepare_examples, train_head, HeadConfig, HeadExample, TrainHistory};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ReferenceCase, Task};
use crate::error::{domain_err, shape_err, Error, Result};
use crate::numerics::{
    argmax, cross_entropy, dense_backward, dense_forward, dot, kaiming_uniform_init, softmax,
    softmax_backward, Activation, Dense, DenseCache, DenseGrads, Matrix,
};
use crate::retrieval::RetrievalHit;

pub const HIDDEN_WIDTH: usize = 256;

/// Maps one `[z; sim·z]` input (width 8D) to a projected evidence row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceEncoderParams {
    /// 8D × D.
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// D × D, no bias.
    pub w_proj: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceHeadParams {
    /// D × D query projection, no bias.
    pub w_q: Matrix,
    pub hidden: Dense,
    pub output: Dense,
}

/// `[z; sim·z]` for one reference, with masked modalities zeroed.
pub fn evidence_input(case: &ReferenceCase, sim: f64, mask: AblationMask) -> Vec<f64> {
    let mask = mask.effective();
    let keep = mask.kept_modalities();
    let s = if mask.disable_similarity_weighting { 1.0 } else { sim };
    let d = case.dim();
    let mut out = vec![0.0; 8 * d];
    for (m, (emb, kept)) in case.modalities().into_iter().zip(keep).enumerate() {
        if !kept {
            continue;
        }
        out[m * d..(m + 1) * d].copy_from_slice(emb);
        for (o, v) in out[(4 + m) * d..(5 + m) * d].iter_mut().zip(emb) {
            *o = s * v;
        }
    }
    out
}

fn encode_inputs(x: &Matrix, params: &EvidenceEncoderParams) -> Result<(Matrix, DenseCache, Matrix)> {
    let (h1, cache) = dense_forward(x, &params.w1, &params.b1, Activation::Relu)?;
    let e = h1.matmul(&params.w_proj)?;
    Ok((h1, cache, e))
}

pub fn build_evidence_vector(
    case: &ReferenceCase,
    sim: f64,
    params: &EvidenceEncoderParams,
    mask: AblationMask,
) -> Result<Vec<f64>> {
    if !sim.is_finite() {
        return Err(Error::Numeric(format!("similarity {sim} is not finite")));
    }
    if params.w1.rows() != 8 * case.dim() {
        return shape_err(format!(
            "evidence encoder expects dimension {}, case `{}` has {}",
            params.w1.rows() / 8,
            case.id,
            case.dim()
        ));
    }
    let x = Matrix::row_vector(&evidence_input(case, sim, mask));
    let (_, _, e) = encode_inputs(&x, params)?;
    Ok(e.into_vec())
}

fn input_matrix(
    rows: impl Iterator<Item = (usize, f64)>,
    corpus: &Corpus,
    mask: AblationMask,
) -> Result<Matrix> {
    let rows = rows
        .map(|(i, sim)| {
            let case = corpus
                .case(i)
                .ok_or_else(|| Error::Lookup(format!("case index {i} out of range")))?;
            Ok(evidence_input(case, sim, mask))
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return domain_err("evidence needs at least one retrieved case");
    }
    Matrix::from_rows(&rows)
}

/// One projected evidence row per hit, in hit order.
pub fn build_evidence_matrix(
    hits: &[RetrievalHit],
    corpus: &Corpus,
    params: &EvidenceEncoderParams,
    mask: AblationMask,
) -> Result<Matrix> {
    let indexed = hits
        .iter()
        .map(|h| {
            corpus
                .index_of(&h.case_id)
                .map(|i| (i, h.sim))
                .ok_or_else(|| Error::Lookup(format!("unknown case id `{}`", h.case_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    if indexed.iter().any(|(_, s)| !s.is_finite()) {
        return Err(Error::Numeric("non-finite retrieval similarity".into()));
    }
    let x = input_matrix(indexed.into_iter(), corpus, mask)?;
    if x.cols() != params.w1.rows() {
        return shape_err("corpus dimension does not match the evidence encoder");
    }
    Ok(encode_inputs(&x, params)?.2)
}

/// Unscaled dot-product attention of the projected query over evidence rows.
pub fn attend(query: &[f64], e: &Matrix, head: &InferenceHeadParams) -> Result<(Vec<f64>, Vec<f64>)> {
    if e.rows() == 0 {
        return domain_err("attention over an empty evidence matrix");
    }
    let q = head.w_q.left_mul(query)?;
    if e.cols() != q.len() {
        return shape_err(format!("evidence rows have width {}, query {}", e.cols(), q.len()));
    }
    let scores: Vec<f64> = e.iter_rows().map(|r| dot(r, &q)).collect();
    let alpha = softmax(&scores)?;
    let mut e_bar = vec![0.0; e.cols()];
    for (a, row) in alpha.iter().zip(e.iter_rows()) {
        crate::numerics::axpy(&mut e_bar, *a, row);
    }
    Ok((alpha, e_bar))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub predicted: usize,
    /// Attention weights in evidence-row order; absent when the variant
    /// does not attend.
    pub alpha: Option<Vec<f64>>,
}

/// Complete trainable model for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceModel {
    pub task: Task,
    pub k: usize,
    pub mask: AblationMask,
    pub encoder: EvidenceEncoderParams,
    pub head: InferenceHeadParams,
}

pub(crate) struct EvidenceTrace {
    l1: DenseCache,
    h1: Matrix,
    e: Matrix,
    q: Vec<f64>,
    alpha: Option<Vec<f64>>,
}

pub(crate) struct Trace {
    ev: Option<EvidenceTrace>,
    hidden: DenseCache,
    output: DenseCache,
    pub(crate) probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w_proj: Matrix,
    pub w_q: Matrix,
    pub hidden: DenseGrads,
    pub output: DenseGrads,
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, v) in acc.iter_mut().zip(g) {
        *a += v;
    }
}

impl HeadGrads {
    pub fn zeros_like(model: &EvidenceModel) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        let zd = |d: &Dense| DenseGrads {
            weight: z(&d.weight),
            bias: vec![0.0; d.bias.len()],
        };
        HeadGrads {
            w1: z(&model.encoder.w1),
            b1: vec![0.0; model.encoder.b1.len()],
            w_proj: z(&model.encoder.w_proj),
            w_q: z(&model.head.w_q),
            hidden: zd(&model.head.hidden),
            output: zd(&model.head.output),
        }
    }

    /// Same order as [`EvidenceModel::parameters_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w1.as_slice(),
            &self.b1,
            self.w_proj.as_slice(),
            self.w_q.as_slice(),
            self.hidden.weight.as_slice(),
            &self.hidden.bias,
            self.output.weight.as_slice(),
            &self.output.bias,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w_proj.as_mut_slice(),
            self.w_q.as_mut_slice(),
            self.hidden.weight.as_mut_slice(),
            &mut self.hidden.bias,
            self.output.weight.as_mut_slice(),
            &mut self.output.bias,
        ]
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

impl EvidenceModel {
    /// Kaiming-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(
        dim: usize,
        task: Task,
        k: usize,
        hidden: usize,
        mask: AblationMask,
        rng: &mut R,
    ) -> Result<Self> {
        if dim == 0 || hidden == 0 {
            return domain_err("dimensions must be >= 1");
        }
        if k == 0 {
            return domain_err("k must be >= 1");
        }
        let mask = mask.effective();
        let encoder = EvidenceEncoderParams {
            w1: kaiming_uniform_init(8 * dim, (8 * dim, dim), rng)?,
            b1: vec![0.0; dim],
            w_proj: kaiming_uniform_init(dim, (dim, dim), rng)?,
        };
        let w_q = kaiming_uniform_init(dim, (dim, dim), rng)?;
        let mlp_in = Self::mlp_width(dim, k, mask);
        let head = InferenceHeadParams {
            w_q,
            hidden: Dense::kaiming(mlp_in, hidden, Activation::Relu, rng)?,
            output: Dense::kaiming(hidden, task.arity(), Activation::None, rng)?,
        };
        Ok(EvidenceModel {
            task,
            k,
            mask,
            encoder,
            head,
        })
    }

    fn mlp_width(dim: usize, k: usize, mask: AblationMask) -> usize {
        if mask.concatenates_evidence() {
            dim + k * dim
        } else {
            2 * dim
        }
    }

    /// Checks every shape against `dim`, `k`, the task arity and the mask.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let hidden = self.head.hidden.out_dim();
        let ok = self.encoder.w1.shape() == (8 * d, d)
            && self.encoder.b1.len() == d
            && self.encoder.w_proj.shape() == (d, d)
            && self.head.w_q.shape() == (d, d)
            && self.head.hidden.in_dim() == Self::mlp_width(d, self.k, self.mask)
            && self.head.output.in_dim() == hidden
            && self.head.output.out_dim() == self.task.arity()
            && self.head.hidden.activation == Activation::Relu
            && self.head.output.activation == Activation::None;
        if !ok || self.k == 0 {
            return Err(Error::Config(
                "evidence model parameter shapes are inconsistent".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.encoder.w_proj.rows()
    }

    pub fn hidden_width(&self) -> usize {
        self.head.hidden.out_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.head.output.out_dim()
    }

    /// Parameter tensors in a fixed order: W1, b1, W_proj, W_q, hidden W,
    /// hidden b, output W, output b.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.encoder.w1.as_mut_slice(),
            &mut self.encoder.b1,
            self.encoder.w_proj.as_mut_slice(),
            self.head.w_q.as_mut_slice(),
            self.head.hidden.weight.as_mut_slice(),
            &mut self.head.hidden.bias,
            self.head.output.weight.as_mut_slice(),
            &mut self.head.output.bias,
        ]
    }

    pub fn parameter_sizes(&self) -> Vec<usize> {
        HeadGrads::zeros_like(self)
            .tensors()
            .iter()
            .map(|t| t.len())
            .collect()
    }

    pub fn build_evidence(&self, hits: &[RetrievalHit], corpus: &Corpus) -> Result<Matrix> {
        build_evidence_matrix(hits, corpus, &self.encoder, self.mask)
    }

    /// Classifies `query` given its projected evidence rows.
    pub fn predict(&self, query: &[f64], e: &Matrix) -> Result<Prediction> {
        let d = self.dim();
        if query.len() != d {
            return shape_err(format!("query has dimension {}, model {d}", query.len()));
        }
        let mut alpha = None;
        let mut input = query.to_vec();
        if self.mask.drop_all_evidence {
            input.extend(std::iter::repeat_n(0.0, d));
        } else if self.mask.disable_attention {
            if e.rows() > self.k || e.cols() != d {
                return Err(Error::Config(format!(
                    "concatenating head takes up to {} rows of width {d}, got {}x{}",
                    self.k,
                    e.rows(),
                    e.cols()
                )));
            }
            input.extend_from_slice(e.as_slice());
            input.resize(d + self.k * d, 0.0);
        } else {
            let (a, e_bar) = attend(query, e, &self.head)?;
            input.extend(e_bar);
            alpha = Some(a);
        }
        let logits = self.mlp(&input)?;
        let probs = softmax(&logits)?;
        Ok(Prediction {
            predicted: argmax(&logits).expect("non-empty"),
            logits,
            probs,
            alpha,
        })
    }

    fn mlp(&self, input: &[f64]) -> Result<Vec<f64>> {
        let h = self.head.hidden.apply_vec(input)?;
        self.head.output.apply_vec(&h)
    }

    /// Retrieval output to prediction in one call.
    pub fn infer(&self, query: &[f64], hits: &[RetrievalHit], corpus: &Corpus) -> Result<Prediction> {
        if self.mask.drop_all_evidence {
            return self.predict(query, &Matrix::zeros(0, self.dim()));
        }
        let e = self.build_evidence(hits, corpus)?;
        self.predict(query, &e)
    }

    /// Forward pass from raw evidence inputs (rows of width 8D), keeping
    /// what the backward pass needs.
    pub(crate) fn forward_trace(&self, query: &[f64], x: &Matrix) -> Result<Trace> {
        let d = self.dim();
        let (ev, tail) = if self.mask.drop_all_evidence {
            (None, vec![0.0; d])
        } else {
            let (h1, l1, e) = encode_inputs(x, &self.encoder)?;
            if self.mask.disable_attention {
                let mut tail = e.as_slice().to_vec();
                tail.resize(self.k * d, 0.0);
                (
                    Some(EvidenceTrace {
                        l1,
                        h1,
                        e,
                        q: Vec::new(),
                        alpha: None,
                    }),
                    tail,
                )
            } else {
                let q = self.head.w_q.left_mul(query)?;
                let scores: Vec<f64> = e.iter_rows().map(|r| dot(r, &q)).collect();
                let alpha = softmax(&scores)?;
                let mut e_bar = vec![0.0; d];
                for (a, row) in alpha.iter().zip(e.iter_rows()) {
                    crate::numerics::axpy(&mut e_bar, *a, row);
                }
                (
                    Some(EvidenceTrace {
                        l1,
                        h1,
                        e,
                        q,
                        alpha: Some(alpha),
                    }),
                    e_bar,
                )
            }
        };
        let mut input = query.to_vec();
        input.extend(tail);
        let (h, hidden) = dense_forward(
            &Matrix::row_vector(&input),
            &self.head.hidden.weight,
            &self.head.hidden.bias,
            Activation::Relu,
        )?;
        let (logits, output) = dense_forward(
            &h,
            &self.head.output.weight,
            &self.head.output.bias,
            Activation::None,
        )?;
        Ok(Trace {
            ev,
            hidden,
            output,
            probs: softmax(logits.row(0))?,
        })
    }

    /// Adds the gradient of `scale · CE(trace, label)` into `grads` and
    /// returns the unscaled loss.
    pub(crate) fn backward_into(
        &self,
        query: &[f64],
        trace: &Trace,
        label: usize,
        scale: f64,
        grads: &mut HeadGrads,
    ) -> Result<f64> {
        let logits = trace.output.pre.row(0);
        let (loss, mut d_logits) = cross_entropy(logits, label)?;
        d_logits.iter_mut().for_each(|v| *v *= scale);
        let (d_h, g_out) = dense_backward(
            &Matrix::row_vector(&d_logits),
            &trace.output,
            &self.head.output.weight,
        )?;
        add_into(grads.output.weight.as_mut_slice(), g_out.weight.as_slice());
        add_into(&mut grads.output.bias, &g_out.bias);
        let (d_in, g_hidden) = dense_backward(&d_h, &trace.hidden, &self.head.hidden.weight)?;
        add_into(grads.hidden.weight.as_mut_slice(), g_hidden.weight.as_slice());
        add_into(&mut grads.hidden.bias, &g_hidden.bias);

        let Some(ev) = &trace.ev else {
            return Ok(loss);
        };
        let d = self.dim();
        let tail = &d_in.row(0)[d..];
        let mut d_e = Matrix::zeros(ev.e.rows(), d);
        match &ev.alpha {
            Some(alpha) => {
                let d_alpha: Vec<f64> = ev.e.iter_rows().map(|r| dot(r, tail)).collect();
                let d_scores = softmax_backward(alpha, &d_alpha);
                let mut d_q = vec![0.0; d];
                for i in 0..ev.e.rows() {
                    crate::numerics::axpy(&mut d_q, d_scores[i], ev.e.row(i));
                    let row = d_e.row_mut(i);
                    crate::numerics::axpy(row, alpha[i], tail);
                    crate::numerics::axpy(row, d_scores[i], &ev.q);
                }
                let gw = grads.w_q.as_mut_slice();
                for (r, &x) in query.iter().enumerate() {
                    if x != 0.0 {
                        crate::numerics::axpy(&mut gw[r * d..(r + 1) * d], x, &d_q);
                    }
                }
            }
            None => {
                for i in 0..ev.e.rows() {
                    d_e.row_mut(i).copy_from_slice(&tail[i * d..(i + 1) * d]);
                }
            }
        }
        let g_proj = ev.h1.t_matmul(&d_e)?;
        add_into(grads.w_proj.as_mut_slice(), g_proj.as_slice());
        let d_h1 = d_e.matmul_t(&self.encoder.w_proj)?;
        let (_, g1) = dense_backward(&d_h1, &ev.l1, &self.encoder.w1)?;
        add_into(grads.w1.as_mut_slice(), g1.weight.as_slice());
        add_into(&mut grads.b1, &g1.bias);
        Ok(loss)
    }

    /// Mean cross-entropy and its gradient over `(query, inputs, label)` triples.
    pub fn loss_and_grads(&self, batch: &[(&[f64], &Matrix, usize)]) -> Result<(f64, HeadGrads)> {
        if batch.is_empty() {
            return domain_err("empty batch");
        }
        let mut grads = HeadGrads::zeros_like(self);
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for &(query, x, label) in batch {
            if label >= self.n_classes() {
                return domain_err(format!("label {label} out of range for {}", self.task));
            }
            let trace = self.forward_trace(query, x)?;
            total += self.backward_into(query, &trace, label, 1.0, &mut grads)?;
        }
        grads.scale(scale);
        Ok((total * scale, grads))
    }

    /// Raw `[z; sim·z]` inputs for hits given as `(corpus index, sim)`.
    pub fn evidence_inputs(&self, hits: &[(usize, f64)], corpus: &Corpus) -> Result<Matrix> {
        input_matrix(hits.iter().copied(), corpus, self.mask)
    }
}
