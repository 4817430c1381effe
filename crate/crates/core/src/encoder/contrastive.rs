use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoder::{EmbeddingProvider, EncoderInit, ToyDualEncoder};
use crate::error::{domain_err, shape_err, Error, Result};
use crate::numerics::{
    argmax, dense_backward, dense_forward, derive_seed, dot, l2_normalize, l2_normalize_backward,
    log_sum_exp, rng_from_seed, softmax, Activation, Adam, AdamConfig, DenseGrads, Matrix,
};

/// `N` matched (image, text) pairs; row `i` of each side belongs together.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub images: Matrix,
    pub texts: Matrix,
}

impl PairBatch {
    pub fn new(images: Matrix, texts: Matrix) -> Result<Self> {
        if images.rows() != texts.rows() {
            return shape_err(format!(
                "{} image rows but {} text rows",
                images.rows(),
                texts.rows()
            ));
        }
        if images.rows() == 0 {
            return shape_err("a pair batch needs at least one pair");
        }
        Ok(PairBatch { images, texts })
    }

    pub fn len(&self) -> usize {
        self.images.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.images.rows() == 0
    }

    pub fn select(&self, indices: &[usize]) -> PairBatch {
        let pick = |m: &Matrix| {
            let rows: Vec<Vec<f64>> = indices.iter().map(|&i| m.row(i).to_vec()).collect();
            Matrix::from_rows(&rows).expect("rows share a width")
        };
        PairBatch {
            images: pick(&self.images),
            texts: pick(&self.texts),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastiveDirection {
    /// Mean of the image→text and text→image InfoNCE terms.
    #[default]
    Symmetric,
    /// Image→text term only.
    ImageToText,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveGrads {
    pub image: DenseGrads,
    pub text: DenseGrads,
}

impl ContrastiveGrads {
    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.image.weight.as_slice(),
            &self.image.bias,
            self.text.weight.as_slice(),
            &self.text.bias,
        ]
    }
}

fn normalize_rows(m: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let (u, n) = l2_normalize(m.row(r))?;
        out.row_mut(r).copy_from_slice(&u);
        norms.push(n);
    }
    Ok((out, norms))
}

fn normalize_rows_backward(unit: &Matrix, norms: &[f64], upstream: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(unit.rows(), unit.cols());
    for (r, &norm) in norms.iter().enumerate().take(unit.rows()) {
        let g = l2_normalize_backward(unit.row(r), norm, upstream.row(r));
        out.row_mut(r).copy_from_slice(&g);
    }
    out
}

/// InfoNCE loss over a batch with cosine similarity and temperature `τ`,
/// plus analytic gradients for both projection heads.
pub fn contrastive_loss(
    batch: &PairBatch,
    encoder: &ToyDualEncoder,
    direction: ContrastiveDirection,
) -> Result<(f64, ContrastiveGrads)> {
    let n = batch.len();
    if n == 0 {
        return shape_err("contrastive loss over an empty batch");
    }
    let tau = encoder.tau();
    let (img_out, img_cache) = dense_forward(
        &batch.images,
        &encoder.image.weight,
        &encoder.image.bias,
        Activation::None,
    )?;
    let (txt_out, txt_cache) = dense_forward(
        &batch.texts,
        &encoder.text.weight,
        &encoder.text.bias,
        Activation::None,
    )?;
    let (v, v_norms) = normalize_rows(&img_out)?;
    let (t, t_norms) = normalize_rows(&txt_out)?;

    let mut logits = v.matmul_t(&t)?;
    logits.scale(1.0 / tau);

    let nf = n as f64;
    let (w_i2t, w_t2i) = match direction {
        ContrastiveDirection::Symmetric => (0.5, 0.5),
        ContrastiveDirection::ImageToText => (1.0, 0.0),
    };
    let mut loss = 0.0;
    let mut d_logits = Matrix::zeros(n, n);

    // image → text: softmax over each row
    let mut i2t = 0.0;
    for i in 0..n {
        let row = logits.row(i);
        i2t += log_sum_exp(row) - row[i];
        let p = softmax(row)?;
        for (j, pj) in p.into_iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            let cur = d_logits.get(i, j);
            d_logits.set(i, j, cur + w_i2t * (pj - target) / nf);
        }
    }
    loss += w_i2t * i2t / nf;

    if w_t2i > 0.0 {
        let logits_t = logits.transpose();
        let mut t2i = 0.0;
        for j in 0..n {
            let col = logits_t.row(j);
            t2i += log_sum_exp(col) - col[j];
            let p = softmax(col)?;
            for (i, pi) in p.into_iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                let cur = d_logits.get(i, j);
                d_logits.set(i, j, cur + w_t2i * (pi - target) / nf);
            }
        }
        loss += w_t2i * t2i / nf;
    }
    if !loss.is_finite() {
        return Err(Error::Numeric("non-finite contrastive loss".into()));
    }

    // logits = V Tᵀ / τ
    d_logits.scale(1.0 / tau);
    let d_v = d_logits.matmul(&t)?;
    let d_t = d_logits.t_matmul(&v)?;
    let d_img_out = normalize_rows_backward(&v, &v_norms, &d_v);
    let d_txt_out = normalize_rows_backward(&t, &t_norms, &d_t);
    let (_, image) = dense_backward(&d_img_out, &img_cache, &encoder.image.weight)?;
    let (_, text) = dense_backward(&d_txt_out, &txt_cache, &encoder.text.weight)?;
    let grads = ContrastiveGrads { image, text };
    if grads.tensors().iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numeric("non-finite contrastive gradient".into()));
    }
    Ok((loss.max(0.0), grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub tau: f64,
    /// Decoupled weight decay applied by the optimizer.
    pub weight_decay: f64,
    pub direction: ContrastiveDirection,
    pub seed: u64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            lr: 5e-5,
            batch_size: 16,
            epochs: 10,
            tau: 0.07,
            weight_decay: 0.2,
            direction: ContrastiveDirection::Symmetric,
            seed: 0,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return domain_err(format!("learning rate must be >= 0, got {}", self.lr));
        }
        if self.batch_size < 2 {
            return domain_err("contrastive batch size must be >= 2");
        }
        if self.epochs == 0 {
            return domain_err("epochs must be >= 1");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return domain_err("temperature must be > 0");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return domain_err("weight decay must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveHistory {
    /// Loss over the fixed evaluation batches before any update.
    pub initial_loss: f64,
    /// Mean minibatch training loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Loss over the fixed evaluation batches after each epoch.
    pub eval_losses: Vec<f64>,
}

impl ContrastiveHistory {
    pub fn final_loss(&self) -> f64 {
        self.eval_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

fn batches(order: &[usize], size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(size)
}

fn evaluation_loss(
    pairs: &PairBatch,
    encoder: &ToyDualEncoder,
    order: &[usize],
    config: &ContrastiveConfig,
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0;
    for idx in batches(order, config.batch_size) {
        let (loss, _) = contrastive_loss(&pairs.select(idx), encoder, config.direction)?;
        total += loss;
        count += 1;
    }
    Ok(total / count as f64)
}

/// Adam training of both projection heads. The encoder passed in is the
/// starting point; a fresh one is built from `init` when `None`.
pub fn train_contrastive(
    pairs: &PairBatch,
    config: &ContrastiveConfig,
    encoder: Option<ToyDualEncoder>,
    dim: usize,
    init: EncoderInit,
) -> Result<(ToyDualEncoder, ContrastiveHistory)> {
    config.validate()?;
    if pairs.len() < 2 {
        return domain_err("contrastive training needs at least 2 pairs");
    }
    let mut rng = rng_from_seed(config.seed);
    let mut encoder = match encoder {
        Some(e) => {
            if e.raw_dim() != pairs.images.cols() || e.feat_dim() != pairs.texts.cols() {
                return shape_err("encoder input widths do not match the pairs");
            }
            ToyDualEncoder::from_layers(e.image, e.text, config.tau)?
        }
        None => ToyDualEncoder::new(
            pairs.images.cols(),
            pairs.texts.cols(),
            dim,
            config.tau,
            init,
            &mut rng,
        )?,
    };
    let adam_cfg = AdamConfig {
        lr: config.lr,
        weight_decay: config.weight_decay,
        ..AdamConfig::default()
    };
    let mut adam = Adam::new(&encoder.parameter_sizes(), adam_cfg)?;

    // Evaluation batches use one fixed shuffle so epochs are comparable.
    let mut eval_order: Vec<usize> = (0..pairs.len()).collect();
    eval_order.shuffle(&mut rng_from_seed(derive_seed(config.seed, 0xE7A1)));

    let initial_loss = evaluation_loss(pairs, &encoder, &eval_order, config)?;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut eval_losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0;
        for idx in batches(&order, config.batch_size) {
            let (loss, grads) = contrastive_loss(&pairs.select(idx), &encoder, config.direction)?;
            adam.step(encoder.parameters_mut(), grads.tensors())?;
            total += loss;
            count += 1;
        }
        epoch_losses.push(total / count as f64);
        eval_losses.push(evaluation_loss(pairs, &encoder, &eval_order, config)?);
    }
    Ok((
        encoder,
        ContrastiveHistory {
            initial_loss,
            epoch_losses,
            eval_losses,
        },
    ))
}

/// Fraction of images whose most similar text (by cosine, ties to the lowest
/// index) carries the same class label as the image's own text.
pub fn retrieval_accuracy(
    encoder: &ToyDualEncoder,
    pairs: &PairBatch,
    labels: &[usize],
) -> Result<f64> {
    if labels.len() != pairs.len() {
        return shape_err("one label per pair is required");
    }
    let texts = pairs
        .texts
        .iter_rows()
        .map(|t| encoder.embed_text(t))
        .collect::<Result<Vec<_>>>()?;
    let mut hits = 0usize;
    for (i, raw) in pairs.images.iter_rows().enumerate() {
        let v = encoder.embed_image(raw)?;
        let sims: Vec<f64> = texts.iter().map(|t| dot(&v, t)).collect();
        let best = argmax(&sims).expect("non-empty");
        if labels[best] == labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng_from_seed;

    fn identity(dim: usize, tau: f64) -> ToyDualEncoder {
        ToyDualEncoder::new(dim, dim, dim, tau, EncoderInit::Identity, &mut rng_from_seed(0))
            .unwrap()
    }

    #[test]
    fn single_pair_has_zero_loss() {
        let enc = identity(3, 0.07);
        let batch = PairBatch::new(
            Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap(),
            Matrix::from_rows(&[vec![-1.0, 0.5, 0.0]]).unwrap(),
        )
        .unwrap();
        let (loss, grads) = contrastive_loss(&batch, &enc, ContrastiveDirection::Symmetric).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.tensors().iter().all(|g| g.iter().all(|v| v.abs() < 1e-12)));
    }

    #[test]
    fn identical_embeddings_give_ln_n() {
        let enc = identity(2, 0.07);
        let rows = vec![vec![1.0, 1.0]; 4];
        let m = Matrix::from_rows(&rows).unwrap();
        let batch = PairBatch::new(m.clone(), m).unwrap();
        let (loss, _) = contrastive_loss(&batch, &enc, ContrastiveDirection::Symmetric).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_matched_pairs_are_nearly_free() {
        let enc = identity(2, 0.07);
        let m = Matrix::identity(2);
        let batch = PairBatch::new(m.clone(), m).unwrap();
        let (loss, _) = contrastive_loss(&batch, &enc, ContrastiveDirection::Symmetric).unwrap();
        let bound = (1.0 + (-1.0f64 / 0.07).exp()).ln();
        assert!((loss - bound).abs() < 1e-15);
        assert!(loss < 1e-5);
    }

    #[test]
    fn directions_agree_for_symmetric_similarity() {
        let enc = identity(3, 0.5);
        let m = Matrix::from_rows(&[
            vec![1.0, 0.2, 0.0],
            vec![0.0, 1.0, 0.3],
            vec![0.4, 0.0, 1.0],
        ])
        .unwrap();
        // identical sides make the similarity matrix symmetric
        let batch = PairBatch::new(m.clone(), m).unwrap();
        let (sym, _) = contrastive_loss(&batch, &enc, ContrastiveDirection::Symmetric).unwrap();
        let (one, _) = contrastive_loss(&batch, &enc, ContrastiveDirection::ImageToText).unwrap();
        assert!((sym - one).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let cfg = ContrastiveConfig {
            batch_size: 1,
            ..ContrastiveConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ContrastiveConfig {
            tau: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_lr_leaves_parameters_bit_identical() {
        let mut rng = rng_from_seed(2);
        let enc = ToyDualEncoder::new(3, 3, 3, 0.07, EncoderInit::Kaiming, &mut rng).unwrap();
        let images = crate::numerics::kaiming_uniform_init(3, (6, 3), &mut rng).unwrap();
        let texts = crate::numerics::kaiming_uniform_init(3, (6, 3), &mut rng).unwrap();
        let pairs = PairBatch::new(images, texts).unwrap();
        let cfg = ContrastiveConfig {
            lr: 0.0,
            batch_size: 4,
            epochs: 2,
            ..Default::default()
        };
        let (trained, hist) =
            train_contrastive(&pairs, &cfg, Some(enc.clone()), 3, EncoderInit::Kaiming).unwrap();
        assert_eq!(trained, enc);
        assert_eq!(hist.eval_losses, vec![hist.initial_loss; 2]);
    }
}
