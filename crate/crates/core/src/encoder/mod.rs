//! Embedding providers: pass-through for precomputed vectors and a small
//! trainable dual encoder aligned with a symmetric contrastive objective.

mod checkpoint;
mod contrastive;
mod features;

pub use checkpoint::{load_encoder, save_encoder, EncoderCheckpoint};
pub use contrastive::{
    contrastive_loss, retrieval_accuracy, train_contrastive, ContrastiveConfig,
    ContrastiveDirection, ContrastiveGrads, ContrastiveHistory, PairBatch,
};
pub use features::text_features;

use rand::Rng;

use crate::corpus::{anchor_texts, AnchorSet, Corpus, EmbeddingKind, Embedding, Task};
use crate::error::{domain_err, shape_err, Result};
use crate::numerics::{l2_normalize, Activation, Dense, Matrix};

/// Anything that maps raw image inputs and text features into the shared space.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn embed_image(&self, raw: &[f64]) -> Result<Embedding>;
    fn embed_text(&self, features: &[f64]) -> Result<Embedding>;
}

/// Precomputed embeddings enter unchanged.
#[derive(Debug, Clone, Copy)]
pub struct PassThrough {
    pub dim: usize,
}

impl EmbeddingProvider for PassThrough {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, raw: &[f64]) -> Result<Embedding> {
        if raw.len() != self.dim {
            return shape_err(format!("expected a {}-d embedding, got {}", self.dim, raw.len()));
        }
        Ok(raw.to_vec())
    }

    fn embed_text(&self, features: &[f64]) -> Result<Embedding> {
        self.embed_image(features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncoderInit {
    /// Kaiming-uniform weights, zero bias.
    #[default]
    Kaiming,
    /// Identity on the leading coordinates, zero bias. Stands in for a
    /// pretrained starting point when inputs already live in a shared space.
    Identity,
}

/// Two affine projection heads followed by L2 normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDualEncoder {
    pub(crate) image: Dense,
    pub(crate) text: Dense,
    tau: f64,
}

fn identity_like(rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows.min(cols) {
        m.set(i, i, 1.0);
    }
    m
}

impl ToyDualEncoder {
    pub fn new<R: Rng + ?Sized>(
        raw_dim: usize,
        feat_dim: usize,
        dim: usize,
        tau: f64,
        init: EncoderInit,
        rng: &mut R,
    ) -> Result<Self> {
        if raw_dim == 0 || feat_dim == 0 || dim == 0 {
            return domain_err("encoder dimensions must be >= 1");
        }
        let (image, text) = match init {
            EncoderInit::Kaiming => (
                Dense::kaiming(raw_dim, dim, Activation::None, rng)?,
                Dense::kaiming(feat_dim, dim, Activation::None, rng)?,
            ),
            EncoderInit::Identity => (
                Dense::new(identity_like(raw_dim, dim), vec![0.0; dim], Activation::None)?,
                Dense::new(identity_like(feat_dim, dim), vec![0.0; dim], Activation::None)?,
            ),
        };
        Self::from_layers(image, text, tau)
    }

    pub fn from_layers(image: Dense, text: Dense, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return domain_err(format!("temperature must be > 0, got {tau}"));
        }
        if image.out_dim() != text.out_dim() {
            return shape_err(format!(
                "image head outputs {} dims, text head {}",
                image.out_dim(),
                text.out_dim()
            ));
        }
        let image = Dense::new(image.weight, image.bias, Activation::None)?;
        let text = Dense::new(text.weight, text.bias, Activation::None)?;
        Ok(ToyDualEncoder { image, text, tau })
    }

    pub fn raw_dim(&self) -> usize {
        self.image.in_dim()
    }

    pub fn feat_dim(&self) -> usize {
        self.text.in_dim()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn image_head(&self) -> &Dense {
        &self.image
    }

    pub fn text_head(&self) -> &Dense {
        &self.text
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.image.weight.as_mut_slice(),
            self.image.bias.as_mut_slice(),
            self.text.weight.as_mut_slice(),
            self.text.bias.as_mut_slice(),
        ]
    }

    pub fn parameter_sizes(&self) -> Vec<usize> {
        vec![
            self.image.weight.as_slice().len(),
            self.image.bias.len(),
            self.text.weight.as_slice().len(),
            self.text.bias.len(),
        ]
    }

    /// Text anchors for `task`, embedded from the template sentences.
    pub fn template_anchors(&self, task: Task) -> Result<AnchorSet> {
        let embeddings = anchor_texts(task)
            .into_iter()
            .map(|t| self.embed_text(&text_features(t, self.feat_dim())))
            .collect::<Result<Vec<_>>>()?;
        AnchorSet::new(task, embeddings)
    }

    /// Re-embeds every vector of `corpus` with this encoder snapshot. Image
    /// rows go through the image head; text rows and anchors through the text head.
    pub fn embed_corpus(&self, corpus: &Corpus) -> Result<Corpus> {
        corpus.map_embeddings(self.dim(), |kind, v| match kind {
            EmbeddingKind::Image => self.embed_image(v),
            EmbeddingKind::Text => self.embed_text(v),
        })
    }
}

impl EmbeddingProvider for ToyDualEncoder {
    fn dim(&self) -> usize {
        self.image.out_dim()
    }

    fn embed_image(&self, raw: &[f64]) -> Result<Embedding> {
        l2_normalize(&self.image.apply_vec(raw)?).map(|(u, _)| u)
    }

    fn embed_text(&self, features: &[f64]) -> Result<Embedding> {
        l2_normalize(&self.text.apply_vec(features)?).map(|(u, _)| u)
    }
}
