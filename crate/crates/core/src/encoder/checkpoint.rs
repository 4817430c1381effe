use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::ToyDualEncoder;
use crate::error::{Error, LoadError, Result};
use crate::numerics::{Activation, Dense, Matrix};

pub const ENCODER_CHECKPOINT_VERSION: u32 = 1;

/// On-disk form of a [`ToyDualEncoder`]. Weights are nested row-major
/// arrays; floats are written in shortest round-trip form so every
/// `f64` reloads bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderCheckpoint {
    pub version: u32,
    pub raw_dim: usize,
    pub feat_dim: usize,
    pub dim: usize,
    pub tau: f64,
    pub image_weight: Vec<Vec<f64>>,
    pub image_bias: Vec<f64>,
    pub text_weight: Vec<Vec<f64>>,
    pub text_bias: Vec<f64>,
}

impl From<&ToyDualEncoder> for EncoderCheckpoint {
    fn from(enc: &ToyDualEncoder) -> Self {
        use crate::encoder::EmbeddingProvider;
        EncoderCheckpoint {
            version: ENCODER_CHECKPOINT_VERSION,
            raw_dim: enc.raw_dim(),
            feat_dim: enc.feat_dim(),
            dim: enc.dim(),
            tau: enc.tau(),
            image_weight: enc.image.weight.to_rows(),
            image_bias: enc.image.bias.clone(),
            text_weight: enc.text.weight.to_rows(),
            text_bias: enc.text.bias.clone(),
        }
    }
}

impl EncoderCheckpoint {
    pub fn into_encoder(self) -> Result<ToyDualEncoder> {
        if self.version != ENCODER_CHECKPOINT_VERSION {
            return Err(LoadError::UnsupportedVersion {
                what: "encoder checkpoint",
                found: self.version,
                expected: ENCODER_CHECKPOINT_VERSION,
            }
            .into());
        }
        let image = Dense::new(
            Matrix::from_rows(&self.image_weight)?,
            self.image_bias,
            Activation::None,
        )?;
        let text = Dense::new(
            Matrix::from_rows(&self.text_weight)?,
            self.text_bias,
            Activation::None,
        )?;
        if image.weight.shape() != (self.raw_dim, self.dim)
            || text.weight.shape() != (self.feat_dim, self.dim)
        {
            return Err(Error::Shape(
                "checkpoint weights disagree with declared dimensions".into(),
            ));
        }
        ToyDualEncoder::from_layers(image, text, self.tau)
    }
}

pub fn save_encoder(encoder: &ToyDualEncoder, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut json = serde_json::to_string(&EncoderCheckpoint::from(encoder))?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_encoder(path: impl AsRef<Path>) -> Result<ToyDualEncoder> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: EncoderCheckpoint = serde_json::from_str(&text)?;
    ckpt.into_encoder()
}
