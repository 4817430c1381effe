use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::error::{Error, LoadError, Result};
use crate::evidence::{AblationMask, EvidenceEncoderParams, EvidenceModel, InferenceHeadParams};
use crate::numerics::{Activation, Dense, Matrix};

pub const HEAD_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadCheckpoint {
    pub version: u32,
    pub task: Task,
    pub k: usize,
    pub dim: usize,
    pub hidden: usize,
    pub ablation_mask: AblationMask,
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w_proj: Vec<Vec<f64>>,
    pub w_q: Vec<Vec<f64>>,
    pub hidden_weight: Vec<Vec<f64>>,
    pub hidden_bias: Vec<f64>,
    pub output_weight: Vec<Vec<f64>>,
    pub output_bias: Vec<f64>,
}

impl From<&EvidenceModel> for HeadCheckpoint {
    fn from(m: &EvidenceModel) -> Self {
        HeadCheckpoint {
            version: HEAD_CHECKPOINT_VERSION,
            task: m.task,
            k: m.k,
            dim: m.dim(),
            hidden: m.hidden_width(),
            ablation_mask: m.mask,
            w1: m.encoder.w1.to_rows(),
            b1: m.encoder.b1.clone(),
            w_proj: m.encoder.w_proj.to_rows(),
            w_q: m.head.w_q.to_rows(),
            hidden_weight: m.head.hidden.weight.to_rows(),
            hidden_bias: m.head.hidden.bias.clone(),
            output_weight: m.head.output.weight.to_rows(),
            output_bias: m.head.output.bias.clone(),
        }
    }
}

impl HeadCheckpoint {
    pub fn into_model(self) -> Result<EvidenceModel> {
        if self.version != HEAD_CHECKPOINT_VERSION {
            return Err(LoadError::UnsupportedVersion {
                what: "head checkpoint",
                found: self.version,
                expected: HEAD_CHECKPOINT_VERSION,
            }
            .into());
        }
        let model = EvidenceModel {
            task: self.task,
            k: self.k,
            mask: self.ablation_mask.effective(),
            encoder: EvidenceEncoderParams {
                w1: Matrix::from_rows(&self.w1)?,
                b1: self.b1,
                w_proj: Matrix::from_rows(&self.w_proj)?,
            },
            head: InferenceHeadParams {
                w_q: Matrix::from_rows(&self.w_q)?,
                hidden: Dense::new(
                    Matrix::from_rows(&self.hidden_weight)?,
                    self.hidden_bias,
                    Activation::Relu,
                )?,
                output: Dense::new(
                    Matrix::from_rows(&self.output_weight)?,
                    self.output_bias,
                    Activation::None,
                )?,
            },
        };
        model.validate()?;
        if model.dim() != self.dim || model.hidden_width() != self.hidden {
            return Err(Error::Config(
                "checkpoint weights disagree with declared dimensions".into(),
            ));
        }
        Ok(model)
    }
}

pub fn save_head(model: &EvidenceModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut json = serde_json::to_string(&HeadCheckpoint::from(model))?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_head(path: impl AsRef<Path>) -> Result<EvidenceModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: HeadCheckpoint = serde_json::from_str(&text)?;
    ckpt.into_model()
}
