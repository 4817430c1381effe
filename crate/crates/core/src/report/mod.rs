//! Structured diagnostic reports: predictions, confidences and the ranked
//! evidence table, rendered as aligned text or JSON.

mod text;

pub use text::{parse_text, render_text, render_text_with, TextOptions};

use serde::{Deserialize, Serialize};

use crate::corpus::{Abnormality, BinaryDementia, ClassLabel, Corpus, Dementia, Severity, Task};
use crate::error::{shape_err, Error, Result};
use crate::evidence::Prediction;
use crate::retrieval::RetrievalHit;
use crate::zeroshot::ZeroShotPredictions;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// JSON Schema (draft 2020-12) for [`render_json`] output.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrediction<L> {
    pub label: L,
    /// Canonical class order of the task.
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryPrediction {
    pub label: BinaryDementia,
    pub p_dementia: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub abnormality: ClassPrediction<Abnormality>,
    pub binary: BinaryPrediction,
    pub dementia_type: ClassPrediction<Dementia>,
    pub severity: ClassPrediction<Severity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    ZeroShot,
    Evidence,
}

impl PredictionSource {
    pub fn key(self) -> &'static str {
        match self {
            PredictionSource::ZeroShot => "zero_shot",
            PredictionSource::Evidence => "evidence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSources {
    pub abnormality: PredictionSource,
    pub binary: PredictionSource,
    pub dementia_type: PredictionSource,
    pub severity: PredictionSource,
}

impl Default for PredictionSources {
    fn default() -> Self {
        PredictionSources {
            abnormality: PredictionSource::ZeroShot,
            binary: PredictionSource::ZeroShot,
            dementia_type: PredictionSource::ZeroShot,
            severity: PredictionSource::ZeroShot,
        }
    }
}

impl PredictionSources {
    fn slot(&mut self, task: Task) -> &mut PredictionSource {
        match task {
            Task::Abnormality => &mut self.abnormality,
            Task::BinaryDementia => &mut self.binary,
            Task::DementiaType => &mut self.dementia_type,
            Task::Severity => &mut self.severity,
        }
    }

    pub fn get(&self, task: Task) -> PredictionSource {
        let mut copy = *self;
        *copy.slot(task)
    }
}

/// Where the evidence-table weights came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSource {
    /// Attention weights of a trained head.
    Attention,
    /// Softmax over retrieval similarities, used when no head attends.
    SimilaritySoftmax,
}

impl AlphaSource {
    pub fn key(self) -> &'static str {
        match self {
            AlphaSource::Attention => "attention",
            AlphaSource::SimilaritySoftmax => "similarity_softmax",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub rank: usize,
    pub case_id: String,
    pub sim: f64,
    pub alpha: f64,
    pub abnormality: Abnormality,
    pub dementia: Dementia,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub schema_version: u32,
    pub corpus_id: String,
    pub encoder_id: String,
    pub k: usize,
    pub sources: PredictionSources,
    pub alpha_source: AlphaSource,
    /// The only wall-clock field; left out unless requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl ReportMetadata {
    pub fn new(corpus_id: impl Into<String>, encoder_id: impl Into<String>, k: usize) -> Self {
        ReportMetadata {
            schema_version: REPORT_SCHEMA_VERSION,
            corpus_id: corpus_id.into(),
            encoder_id: encoder_id.into(),
            k,
            sources: PredictionSources::default(),
            alpha_source: AlphaSource::SimilaritySoftmax,
            generated_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub predictions: Predictions,
    pub evidence: Vec<EvidenceRow>,
    pub metadata: ReportMetadata,
}

/// Predictions for all four tasks plus where each one came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub predictions: Predictions,
    pub sources: PredictionSources,
}

fn label_at<L: ClassLabel>(i: usize) -> Result<L> {
    L::from_index(i).ok_or_else(|| Error::Domain(format!("class index {i} out of range")))
}

impl PredictionSet {
    pub fn from_zero_shot(zs: &ZeroShotPredictions) -> Result<Self> {
        Ok(PredictionSet {
            predictions: Predictions {
                abnormality: ClassPrediction {
                    label: label_at(zs.abnormality.predicted)?,
                    probabilities: zs.abnormality.probs.clone(),
                },
                binary: BinaryPrediction {
                    label: zs.binary.label,
                    p_dementia: zs.binary.p_dementia,
                },
                dementia_type: ClassPrediction {
                    label: label_at(zs.dementia_type.predicted)?,
                    probabilities: zs.dementia_type.probs.clone(),
                },
                severity: ClassPrediction {
                    label: label_at(zs.severity.predicted)?,
                    probabilities: zs.severity.probs.clone(),
                },
            },
            sources: PredictionSources::default(),
        })
    }

    /// Replaces the prediction for `task` with a trained head's output.
    pub fn with_evidence(mut self, task: Task, pred: &Prediction) -> Result<Self> {
        if pred.probs.len() != task.arity() {
            return shape_err(format!(
                "{task} head produced {} probabilities",
                pred.probs.len()
            ));
        }
        let p = &mut self.predictions;
        match task {
            Task::Abnormality => {
                p.abnormality = ClassPrediction {
                    label: label_at(pred.predicted)?,
                    probabilities: pred.probs.clone(),
                }
            }
            Task::BinaryDementia => {
                p.binary = BinaryPrediction {
                    label: label_at(pred.predicted)?,
                    p_dementia: pred.probs[1],
                }
            }
            Task::DementiaType => {
                p.dementia_type = ClassPrediction {
                    label: label_at(pred.predicted)?,
                    probabilities: pred.probs.clone(),
                }
            }
            Task::Severity => {
                p.severity = ClassPrediction {
                    label: label_at(pred.predicted)?,
                    probabilities: pred.probs.clone(),
                }
            }
        }
        *self.sources.slot(task) = PredictionSource::Evidence;
        Ok(self)
    }
}

/// Builds a report from predictions and retrieval output. Rows are sorted by
/// similarity, descending, ties keeping hit order.
pub fn assemble(
    set: PredictionSet,
    hits: &[RetrievalHit],
    alpha: &[f64],
    corpus: &Corpus,
    mut metadata: ReportMetadata,
) -> Result<DiagnosticReport> {
    if alpha.len() != hits.len() {
        return shape_err(format!("{} attention weights for {} hits", alpha.len(), hits.len()));
    }
    let mut evidence = hits
        .iter()
        .zip(alpha)
        .map(|(h, &a)| {
            let case = corpus
                .get(&h.case_id)
                .ok_or_else(|| Error::Lookup(format!("unknown case id `{}`", h.case_id)))?;
            Ok(EvidenceRow {
                rank: h.rank,
                case_id: h.case_id.clone(),
                sim: h.sim,
                alpha: a,
                abnormality: case.abnormality,
                dementia: case.dementia,
                description: case.description.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    evidence.sort_by(|a, b| b.sim.total_cmp(&a.sim));
    metadata.sources = set.sources;
    let report = DiagnosticReport {
        predictions: set.predictions,
        evidence,
        metadata,
    };
    report.validate()?;
    Ok(report)
}

fn check_probs(name: &str, probs: &[f64], arity: usize) -> Result<()> {
    if probs.len() != arity {
        return shape_err(format!("{name} has {} probabilities, expected {arity}", probs.len()));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Numeric(format!("{name} probability outside [0, 1]")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Numeric(format!("{name} probabilities sum to {sum}")));
    }
    Ok(())
}

impl DiagnosticReport {
    pub fn validate(&self) -> Result<()> {
        let p = &self.predictions;
        check_probs("abnormality", &p.abnormality.probabilities, Task::Abnormality.arity())?;
        check_probs("dementia_type", &p.dementia_type.probabilities, Task::DementiaType.arity())?;
        check_probs("severity", &p.severity.probabilities, Task::Severity.arity())?;
        if !(0.0..=1.0).contains(&p.binary.p_dementia) {
            return Err(Error::Numeric("p_dementia outside [0, 1]".into()));
        }
        if !self.evidence.is_empty() {
            let sum: f64 = self.evidence.iter().map(|r| r.alpha).sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE || self.evidence.iter().any(|r| r.alpha < 0.0) {
                return Err(Error::Numeric(format!("evidence weights sum to {sum}")));
            }
        }
        if self.evidence.windows(2).any(|w| w[0].sim < w[1].sim) {
            return Err(Error::Domain("evidence rows are not sorted by similarity".into()));
        }
        Ok(())
    }

    pub fn row_labels(&self) -> Vec<(Abnormality, Dementia)> {
        self.evidence.iter().map(|r| (r.abnormality, r.dementia)).collect()
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn render_json(report: &DiagnosticReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_json(text: &str) -> Result<DiagnosticReport> {
    let report: DiagnosticReport = serde_json::from_str(text)?;
    if report.metadata.schema_version != REPORT_SCHEMA_VERSION {
        return Err(crate::error::LoadError::UnsupportedVersion {
            what: "report schema",
            found: report.metadata.schema_version,
            expected: REPORT_SCHEMA_VERSION,
        }
        .into());
    }
    report.validate()?;
    Ok(report)
}

/// The worked example from the report template: three MTL/WMH references.
pub fn example_report() -> DiagnosticReport {
    let row = |rank, sim, alpha, abnormality, dementia, description: &str| EvidenceRow {
        rank,
        case_id: format!("ref-{rank:03}"),
        sim,
        alpha,
        abnormality,
        dementia,
        description: description.into(),
    };
    let mut metadata = ReportMetadata::new("example", "none", 3);
    metadata.alpha_source = AlphaSource::Attention;
    metadata.sources = PredictionSources {
        abnormality: PredictionSource::Evidence,
        binary: PredictionSource::ZeroShot,
        dementia_type: PredictionSource::ZeroShot,
        severity: PredictionSource::ZeroShot,
    };
    DiagnosticReport {
        predictions: Predictions {
            abnormality: ClassPrediction {
                label: Abnormality::MtlAtrophy,
                probabilities: vec![0.03, 0.91, 0.04, 0.02],
            },
            binary: BinaryPrediction {
                label: BinaryDementia::Demented,
                p_dementia: 0.94,
            },
            dementia_type: ClassPrediction {
                label: Dementia::Ad,
                probabilities: vec![0.06, 0.89, 0.05],
            },
            severity: ClassPrediction {
                label: Severity::Mild,
                probabilities: vec![0.07, 0.13, 0.72, 0.08],
            },
        },
        evidence: vec![
            row(
                1,
                0.94,
                0.57,
                Abnormality::MtlAtrophy,
                Dementia::Ad,
                "MRI shows severe hippocampal shrinkage and entorhinal cortex thinning, consistent with advanced medial temporal lobe atrophy.",
            ),
            row(
                2,
                0.89,
                0.36,
                Abnormality::MtlAtrophy,
                Dementia::Ad,
                "Evidence of moderate atrophy in the parahippocampal region and temporal horns enlargement.",
            ),
            row(
                3,
                0.85,
                0.07,
                Abnormality::Wmh,
                Dementia::OtherDementia,
                "MRI reveals scattered periventricular white matter hyperintensities, suggestive of small vessel ischemic changes.",
            ),
        ],
        metadata,
    }
}
