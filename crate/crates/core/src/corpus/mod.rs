//! Reference cases, anchor sets, on-disk index format and synthetic corpora.

mod labels;
mod store;
mod synthetic;
mod templates;

use std::collections::HashMap;

pub use labels::{Abnormality, BinaryDementia, ClassLabel, Dementia, Severity, Task};
pub use store::{load_corpus, save_index, BLOB_MAGIC, FORMAT_VERSION};
pub use synthetic::{
    generate_context_task, generate_synthetic, ContextQuery, ContextTask, ContextTaskSpec,
    LabeledQuery, SyntheticSpec, SYNTHETIC_DEMENTIA,
};
pub use templates::{
    abnormality_text, anchor_texts, dementia_text, pseudo_text, severity_text, PseudoTexts,
};

use crate::error::{shape_err, Error, Result};

/// A point in the shared image/text latent space.
pub type Embedding = Vec<f64>;

/// One retrievable reference: an image embedding, three text embeddings and
/// the ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCase {
    pub id: String,
    pub image: Embedding,
    pub abn_text: Embedding,
    pub dx_text: Embedding,
    pub desc_text: Embedding,
    pub abnormality: Abnormality,
    pub dementia: Dementia,
    /// Only present for cases drawn from severity-labelled data.
    pub severity: Option<Severity>,
    pub description: String,
}

impl ReferenceCase {
    pub fn dim(&self) -> usize {
        self.image.len()
    }

    /// The four embeddings in fixed order: image, abnormality, dementia, description.
    pub fn modalities(&self) -> [&[f64]; 4] {
        [&self.image, &self.abn_text, &self.dx_text, &self.desc_text]
    }

    /// Class index of this case for `task`, if the case carries that label.
    pub fn label_for(&self, task: Task) -> Option<usize> {
        match task {
            Task::Abnormality => Some(self.abnormality.index()),
            Task::BinaryDementia => Some(self.dementia.binary().index()),
            Task::DementiaType => Some(self.dementia.index()),
            Task::Severity => self.severity.map(ClassLabel::index),
        }
    }
}

/// Class anchors for one task, in canonical class order.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    task: Task,
    embeddings: Vec<Embedding>,
}

impl AnchorSet {
    pub fn new(task: Task, embeddings: Vec<Embedding>) -> Result<Self> {
        if embeddings.len() != task.arity() {
            return shape_err(format!(
                "{task} needs {} anchors, got {}",
                task.arity(),
                embeddings.len()
            ));
        }
        let dim = embeddings[0].len();
        if embeddings.iter().any(|e| e.len() != dim) {
            return shape_err(format!("{task} anchors differ in dimension"));
        }
        Ok(AnchorSet { task, embeddings })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn classes(&self) -> Vec<&'static str> {
        self.task.class_keys()
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].len()
    }
}

/// An immutable collection of reference cases sharing one embedding dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    dim: usize,
    cases: Vec<ReferenceCase>,
    anchors: Vec<AnchorSet>,
    provenance: String,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(
        dim: usize,
        cases: Vec<ReferenceCase>,
        anchors: Vec<AnchorSet>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(cases.len());
        for (i, case) in cases.iter().enumerate() {
            for (name, e) in ["image", "abn", "dx", "desc"].iter().zip(case.modalities()) {
                if e.len() != dim {
                    return shape_err(format!(
                        "case `{}` {name} embedding has dimension {}, corpus dimension is {dim}",
                        case.id,
                        e.len()
                    ));
                }
                if e.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "case `{}` {name} embedding is not finite",
                        case.id
                    )));
                }
            }
            if by_id.insert(case.id.clone(), i).is_some() {
                return Err(crate::error::LoadError::DuplicateId(case.id.clone()).into());
            }
        }
        let mut seen = Vec::new();
        for set in &anchors {
            if set.dim() != dim {
                return shape_err(format!(
                    "{} anchors have dimension {}, corpus dimension is {dim}",
                    set.task(),
                    set.dim()
                ));
            }
            if seen.contains(&set.task()) {
                return shape_err(format!("duplicate anchor set for {}", set.task()));
            }
            seen.push(set.task());
        }
        Ok(Corpus {
            dim,
            cases,
            anchors,
            provenance: provenance.into(),
            by_id,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn cases(&self) -> &[ReferenceCase] {
        &self.cases
    }

    pub fn case(&self, index: usize) -> Option<&ReferenceCase> {
        self.cases.get(index)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&ReferenceCase> {
        self.index_of(id).map(|i| &self.cases[i])
    }

    pub fn anchors(&self) -> &[AnchorSet] {
        &self.anchors
    }

    pub fn anchor_set(&self, task: Task) -> Option<&AnchorSet> {
        self.anchors.iter().find(|a| a.task() == task)
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// A new corpus holding the cases at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Corpus> {
        let cases = indices
            .iter()
            .map(|&i| {
                self.cases
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Lookup(format!("case index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(self.dim, cases, self.anchors.clone(), self.provenance.clone())
    }

    /// Applies `f` to every embedding (cases and anchors); used to move a
    /// corpus through an encoder snapshot.
    pub fn map_embeddings<F>(&self, new_dim: usize, mut f: F) -> Result<Corpus>
    where
        F: FnMut(EmbeddingKind, &[f64]) -> Result<Embedding>,
    {
        let cases = self
            .cases
            .iter()
            .map(|c| {
                Ok(ReferenceCase {
                    image: f(EmbeddingKind::Image, &c.image)?,
                    abn_text: f(EmbeddingKind::Text, &c.abn_text)?,
                    dx_text: f(EmbeddingKind::Text, &c.dx_text)?,
                    desc_text: f(EmbeddingKind::Text, &c.desc_text)?,
                    ..c.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let anchors = self
            .anchors
            .iter()
            .map(|a| {
                let e = a
                    .embeddings()
                    .iter()
                    .map(|e| f(EmbeddingKind::Text, e))
                    .collect::<Result<Vec<_>>>()?;
                AnchorSet::new(a.task(), e)
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(new_dim, cases, anchors, self.provenance.clone())
    }

    pub fn with_anchors(mut self, anchors: Vec<AnchorSet>) -> Result<Corpus> {
        self.anchors = anchors;
        Corpus::new(self.dim, self.cases, self.anchors, self.provenance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Image,
    Text,
}
