//! Pseudo-text templates paired with images during contrastive training and
//! used as zero-shot anchor texts.

use crate::corpus::labels::{Abnormality, ClassLabel, Dementia, Severity, Task};

pub fn abnormality_text(label: Abnormality) -> &'static str {
    match label {
        Abnormality::Normal => {
            "MRI image shows normal brain without evidence of significant structures or pathological changes."
        }
        Abnormality::MtlAtrophy => {
            "MRI image illustrates volume reduction and structural atrophy in the medial temporal lobes, including hippocampal shrinkage."
        }
        Abnormality::Wmh => {
            "MRI image reveals hyperintense lesions within cerebral white matter regions, indicating white matter hyperintensities."
        }
        Abnormality::OtherAtrophy => {
            "MRI image indicates brain atrophy in cortical or subcortical regions other than medial temporal lobes, with notable structural volume loss."
        }
    }
}

pub fn dementia_text(label: Dementia) -> &'static str {
    match label {
        Dementia::NonDementia => {
            "MRI image presents no evident dementia-related structural changes, reflecting a normal cognitive state."
        }
        Dementia::Ad => {
            "MRI image shows characteristic patterns of brain atrophy suggestive of Alzheimer's Disease pathology."
        }
        Dementia::OtherDementia => {
            "MRI image shows structural brain abnormalities indicative of dementia types other than Alzheimer's Disease, such as Vascular dementia or Dementia with Lewy bodies."
        }
    }
}

pub fn severity_text(label: Severity) -> &'static str {
    match label {
        Severity::NonDemented => {
            "MRI image depicts normal brain anatomy without visible dementia-related atrophic or pathological changes."
        }
        Severity::VeryMild => {
            "MRI image presents subtle and minimal structural changes, consistent with very mild cognitive impairment or early-stage dementia."
        }
        Severity::Mild => {
            "MRI image illustrates noticeable atrophic changes in brain regions, indicative of mild dementia progression."
        }
        Severity::Moderate => {
            "MRI image shows pronounced structural atrophy and pathological changes characteristic of moderate dementia severity."
        }
    }
}

/// The four text modalities that accompany one reference image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoTexts {
    /// Free-form report; empty until a case supplies one.
    pub description: String,
    pub abnormality: &'static str,
    pub dementia: &'static str,
    /// Abnormality text, one space, dementia text.
    pub combined: String,
}

pub fn pseudo_text(abnormality: Abnormality, dementia: Dementia) -> PseudoTexts {
    let abn = abnormality_text(abnormality);
    let dx = dementia_text(dementia);
    PseudoTexts {
        description: String::new(),
        abnormality: abn,
        dementia: dx,
        combined: format!("{abn} {dx}"),
    }
}

/// Anchor sentences for a task in canonical class order. The binary task has
/// no template of its own and reuses the dementia-type wording, with the
/// demented side taken from the AD sentence.
pub fn anchor_texts(task: Task) -> Vec<&'static str> {
    match task {
        Task::Abnormality => Abnormality::ALL.iter().map(|&l| abnormality_text(l)).collect(),
        Task::DementiaType => Dementia::ALL.iter().map(|&l| dementia_text(l)).collect(),
        Task::Severity => Severity::ALL.iter().map(|&l| severity_text(l)).collect(),
        Task::BinaryDementia => vec![
            dementia_text(Dementia::NonDementia),
            dementia_text(Dementia::Ad),
        ],
    }
}
