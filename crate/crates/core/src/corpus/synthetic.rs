//! Synthetic corpora with known geometry, for desk-scale verification.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    pseudo_text, Abnormality, AnchorSet, ClassLabel, Corpus, Dementia, Embedding, ReferenceCase,
    Severity, Task,
};
use crate::error::{domain_err, Result};
use crate::numerics::{derive_seed, rng_from_seed, RngStream};

/// Dementia label attached to synthetic class `c`.
pub const SYNTHETIC_DEMENTIA: [Dementia; 4] = [
    Dementia::NonDementia,
    Dementia::Ad,
    Dementia::OtherDementia,
    Dementia::OtherDementia,
];

/// Gaussian clusters around scaled one-hot means `separation·σ·e_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub n_per_class: usize,
    pub dim: usize,
    /// Distance of each class mean from the origin, in units of `noise_sigma`.
    pub cluster_separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Prefix for generated case ids; lets several splits coexist.
    #[serde(default = "default_prefix")]
    pub id_prefix: String,
}

fn default_prefix() -> String {
    "syn".to_string()
}

impl SyntheticSpec {
    pub fn new(n_classes: usize, n_per_class: usize, dim: usize, separation: f64, seed: u64) -> Self {
        SyntheticSpec {
            n_classes,
            n_per_class,
            dim,
            cluster_separation: separation,
            noise_sigma: 1.0,
            seed,
            id_prefix: default_prefix(),
        }
    }

    pub fn with_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.id_prefix = prefix.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.n_classes) {
            return domain_err(format!(
                "n_classes must be between 2 and 4 (one per abnormality label), got {}",
                self.n_classes
            ));
        }
        if self.n_per_class == 0 {
            return domain_err("n_per_class must be >= 1");
        }
        if self.dim < 2 || self.dim < self.n_classes {
            return domain_err(format!(
                "dim must be >= max(2, n_classes), got {}",
                self.dim
            ));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return domain_err("noise_sigma must be positive and finite");
        }
        if !(self.cluster_separation >= 0.0 && self.cluster_separation.is_finite()) {
            return domain_err("cluster_separation must be non-negative and finite");
        }
        Ok(())
    }

    /// Mean of class `c`.
    pub fn class_mean(&self, c: usize) -> Embedding {
        let mut m = vec![0.0; self.dim];
        m[c] = self.cluster_separation * self.noise_sigma;
        m
    }
}

fn gaussian(rng: &mut RngStream, center: &[f64], sigma: f64) -> Embedding {
    center
        .iter()
        .map(|&c| {
            let z: f64 = rng.sample(StandardNormal);
            quantize(c + sigma * z)
        })
        .collect()
}

/// Gaussian noise on the coordinates in `axes` only.
fn gaussian_on(
    rng: &mut RngStream,
    center: &[f64],
    sigma: f64,
    axes: std::ops::Range<usize>,
) -> Embedding {
    center
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if axes.contains(&i) {
                let z: f64 = rng.sample(StandardNormal);
                quantize(c + sigma * z)
            } else {
                c
            }
        })
        .collect()
}

/// Rounds through `f32` so embeddings survive the blob format bit-for-bit.
fn quantize(v: f64) -> f64 {
    f64::from(v as f32)
}

fn sum(vectors: &[Embedding]) -> Embedding {
    let mut out = vec![0.0; vectors[0].len()];
    for v in vectors {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    out
}

/// Anchor sets whose embeddings are the exact class means (or sums of the
/// means a coarser label covers). Requires `dim >= 4`.
fn synthetic_anchors(spec: &SyntheticSpec) -> Result<Vec<AnchorSet>> {
    let means: Vec<Embedding> = (0..4).map(|c| spec.class_mean(c)).collect();
    let dementia_anchor = |d: Dementia| {
        let members: Vec<Embedding> = (0..4)
            .filter(|&c| SYNTHETIC_DEMENTIA[c] == d)
            .map(|c| means[c].clone())
            .collect();
        sum(&members)
    };
    Ok(vec![
        AnchorSet::new(Task::Abnormality, means.clone())?,
        AnchorSet::new(
            Task::BinaryDementia,
            vec![means[0].clone(), sum(&means[1..])],
        )?,
        AnchorSet::new(
            Task::DementiaType,
            Dementia::ALL.iter().map(|&d| dementia_anchor(d)).collect(),
        )?,
        AnchorSet::new(Task::Severity, means)?,
    ])
}

/// Generates `n_classes × n_per_class` cases. Every embedding of a case is
/// its class mean plus independent `N(0, σ²)` noise per coordinate.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut cases = Vec::with_capacity(spec.n_classes * spec.n_per_class);
    let labels = Abnormality::ALL.iter().zip(SYNTHETIC_DEMENTIA);
    for (c, (&abnormality, dementia)) in labels.enumerate().take(spec.n_classes) {
        let mean = spec.class_mean(c);
        let texts = pseudo_text(abnormality, dementia);
        for i in 0..spec.n_per_class {
            cases.push(ReferenceCase {
                id: format!("{}-c{c}-{i:04}", spec.id_prefix),
                image: gaussian(&mut rng, &mean, spec.noise_sigma),
                abn_text: gaussian(&mut rng, &mean, spec.noise_sigma),
                dx_text: gaussian(&mut rng, &mean, spec.noise_sigma),
                desc_text: gaussian(&mut rng, &mean, spec.noise_sigma),
                abnormality,
                dementia,
                severity: Some(Severity::ALL[c]),
                description: texts.combined.clone(),
            });
        }
    }
    let anchors = if spec.dim >= 4 {
        synthetic_anchors(spec)?
    } else {
        Vec::new()
    };
    Corpus::new(
        spec.dim,
        cases,
        anchors,
        format!(
            "synthetic: {} classes x {} cases, dim {}, separation {} sigma, sigma {}, seed {}",
            spec.n_classes, spec.n_per_class, spec.dim, spec.cluster_separation, spec.noise_sigma, spec.seed
        ),
    )
}

/// A query embedding with its class index. `exclude` names a corpus case
/// that must not be retrieved for it (the query's own reference entry).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledQuery {
    pub embedding: Embedding,
    pub label: usize,
    pub exclude: Option<usize>,
}

impl LabeledQuery {
    /// Every case of `corpus` that carries a `task` label, used as a
    /// leave-one-out query against the same corpus.
    pub fn from_corpus(corpus: &Corpus, task: Task) -> Vec<LabeledQuery> {
        corpus
            .cases()
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                c.label_for(task).map(|label| LabeledQuery {
                    embedding: c.image.clone(),
                    label,
                    exclude: Some(i),
                })
            })
            .collect()
    }

    /// Cases of a disjoint corpus used as plain queries.
    pub fn external(corpus: &Corpus, task: Task) -> Vec<LabeledQuery> {
        corpus
            .cases()
            .iter()
            .filter_map(|c| {
                c.label_for(task).map(|label| LabeledQuery {
                    embedding: c.image.clone(),
                    label,
                    exclude: None,
                })
            })
            .collect()
    }
}

pub type ContextQuery = LabeledQuery;

/// A task where the query alone is a poor predictor of its class.
///
/// Images sit on `n_clusters` points of a circle in the first two
/// coordinates; each cluster is assigned a class by a seeded balanced
/// shuffle, so the class is a scrambled function of angle. Reference text
/// embeddings (and a weak signature in reference images) encode the class
/// on dedicated axes `2..2+n_classes` that queries never carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextTaskSpec {
    pub n_classes: usize,
    pub n_clusters: usize,
    pub dim: usize,
    pub refs_per_cluster: usize,
    pub val_per_cluster: usize,
    pub test_per_cluster: usize,
    pub radius: f64,
    pub image_noise: f64,
    pub image_signature: f64,
    pub text_signal: f64,
    pub text_noise: f64,
    pub seed: u64,
}

impl Default for ContextTaskSpec {
    fn default() -> Self {
        ContextTaskSpec {
            n_classes: 4,
            n_clusters: 32,
            dim: 16,
            refs_per_cluster: 4,
            val_per_cluster: 2,
            test_per_cluster: 8,
            radius: 10.0,
            image_noise: 0.3,
            image_signature: 1.0,
            text_signal: 1.0,
            text_noise: 1.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContextTask {
    pub references: Corpus,
    /// One leave-one-out query per reference case.
    pub train: Vec<LabeledQuery>,
    pub val: Vec<LabeledQuery>,
    pub test: Vec<LabeledQuery>,
    pub cluster_classes: Vec<usize>,
}

pub fn generate_context_task(spec: &ContextTaskSpec) -> Result<ContextTask> {
    if !(2..=4).contains(&spec.n_classes) {
        return domain_err("context task needs 2..=4 classes");
    }
    if spec.n_clusters < spec.n_classes || !spec.n_clusters.is_multiple_of(spec.n_classes) {
        return domain_err("n_clusters must be a positive multiple of n_classes");
    }
    if spec.dim < 2 + spec.n_classes {
        return domain_err("dim must leave room for the class axes");
    }
    if spec.refs_per_cluster < 2 {
        return domain_err("refs_per_cluster must be >= 2 for leave-one-out queries");
    }
    let mut rng = rng_from_seed(spec.seed);
    let mut cluster_classes: Vec<usize> = (0..spec.n_clusters).map(|j| j % spec.n_classes).collect();
    cluster_classes.shuffle(&mut rng);

    let centers: Vec<Embedding> = (0..spec.n_clusters)
        .map(|j| {
            let theta = TAU * j as f64 / spec.n_clusters as f64;
            let mut c = vec![0.0; spec.dim];
            c[0] = spec.radius * theta.cos();
            c[1] = spec.radius * theta.sin();
            c
        })
        .collect();
    let class_axis = |c: usize, scale: f64| {
        let mut v = vec![0.0; spec.dim];
        v[2 + c] = scale;
        v
    };

    let class_axes = 2..2 + spec.n_classes;
    let mut cases = Vec::new();
    let mut train = Vec::new();
    for (j, center) in centers.iter().enumerate() {
        let class = cluster_classes[j];
        let abnormality = Abnormality::ALL[class];
        let dementia = SYNTHETIC_DEMENTIA[class];
        for i in 0..spec.refs_per_cluster {
            let query_view = gaussian(&mut rng, center, spec.image_noise);
            let image: Embedding = query_view
                .iter()
                .zip(class_axis(class, spec.image_signature))
                .map(|(q, s)| quantize(q + s))
                .collect();
            let text_mean = class_axis(class, spec.text_signal);
            train.push(LabeledQuery {
                embedding: query_view,
                label: class,
                exclude: Some(cases.len()),
            });
            cases.push(ReferenceCase {
                id: format!("ctx-k{j:02}-{i:03}"),
                image,
                abn_text: gaussian_on(&mut rng, &text_mean, spec.text_noise, class_axes.clone()),
                dx_text: gaussian_on(&mut rng, &text_mean, spec.text_noise, class_axes.clone()),
                desc_text: gaussian_on(&mut rng, &text_mean, spec.text_noise, class_axes.clone()),
                abnormality,
                dementia,
                severity: Some(Severity::ALL[class]),
                description: pseudo_text(abnormality, dementia).combined,
            });
        }
    }

    let held_out = |per_cluster: usize, stream: u64| {
        let mut rng = rng_from_seed(derive_seed(spec.seed, stream));
        let mut out = Vec::new();
        for (j, center) in centers.iter().enumerate() {
            for _ in 0..per_cluster {
                out.push(LabeledQuery {
                    embedding: gaussian(&mut rng, center, spec.image_noise),
                    label: cluster_classes[j],
                    exclude: None,
                });
            }
        }
        out
    };
    let val = held_out(spec.val_per_cluster, 1);
    let test = held_out(spec.test_per_cluster, 2);

    let references = Corpus::new(
        spec.dim,
        cases,
        Vec::new(),
        format!("context task: {} clusters, seed {}", spec.n_clusters, spec.seed),
    )?;
    Ok(ContextTask {
        references,
        train,
        val,
        test,
        cluster_classes,
    })
}
