//! Manifest (JSON) + embedding blob (`REMB`) persistence.
//!
//! Blob layout, all little-endian:
//!
//! ```text
//! "REMB" | version: u32 | count: u32 | dim: u32 | count*dim f32 values, row-major
//! ```
//!
//! Each case occupies four consecutive rows (image, abnormality, dementia,
//! description); anchor rows follow the cases.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::warn;

use crate::corpus::{
    Abnormality, AnchorSet, Corpus, Dementia, ReferenceCase, Severity, Task,
};
use crate::error::{Error, LoadError, Result};

pub const BLOB_MAGIC: &[u8; 4] = b"REMB";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    dim: usize,
    #[serde(default)]
    provenance: String,
    cases: Vec<CaseRecord>,
    #[serde(default)]
    anchors: Vec<AnchorRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CaseRecord {
    id: String,
    abnormality: String,
    dementia: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    severity: Option<String>,
    description: String,
    row: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnchorRecord {
    task: Task,
    classes: Vec<String>,
    rows: Vec<usize>,
}

const MANIFEST_KEYS: &[&str] = &["version", "dim", "provenance", "cases", "anchors"];
const CASE_KEYS: &[&str] = &["id", "abnormality", "dementia", "severity", "description", "row"];
const ANCHOR_KEYS: &[&str] = &["task", "classes", "rows"];

fn warn_unknown(value: &Value, known: &[&str], context: &str, reported: &mut BTreeSet<String>) {
    if let Some(obj) = value.as_object() {
        for key in obj.keys() {
            if !known.contains(&key.as_str()) {
                let tag = format!("{context}.{key}");
                if reported.insert(tag.clone()) {
                    warn!(field = %tag, "ignoring unknown manifest field");
                }
            }
        }
    }
}

fn label<T: std::str::FromStr<Err = Error>>(s: &str, field: &'static str) -> Result<T> {
    s.parse::<T>().map_err(|_| {
        LoadError::UnknownLabel {
            field,
            label: s.to_string(),
        }
        .into()
    })
}

/// Parses the blob header and returns `(declared_rows, complete_rows, values)`.
fn read_blob(bytes: &[u8], manifest_dim: usize) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != BLOB_MAGIC {
        return Err(LoadError::BadMagic.into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(LoadError::UnsupportedVersion {
            what: "blob",
            found: version,
            expected: FORMAT_VERSION,
        }
        .into());
    }
    let declared = word(8) as usize;
    let dim = word(12) as usize;
    if dim != manifest_dim {
        return Err(LoadError::DimMismatch {
            manifest: manifest_dim,
            blob: dim,
        }
        .into());
    }
    let payload = &bytes[HEADER_LEN..];
    let row_bytes = dim * 4;
    // Only complete rows are usable; a short payload is reported against the
    // first record that reaches past it.
    let complete = payload
        .len()
        .checked_div(row_bytes)
        .map_or(declared, |rows| rows.min(declared));
    if payload.len() > declared * row_bytes {
        warn!(
            extra = payload.len() - declared * row_bytes,
            "embedding blob has trailing bytes"
        );
    }
    let values = payload[..complete * row_bytes]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((declared, complete, values))
}

fn row_vec(values: &[f32], dim: usize, row: usize) -> Vec<f64> {
    values[row * dim..(row + 1) * dim]
        .iter()
        .map(|&v| f64::from(v))
        .collect()
}

/// Reads a manifest + blob pair into a validated [`Corpus`].
pub fn load_corpus(manifest_path: impl AsRef<Path>, blob_path: impl AsRef<Path>) -> Result<Corpus> {
    let manifest_path = manifest_path.as_ref();
    let blob_path = blob_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let raw: Value = serde_json::from_str(&text)?;
    let mut reported = BTreeSet::new();
    warn_unknown(&raw, MANIFEST_KEYS, "manifest", &mut reported);
    if let Some(cases) = raw.get("cases").and_then(Value::as_array) {
        for c in cases {
            warn_unknown(c, CASE_KEYS, "cases[]", &mut reported);
        }
    }
    if let Some(anchors) = raw.get("anchors").and_then(Value::as_array) {
        for a in anchors {
            warn_unknown(a, ANCHOR_KEYS, "anchors[]", &mut reported);
        }
    }
    let manifest: Manifest = serde_json::from_value(raw)?;
    if manifest.version != FORMAT_VERSION {
        return Err(LoadError::UnsupportedVersion {
            what: "manifest",
            found: manifest.version,
            expected: FORMAT_VERSION,
        }
        .into());
    }
    let bytes = fs::read(blob_path).map_err(|e| Error::io(blob_path, e))?;
    let dim = manifest.dim;
    let (declared, rows, values) = read_blob(&bytes, dim)?;

    let check_rows = |owner: &str, first: usize, n: usize| -> Result<()> {
        let needed = first + n;
        if needed > declared {
            return Err(LoadError::RowOutOfRange {
                owner: owner.to_string(),
                row: needed - 1,
                count: declared,
            }
            .into());
        }
        if needed > rows {
            return Err(LoadError::Truncated {
                case_id: owner.to_string(),
                needed,
                available: rows,
            }
            .into());
        }
        Ok(())
    };

    let mut seen = HashSet::new();
    let mut cases = Vec::with_capacity(manifest.cases.len());
    for rec in &manifest.cases {
        if !seen.insert(rec.id.as_str()) {
            return Err(LoadError::DuplicateId(rec.id.clone()).into());
        }
        check_rows(&rec.id, rec.row, 4)?;
        let embeddings: Vec<Vec<f64>> = (0..4).map(|j| row_vec(&values, dim, rec.row + j)).collect();
        if embeddings.iter().flatten().any(|v| !v.is_finite()) {
            return Err(LoadError::NonFinite(format!("case `{}`", rec.id)).into());
        }
        let mut it = embeddings.into_iter();
        cases.push(ReferenceCase {
            id: rec.id.clone(),
            image: it.next().expect("4 rows"),
            abn_text: it.next().expect("4 rows"),
            dx_text: it.next().expect("4 rows"),
            desc_text: it.next().expect("4 rows"),
            abnormality: label::<Abnormality>(&rec.abnormality, "abnormality")?,
            dementia: label::<Dementia>(&rec.dementia, "dementia")?,
            severity: rec
                .severity
                .as_deref()
                .map(|s| label::<Severity>(s, "severity"))
                .transpose()?,
            description: rec.description.clone(),
        });
    }

    let mut anchors = Vec::with_capacity(manifest.anchors.len());
    for rec in &manifest.anchors {
        let owner = format!("anchors:{}", rec.task);
        if rec.rows.len() != rec.task.arity() {
            return Err(LoadError::AnchorArity {
                task: rec.task.to_string(),
                found: rec.rows.len(),
                expected: rec.task.arity(),
            }
            .into());
        }
        let expected = rec.task.class_keys();
        if rec.classes.len() != expected.len()
            || rec.classes.iter().zip(&expected).any(|(a, b)| a != b)
        {
            return Err(Error::Domain(format!(
                "{owner}: classes {:?} are not the canonical order {expected:?}",
                rec.classes
            )));
        }
        let mut emb = Vec::with_capacity(rec.rows.len());
        for &row in &rec.rows {
            check_rows(&owner, row, 1)?;
            let v = row_vec(&values, dim, row);
            if v.iter().any(|x| !x.is_finite()) {
                return Err(LoadError::NonFinite(owner.clone()).into());
            }
            emb.push(v);
        }
        anchors.push(AnchorSet::new(rec.task, emb)?);
    }

    Corpus::new(dim, cases, anchors, manifest.provenance)
}

/// Writes `corpus` as a manifest + blob pair. Output bytes are a pure
/// function of the corpus.
pub fn save_index(
    corpus: &Corpus,
    manifest_path: impl AsRef<Path>,
    blob_path: impl AsRef<Path>,
) -> Result<()> {
    let dim = corpus.dim();
    let mut rows: Vec<&[f64]> = Vec::new();
    let mut case_records = Vec::with_capacity(corpus.len());
    for case in corpus.cases() {
        case_records.push(CaseRecord {
            id: case.id.clone(),
            abnormality: crate::corpus::ClassLabel::key(case.abnormality).to_string(),
            dementia: crate::corpus::ClassLabel::key(case.dementia).to_string(),
            severity: case
                .severity
                .map(|s| crate::corpus::ClassLabel::key(s).to_string()),
            description: case.description.clone(),
            row: rows.len(),
        });
        rows.extend(case.modalities());
    }
    let mut anchor_records = Vec::with_capacity(corpus.anchors().len());
    for set in corpus.anchors() {
        let first = rows.len();
        rows.extend(set.embeddings().iter().map(Vec::as_slice));
        anchor_records.push(AnchorRecord {
            task: set.task(),
            classes: set.classes().into_iter().map(String::from).collect(),
            rows: (first..rows.len()).collect(),
        });
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        dim,
        provenance: corpus.provenance().to_string(),
        cases: case_records,
        anchors: anchor_records,
    };

    let mut blob = Vec::with_capacity(HEADER_LEN + rows.len() * dim * 4);
    blob.extend_from_slice(BLOB_MAGIC);
    blob.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    blob.extend_from_slice(&u32::try_from(rows.len()).map_err(|_| Error::Domain("too many rows".into()))?.to_le_bytes());
    blob.extend_from_slice(&u32::try_from(dim).map_err(|_| Error::Domain("dimension too large".into()))?.to_le_bytes());
    for row in rows {
        for &v in row {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }

    let manifest_path = manifest_path.as_ref();
    let blob_path = blob_path.as_ref();
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(manifest_path, json).map_err(|e| Error::io(manifest_path, e))?;
    fs::write(blob_path, blob).map_err(|e| Error::io(blob_path, e))?;
    Ok(())
}
