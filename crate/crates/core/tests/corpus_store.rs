mod common;

use std::fs;
use std::path::{Path, PathBuf};

use refdx::corpus::{
    abnormality_text, dementia_text, generate_synthetic, load_corpus, pseudo_text, save_index,
    severity_text, Abnormality, ClassLabel, Corpus, Dementia, Severity, SyntheticSpec,
};
use refdx::error::LoadError;
use refdx::Error;
use tempfile::TempDir;

fn paths(dir: &TempDir, stem: &str) -> (PathBuf, PathBuf) {
    (dir.path().join(format!("{stem}.json")), dir.path().join(format!("{stem}.bin")))
}

fn save(corpus: &Corpus, dir: &TempDir, stem: &str) -> (PathBuf, PathBuf) {
    let (m, b) = paths(dir, stem);
    save_index(corpus, &m, &b).unwrap();
    (m, b)
}

/// Rounds every embedding to binary32 so the on-disk precision is lossless.
fn f32_exact(corpus: &Corpus) -> Corpus {
    corpus
        .map_embeddings(corpus.dim(), |_, v| Ok(v.iter().map(|&x| x as f32 as f64).collect()))
        .unwrap()
}

fn sample() -> Corpus {
    generate_synthetic(&SyntheticSpec::new(4, 5, 8, 6.0, 21)).unwrap()
}

fn blob_header(count: u32, dim: u32) -> Vec<u8> {
    let mut out = b"REMB".to_vec();
    for w in [1u32, count, dim] {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

#[test]
fn round_trip_is_bit_identical() {
    let dir = TempDir::new().unwrap();
    let corpus = f32_exact(&sample());
    let (m, b) = save(&corpus, &dir, "c");
    let back = load_corpus(&m, &b).unwrap();
    assert_eq!(back.len(), corpus.len());
    for (x, y) in corpus.cases().iter().zip(back.cases()) {
        assert_eq!(x.id, y.id);
        for (u, v) in x.modalities().iter().zip(y.modalities()) {
            let ub: Vec<u64> = u.iter().map(|f| f.to_bits()).collect();
            let vb: Vec<u64> = v.iter().map(|f| f.to_bits()).collect();
            assert_eq!(ub, vb);
        }
        assert_eq!((x.abnormality, x.dementia, x.severity), (y.abnormality, y.dementia, y.severity));
    }
    assert_eq!(corpus.anchors(), back.anchors());
}

#[test]
fn truncated_blob_names_the_case() {
    let dir = TempDir::new().unwrap();
    let corpus = sample();
    let (m, b) = save(&corpus, &dir, "c");
    let mut bytes = fs::read(&b).unwrap();
    // cut into the anchor rows: drop everything after the last case, minus a byte
    let row_bytes = corpus.dim() * 4;
    bytes.truncate(16 + corpus.len() * 4 * row_bytes - 1);
    fs::write(&b, bytes).unwrap();
    let err = load_corpus(&m, &b).unwrap_err();
    let last = &corpus.cases().last().unwrap().id;
    match &err {
        Error::Load(LoadError::Truncated { case_id, .. }) => assert_eq!(case_id, last),
        other => panic!("unexpected error {other:?}"),
    }
    assert!(err.to_string().contains(last.as_str()));
}

#[test]
fn dim_mismatch_is_reported() {
    let dir = TempDir::new().unwrap();
    let (m, b) = save(&sample(), &dir, "c");
    let text = fs::read_to_string(&m).unwrap().replacen("\"dim\": 8", "\"dim\": 7", 1);
    fs::write(&m, text).unwrap();
    assert!(matches!(
        load_corpus(&m, &b),
        Err(Error::Load(LoadError::DimMismatch { manifest: 7, blob: 8 }))
    ));
}

fn write_fixture(dir: &Path, dim: usize, ids: &[&str], extra: &str) -> (PathBuf, PathBuf) {
    let cases: Vec<String> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            format!(
                r#"{{"id": "{id}", "abnormality": "wmh", "dementia": "ad", "description": "case {i}", "row": {}{extra}}}"#,
                4 * i
            )
        })
        .collect();
    let manifest = format!(
        r#"{{"version": 1, "dim": {dim}, "cases": [{}], "anchors": [], "site": "x"}}"#,
        cases.join(", ")
    );
    let rows = 4 * ids.len();
    let mut blob = blob_header(rows as u32, dim as u32);
    for r in 0..rows {
        for j in 0..dim {
            blob.extend_from_slice(&((r * dim + j) as f32 * 0.5).to_le_bytes());
        }
    }
    let m = dir.join("fixture.json");
    let b = dir.join("fixture.bin");
    fs::write(&m, manifest).unwrap();
    fs::write(&b, blob).unwrap();
    (m, b)
}

#[test]
fn handwritten_512_dim_fixture() {
    let dir = TempDir::new().unwrap();
    let (m, b) = write_fixture(dir.path(), 512, &["a", "b", "c"], "");
    let corpus = load_corpus(&m, &b).unwrap();
    assert_eq!(corpus.len(), 3);
    assert_eq!(corpus.dim(), 512);
    for case in corpus.cases() {
        for e in case.modalities() {
            assert_eq!(e.len(), 512);
        }
        assert_eq!(case.abnormality, Abnormality::Wmh);
        assert_eq!(case.dementia, Dementia::Ad);
    }
    // case b, dx row = 4*1 + 2 = 6
    assert_eq!(corpus.cases()[1].dx_text[3], (6 * 512 + 3) as f64 * 0.5);
}

#[test]
fn duplicate_ids_are_rejected() {
    let dir = TempDir::new().unwrap();
    let (m, b) = write_fixture(dir.path(), 2, &["a", "b", "a"], "");
    assert!(matches!(
        load_corpus(&m, &b),
        Err(Error::Load(LoadError::DuplicateId(id))) if id == "a"
    ));
}

#[test]
fn unknown_fields_are_ignored() {
    let dir = TempDir::new().unwrap();
    let (m, b) = write_fixture(dir.path(), 3, &["a", "b"], r#", "scanner": "3T""#);
    assert_eq!(load_corpus(&m, &b).unwrap().len(), 2);
}

#[test]
fn bad_magic_is_rejected() {
    let dir = TempDir::new().unwrap();
    let (m, b) = write_fixture(dir.path(), 2, &["a"], "");
    let mut bytes = fs::read(&b).unwrap();
    bytes[0] = b'X';
    fs::write(&b, bytes).unwrap();
    assert!(matches!(load_corpus(&m, &b), Err(Error::Load(LoadError::BadMagic))));
}

#[test]
fn saving_twice_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let corpus = sample();
    let (m1, b1) = save(&corpus, &dir, "one");
    let (m2, b2) = save(&corpus, &dir, "two");
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
    assert_eq!(fs::read(&b1).unwrap(), fs::read(&b2).unwrap());
}

#[test]
fn save_load_save_is_a_fixed_point() {
    let dir = TempDir::new().unwrap();
    let corpus = sample();
    let (m1, b1) = save(&corpus, &dir, "one");
    let loaded = load_corpus(&m1, &b1).unwrap();
    let (m2, b2) = save(&loaded, &dir, "two");
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
    assert_eq!(fs::read(&b1).unwrap(), fs::read(&b2).unwrap());
}

#[test]
fn empty_corpus_saves_a_header_only_blob() {
    let dir = TempDir::new().unwrap();
    let corpus = Corpus::new(16, vec![], vec![], "empty").unwrap();
    let (m, b) = save(&corpus, &dir, "empty");
    assert_eq!(fs::read(&b).unwrap(), blob_header(0, 16));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(&m).unwrap()).unwrap();
    assert_eq!(manifest["cases"].as_array().unwrap().len(), 0);
    assert!(load_corpus(&m, &b).unwrap().is_empty());
}

#[test]
fn template_sentences_match_golden_file() {
    let golden = include_str!("golden/pseudo_texts.txt");
    let mut produced: Vec<&str> = Vec::new();
    produced.extend(Abnormality::ALL.iter().map(|&l| abnormality_text(l)));
    produced.extend(Dementia::ALL.iter().map(|&l| dementia_text(l)));
    produced.extend(Severity::ALL.iter().map(|&l| severity_text(l)));
    assert_eq!(golden.lines().collect::<Vec<_>>(), produced);
}

#[test]
fn combined_text_joins_with_one_space() {
    let t = pseudo_text(Abnormality::Normal, Dementia::NonDementia);
    assert_eq!(
        t.combined,
        "MRI image shows normal brain without evidence of significant structures or pathological \
         changes. MRI image presents no evident dementia-related structural changes, reflecting a \
         normal cognitive state."
    );
}

#[test]
fn synthetic_clusters_are_nearest_centroid_separable() {
    let spec = SyntheticSpec::new(4, 250, 32, 6.0, 5);
    let corpus = generate_synthetic(&spec).unwrap();
    let centroids: Vec<Vec<f64>> = (0..4).map(|c| spec.class_mean(c)).collect();
    let correct = corpus
        .cases()
        .iter()
        .filter(|c| common::nearest_centroid(&c.image, &centroids) == c.abnormality.index())
        .count();
    let acc = correct as f64 / corpus.len() as f64;
    assert!(acc >= 0.99, "nearest-centroid accuracy {acc}");
}

#[test]
fn synthetic_generation_is_a_pure_function_of_the_spec() {
    let spec = SyntheticSpec::new(4, 10, 8, 6.0, 9);
    let a = generate_synthetic(&spec).unwrap();
    assert_eq!(a.len(), 40);
    assert_eq!(a, generate_synthetic(&spec).unwrap());
    assert_ne!(a, generate_synthetic(&SyntheticSpec { seed: 10, ..spec }).unwrap());
}
