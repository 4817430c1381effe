//! Generate a clustered synthetic corpus, write it as an index and read it back.
//!
//!     cargo run --example synthetic_index -- /tmp/refdx-index

use std::path::PathBuf;

use refdx::corpus::{generate_synthetic, load_corpus, save_index, ClassLabel, SyntheticSpec};

fn main() -> refdx::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("refdx-index"));
    std::fs::create_dir_all(&dir).map_err(|e| refdx::Error::io(&dir, e))?;

    let spec = SyntheticSpec::new(4, 25, 32, 6.0, 7);
    let corpus = generate_synthetic(&spec)?;
    let (manifest, blob) = (dir.join("corpus.json"), dir.join("corpus.bin"));
    save_index(&corpus, &manifest, &blob)?;

    let back = load_corpus(&manifest, &blob)?;
    println!("wrote {} cases of dim {} to {}", back.len(), back.dim(), dir.display());
    for case in back.cases().iter().step_by(25) {
        println!("  {:<14} {:<14} {}", case.id, case.abnormality.key(), case.dementia.key());
    }
    println!("anchor sets: {}", back.anchors().len());
    assert_eq!(back.len(), corpus.len());
    Ok(())
}
