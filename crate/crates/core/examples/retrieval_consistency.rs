//! How often retrieved neighbours share the query's label, and how the
//! similarities of matching and mismatching neighbours are distributed.

use refdx::corpus::{generate_synthetic, SyntheticSpec, Task};
use refdx::eval::{retrieval_consistency, similarity_distribution};

fn main() -> refdx::Result<()> {
    for sep in [1.0, 3.0, 6.0] {
        let refs = generate_synthetic(&SyntheticSpec::new(4, 50, 32, sep, 1))?;
        let test = generate_synthetic(&SyntheticSpec::new(4, 25, 32, sep, 2).with_prefix("q"))?;
        let curve = retrieval_consistency(&refs, &test, 5)?;
        let f1: Vec<String> = curve.abnormality.iter().map(|p| format!("{:.3}", p.f1)).collect();
        let dist = similarity_distribution(&refs, &test, refs.len(), Task::Abnormality)?;
        println!(
            "{sep}σ  F1@k=1..5 [{}]  mean sim match {:.3} mismatch {:.3}",
            f1.join(", "),
            dist.matched.mean.unwrap_or(f64::NAN),
            dist.mismatched.mean.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
