//! Exact cosine top-k search over a reference corpus.

use refdx::corpus::{generate_synthetic, ClassLabel, SyntheticSpec};
use refdx::retrieval::{top_k, top_k_excluding};

fn main() -> refdx::Result<()> {
    let refs = generate_synthetic(&SyntheticSpec::new(4, 40, 16, 4.0, 11))?;
    let queries = generate_synthetic(&SyntheticSpec::new(4, 2, 16, 4.0, 12).with_prefix("q"))?;

    for q in queries.cases() {
        let hits = top_k(&q.image, &refs, 5)?;
        let labels: Vec<String> = hits
            .iter()
            .map(|h| format!("{}:{:.2}", refs.cases()[h.index].abnormality.key(), h.sim))
            .collect();
        println!("{:<8} {:<14} -> {}", q.id, q.abnormality.key(), labels.join("  "));
    }

    // a reference used as its own query must not retrieve itself
    let own = &refs.cases()[0];
    let hits = top_k_excluding(&own.image, &refs, 3, Some(0))?;
    assert!(hits.iter().all(|h| h.index != 0));
    println!("\nleave-one-out for {}: {:?}", own.id, hits.iter().map(|h| &h.case_id).collect::<Vec<_>>());
    Ok(())
}
