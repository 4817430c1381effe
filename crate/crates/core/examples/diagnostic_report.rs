//! End-to-end report for one query: retrieve, attend, assemble, render.
//! Pass `example` to print the built-in fixture instead.

use std::time::Instant;

use refdx::corpus::{generate_synthetic, SyntheticSpec, Task};
use refdx::evidence::{AblationMask, EvidenceModel, HIDDEN_WIDTH};
use refdx::numerics::rng_from_seed;
use refdx::report::{
    assemble, example_report, AlphaSource, render_json, render_text, PredictionSet, ReportMetadata,
};
use refdx::retrieval::top_k;
use refdx::zeroshot::predict_all;

fn main() -> refdx::Result<()> {
    if std::env::args().nth(1).as_deref() == Some("example") {
        print!("{}", render_text(&example_report()));
        return Ok(());
    }
    let refs = generate_synthetic(&SyntheticSpec::new(2, 85, 512, 6.0, 5))?;
    let query = generate_synthetic(&SyntheticSpec::new(2, 1, 512, 6.0, 6).with_prefix("q"))?;
    let q = &query.cases()[1].image;
    // untrained head; its attention still weights the rows
    let model = EvidenceModel::new(
        512,
        Task::Abnormality,
        3,
        HIDDEN_WIDTH,
        AblationMask::FULL,
        &mut rng_from_seed(5),
    )?;

    let start = Instant::now();
    let hits = top_k(q, &refs, 3)?;
    let pred = model.infer(q, &hits, &refs)?;
    let set = PredictionSet::from_zero_shot(&predict_all(q, refs.anchors())?)?;
    let alpha = pred.alpha.clone().expect("full mask attends");
    let metadata = ReportMetadata {
        alpha_source: AlphaSource::Attention,
        ..ReportMetadata::new("synthetic-170", "none", 3)
    };
    let report = assemble(set, &hits, &alpha, &refs, metadata)?;
    let text = render_text(&report);
    let json = render_json(&report)?;
    let elapsed = start.elapsed();

    print!("{text}");
    println!("\n{} bytes of JSON, built in {:.2} ms", json.len(), elapsed.as_secs_f64() * 1e3);
    Ok(())
}
