//! Ablation on a task whose labels are only readable from reference texts.
//! Removing the evidence path should cost far more than any one modality.

use refdx::corpus::{generate_context_task, ContextTaskSpec};
use refdx::eval::{run_ablation, Splits};
use refdx::evidence::{prepare_examples, AblationMask, HeadConfig};

fn main() -> refdx::Result<()> {
    let task = generate_context_task(&ContextTaskSpec { seed: 3, ..ContextTaskSpec::default() })?;
    let refs = &task.references;
    let head = HeadConfig { k: 3, ..HeadConfig::default() };
    let train = prepare_examples(&task.train, refs, head.k)?;
    let val = prepare_examples(&task.val, refs, head.k)?;
    let test = prepare_examples(&task.test, refs, head.k)?;
    let splits = Splits { train: &train, val: &val, test: &test, corpus: refs };

    let report = run_ablation(splits, &head, &AblationMask::standard_variants(), 3, 3)?;
    println!("{:<20} {:>8} {:>8}", "variant", "f1", "delta");
    for v in &report.variants {
        println!("{:<20} {:>8.4} {:>+8.4}", v.name, v.mean.f1, v.delta.f1);
    }
    Ok(())
}
