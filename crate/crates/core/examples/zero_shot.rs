//! Zero-shot classification against text anchors, with the binary label
//! derived from the abnormality prediction.

use refdx::corpus::{generate_synthetic, SyntheticSpec, Task};
use refdx::zeroshot::{predict_all, zero_shot_accuracy};

fn main() -> refdx::Result<()> {
    let corpus = generate_synthetic(&SyntheticSpec::new(4, 50, 32, 6.0, 3))?;
    for task in [Task::Abnormality, Task::DementiaType, Task::BinaryDementia] {
        println!("{task}: accuracy {:.3}", zero_shot_accuracy(&corpus, task)?);
    }

    let case = &corpus.cases()[60];
    let zs = predict_all(&case.image, corpus.anchors())?;
    println!("\nquery {} (truth {:?})", case.id, case.abnormality);
    println!("  abnormality  {} {:.3?}", zs.abnormality.predicted_key(), zs.abnormality.probs);
    println!("  dementia     {} {:.3?}", zs.dementia_type.predicted_key(), zs.dementia_type.probs);
    println!("  binary       {:?} p={:.3}", zs.binary.label, zs.binary.p_dementia);
    Ok(())
}
