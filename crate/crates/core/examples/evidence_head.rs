//! Train the evidence encoder and attention head on retrieved neighbours,
//! then look at one prediction and its attention weights.

use refdx::corpus::{generate_synthetic, LabeledQuery, SyntheticSpec, Task};
use refdx::eval::metrics_for_task;
use refdx::evidence::{prepare_examples, train_head, HeadConfig};
use refdx::retrieval::top_k;

fn main() -> refdx::Result<()> {
    let spec = |n, seed, prefix: &str| SyntheticSpec::new(4, n, 32, 5.0, seed).with_prefix(prefix);
    let refs = generate_synthetic(&spec(200, 1, "ref"))?;
    let val = generate_synthetic(&spec(100, 2, "val"))?;
    let test = generate_synthetic(&spec(100, 3, "test"))?;

    let task = Task::Abnormality;
    let config = HeadConfig { k: 3, ..HeadConfig::default() };
    let train_ex = prepare_examples(&LabeledQuery::from_corpus(&refs, task), &refs, config.k)?;
    let val_ex = prepare_examples(&LabeledQuery::external(&val, task), &refs, config.k)?;
    let test_ex = prepare_examples(&LabeledQuery::external(&test, task), &refs, config.k)?;

    let (model, history) = train_head(&train_ex, &val_ex, &refs, &config)?;
    println!(
        "trained {} epochs (best {}, early stop {}), val loss {:.4} -> {:.4}",
        history.epochs_run(),
        history.best_epoch,
        history.stopped_early,
        history.initial_val_loss,
        history.best_val_loss
    );

    let preds = model.predict_examples(&test_ex, &refs)?;
    let truths: Vec<usize> = test_ex.iter().map(|e| e.label).collect();
    let m = metrics_for_task(task, &preds, &truths)?;
    println!("test accuracy {:.4}, macro-F1 {:.4}", m.accuracy, m.f1);

    let q = &test.cases()[150];
    let hits = top_k(&q.image, &refs, config.k)?;
    let p = model.infer(&q.image, &hits, &refs)?;
    println!("\n{} -> class {} probs {:.3?}", q.id, p.predicted, p.probs);
    for (h, a) in hits.iter().zip(p.alpha.unwrap_or_default()) {
        println!("  {:<14} sim {:.3} alpha {:.3}", h.case_id, h.sim, a);
    }
    Ok(())
}
