//! Few-shot curve: heads trained on k examples per class, averaged over runs.

use refdx::corpus::{generate_synthetic, LabeledQuery, SyntheticSpec, Task};
use refdx::eval::{few_shot, FewShotConfig, Splits};
use refdx::evidence::{prepare_examples, HeadConfig};

fn main() -> refdx::Result<()> {
    let spec = |n, seed, prefix: &str| SyntheticSpec::new(4, n, 16, 4.0, seed).with_prefix(prefix);
    let refs = generate_synthetic(&spec(100, 1, "ref"))?;
    let val = generate_synthetic(&spec(30, 2, "val"))?;
    let test = generate_synthetic(&spec(50, 3, "test"))?;
    let task = Task::Abnormality;
    let head = HeadConfig { hidden: 64, lr: 1e-3, batch_size: 8, ..HeadConfig::default() };
    let prep = |q: &[LabeledQuery]| prepare_examples(q, &refs, head.k);
    let train_ex = prep(&LabeledQuery::from_corpus(&refs, task))?;
    let val_ex = prep(&LabeledQuery::external(&val, task))?;
    let test_ex = prep(&LabeledQuery::external(&test, task))?;
    let splits = Splits { train: &train_ex, val: &val_ex, test: &test_ex, corpus: &refs };

    let cfg = FewShotConfig { shots: vec![2, 5, 10, 20, 50], runs: 5, seed: 1 };
    let report = few_shot(splits, &head, &cfg)?;
    println!("{:>6} {:>8} {:>8}", "shots", "f1", "std");
    for p in &report.points {
        println!("{:>6} {:>8.4} {:>8.4}", p.shots, p.mean.f1, p.std.f1);
    }
    Ok(())
}
