//! Train the toy dual encoder on (image, abnormality text) pairs and measure
//! held-out image to text retrieval.

use refdx::corpus::{generate_synthetic, ClassLabel, Corpus, SyntheticSpec};
use refdx::encoder::{
    retrieval_accuracy, train_contrastive, ContrastiveConfig, EncoderInit, PairBatch,
};
use refdx::numerics::Matrix;

fn pairs(corpus: &Corpus) -> refdx::Result<(PairBatch, Vec<usize>)> {
    let images: Vec<Vec<f64>> = corpus.cases().iter().map(|c| c.image.clone()).collect();
    let texts: Vec<Vec<f64>> = corpus.cases().iter().map(|c| c.abn_text.clone()).collect();
    let labels = corpus.cases().iter().map(|c| c.abnormality.index()).collect();
    Ok((PairBatch::new(Matrix::from_rows(&images)?, Matrix::from_rows(&texts)?)?, labels))
}

fn main() -> refdx::Result<()> {
    let train = generate_synthetic(&SyntheticSpec::new(4, 50, 32, 6.0, 1))?;
    let held = generate_synthetic(&SyntheticSpec::new(4, 50, 32, 6.0, 2).with_prefix("held"))?;
    let (train_pairs, train_labels) = pairs(&train)?;
    let (held_pairs, held_labels) = pairs(&held)?;

    for init in [EncoderInit::Identity, EncoderInit::Kaiming] {
        let cfg = ContrastiveConfig {
            lr: if init == EncoderInit::Kaiming { 1e-2 } else { 5e-5 },
            ..ContrastiveConfig::default()
        };
        let (encoder, history) = train_contrastive(&train_pairs, &cfg, None, 32, init)?;
        println!("{init:?} init, lr {}", cfg.lr);
        println!("  loss {:.4} -> {:.4}", history.initial_loss, history.final_loss());
        println!(
            "  retrieval train {:.3}, held-out {:.3}",
            retrieval_accuracy(&encoder, &train_pairs, &train_labels)?,
            retrieval_accuracy(&encoder, &held_pairs, &held_labels)?
        );
    }
    Ok(())
}
