mod common;

use rand::Rng;

use common::{nearest_centroid, random_vec, synthetic_splits};
use refdx::corpus::{generate_synthetic, LabeledQuery, SyntheticSpec, Task};
use refdx::evidence::{
    build_evidence_matrix, build_evidence_vector, prepare_examples, train_head, AblationMask,
    EvidenceModel, HeadConfig, HeadExample,
};
use refdx::numerics::{rng_from_seed, Matrix};
use refdx::retrieval::{top_k, RetrievalHit};

fn fast_config(k: usize) -> HeadConfig {
    HeadConfig {
        k,
        hidden: 64,
        lr: 1e-3,
        batch_size: 8,
        max_epochs: 60,
        seed: 3,
        ..HeadConfig::default()
    }
}

#[test]
fn evidence_rows_follow_the_hits() {
    let corpus = generate_synthetic(&SyntheticSpec::new(4, 6, 8, 4.0, 41)).unwrap();
    let mut rng = rng_from_seed(41);
    let model =
        EvidenceModel::new(8, Task::Abnormality, 3, 16, AblationMask::FULL, &mut rng).unwrap();
    let q = random_vec(&mut rng, 8, 2.0);
    let hits = top_k(&q, &corpus, 5).unwrap();
    let e = build_evidence_matrix(&hits, &corpus, &model.encoder, model.mask).unwrap();
    assert_eq!(e.shape(), (5, 8));
    for (row, hit) in e.iter_rows().zip(&hits) {
        let case = &corpus.cases()[hit.index];
        let v = build_evidence_vector(case, hit.sim, &model.encoder, model.mask).unwrap();
        assert_eq!(row, v.as_slice());
    }
    let reversed: Vec<RetrievalHit> = hits.iter().rev().cloned().collect();
    let er = build_evidence_matrix(&reversed, &corpus, &model.encoder, model.mask).unwrap();
    for i in 0..5 {
        assert_eq!(er.row(i), e.row(4 - i));
    }
}

#[test]
fn attention_weights_are_probabilities() {
    let mut rng = rng_from_seed(42);
    for _ in 0..300 {
        let d = rng.random_range(2..6);
        let k = rng.random_range(1..6);
        let model =
            EvidenceModel::new(d, Task::DementiaType, k, 8, AblationMask::FULL, &mut rng).unwrap();
        let e = Matrix::from_vec(k, d, random_vec(&mut rng, k * d, 5.0)).unwrap();
        let p = model.predict(&random_vec(&mut rng, d, 5.0), &e).unwrap();
        let alpha = p.alpha.unwrap();
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(alpha.iter().all(|&a| a >= 0.0));
        assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn dropping_all_evidence_ignores_the_matrix() {
    let mut rng = rng_from_seed(43);
    let mask = AblationMask {
        drop_all_evidence: true,
        ..AblationMask::FULL
    };
    let model = EvidenceModel::new(4, Task::Abnormality, 3, 8, mask, &mut rng).unwrap();
    let q = random_vec(&mut rng, 4, 1.0);
    let a = model.predict(&q, &Matrix::from_vec(3, 4, random_vec(&mut rng, 12, 1.0)).unwrap());
    let b = model.predict(&q, &Matrix::from_vec(2, 4, random_vec(&mut rng, 8, 9.0)).unwrap());
    assert_eq!(a.unwrap().logits, b.unwrap().logits);
}

struct Setup {
    splits: common::SyntheticSplits,
    train: Vec<LabeledQuery>,
    val: Vec<LabeledQuery>,
    test: Vec<LabeledQuery>,
}

fn setup() -> Setup {
    let splits = synthetic_splits(16, 4.0, [60, 25, 50], 44);
    let task = Task::Abnormality;
    Setup {
        train: LabeledQuery::from_corpus(&splits.refs, task),
        val: LabeledQuery::external(&splits.val, task),
        test: LabeledQuery::external(&splits.test, task),
        splits,
    }
}

fn train_and_predict(s: &Setup, k: usize) -> (Vec<usize>, Vec<HeadExample>) {
    let corpus = &s.splits.refs;
    let train = prepare_examples(&s.train, corpus, k).unwrap();
    let val = prepare_examples(&s.val, corpus, k).unwrap();
    let test = prepare_examples(&s.test, corpus, k).unwrap();
    let (model, history) = train_head(&train, &val, corpus, &fast_config(k)).unwrap();
    assert!(history.best_val_loss <= history.initial_val_loss);
    (model.predict_examples(&test, corpus).unwrap(), test)
}

fn accuracy(preds: &[usize], examples: &[HeadExample]) -> f64 {
    let hits = preds.iter().zip(examples).filter(|(p, e)| **p == e.label).count();
    hits as f64 / preds.len() as f64
}

#[test]
fn trained_head_agrees_with_nearest_centroid() {
    let s = setup();
    let (preds, test) = train_and_predict(&s, 3);
    let spec = SyntheticSpec::new(4, 1, 16, 4.0, 0);
    let centroids: Vec<Vec<f64>> = (0..4).map(|c| spec.class_mean(c)).collect();
    let agree = preds
        .iter()
        .zip(&test)
        .filter(|(p, ex)| nearest_centroid(&ex.query, &centroids) == **p)
        .count();
    let rate = agree as f64 / preds.len() as f64;
    assert!(rate >= 0.95, "agreement with nearest centroid {rate}");
}

#[test]
fn more_neighbours_do_not_hurt() {
    let s = setup();
    let (p3, t3) = train_and_predict(&s, 3);
    let (p5, t5) = train_and_predict(&s, 5);
    let (a3, a5) = (accuracy(&p3, &t3), accuracy(&p5, &t5));
    assert!(a5 >= a3 - 0.02, "accuracy k=5 {a5} vs k=3 {a3}");
}
