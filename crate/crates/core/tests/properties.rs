mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::{cosine, random_vec, top_k_oracle};
use refdx::corpus::{
    generate_synthetic, AnchorSet, BinaryDementia, Corpus, ReferenceCase,
    SyntheticSpec, Task,
};
use refdx::numerics::{cosine_sim, rng_from_seed, softmax};
use refdx::retrieval::top_k;
use refdx::zeroshot::{classify, predict_all, zero_shot_accuracy};

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, len)
}

fn nonzero_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..12)
        .prop_flat_map(|n| (finite_vec(n), finite_vec(n)))
        .prop_filter("nonzero", |(u, v)| {
            u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3)
        })
}

proptest! {
    #[test]
    fn cosine_is_bounded_and_symmetric((u, v) in nonzero_pair()) {
        let s = cosine_sim(&u, &v).unwrap();
        prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&s));
        prop_assert_eq!(s, cosine_sim(&v, &u).unwrap());
        prop_assert!((s - cosine(&u, &v)).abs() < 1e-9);
    }

    #[test]
    fn cosine_ignores_positive_scale((u, v) in nonzero_pair(), c in 0.01..100.0f64) {
        let scaled: Vec<f64> = u.iter().map(|x| x * c).collect();
        prop_assert!((cosine_sim(&scaled, &v).unwrap() - cosine_sim(&u, &v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_a_probability_vector(s in prop::collection::vec(-300.0..300.0f64, 1..20)) {
        let p = softmax(&s).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn softmax_is_shift_invariant(s in prop::collection::vec(-20.0..20.0f64, 1..10), c in -100.0..100.0f64) {
        let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
        for (a, b) in softmax(&s).unwrap().iter().zip(softmax(&shifted).unwrap()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

fn random_anchors(rng: &mut impl Rng, task: Task, d: usize) -> AnchorSet {
    AnchorSet::new(task, (0..task.arity()).map(|_| random_vec(rng, d, 1.0)).collect()).unwrap()
}

#[test]
fn zero_shot_is_scale_invariant() {
    let mut rng = rng_from_seed(31);
    for _ in 0..200 {
        let anchors = random_anchors(&mut rng, Task::Abnormality, 6);
        let q = random_vec(&mut rng, 6, 1.0);
        let c = rng.random_range(0.01..50.0);
        let scaled: Vec<f64> = q.iter().map(|x| x * c).collect();
        let a = classify(&q, &anchors).unwrap();
        let b = classify(&scaled, &anchors).unwrap();
        assert_eq!(a.predicted, b.predicted);
        for (x, y) in a.probs.iter().zip(&b.probs) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_shot_outputs_are_consistent() {
    let mut rng = rng_from_seed(32);
    for _ in 0..500 {
        let anchors: Vec<AnchorSet> = [Task::Abnormality, Task::DementiaType, Task::Severity]
            .into_iter()
            .map(|t| random_anchors(&mut rng, t, 5))
            .collect();
        let q = random_vec(&mut rng, 5, 1.0);
        let all = predict_all(&q, &anchors).unwrap();
        for r in [&all.abnormality, &all.dementia_type, &all.severity] {
            assert!((r.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(
            all.binary.label == BinaryDementia::NonDemented,
            all.abnormality.predicted == 0
        );
        assert!((0.0..=1.0).contains(&all.binary.p_dementia));
    }
}

#[test]
fn zero_shot_is_exact_without_noise() {
    let spec = SyntheticSpec {
        noise_sigma: 1e-6,
        ..SyntheticSpec::new(4, 25, 8, 6.0, 33)
    };
    let corpus = generate_synthetic(&spec).unwrap();
    assert_eq!(zero_shot_accuracy(&corpus, Task::Abnormality).unwrap(), 1.0);
}

fn images_corpus(images: Vec<Vec<f64>>) -> Corpus {
    let d = images[0].len();
    let cases = images
        .into_iter()
        .enumerate()
        .map(|(i, image)| ReferenceCase {
            id: format!("c{i}"),
            abn_text: image.clone(),
            dx_text: image.clone(),
            desc_text: image.clone(),
            image,
            abnormality: refdx::corpus::Abnormality::Normal,
            dementia: refdx::corpus::Dementia::NonDementia,
            severity: None,
            description: String::new(),
        })
        .collect();
    Corpus::new(d, cases, vec![], "random").unwrap()
}

#[test]
fn top_k_matches_full_sort_oracle() {
    let mut rng = rng_from_seed(34);
    for _ in 0..200 {
        let n = rng.random_range(1..=50);
        let d = rng.random_range(2..=8);
        let images: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, d, 1.0)).collect();
        let corpus = images_corpus(images.clone());
        let q = random_vec(&mut rng, d, 1.0);
        let k = rng.random_range(1..=n);
        let got = top_k(&q, &corpus, k).unwrap();
        let want = top_k_oracle(&q, &images, k);
        assert_eq!(
            got.iter().map(|h| h.index).collect::<Vec<_>>(),
            want.iter().map(|w| w.0).collect::<Vec<_>>()
        );
        for (h, w) in got.iter().zip(&want) {
            assert!((h.sim - w.1).abs() < 1e-12);
            assert_eq!(h.sim, cosine_sim(&q, &images[h.index]).unwrap());
        }
    }
}

#[test]
fn full_retrieval_is_a_permutation() {
    let mut rng = rng_from_seed(35);
    let images: Vec<Vec<f64>> = (0..30).map(|_| random_vec(&mut rng, 5, 1.0)).collect();
    let corpus = images_corpus(images);
    let hits = top_k(&random_vec(&mut rng, 5, 1.0), &corpus, 30).unwrap();
    let mut seen: Vec<usize> = hits.iter().map(|h| h.index).collect();
    seen.sort_unstable();
    assert_eq!(seen, (0..30).collect::<Vec<_>>());
    assert!(hits.windows(2).all(|w| w[0].sim >= w[1].sim));
}

#[test]
fn retrieval_ignores_storage_order() {
    let mut rng = rng_from_seed(36);
    for _ in 0..50 {
        let images: Vec<Vec<f64>> = (0..25).map(|_| random_vec(&mut rng, 4, 1.0)).collect();
        let corpus = images_corpus(images);
        let mut shuffled = corpus.cases().to_vec();
        shuffled.shuffle(&mut rng);
        let other = Corpus::new(4, shuffled, vec![], "shuffled").unwrap();
        let q = random_vec(&mut rng, 4, 1.0);
        let ids = |c: &Corpus| -> Vec<String> {
            top_k(&q, c, 5).unwrap().into_iter().map(|h| h.case_id).collect()
        };
        assert_eq!(ids(&corpus), ids(&other));
    }
}

#[test]
fn rank_one_hit_shares_the_class_on_separated_clusters() {
    let refs = generate_synthetic(&SyntheticSpec::new(4, 50, 16, 6.0, 37)).unwrap();
    let queries = generate_synthetic(&SyntheticSpec::new(4, 50, 16, 6.0, 38)).unwrap();
    let matched = queries
        .cases()
        .iter()
        .filter(|q| {
            let hit = &top_k(&q.image, &refs, 1).unwrap()[0];
            refs.cases()[hit.index].abnormality == q.abnormality
        })
        .count();
    let rate = matched as f64 / queries.len() as f64;
    assert!(rate >= 0.99, "rank-1 class agreement {rate}");
}
