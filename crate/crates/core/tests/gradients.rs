mod common;

use rand::Rng;
use common::{finite_difference_error, random_vec};
use refdx::corpus::{Abnormality, ClassLabel, Corpus, Dementia, ReferenceCase, Task};
use refdx::encoder::{contrastive_loss, ContrastiveDirection, EncoderInit, PairBatch, ToyDualEncoder};
use refdx::evidence::{AblationMask, EvidenceModel};
use refdx::numerics::{cross_entropy, dense_backward, dense_forward, rng_from_seed, Activation, Matrix};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, random_vec(rng, rows * cols, scale)).unwrap()
}

#[derive(Clone)]
struct Affine {
    w: Matrix,
    b: Vec<f64>,
}

fn affine_params(m: &mut Affine) -> Vec<&mut [f64]> {
    vec![m.w.as_mut_slice(), &mut m.b]
}

#[test]
fn dense_layer_matches_finite_differences() {
    let mut rng = rng_from_seed(11);
    for act in [Activation::None, Activation::Relu] {
        let x = random_matrix(&mut rng, 5, 4, 1.0);
        let model = Affine {
            w: random_matrix(&mut rng, 4, 3, 1.0),
            b: random_vec(&mut rng, 3, 0.5),
        };
        let upstream = random_matrix(&mut rng, 5, 3, 1.0);
        let loss = |m: &Affine| {
            let (out, _) = dense_forward(&x, &m.w, &m.b, act).unwrap();
            out.as_slice().iter().zip(upstream.as_slice()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = dense_forward(&x, &model.w, &model.b, act).unwrap();
        let (grad_x, grads) = dense_backward(&upstream, &cache, &model.w).unwrap();
        let analytic = vec![grads.weight.as_slice().to_vec(), grads.bias.clone()];
        let err = finite_difference_error(&model, &analytic, affine_params, loss, H);
        assert!(err < TOL, "{act:?}: relative error {err}");

        // input gradient
        let loss_x = |xm: &Matrix| {
            let (out, _) = dense_forward(xm, &model.w, &model.b, act).unwrap();
            out.as_slice().iter().zip(upstream.as_slice()).map(|(a, b)| a * b).sum::<f64>()
        };
        let err = finite_difference_error(
            &x,
            &[grad_x.as_slice().to_vec()],
            |m: &mut Matrix| vec![m.as_mut_slice()],
            loss_x,
            H,
        );
        assert!(err < TOL, "{act:?} input: relative error {err}");
    }
}

#[test]
fn cross_entropy_matches_finite_differences() {
    let mut rng = rng_from_seed(12);
    for trial in 0..20 {
        let logits = random_vec(&mut rng, 5, 4.0);
        let label = trial % 5;
        let (_, grad) = cross_entropy(&logits, label).unwrap();
        let err = finite_difference_error(
            &logits,
            &[grad],
            |m: &mut Vec<f64>| vec![m.as_mut_slice()],
            |m: &Vec<f64>| cross_entropy(m, label).unwrap().0,
            H,
        );
        assert!(err < TOL, "trial {trial}: relative error {err}");
    }
}

#[test]
fn contrastive_loss_matches_finite_differences() {
    let mut rng = rng_from_seed(13);
    for direction in [ContrastiveDirection::Symmetric, ContrastiveDirection::ImageToText] {
        for tau in [0.07, 0.5] {
            let encoder =
                ToyDualEncoder::new(4, 5, 4, tau, EncoderInit::Kaiming, &mut rng).unwrap();
            let batch = PairBatch::new(
                random_matrix(&mut rng, 3, 4, 1.0),
                random_matrix(&mut rng, 3, 5, 1.0),
            )
            .unwrap();
            let (_, grads) = contrastive_loss(&batch, &encoder, direction).unwrap();
            let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
            let err = finite_difference_error(
                &encoder,
                &analytic,
                |e: &mut ToyDualEncoder| e.parameters_mut(),
                |e: &ToyDualEncoder| contrastive_loss(&batch, e, direction).unwrap().0,
                H,
            );
            assert!(err < TOL, "{direction:?} tau={tau}: relative error {err}");
        }
    }
}

#[test]
fn contrastive_loss_ignores_pair_order() {
    let mut rng = rng_from_seed(14);
    let encoder = ToyDualEncoder::new(4, 4, 4, 0.1, EncoderInit::Kaiming, &mut rng).unwrap();
    let batch = PairBatch::new(
        random_matrix(&mut rng, 6, 4, 1.0),
        random_matrix(&mut rng, 6, 4, 1.0),
    )
    .unwrap();
    let shuffled = batch.select(&[3, 0, 5, 1, 4, 2]);
    let (a, _) = contrastive_loss(&batch, &encoder, ContrastiveDirection::Symmetric).unwrap();
    let (b, _) = contrastive_loss(&shuffled, &encoder, ContrastiveDirection::Symmetric).unwrap();
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
}

fn random_corpus(rng: &mut impl Rng, n: usize, d: usize) -> Corpus {
    let cases = (0..n)
        .map(|i| ReferenceCase {
            id: format!("r{i}"),
            image: random_vec(rng, d, 1.0),
            abn_text: random_vec(rng, d, 1.0),
            dx_text: random_vec(rng, d, 1.0),
            desc_text: random_vec(rng, d, 1.0),
            abnormality: Abnormality::ALL[i % 4],
            dementia: Dementia::ALL[i % 3],
            severity: None,
            description: String::new(),
        })
        .collect();
    Corpus::new(d, cases, vec![], "random").unwrap()
}

fn masks() -> Vec<AblationMask> {
    let mut out = AblationMask::standard_variants();
    out.push(AblationMask {
        drop_image: true,
        disable_attention: true,
        ..AblationMask::FULL
    });
    out
}

#[test]
fn evidence_model_matches_finite_differences() {
    const D: usize = 4;
    const K: usize = 2;
    let mut rng = rng_from_seed(15);
    let corpus = random_corpus(&mut rng, 6, D);
    for mask in masks() {
        let model = EvidenceModel::new(D, Task::DementiaType, K, 8, mask, &mut rng).unwrap();
        let examples: Vec<(Vec<f64>, Matrix, usize)> = (0..3)
            .map(|i| {
                let hits = vec![(i, rng.random_range(-1.0..1.0)), (i + 3, rng.random_range(-1.0..1.0))];
                let x = model.evidence_inputs(&hits, &corpus).unwrap();
                (random_vec(&mut rng, D, 1.0), x, i % 3)
            })
            .collect();
        let batch: Vec<(&[f64], &Matrix, usize)> =
            examples.iter().map(|(q, x, l)| (q.as_slice(), x, *l)).collect();
        let (_, grads) = model.loss_and_grads(&batch).unwrap();
        let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
        let err = finite_difference_error(
            &model,
            &analytic,
            |m: &mut EvidenceModel| m.parameters_mut(),
            |m: &EvidenceModel| m.loss_and_grads(&batch).unwrap().0,
            H,
        );
        assert!(err < TOL, "{mask}: relative error {err}");
    }
}

#[test]
fn prediction_is_invariant_to_evidence_row_order() {
    const D: usize = 4;
    let mut rng = rng_from_seed(16);
    let corpus = random_corpus(&mut rng, 5, D);
    let model =
        EvidenceModel::new(D, Task::Abnormality, 3, 16, AblationMask::FULL, &mut rng).unwrap();
    let query = random_vec(&mut rng, D, 1.0);
    let hits = [(0, 0.9), (2, 0.5), (4, -0.1)];
    let permuted = [(4, -0.1), (0, 0.9), (2, 0.5)];
    let forward = |h: &[(usize, f64)]| {
        let hits: Vec<refdx::retrieval::RetrievalHit> = h
            .iter()
            .enumerate()
            .map(|(r, &(i, sim))| refdx::retrieval::RetrievalHit {
                case_id: format!("r{i}"),
                index: i,
                rank: r + 1,
                sim,
            })
            .collect();
        model.infer(&query, &hits, &corpus).unwrap()
    };
    let a = forward(&hits);
    let b = forward(&permuted);
    for (x, y) in a.probs.iter().zip(&b.probs) {
        assert!((x - y).abs() < 1e-12);
    }
    let (aa, ba) = (a.alpha.unwrap(), b.alpha.unwrap());
    assert!((aa[0] - ba[1]).abs() < 1e-12);
    assert!((aa[1] - ba[2]).abs() < 1e-12);
    assert!((aa[2] - ba[0]).abs() < 1e-12);
}
