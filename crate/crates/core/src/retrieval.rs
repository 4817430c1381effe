//! Exhaustive top-k cosine search over reference image embeddings.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{domain_err, Result};
use crate::numerics::cosine_sim;

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub case_id: String,
    /// Position in the corpus.
    pub index: usize,
    /// 1-based.
    pub rank: usize,
    pub sim: f64,
}

/// Similarities against every case, in corpus order.
pub fn all_similarities(query: &[f64], corpus: &Corpus) -> Result<Vec<f64>> {
    corpus
        .cases()
        .iter()
        .map(|c| cosine_sim(query, &c.image))
        .collect()
}

/// Ranks all cases by similarity, descending; ties keep corpus order.
pub fn rank_all(sims: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sims.len()).collect();
    order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]));
    order
}

pub fn top_k(query: &[f64], corpus: &Corpus, k: usize) -> Result<Vec<RetrievalHit>> {
    top_k_excluding(query, corpus, k, None)
}

/// As [`top_k`], skipping the case at `exclude` (leave-one-out queries that
/// are themselves corpus members).
pub fn top_k_excluding(
    query: &[f64],
    corpus: &Corpus,
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<RetrievalHit>> {
    if k == 0 {
        return domain_err("k must be >= 1");
    }
    let available = corpus.len() - usize::from(exclude.is_some_and(|i| i < corpus.len()));
    if available == 0 {
        return domain_err("retrieval over an empty corpus");
    }
    if k > available {
        tracing::warn!(k, available, "k exceeds corpus size; returning all cases");
    }
    let sims = all_similarities(query, corpus)?;
    let hits = rank_all(&sims)
        .into_iter()
        .filter(|&i| Some(i) != exclude)
        .take(k)
        .enumerate()
        .map(|(r, i)| RetrievalHit {
            case_id: corpus.cases()[i].id.clone(),
            index: i,
            rank: r + 1,
            sim: sims[i],
        })
        .collect();
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Abnormality, Dementia, ReferenceCase};

    fn corpus_from_images(images: Vec<Vec<f64>>) -> Corpus {
        let dim = images[0].len();
        let cases = images
            .into_iter()
            .enumerate()
            .map(|(i, image)| ReferenceCase {
                id: format!("c{i}"),
                abn_text: image.clone(),
                dx_text: image.clone(),
                desc_text: image.clone(),
                image,
                abnormality: Abnormality::Normal,
                dementia: Dementia::NonDementia,
                severity: None,
                description: String::new(),
            })
            .collect();
        Corpus::new(dim, cases, vec![], "test").unwrap()
    }

    // unit vectors at a chosen cosine to e1
    fn at_cos(c: f64) -> Vec<f64> {
        vec![c, (1.0 - c * c).sqrt()]
    }

    #[test]
    fn ties_keep_insertion_order() {
        let corpus = corpus_from_images(vec![
            at_cos(0.8),
            at_cos(0.9),
            at_cos(0.1),
            at_cos(0.8),
            at_cos(-0.2),
        ]);
        let hits = top_k(&[1.0, 0.0], &corpus, 3).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.case_id.as_str()).collect();
        assert_eq!(ids, ["c1", "c0", "c3"]);
        assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn self_retrieval() {
        let corpus = corpus_from_images(vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.2, 0.2]]);
        let hits = top_k(&[-3.0, 0.5], &corpus, 1).unwrap();
        assert_eq!(hits[0].case_id, "c1");
        assert!((hits[0].sim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_k_returns_everything() {
        let corpus = corpus_from_images(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(top_k(&[1.0, 1.0], &corpus, 10).unwrap().len(), 2);
    }

    #[test]
    fn invalid_requests() {
        let corpus = corpus_from_images(vec![vec![1.0, 0.0]]);
        assert!(top_k(&[1.0, 0.0], &corpus, 0).is_err());
        assert!(top_k_excluding(&[1.0, 0.0], &corpus, 1, Some(0)).is_err());
    }

    #[test]
    fn exclusion_skips_the_query_case() {
        let corpus = corpus_from_images(vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0]]);
        let hits = top_k_excluding(&[1.0, 0.0], &corpus, 2, Some(0)).unwrap();
        assert_eq!(hits[0].case_id, "c1");
        assert_eq!(hits[0].rank, 1);
        assert_eq!(hits.len(), 2);
    }
}
