use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Exact K-nearest rows of `corpus` (one latent per row) under Euclidean
/// distance, nearest first. Equal distances resolve to the lower row id.
pub fn knn_query(corpus: &DMatrix<f64>, query: &[f64], k: usize) -> Result<Vec<usize>> {
    knn_query_excluding(corpus, query, k, None)
}

/// As [`knn_query`], skipping row `exclude` (leave-one-out retrieval).
pub fn knn_query_excluding(
    corpus: &DMatrix<f64>,
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<usize>> {
    let (n, d) = corpus.shape();
    if query.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: query.len(),
        });
    }
    let available = n - usize::from(exclude.is_some_and(|e| e < n));
    if k > available {
        return Err(Error::InsufficientCorpus {
            class: None,
            available,
            required: k,
        });
    }
    let mut scored: Vec<(f64, usize)> = (0..n)
        .filter(|&i| Some(i) != exclude)
        .map(|i| {
            let mut dist = 0.0;
            for (j, q) in query.iter().enumerate() {
                let diff = corpus[(i, j)] - q;
                dist += diff * diff;
            }
            (dist, i)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(k).map(|(_, i)| i).collect())
}
