use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative Tikhonov strength applied to the local Gram matrix.
pub const GRAM_REGULARIZATION: f64 = 1e-3;
/// Absolute regulariser used when every neighbour coincides with the query.
pub const GRAM_FLOOR: f64 = 1e-8;

/// Sum-to-one weights reconstructing `query` from `neighbors`.
///
/// Minimises `|query - sum_k w_k n_k|^2` subject to `sum_k w_k = 1` through the
/// local Gram matrix `C_jk = (q - n_j).(q - n_k)`, regularised by
/// `eps = 1e-3 * trace(C) / K`, then `w = C'^-1 1 / (1' C'^-1 1)`. Weights may
/// be negative.
pub fn solve_lle_weights(query: &[f64], neighbors: &[&[f64]]) -> Result<Vec<f64>> {
    let k = neighbors.len();
    if k == 0 {
        return Err(Error::EmptyNeighborSet);
    }
    for n in neighbors {
        if n.len() != query.len() {
            return Err(Error::DimensionMismatch {
                expected: query.len(),
                actual: n.len(),
            });
        }
    }
    let gram = local_gram(query, neighbors);
    let eps = regularizer(&gram);
    let mut reg = gram;
    for i in 0..k {
        reg[(i, i)] += eps;
    }
    let ones = DVector::from_element(k, 1.0);
    let raw = match reg.clone().cholesky() {
        Some(ch) => ch.solve(&ones),
        None => reg.lu().solve(&ones).ok_or(Error::EmptyNeighborSet)?,
    };
    let total: f64 = raw.iter().sum();
    Ok(raw.iter().map(|w| w / total).collect())
}

pub(crate) fn local_gram(query: &[f64], neighbors: &[&[f64]]) -> DMatrix<f64> {
    let k = neighbors.len();
    let diffs: Vec<Vec<f64>> = neighbors
        .iter()
        .map(|n| query.iter().zip(n.iter()).map(|(q, x)| q - x).collect())
        .collect();
    let mut gram = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let dot: f64 = diffs[i].iter().zip(&diffs[j]).map(|(a, b)| a * b).sum();
            gram[(i, j)] = dot;
            gram[(j, i)] = dot;
        }
    }
    gram
}

/// The Tikhonov term added to the Gram diagonal.
pub fn regularizer(gram: &DMatrix<f64>) -> f64 {
    let trace = gram.trace();
    if trace > 0.0 {
        GRAM_REGULARIZATION * trace / gram.nrows() as f64
    } else {
        GRAM_FLOOR
    }
}
