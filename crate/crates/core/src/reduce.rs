//! Deterministic reductions.
//!
//! Sums are evaluated over a fixed binary tree whose shape depends only on the
//! input length, so results are bitwise identical for any worker count.

use rayon::prelude::*;

const LEAF: usize = 256;

/// Pairwise sum with a fixed tree shape.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    let (a, b) = rayon::join(|| pairwise_sum(&values[..mid]), || pairwise_sum(&values[mid..]));
    a + b
}

/// Maximum of the values (order independent).
pub fn max_abs(values: &[f64]) -> f64 {
    values.par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max)
}

/// Evaluate `f` on every site and sum the results deterministically.
pub fn site_sum<F>(sites: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let vals: Vec<f64> = (0..sites).into_par_iter().map(f).collect();
    pairwise_sum(&vals)
}

/// Evaluate `f` on every site and return the maximum.
pub fn site_max<F>(sites: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..sites).into_par_iter().map(f).reduce(|| 0.0, f64::max)
}
