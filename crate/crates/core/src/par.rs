//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the maps run on the rayon pool; without it
//! they are plain iterators. Every helper computes each output element
//! independently and reduces in a fixed order, so results are bitwise
//! identical across thread counts and across the two builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many items the sequential path is used even when parallel.
#[cfg(feature = "parallel")]
const MIN_PAR_LEN: usize = 32;

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if n >= MIN_PAR_LEN {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if items.len() >= MIN_PAR_LEN {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Fills `out[i] = f(i)`, possibly in parallel.
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if out.len() >= MIN_PAR_LEN {
        out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
        return;
    }
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// Pairwise (tree) summation. The split points depend only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sequential dot product in index order. Empty input gives `+0.0`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Dense row-major `matrix * v` where `matrix` is `v.len()` columns wide.
pub fn matvec(matrix: &[f64], v: &[f64]) -> Vec<f64> {
    let cols = v.len();
    if cols == 0 {
        return Vec::new();
    }
    let rows = matrix.len() / cols;
    map_range(rows, |r| dot(&matrix[r * cols..(r + 1) * cols], v))
}
