//! Parallel helpers with a sequential fallback and deterministic reductions.
//!
//! Everything here is bit-stable: parallel maps write into pre-indexed slots
//! and sums always use the same fixed-order pairwise tree, so results are
//! identical with or without the `parallel` feature and for any thread count.

/// Maps `f` over `0..n` into a `Vec`, in parallel when the `parallel`
/// feature is enabled. Output order is by index either way.
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Fixed-order pairwise summation. Deterministic for a given slice and more
/// accurate than a running sum on long mixture/objective reductions.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
        }
    }
}

/// Map-then-pairwise-sum over `0..n` with the same determinism guarantees.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    pairwise_sum(&indexed_map(n, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(pairwise_sum(&v), 15.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[7.5]), 7.5);
    }

    #[test]
    fn indexed_map_preserves_order() {
        let out = indexed_map(100, |i| i * i);
        assert!(out.iter().enumerate().all(|(i, &v)| v == i * i));
    }

    #[test]
    fn sum_is_independent_of_chunking() {
        // The pairwise tree is a function of the slice alone; two calls on the
        // same data must agree bit-for-bit.
        let v: Vec<f64> = (0..1000).map(|i| (i as f64) * 1e-3 + 0.1).collect();
        let a = pairwise_sum(&v);
        let b = sum_indexed(v.len(), |i| v[i]);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
