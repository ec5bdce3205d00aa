//! Euclidean distance kernels shared by coreset selection and scoring.
//!
//! The squared distance is accumulated in eight independent `f32` lanes that
//! are folded in a fixed order, so results are reproducible across runs and
//! thread counts while still auto-vectorizing.

use crate::Embeddings;

const LANES: usize = 8;

#[inline]
pub fn squared_euclidean(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..LANES {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    for (l, (x, y)) in ca.remainder().iter().zip(cb.remainder()).enumerate() {
        let d = x - y;
        acc[l] += d * d;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

#[inline]
pub fn euclidean(a: &[f32], b: &[f32]) -> f32 {
    libm::sqrtf(squared_euclidean(a, b))
}

/// Exact nearest neighbour of `query` in `bank` as `(row, squared distance)`.
///
/// Ties resolve to the lowest row. Returns `None` for an empty bank.
pub fn nearest(query: &[f32], bank: &Embeddings) -> Option<(usize, f32)> {
    let mut best: Option<(usize, f32)> = None;
    for (i, row) in bank.rows().enumerate() {
        let d = squared_euclidean(query, row);
        match best {
            Some((_, b)) if d >= b => {}
            _ => best = Some((i, d)),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn reference(a: &[f32], b: &[f32]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum()
    }

    #[test]
    fn three_four_five() {
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }

    #[test]
    fn matches_reference_across_lengths() {
        let mut rng = crate::rng::SplitMix64::new(3);
        for len in 1..40 {
            let a: Vec<f32> = (0..len).map(|_| rng.standard_normal() as f32).collect();
            let b: Vec<f32> = (0..len).map(|_| rng.standard_normal() as f32).collect();
            let got = squared_euclidean(&a, &b) as f64;
            let want = reference(&a, &b);
            assert!((got - want).abs() <= 1e-5 * want.max(1.0), "len {len}: {got} vs {want}");
        }
    }

    #[test]
    fn nearest_prefers_lowest_index_on_tie() {
        let bank = Embeddings::from_rows(1, [vec![1.0], vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(nearest(&[0.0], &bank), Some((0, 1.0)));
        assert_eq!(nearest(&[0.0], &Embeddings::new(1).unwrap()), None);
    }
}
