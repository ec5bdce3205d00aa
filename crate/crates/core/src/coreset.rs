//! Greedy k-center coreset selection and uniform subsampling.

use alloc::vec;
use alloc::vec::Vec;

use crate::distance::squared_euclidean;
use crate::rng::SplitMix64;
use crate::{Embeddings, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoresetSelection {
    /// Distinct row indices in greedy selection order.
    pub selected_indices: Vec<usize>,
    pub budget: usize,
    pub seed: u64,
}

/// Farthest-point coreset of `min(budget, n)` rows.
///
/// The first row is drawn uniformly with `seed`; every later row is the
/// unselected point farthest (Euclidean) from the current selection, ties going
/// to the lowest index.
pub fn coreset_select(embeddings: &Embeddings, budget: usize, seed: u64) -> Result<CoresetSelection> {
    if embeddings.is_empty() {
        return Err(Error::EmptyInput("coreset input"));
    }
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    let initial = SplitMix64::new(seed).below(embeddings.len() as u64) as usize;
    let selected_indices = coreset_select_from(embeddings, budget, initial)?;
    Ok(CoresetSelection { selected_indices, budget, seed })
}

/// Farthest-point selection starting from a caller-chosen row.
pub fn coreset_select_from(embeddings: &Embeddings, budget: usize, initial: usize) -> Result<Vec<usize>> {
    let n = embeddings.len();
    if n == 0 {
        return Err(Error::EmptyInput("coreset input"));
    }
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    if initial >= n {
        return Err(Error::InvalidConfig(alloc::format!(
            "initial index {initial} out of range for {n} embeddings"
        )));
    }
    let k = budget.min(n);
    let mut min_dist = vec![f32::INFINITY; n];
    let mut taken = vec![false; n];
    let mut order = Vec::with_capacity(k);
    let mut pick = initial;
    loop {
        order.push(pick);
        taken[pick] = true;
        if order.len() == k {
            break;
        }
        relax(embeddings, embeddings.row(pick), &mut min_dist);
        pick = farthest_unselected(&min_dist, &taken);
    }
    Ok(order)
}

#[cfg(not(feature = "parallel"))]
fn relax(embeddings: &Embeddings, center: &[f32], min_dist: &mut [f32]) {
    for (d, row) in min_dist.iter_mut().zip(embeddings.rows()) {
        let nd = squared_euclidean(row, center);
        if nd < *d {
            *d = nd;
        }
    }
}

#[cfg(feature = "parallel")]
fn relax(embeddings: &Embeddings, center: &[f32], min_dist: &mut [f32]) {
    use rayon::prelude::*;
    let dim = embeddings.dim();
    min_dist
        .par_iter_mut()
        .zip(embeddings.as_flat().par_chunks_exact(dim))
        .with_min_len(1024)
        .for_each(|(d, row)| {
            let nd = squared_euclidean(row, center);
            if nd < *d {
                *d = nd;
            }
        });
}

fn farthest_unselected(min_dist: &[f32], taken: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_d = f32::NEG_INFINITY;
    for (i, (&d, &t)) in min_dist.iter().zip(taken).enumerate() {
        if !t && d > best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// `count` distinct indices from `0..population`, uniform without
/// replacement, sorted ascending.
pub fn random_subsample(population: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > population {
        return Err(Error::SampleTooLarge { requested: count, available: population });
    }
    let mut rng = SplitMix64::new(seed);
    let mut pool: Vec<usize> = (0..population).collect();
    for i in 0..count {
        let j = i + rng.below((population - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool.sort_unstable();
    Ok(pool)
}

/// Largest distance from any row to its nearest selected row.
pub fn covering_radius(embeddings: &Embeddings, selected: &[usize]) -> f32 {
    let worst = embeddings
        .rows()
        .map(|p| {
            selected
                .iter()
                .map(|&s| squared_euclidean(p, embeddings.row(s)))
                .fold(f32::INFINITY, f32::min)
        })
        .fold(0.0f32, f32::max);
    libm::sqrtf(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f32]) -> Embeddings {
        Embeddings::from_flat(1, points.to_vec()).unwrap()
    }

    #[test]
    fn saturates_when_budget_exceeds_input() {
        let e = line(&[0.0, 1.0, 10.0]);
        let sel = coreset_select(&e, 10, 5).unwrap();
        let mut sorted = sel.selected_indices.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn farthest_point_on_a_line() {
        let e = line(&[0.0, 1.0, 10.0]);
        assert_eq!(coreset_select_from(&e, 2, 0).unwrap(), vec![0, 2]);
        assert_eq!(coreset_select_from(&e, 3, 0).unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn budget_one_is_the_seeded_initial_index() {
        let e = line(&[0.0, 1.0, 10.0, 4.0, 7.0]);
        for seed in 0..20u64 {
            let expected = SplitMix64::new(seed).below(5) as usize;
            assert_eq!(coreset_select(&e, 1, seed).unwrap().selected_indices, vec![expected]);
        }
    }

    #[test]
    fn duplicates_fall_back_to_lowest_unselected() {
        let e = line(&[2.0, 2.0, 2.0]);
        assert_eq!(coreset_select_from(&e, 3, 1).unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn errors() {
        assert_eq!(coreset_select(&Embeddings::new(2).unwrap(), 3, 0), Err(Error::EmptyInput("coreset input")));
        assert_eq!(coreset_select(&line(&[1.0]), 0, 0), Err(Error::ZeroBudget));
        assert!(coreset_select_from(&line(&[1.0]), 1, 1).is_err());
    }

    #[test]
    fn subsample_edges() {
        assert!(random_subsample(5, 0, 1).unwrap().is_empty());
        assert_eq!(random_subsample(5, 5, 1).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(
            random_subsample(5, 6, 1),
            Err(Error::SampleTooLarge { requested: 6, available: 5 })
        );
    }

    #[test]
    fn subsample_is_deterministic() {
        let first = random_subsample(5, 2, 42).unwrap();
        for _ in 0..10 {
            assert_eq!(random_subsample(5, 2, 42).unwrap(), first);
        }
        // Frozen by SplitMix64 + Lemire bounded draws + partial Fisher-Yates.
        assert_eq!(first, FROZEN_5_CHOOSE_2_SEED_42);
    }

    const FROZEN_5_CHOOSE_2_SEED_42: [usize; 2] = [1, 3];

    #[test]
    fn covering_radius_line() {
        let e = line(&[0.0, 1.0, 10.0]);
        assert_eq!(covering_radius(&e, &[0, 2]), 1.0);
    }
}
