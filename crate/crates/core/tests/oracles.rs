//! Independent reference implementations checked against the engine.

use mecad_core::coreset::{coreset_select_from, covering_radius};
use mecad_core::rng::SplitMix64;
use mecad_core::{auroc, centroid, image_score, patch_score, Embeddings, Label};

fn dist64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>().sqrt()
}

fn random_points(rng: &mut SplitMix64, n: usize, dim: usize) -> Embeddings {
    Embeddings::from_flat(dim, (0..n * dim).map(|_| rng.standard_normal() as f32).collect()).unwrap()
}

/// O(n^2 k): recomputes every candidate's distance to the whole selection.
pub fn naive_farthest_point(points: &Embeddings, k: usize, initial: usize) -> Vec<usize> {
    let mut chosen = vec![initial];
    while chosen.len() < k.min(points.len()) {
        let mut best = None;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..points.len() {
            if chosen.contains(&i) {
                continue;
            }
            let d = chosen.iter().map(|&c| dist64(points.row(i), points.row(c))).fold(f64::INFINITY, f64::min);
            if d > best_d {
                best_d = d;
                best = Some(i);
            }
        }
        chosen.push(best.unwrap());
    }
    chosen
}

fn optimal_k_center_radius(points: &Embeddings, k: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let r = (0..n)
            .map(|i| subset.iter().map(|&c| dist64(points.row(i), points.row(c))).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        best = best.min(r);
        // next k-combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] < n - k + i {
                break;
            }
        }
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

#[test]
fn greedy_matches_naive_reference() {
    let mut rng = SplitMix64::new(2024);
    for _ in 0..100 {
        let n = 1 + rng.below(64) as usize;
        let dim = 1 + rng.below(8) as usize;
        let k = 1 + rng.below(n as u64) as usize;
        let initial = rng.below(n as u64) as usize;
        let pts = random_points(&mut rng, n, dim);
        assert_eq!(coreset_select_from(&pts, k, initial).unwrap(), naive_farthest_point(&pts, k, initial));
    }
}

#[test]
fn greedy_is_within_twice_optimal_radius() {
    let mut rng = SplitMix64::new(77);
    for _ in 0..50 {
        let n = 2 + rng.below(15) as usize;
        let k = 1 + rng.below(4.min(n as u64)) as usize;
        let pts = random_points(&mut rng, n, 3);
        let sel = coreset_select_from(&pts, k, rng.below(n as u64) as usize).unwrap();
        let greedy = covering_radius(&pts, &sel) as f64;
        let opt = optimal_k_center_radius(&pts, k);
        assert!(greedy <= 2.0 * opt + 1e-5, "greedy {greedy} vs optimal {opt}");
    }
}

fn pairwise_auroc(scores: &[f64], labels: &[Label]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (sa, la) in scores.iter().zip(labels) {
        if !la.is_anomalous() {
            continue;
        }
        for (sn, ln) in scores.iter().zip(labels) {
            if ln.is_anomalous() {
                continue;
            }
            pairs += 1.0;
            if sa > sn {
                wins += 1.0;
            } else if sa == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn auroc_matches_pair_counting() {
    let mut rng = SplitMix64::new(5);
    for _ in 0..300 {
        let n = 2 + rng.below(199) as usize;
        let levels = 1 + rng.below(20);
        let scores: Vec<f64> = (0..n).map(|_| rng.below(levels) as f64 * 0.25).collect();
        let mut labels: Vec<Label> = (0..n).map(|_| if rng.below(2) == 0 { Label::Normal } else { Label::Anomalous }).collect();
        labels[0] = Label::Normal;
        labels[1] = Label::Anomalous;
        let got = auroc(&scores, &labels).unwrap();
        assert!((got - pairwise_auroc(&scores, &labels)).abs() <= 1e-12);
    }
}

#[test]
fn patch_and_image_scores_match_brute_force() {
    let mut rng = SplitMix64::new(11);
    let bank = random_points(&mut rng, 1000, 16);
    let grid = random_points(&mut rng, 49, 16);
    let mut worst = (f64::NEG_INFINITY, 0);
    for (i, p) in grid.rows().enumerate() {
        let brute = bank.rows().map(|b| dist64(p, b)).fold(f64::INFINITY, f64::min);
        let got = patch_score(p, &bank).unwrap();
        assert!((got - brute).abs() <= 1e-5 * brute.max(1.0), "{got} vs {brute}");
        if brute > worst.0 {
            worst = (brute, i);
        }
    }
    let s = image_score(&grid, &bank).unwrap();
    assert_eq!(s.argmax_patch_index, worst.1);
    assert!((s.score - worst.0).abs() <= 1e-5 * worst.0);
}

#[test]
fn centroid_matches_compensated_sum() {
    let mut rng = SplitMix64::new(13);
    let pts = random_points(&mut rng, 100, 24);
    let got = centroid(&pts).unwrap();
    for j in 0..24 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for row in pts.rows() {
            let y = row[j] as f64 - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        assert!((got.values[j] - sum / 100.0).abs() <= 1e-6);
    }
}
