use alloc::vec::Vec;

use crate::{Error, Label, Result};

/// Image-level AUROC as the Mann-Whitney statistic.
///
/// Equals the probability that a random anomalous score exceeds a random
/// normal one, ties counting one half. Computed from average ranks.
pub fn auroc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidData("NaN anomaly score".into()));
    }
    let positives = labels.iter().filter(|l| l.is_anomalous()).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClassLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Ranks are 1-based; each tie group gets the mean of the ranks it spans.
    let mut rank_sum = 0.0f64;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let anomalous_in_group = order[start..end].iter().filter(|&&i| labels[i].is_anomalous()).count();
        rank_sum += avg_rank * anomalous_in_group as f64;
        start = end;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Anomalous as A, Normal as N};

    #[test]
    fn separated_tied_and_mixed() {
        assert_eq!(auroc(&[0.1, 0.2, 0.9, 1.5], &[N, N, A, A]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.9, 1.5, 0.1, 0.2], &[N, N, A, A]).unwrap(), 0.0);
        assert_eq!(auroc(&[0.3; 5], &[N, A, N, A, A]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.1, 0.4, 0.35, 0.8], &[N, N, A, A]).unwrap(), 0.75);
    }

    #[test]
    fn errors() {
        assert_eq!(auroc(&[0.1, 0.2], &[N, N]), Err(Error::SingleClassLabels));
        assert_eq!(auroc(&[0.1], &[N, A]), Err(Error::LengthMismatch { scores: 1, labels: 2 }));
        assert!(auroc(&[f64::NAN, 1.0], &[N, A]).is_err());
    }
}
