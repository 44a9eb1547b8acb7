//! Area under the ROC curve in the rank-sum (Mann-Whitney) form: the
//! probability that a random positive outscores a random negative, ties
//! counted one half.

use thiserror::Error;

use crate::population::Label;

#[derive(Debug, Error)]
pub enum AucError {
    #[error("scores and labels have different lengths ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("AUC needs at least one positive and one negative label")]
    SingleClass,
}

/// Compute AUC from real-valued scores and +1/-1 labels.
///
/// Implemented via average ranks, which is O(n log n) and equals the
/// pairwise definition with half credit for score ties.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64, AucError> {
    if scores.len() != labels.len() {
        return Err(AucError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l > 0).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(AucError::SingleClass);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // Average ranks over tied score runs (1-based ranks).
    let mut rank = vec![0.0f64; n];
    let mut i = 0usize;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            rank[k] = avg;
        }
        i = j + 1;
    }
    let pos_rank_sum: f64 = (0..n).filter(|&i| labels[i] > 0).map(|i| rank[i]).sum();
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use rand::Rng;

    /// Exhaustive pairwise oracle: wins + half ties over all
    /// positive-negative pairs.
    pub(crate) fn auc_pairwise(scores: &[f64], labels: &[Label]) -> f64 {
        let mut wins = 0.0f64;
        let mut pairs = 0.0f64;
        for i in 0..scores.len() {
            if labels[i] <= 0 {
                continue;
            }
            for j in 0..scores.len() {
                if labels[j] > 0 {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_separation_is_one() {
        let s = [0.9, 0.8, 0.2, 0.1];
        let l = [1, 1, -1, -1];
        assert_eq!(auc(&s, &l).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_are_half() {
        let s = [0.5, 0.5, 0.5, 0.5];
        let l = [1, -1, 1, -1];
        assert_eq!(auc(&s, &l).unwrap(), 0.5);
    }

    #[test]
    fn mixed_case_from_pairwise_count() {
        // Pairs: (0.9 vs 0.3) win, (0.9 vs 0.6) win, (0.1 vs 0.3) loss,
        // (0.1 vs 0.6) loss -> 2 of 4.
        let s = [0.9, 0.3, 0.6, 0.1];
        let l = [1, -1, -1, 1];
        assert_eq!(auc(&s, &l).unwrap(), 0.5);
        assert_eq!(auc_pairwise(&s, &l), 0.5);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(
            auc(&[0.1, 0.2], &[1, 1]),
            Err(AucError::SingleClass)
        ));
        assert!(matches!(
            auc(&[0.1], &[1, -1]),
            Err(AucError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn matches_exhaustive_oracle_on_random_inputs() {
        let mut rng = rng_from(2024);
        for trial in 0..200 {
            let n = rng.gen_range(2..=50);
            let mut scores = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                // Coarse grid scores so ties actually occur.
                scores.push((rng.gen_range(0..10) as f64) / 10.0);
                labels.push(if rng.gen::<bool>() { 1 } else { -1 });
            }
            // Force both classes.
            labels[0] = 1;
            if n > 1 {
                labels[1] = -1;
            }
            let fast = auc(&scores, &labels).unwrap();
            let slow = auc_pairwise(&scores, &labels);
            assert!(
                (fast - slow).abs() < 1e-12,
                "trial {trial}: {fast} vs {slow}"
            );
        }
    }
}
