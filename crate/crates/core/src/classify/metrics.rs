//! Ranking metrics over real-valued scores with boolean (target) labels.

use std::cmp::Ordering;

use super::ClassifyError;
use crate::scalar::Real;

fn check_lengths<F>(scores: &[F], labels: &[bool]) -> Result<(), ClassifyError> {
    if scores.len() != labels.len() {
        return Err(ClassifyError::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    Ok(())
}

/// Area under the ROC curve via the Mann–Whitney statistic: the probability that
/// a random target outscores a random distractor, ties counting one half.
pub fn auc<F: Real>(scores: &[F], labels: &[bool]) -> Result<f64, ClassifyError> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ClassifyError::SingleClassData);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // twice the rank sum of positives, using mid-ranks for ties (keeps integers exact)
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share the mid-rank (i+1+j)/2
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count() as u64;
        twice_rank_sum += pos_in_group * (i as u64 + 1 + j as u64);
        i = j;
    }
    let n_pos_u = n_pos as u64;
    let twice_u = twice_rank_sum - n_pos_u * (n_pos_u + 1);
    Ok(twice_u as f64 / 2.0 / (n_pos as f64 * n_neg as f64))
}

/// Mean of the precision values at the rank of each positive, ranking by
/// descending score with ties kept in input order.
pub fn average_precision<F: Real>(scores: &[F], labels: &[bool]) -> Result<f64, ClassifyError> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(ClassifyError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        if labels[k] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// ROC curve points `(false positive rate, true positive rate)` from the
/// highest threshold down, collapsing tied scores into one step.
pub fn roc_curve<F: Real>(scores: &[F], labels: &[bool]) -> Result<Vec<(f64, f64)>, ClassifyError> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ClassifyError::SingleClassData);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (idx, &k) in order.iter().enumerate() {
        if labels[k] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order
            .get(idx + 1)
            .is_none_or(|&next| scores[next] != scores[k]);
        if last_of_group {
            points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        assert_eq!(auc(&[0.9, 0.8, 0.3], &[true, false, true]).unwrap(), 0.5);
        assert!(matches!(
            auc(&[0.1, 0.2], &[true, true]),
            Err(ClassifyError::SingleClassData)
        ));
    }

    #[test]
    fn ap_examples() {
        assert_eq!(
            average_precision(&[0.9, 0.8, 0.1, 0.0], &[true, true, false, false]).unwrap(),
            1.0
        );
        let single = average_precision(&[0.9, 0.8, 0.7, 0.6], &[false, false, true, false]).unwrap();
        assert!((single - 1.0 / 3.0).abs() < 1e-15);
        let ap = average_precision(&[0.9, 0.8, 0.3], &[true, false, true]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!(matches!(
            average_precision(&[0.9], &[false]),
            Err(ClassifyError::NoPositives)
        ));
    }

    #[test]
    fn roc_curve_ends_at_corner() {
        let pts = roc_curve(&[0.9, 0.8, 0.3, 0.3], &[true, false, true, false]).unwrap();
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        assert_eq!(pts.len(), 4);
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec((0i32..12).prop_map(|v| v as f64 * 0.25), n),
                proptest::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter("both classes", |(_, l)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
    }

    proptest! {
        #[test]
        fn auc_equals_pair_counting((s, l) in scored()) {
            prop_assert_eq!(auc(&s, &l).unwrap(), pair_count_auc(&s, &l));
        }

        #[test]
        fn metrics_invariant_under_monotone_transform((s, l) in scored()) {
            let t: Vec<f64> = s.iter().map(|v| (v * 0.7).exp() + 3.0).collect();
            prop_assert_eq!(auc(&s, &l).unwrap(), auc(&t, &l).unwrap());
            prop_assert_eq!(average_precision(&s, &l).unwrap(), average_precision(&t, &l).unwrap());
        }

        #[test]
        fn auc_complements_under_negation(
            (s, l) in (2usize..30).prop_flat_map(|n| (
                proptest::collection::hash_set(-1000i32..1000, n),
                proptest::collection::vec(any::<bool>(), n),
            )).prop_filter("both classes", |(_, l)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
        ) {
            let s: Vec<f64> = s.into_iter().map(f64::from).collect();
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            prop_assert!((auc(&s, &l).unwrap() + auc(&neg, &l).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
