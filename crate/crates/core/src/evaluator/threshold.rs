use super::metrics::{cmp_f1, ConfusionCounts};
use crate::error::{Error, Result};

/// Decision thresholds worth trying for a set of scores, ascending.
///
/// The lowest distinct score (everything predicted SAME) followed by the
/// midpoint of every pair of consecutive distinct scores.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut out = Vec::with_capacity(distinct.len());
    if let Some(&lowest) = distinct.first() {
        out.push(lowest);
    }
    for w in distinct.windows(2) {
        let mid = w[0] + (w[1] - w[0]) / 2.0;
        // Adjacent floats: the midpoint must still exclude the lower score.
        out.push(if mid > w[0] { mid } else { w[1] });
    }
    out
}

/// The F1-maximizing threshold over `(score, is_same)` pairs; ties go to the
/// higher threshold.
pub fn select_threshold_from_scores(scored: &[(f64, bool)]) -> Result<f64> {
    let positives = scored.iter().filter(|s| s.1).count();
    if positives == 0 || positives == scored.len() {
        return Err(Error::DegenerateDevSet);
    }
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    // Descending by score.
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let candidates = candidate_thresholds(&scored.iter().map(|s| s.0).collect::<Vec<_>>());

    // Walk thresholds from high to low, admitting scores as they clear.
    let mut counts = ConfusionCounts { tp: 0, fp: 0, tn: (scored.len() - positives) as u64, fn_: positives as u64 };
    let mut next = 0;
    let mut best: Option<(f64, ConfusionCounts)> = None;
    for &tau in candidates.iter().rev() {
        while next < sorted.len() && sorted[next].0 >= tau {
            if sorted[next].1 {
                counts.tp += 1;
                counts.fn_ -= 1;
            } else {
                counts.fp += 1;
                counts.tn -= 1;
            }
            next += 1;
        }
        let better = match &best {
            None => true,
            Some((_, b)) => cmp_f1(&counts, b).is_gt(),
        };
        if better {
            best = Some((tau, counts));
        }
    }
    Ok(best.expect("at least one candidate").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separable_case_returns_midpoint() {
        assert_eq!(select_threshold_from_scores(&[(0.9, true), (0.1, false)]).unwrap(), 0.5);
    }

    #[test]
    fn degenerate_sets() {
        assert!(matches!(select_threshold_from_scores(&[(0.9, true), (0.3, true)]), Err(Error::DegenerateDevSet)));
        assert!(matches!(select_threshold_from_scores(&[(0.9, false)]), Err(Error::DegenerateDevSet)));
        assert!(matches!(select_threshold_from_scores(&[]), Err(Error::DegenerateDevSet)));
    }

    #[test]
    fn inverted_scores_fall_back_to_all_positive() {
        // SAME pairs score lowest: predicting everything SAME is optimal.
        let t = select_threshold_from_scores(&[(0.1, true), (0.2, true), (0.9, false)]).unwrap();
        assert_eq!(t, 0.1);
    }

    /// Exhaustive oracle: F1 of every candidate threshold by direct recount.
    fn brute_force(scored: &[(f64, bool)]) -> (ConfusionCounts, f64) {
        let mut best: Option<(ConfusionCounts, f64)> = None;
        let mut all: Vec<f64> = scored.iter().map(|s| s.0).collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        let mut thresholds: Vec<f64> = all.clone();
        thresholds.extend(all.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        thresholds.push(all.last().unwrap() + 1.0);
        thresholds.sort_by(f64::total_cmp);
        for &t in &thresholds {
            let counts = ConfusionCounts::from_outcomes(scored.iter().map(|&(s, y)| (s >= t, y)));
            let replace = match &best {
                None => true,
                Some((b, _)) => counts.f1_ratio() >= b.f1_ratio(),
            };
            if replace {
                best = Some((counts, t));
            }
        }
        best.unwrap()
    }

    fn arb_scored() -> impl Strategy<Value = Vec<(f64, bool)>> {
        prop::collection::vec((0u8..30, any::<bool>()), 2..100)
            .prop_map(|v| v.into_iter().map(|(s, y)| (s as f64 / 29.0 * 2.0 - 1.0, y)).collect())
            .prop_filter("needs both labels", |v: &Vec<(f64, bool)>| v.iter().any(|s| s.1) && v.iter().any(|s| !s.1))
    }

    proptest! {
        #[test]
        fn matches_exhaustive_sweep(scored in arb_scored()) {
            let tau = select_threshold_from_scores(&scored).unwrap();
            let got = ConfusionCounts::from_outcomes(scored.iter().map(|&(s, y)| (s >= tau, y)));
            let (best, best_tau) = brute_force(&scored);
            prop_assert_eq!(got.f1_ratio(), best.f1_ratio());
            // Same partition as the highest optimal oracle threshold.
            let oracle = ConfusionCounts::from_outcomes(scored.iter().map(|&(s, y)| (s >= best_tau, y)));
            prop_assert_eq!(got, oracle);
        }
    }
}
