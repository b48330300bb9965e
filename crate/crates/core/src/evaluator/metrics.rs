use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// Pair-level confusion counts; the positive class is SAME.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio_or_zero(num: u64, den: u64) -> Ratio<u64> {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(num, den)
    }
}

impl ConfusionCounts {
    /// Tallies `(predicted_same, actually_same)` outcomes.
    pub fn from_outcomes(outcomes: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = ConfusionCounts::default();
        for (predicted, actual) in outcomes {
            c.add(predicted, actual);
        }
        c
    }

    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision_ratio(&self) -> Ratio<u64> {
        ratio_or_zero(self.tp, self.tp + self.fp)
    }

    pub fn recall_ratio(&self) -> Ratio<u64> {
        ratio_or_zero(self.tp, self.tp + self.fn_)
    }

    /// `2PR / (P + R)`, which reduces to `2tp / (2tp + fp + fn)`.
    pub fn f1_ratio(&self) -> Ratio<u64> {
        ratio_or_zero(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn precision(&self) -> f64 {
        to_f64(self.precision_ratio())
    }

    pub fn recall(&self) -> f64 {
        to_f64(self.recall_ratio())
    }

    pub fn f1(&self) -> f64 {
        to_f64(self.f1_ratio())
    }
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Compares two F1 values exactly.
pub(crate) fn cmp_f1(a: &ConfusionCounts, b: &ConfusionCounts) -> Ordering {
    let (an, ad) = (2 * a.tp as u128, (2 * a.tp + a.fp + a.fn_) as u128);
    let (bn, bd) = (2 * b.tp as u128, (2 * b.tp + b.fp + b.fn_) as u128);
    match (ad, bd) {
        (0, 0) => Ordering::Equal,
        (0, _) => 0.cmp(&bn),
        (_, 0) => an.cmp(&0),
        _ => (an * bd).cmp(&(bn * ad)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEvalReport {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
    /// Share of DIFFERENT pairs in the evaluated set.
    pub negative_fraction: f64,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

impl PairEvalReport {
    pub fn from_counts(counts: ConfusionCounts, threshold: f64) -> Self {
        let negatives = counts.fp + counts.tn;
        PairEvalReport {
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            negative_fraction: if counts.total() == 0 { 0.0 } else { negatives as f64 / counts.total() as f64 },
            counts,
            threshold,
            provenance: BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn arithmetic_example() {
        let c = ConfusionCounts { tp: 3, fp: 1, tn: 5, fn_: 1 };
        assert_eq!(c.precision(), 0.75);
        assert_eq!(c.recall(), 0.75);
        assert_eq!(c.f1(), 0.75);
    }

    #[test]
    fn zero_denominators() {
        let c = ConfusionCounts { tp: 0, fp: 0, tn: 4, fn_: 3 };
        assert_eq!((c.precision(), c.recall(), c.f1()), (0.0, 0.0, 0.0));
        let none = ConfusionCounts::default();
        assert_eq!(none.f1(), 0.0);
    }

    #[test]
    fn report_round_trips_through_json() {
        let mut r = PairEvalReport::from_counts(ConfusionCounts { tp: 7, fp: 3, tn: 11, fn_: 2 }, 0.123456789);
        r.provenance.insert("seed".into(), "4".into());
        let back: PairEvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn f1_comparison_agrees_with_rationals(a in any::<[u16; 4]>(), b in any::<[u16; 4]>()) {
            let c = |v: [u16; 4]| ConfusionCounts { tp: v[0] as u64, fp: v[1] as u64, tn: v[2] as u64, fn_: v[3] as u64 };
            let (x, y) = (c(a), c(b));
            prop_assert_eq!(cmp_f1(&x, &y), x.f1_ratio().cmp(&y.f1_ratio()));
        }
    }
}
