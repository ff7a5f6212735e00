//! Confusion-matrix accounting, balanced accuracy, round summaries and
//! relative gain.
//!
//! The positive class is `NF` (the deforestation class). Balanced accuracy
//! is symmetric in the class roles, but confusion-matrix reporting needs
//! the convention fixed.

use crate::error::{Error, Result};
use crate::network::ClassLabel;

/// TP/TN/FP/FN counts with `NF` as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl ConfusionMatrix {
    /// Count prediction outcomes against ground truth.
    pub fn from_labels(truth: &[ClassLabel], predicted: &[ClassLabel]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LabelLength {
                truth: truth.len(),
                predicted: predicted.len(),
            });
        }
        if truth.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut cm = ConfusionMatrix::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.record(t, p);
        }
        Ok(cm)
    }

    /// Record a single scored sample.
    pub fn record(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        match (truth, predicted) {
            (ClassLabel::NF, ClassLabel::NF) => self.true_positives += 1,
            (ClassLabel::NF, ClassLabel::F) => self.false_negatives += 1,
            (ClassLabel::F, ClassLabel::NF) => self.false_positives += 1,
            (ClassLabel::F, ClassLabel::F) => self.true_negatives += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }

    /// Balanced accuracy: the mean of the per-class recalls,
    /// `(TP/(TP+FN) + TN/(TN+FP)) / 2`. Both classes must be present in
    /// the truth labels.
    pub fn balanced_accuracy(&self) -> Result<f64> {
        let positives = self.true_positives + self.false_negatives;
        let negatives = self.true_negatives + self.false_positives;
        if positives == 0 || negatives == 0 {
            return Err(Error::ClassAbsent);
        }
        let recall_pos = self.true_positives as f64 / positives as f64;
        let recall_neg = self.true_negatives as f64 / negatives as f64;
        Ok(0.5 * (recall_pos + recall_neg))
    }
}

/// Mean / sample standard deviation / min / max of a set of scores in
/// `[0, 1]`, the shape of one results-table row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl RoundSummary {
    /// Summarize at least two scores. The standard deviation uses the
    /// sample (n-1) estimator.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::TooFewScores(scores.len()));
        }
        let mean = mean(scores);
        Ok(RoundSummary {
            mean,
            std: sample_std(scores),
            min: scores.iter().copied().fold(f64::INFINITY, f64::min),
            max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// One table row: `method,mean,std,min,max` with values in percent.
    pub fn table_row(&self, method: &str) -> String {
        format!(
            "{},{},{},{},{}",
            method,
            format_percent(self.mean),
            format_percent(self.std),
            format_percent(self.min),
            format_percent(self.max)
        )
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample (n-1) standard deviation; 0.0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

/// Relative gain of a candidate score over a positive baseline:
/// `(candidate - baseline) / baseline`.
pub fn relative_gain(candidate: f64, baseline: f64) -> Result<f64> {
    if baseline <= 0.0 {
        return Err(Error::NonPositiveBaseline(baseline));
    }
    Ok((candidate - baseline) / baseline)
}

/// Format a fraction as a percentage with one decimal, rounding half up.
pub fn format_percent(fraction: f64) -> String {
    // f64::round rounds half away from zero, i.e. half up for the
    // non-negative scores handled here.
    format!("{:.1}%", (fraction * 1000.0).round() / 10.0)
}

/// Render summary rows as a delimiter-separated table with a
/// `method,mean,std,min,max` header.
pub fn summary_table(rows: &[(&str, RoundSummary)]) -> String {
    let mut out = String::from("method,mean,std,min,max\n");
    for (method, summary) in rows {
        out.push_str(&summary.table_row(method));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ClassLabel::{F, NF};

    #[test]
    fn confusion_counts() {
        let cm = ConfusionMatrix::from_labels(&[NF, F], &[NF, F]).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                true_positives: 1,
                true_negatives: 1,
                false_positives: 0,
                false_negatives: 0
            }
        );

        let cm = ConfusionMatrix::from_labels(&[NF, NF, F], &[F, NF, F]).unwrap();
        assert_eq!(cm.true_positives, 1);
        assert_eq!(cm.false_negatives, 1);
        assert_eq!(cm.true_negatives, 1);
        assert_eq!(cm.false_positives, 0);
    }

    #[test]
    fn swapping_predictions_swaps_counts() {
        let truth = [NF, NF, F, F, F];
        let perfect = ConfusionMatrix::from_labels(&truth, &truth).unwrap();
        let flipped: Vec<_> = truth
            .iter()
            .map(|l| if *l == NF { F } else { NF })
            .collect();
        let swapped = ConfusionMatrix::from_labels(&truth, &flipped).unwrap();
        assert_eq!(perfect.true_positives, swapped.false_negatives);
        assert_eq!(perfect.true_negatives, swapped.false_positives);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            ConfusionMatrix::from_labels(&[NF], &[NF, F]),
            Err(Error::LabelLength { .. })
        ));
    }

    #[test]
    fn balanced_accuracy_examples() {
        let perfect = ConfusionMatrix {
            true_positives: 10,
            true_negatives: 40,
            false_positives: 0,
            false_negatives: 0,
        };
        assert_eq!(perfect.balanced_accuracy().unwrap(), 1.0);

        // Constant-F predictor on a two-class table.
        let constant = ConfusionMatrix {
            true_positives: 0,
            true_negatives: 40,
            false_positives: 0,
            false_negatives: 10,
        };
        assert_eq!(constant.balanced_accuracy().unwrap(), 0.5);

        let cm = ConfusionMatrix {
            true_positives: 8,
            false_negatives: 2,
            true_negatives: 90,
            false_positives: 10,
        };
        assert!((cm.balanced_accuracy().unwrap() - 0.85).abs() < 1e-15);
    }

    #[test]
    fn balanced_accuracy_needs_both_classes() {
        let cm = ConfusionMatrix {
            true_positives: 5,
            false_negatives: 1,
            true_negatives: 0,
            false_positives: 0,
        };
        assert!(matches!(cm.balanced_accuracy(), Err(Error::ClassAbsent)));
    }

    #[test]
    fn balanced_accuracy_invariant_under_duplication() {
        let base = ConfusionMatrix {
            true_positives: 7,
            false_negatives: 3,
            true_negatives: 50,
            false_positives: 12,
        };
        for k in [2u64, 5, 11] {
            let scaled = ConfusionMatrix {
                true_positives: base.true_positives * k,
                false_negatives: base.false_negatives * k,
                true_negatives: base.true_negatives * k,
                false_positives: base.false_positives * k,
            };
            assert!(
                (base.balanced_accuracy().unwrap() - scaled.balanced_accuracy().unwrap()).abs()
                    < 1e-15
            );
        }
    }

    #[test]
    fn summary_examples() {
        let s = RoundSummary::from_scores(&[0.883, 0.885, 0.896, 0.899, 0.907]).unwrap();
        assert_eq!(format_percent(s.mean), "89.4%");
        assert_eq!(format_percent(s.min), "88.3%");
        assert_eq!(format_percent(s.max), "90.7%");

        let constant = RoundSummary::from_scores(&[0.4, 0.4, 0.4]).unwrap();
        assert!(constant.std.abs() < 1e-12);
        assert_eq!(RoundSummary::from_scores(&[0.5, 0.5]).unwrap().std, 0.0);

        let pair = RoundSummary::from_scores(&[0.2, 0.8]).unwrap();
        assert_eq!(pair.mean, 0.5);

        assert!(matches!(
            RoundSummary::from_scores(&[0.5]),
            Err(Error::TooFewScores(1))
        ));
    }

    #[test]
    fn relative_gain_matches_reported_numbers() {
        let g = relative_gain(89.6, 84.4).unwrap();
        assert_eq!(format_percent(g), "6.2%");
        let g = relative_gain(90.7, 81.4).unwrap();
        assert_eq!(format_percent(g), "11.4%");
        assert_eq!(relative_gain(0.75, 0.75).unwrap(), 0.0);
        assert!(matches!(
            relative_gain(1.0, 0.0),
            Err(Error::NonPositiveBaseline(_))
        ));
    }

    #[test]
    fn relative_gain_sign_tracks_ordering() {
        for (a, b) in [(0.9, 0.8), (0.8, 0.9), (0.5, 0.5), (0.01, 0.99)] {
            let g = relative_gain(a, b).unwrap();
            assert_eq!(g > 0.0, a > b);
        }
    }

    #[test]
    fn summary_table_shape() {
        let s = RoundSummary::from_scores(&[0.883, 0.885, 0.896, 0.899, 0.907]).unwrap();
        let table = summary_table(&[("e-NEAT", s)]);
        let mut lines = table.lines();
        assert_eq!(lines.next(), Some("method,mean,std,min,max"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("e-NEAT,89.4%,"));
    }
}
