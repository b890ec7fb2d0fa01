use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classification quality of one prediction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    /// Support-weighted mean of `per_class_f1`.
    pub weighted_f1: f64,
    pub kappa: f64,
    pub per_class_f1: Vec<f64>,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
}

impl MetricsReport {
    /// Metrics of `predicted` against `truth` over `classes` classes.
    ///
    /// F1 of a class that is neither present nor predicted is 0. When chance
    /// agreement is 1 (a single class in both truth and predictions), kappa
    /// is 1 for perfect agreement and 0 otherwise.
    pub fn from_predictions(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::input("cannot evaluate an empty set"));
        }
        if truth.len() != predicted.len() {
            return Err(Error::Shape {
                op: "metrics",
                left: (truth.len(), 1),
                right: (predicted.len(), 1),
            });
        }
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::input(format!("class index out of range ({t}, {p}) for {classes} classes")));
            }
            confusion[t][p] += 1;
        }
        Ok(MetricsReport::from_confusion(confusion))
    }

    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Self {
        let k = confusion.len();
        let n: usize = confusion.iter().flatten().sum();
        let nf = n as f64;
        let row = |i: usize| confusion[i].iter().sum::<usize>();
        let col = |j: usize| confusion.iter().map(|r| r[j]).sum::<usize>();
        let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
        let accuracy = correct as f64 / nf;
        let per_class_f1: Vec<f64> = (0..k)
            .map(|i| {
                let denom = row(i) + col(i);
                if denom == 0 {
                    0.0
                } else {
                    2.0 * confusion[i][i] as f64 / denom as f64
                }
            })
            .collect();
        let weighted_f1 = (0..k).map(|i| per_class_f1[i] * row(i) as f64).sum::<f64>() / nf;
        let p_e: f64 = (0..k).map(|i| row(i) as f64 * col(i) as f64).sum::<f64>() / (nf * nf);
        let kappa = if 1.0 - p_e <= 0.0 {
            if correct == n {
                1.0
            } else {
                0.0
            }
        } else {
            (accuracy - p_e) / (1.0 - p_e)
        };
        MetricsReport {
            accuracy,
            weighted_f1,
            kappa,
            per_class_f1,
            confusion,
        }
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// TOML record.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("metrics serialize")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let report: MetricsReport = crate::error::from_toml(text)?;
        let k = report.confusion.len();
        if report.per_class_f1.len() != k || report.confusion.iter().any(|row| row.len() != k) {
            return Err(Error::input("confusion matrix must be square and match per_class_f1"));
        }
        Ok(report)
    }
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for `n = 1`).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_fixture() {
        let m = MetricsReport::from_confusion(vec![vec![3, 1], vec![2, 4]]);
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert!((m.per_class_f1[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.per_class_f1[1] - 8.0 / 11.0).abs() < 1e-12);
        assert!((m.kappa - 0.4).abs() < 1e-12);
        assert!((m.weighted_f1 - (4.0 * 2.0 / 3.0 + 6.0 * 8.0 / 11.0) / 10.0).abs() < 1e-12);
    }

    #[test]
    fn from_predictions_matches_confusion() {
        let truth = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        let pred = [0, 0, 0, 1, 0, 0, 1, 1, 1, 1];
        let m = MetricsReport::from_predictions(&truth, &pred, 2).unwrap();
        assert_eq!(m.confusion, vec![vec![3, 1], vec![2, 4]]);
        assert_eq!(m.total(), 10);
    }

    #[test]
    fn perfect_and_constant() {
        let t = [0, 1, 2, 1];
        let m = MetricsReport::from_predictions(&t, &t, 3).unwrap();
        assert_eq!((m.accuracy, m.weighted_f1, m.kappa), (1.0, 1.0, 1.0));
        let m = MetricsReport::from_predictions(&[0, 0, 1, 1], &[0, 0, 0, 0], 2).unwrap();
        assert_eq!(m.kappa, 0.0);
        assert_eq!(m.accuracy, 0.5);
    }

    #[test]
    fn degenerate_chance_agreement() {
        let m = MetricsReport::from_predictions(&[1, 1], &[1, 1], 3).unwrap();
        assert_eq!(m.kappa, 1.0);
        assert_eq!(m.per_class_f1, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(MetricsReport::from_predictions(&[], &[], 2), Err(Error::Input(_))));
        assert!(MetricsReport::from_predictions(&[0], &[0, 1], 2).is_err());
        assert!(MetricsReport::from_predictions(&[2], &[0], 2).is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let m = MetricsReport::from_confusion(vec![vec![3, 1], vec![2, 4]]);
        assert_eq!(MetricsReport::parse(&m.to_toml()).unwrap(), m);
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
