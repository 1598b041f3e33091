//! Confusion-rate bookkeeping, the generalization error `G_E`, and k-fold
//! splitting.
//!
//! Rates are class-conditional: `tp + fn = 1` over actual anomalies and
//! `tn + fp = 1` over actual normals. The `+1` in the denominator of `G_E`
//! relies on those two identities.

use std::io::Read;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// Default balance coefficient.
pub const DEFAULT_XI: f64 = 0.35;

const RATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("MissingClass: no actual {0} samples among predictions")]
    MissingClass(Class),
    #[error("invalid confusion rates: {0}")]
    InvalidRates(String),
    #[error("TooFewSamples: {n} samples cannot fill {k} folds")]
    TooFewSamples { n: usize, k: usize },
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("ParseError at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Resolved traffic class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Anomaly,
    Normal,
}

impl std::fmt::Display for Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Class::Anomaly => f.write_str("anomaly"),
            Class::Normal => f.write_str("normal"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub flow_id: String,
    pub predicted: Class,
    pub actual: Class,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRates {
    pub tp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub tn: f64,
    pub fp: f64,
    pub xi: f64,
}

impl ConfusionRates {
    fn validate(&self) -> Result<(), MetricsError> {
        let all = [self.tp, self.fn_, self.tn, self.fp, self.xi];
        if all.iter().any(|r| !r.is_finite() || *r < 0.0 || *r > 1.0) {
            return Err(MetricsError::InvalidRates(format!(
                "all rates and xi must lie in [0,1]: {self:?}"
            )));
        }
        if (self.tp + self.fn_ - 1.0).abs() > RATE_TOLERANCE {
            return Err(MetricsError::InvalidRates("tp + fn != 1".into()));
        }
        if (self.tn + self.fp - 1.0).abs() > RATE_TOLERANCE {
            return Err(MetricsError::InvalidRates("tn + fp != 1".into()));
        }
        Ok(())
    }
}

/// Class-conditional rates from a set of predictions.
pub fn confusion(predictions: &[Prediction], xi: f64) -> Result<ConfusionRates, MetricsError> {
    let (mut tp, mut fn_, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for p in predictions {
        match (p.actual, p.predicted) {
            (Class::Anomaly, Class::Anomaly) => tp += 1,
            (Class::Anomaly, Class::Normal) => fn_ += 1,
            (Class::Normal, Class::Normal) => tn += 1,
            (Class::Normal, Class::Anomaly) => fp += 1,
        }
    }
    let anomalies = tp + fn_;
    let normals = tn + fp;
    if anomalies == 0 {
        return Err(MetricsError::MissingClass(Class::Anomaly));
    }
    if normals == 0 {
        return Err(MetricsError::MissingClass(Class::Normal));
    }
    let rates = ConfusionRates {
        tp: tp as f64 / anomalies as f64,
        fn_: fn_ as f64 / anomalies as f64,
        tn: tn as f64 / normals as f64,
        fp: fp as f64 / normals as f64,
        xi,
    };
    rates.validate()?;
    Ok(rates)
}

/// `G_E = (ξ·FN + (1−ξ)·FP) / (1 + ξ·TN + (1−ξ)·TP)`, always in `[0, 1]`.
pub fn g_error(rates: &ConfusionRates) -> Result<f64, MetricsError> {
    rates.validate()?;
    let xi = rates.xi;
    let numerator = xi * rates.fn_ + (1.0 - xi) * rates.fp;
    let denominator = 1.0 + xi * rates.tn + (1.0 - xi) * rates.tp;
    Ok(numerator / denominator)
}

/// Seeded shuffle followed by contiguous chunking into `k` folds of index
/// lists. Earlier folds absorb the remainder, so sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, MetricsError> {
    if k < 2 {
        return Err(MetricsError::InvalidFoldCount(k));
    }
    if n < k {
        return Err(MetricsError::TooFewSamples { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed, seed::stream::KFOLD, 0));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// Reads a `flow_id,predicted,actual` CSV stream with a header row.
pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<Prediction>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Prediction>().enumerate() {
        // header occupies line 1
        let row = row.map_err(|e| MetricsError::Parse { line: i + 2, message: e.to_string() })?;
        out.push(row);
    }
    Ok(out)
}

pub fn write_predictions<W: std::io::Write>(writer: W, predictions: &[Prediction]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in predictions {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(spec: &[(Class, Class, usize)]) -> Vec<Prediction> {
        let mut out = Vec::new();
        for &(actual, predicted, n) in spec {
            for _ in 0..n {
                out.push(Prediction { flow_id: format!("f{}", out.len()), predicted, actual });
            }
        }
        out
    }

    #[test]
    fn all_correct() {
        let p = preds(&[(Class::Anomaly, Class::Anomaly, 3), (Class::Normal, Class::Normal, 4)]);
        let r = confusion(&p, DEFAULT_XI).unwrap();
        assert_eq!((r.tp, r.fn_, r.tn, r.fp), (1.0, 0.0, 1.0, 0.0));
        assert_eq!(g_error(&r).unwrap(), 0.0);
    }

    #[test]
    fn all_normal_predictions() {
        let p = preds(&[(Class::Anomaly, Class::Normal, 3), (Class::Normal, Class::Normal, 4)]);
        let r = confusion(&p, DEFAULT_XI).unwrap();
        assert_eq!((r.tp, r.fn_, r.tn, r.fp), (0.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn hand_counted_fixture() {
        let p = preds(&[
            (Class::Anomaly, Class::Anomaly, 9),
            (Class::Anomaly, Class::Normal, 1),
            (Class::Normal, Class::Normal, 8),
            (Class::Normal, Class::Anomaly, 2),
        ]);
        let r = confusion(&p, 0.35).unwrap();
        assert_eq!((r.tp, r.fn_, r.tn, r.fp), (0.9, 0.1, 0.8, 0.2));
        // (0.35*0.1 + 0.65*0.2) / (1 + 0.35*0.8 + 0.65*0.9) = 0.165 / 1.865
        assert!((g_error(&r).unwrap() - 0.165 / 1.865).abs() < 1e-12);
    }

    #[test]
    fn missing_class() {
        let p = preds(&[(Class::Normal, Class::Normal, 4)]);
        assert_eq!(confusion(&p, 0.35), Err(MetricsError::MissingClass(Class::Anomaly)));
        let p = preds(&[(Class::Anomaly, Class::Normal, 4)]);
        assert_eq!(confusion(&p, 0.35), Err(MetricsError::MissingClass(Class::Normal)));
    }

    #[test]
    fn worst_classifier_is_one() {
        for xi in [0.0, 0.35, 0.5, 1.0] {
            let r = ConfusionRates { tp: 0.0, fn_: 1.0, tn: 0.0, fp: 1.0, xi };
            assert_eq!(g_error(&r).unwrap(), 1.0);
        }
    }

    #[test]
    fn invalid_rates_rejected() {
        let r = ConfusionRates { tp: 0.5, fn_: 0.6, tn: 1.0, fp: 0.0, xi: 0.35 };
        assert!(g_error(&r).is_err());
        let r = ConfusionRates { tp: 1.0, fn_: 0.0, tn: 1.0, fp: 0.0, xi: 1.5 };
        assert!(g_error(&r).is_err());
    }

    #[test]
    fn kfold_sizes() {
        let folds = kfold_split(100, 10, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 10));
        let folds = kfold_split(101, 10, 1).unwrap();
        assert_eq!(folds.iter().filter(|f| f.len() == 11).count(), 1);
        assert_eq!(folds.iter().filter(|f| f.len() == 10).count(), 9);
        assert_eq!(kfold_split(101, 10, 1).unwrap(), folds);
        assert!(matches!(kfold_split(3, 4, 0), Err(MetricsError::TooFewSamples { .. })));
        assert!(kfold_split(10, 1, 0).is_err());
    }

    #[test]
    fn predictions_csv_round_trip() {
        let p = preds(&[(Class::Anomaly, Class::Normal, 2), (Class::Normal, Class::Normal, 1)]);
        let mut buf = Vec::new();
        write_predictions(&mut buf, &p).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("flow_id,predicted,actual\n"));
        assert_eq!(read_predictions(&buf[..]).unwrap(), p);
        let bad = b"flow_id,predicted,actual\nf0,anomaly,normal\nf1,maybe,normal\n";
        assert!(matches!(read_predictions(&bad[..]), Err(MetricsError::Parse { line: 3, .. })));
    }
}
