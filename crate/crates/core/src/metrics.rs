//! Error criteria and contiguous train/test splits.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{GreyError, Result};
use crate::model::{Forecast, TimeSeries};

/// `sqrt(sum (fitted - actual)^2 / (n - 1))`.
pub fn rmse(fitted: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(fitted, actual)?;
    if actual.len() < 2 {
        return Err(GreyError::InvalidArgument("RMSE needs at least two points".into()));
    }
    let ss: f64 = fitted.iter().zip(actual).map(|(f, a)| (f - a).powi(2)).sum();
    Ok((ss / (actual.len() - 1) as f64).sqrt())
}

/// RMSE of a multi-output fit: square root of the mean per-component squared RMSE.
pub fn rmse_matrix(fitted: &DMatrix<f64>, actual: &DMatrix<f64>) -> Result<f64> {
    if fitted.shape() != actual.shape() {
        return Err(GreyError::Dimension(format!(
            "fitted is {:?}, actual is {:?}",
            fitted.shape(),
            actual.shape()
        )));
    }
    let d = actual.ncols();
    let mut acc = 0.0;
    for j in 0..d {
        let f: Vec<f64> = fitted.column(j).iter().copied().collect();
        let a: Vec<f64> = actual.column(j).iter().copied().collect();
        acc += rmse(&f, &a)?.powi(2);
    }
    Ok((acc / d as f64).sqrt())
}

/// Absolute percentage errors `|fitted - actual| / |actual| * 100`.
pub fn ape(fitted: &[f64], actual: &[f64]) -> Result<Vec<f64>> {
    check_lengths(fitted, actual)?;
    fitted
        .iter()
        .zip(actual)
        .map(|(f, a)| {
            if *a == 0.0 {
                Err(GreyError::Domain("percentage error undefined for a zero actual value".into()))
            } else {
                Ok((f - a).abs() / a.abs() * 100.0)
            }
        })
        .collect()
}

pub fn mape(fitted: &[f64], actual: &[f64]) -> Result<f64> {
    let e = ape(fitted, actual)?;
    if e.is_empty() {
        return Err(GreyError::InvalidArgument("MAPE of an empty segment".into()));
    }
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

fn check_lengths(fitted: &[f64], actual: &[f64]) -> Result<()> {
    if fitted.len() != actual.len() {
        return Err(GreyError::Dimension(format!(
            "{} fitted values for {} actual values",
            fitted.len(),
            actual.len()
        )));
    }
    Ok(())
}

/// Held-out suffix of a series (may be shorter than a fittable [`TimeSeries`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Holdout {
    pub times: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl Holdout {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// First `split_index` points for training, the rest held out.
pub fn train_test_split(ts: &TimeSeries, split_index: usize) -> Result<(TimeSeries, Holdout)> {
    let n = ts.len();
    if split_index <= 1 || split_index >= n {
        return Err(GreyError::InvalidArgument(format!(
            "split index must satisfy 1 < k < {n}, got {split_index}"
        )));
    }
    if split_index < TimeSeries::MIN_LEN {
        return Err(GreyError::InvalidArgument(format!(
            "training segment needs at least {} points, got {split_index}",
            TimeSeries::MIN_LEN
        )));
    }
    let v = ts.values();
    let train = TimeSeries::new(
        ts.times()[..split_index].to_vec(),
        v.rows(0, split_index).into_owned(),
    )?;
    let test = Holdout {
        times: ts.times()[split_index..].to_vec(),
        values: v.rows(split_index, n - split_index).into_owned(),
    };
    Ok((train, test))
}

/// Per-point errors of fitted and forecast values against observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub ape_train: Vec<f64>,
    pub ape_test: Vec<f64>,
    pub mape_train: f64,
    pub mape_test: Option<f64>,
    /// In-sample RMSE over the training rows.
    pub rmse: f64,
    pub n_train: usize,
    pub n_test: usize,
}

impl EvaluationReport {
    /// MAPE over training and test points together.
    pub fn mape_all(&self) -> f64 {
        let total: f64 = self.ape_train.iter().chain(&self.ape_test).sum();
        total / (self.ape_train.len() + self.ape_test.len()) as f64
    }
}

fn flatten_rows(m: &DMatrix<f64>, start: usize, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count * m.ncols());
    for k in start..start + count {
        out.extend(m.row(k).iter().copied());
    }
    out
}

/// Scores the first `actual.nrows()` rows of `forecast`; rows from `n_train` on are test rows.
pub fn evaluate(forecast: &Forecast, actual: &DMatrix<f64>, n_train: usize) -> Result<EvaluationReport> {
    forecast.require_complete()?;
    let n = actual.nrows();
    if forecast.values.nrows() < n || forecast.values.ncols() != actual.ncols() {
        return Err(GreyError::Dimension(format!(
            "forecast has {} rows for {} observations",
            forecast.values.nrows(),
            n
        )));
    }
    if n_train < 2 || n_train > n {
        return Err(GreyError::InvalidArgument(format!("bad training length {n_train}")));
    }
    let fitted = forecast.values.rows(0, n).into_owned();
    let ape_train = ape(&flatten_rows(&fitted, 0, n_train), &flatten_rows(actual, 0, n_train))?;
    let n_test = n - n_train;
    let ape_test = ape(
        &flatten_rows(&fitted, n_train, n_test),
        &flatten_rows(actual, n_train, n_test),
    )?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let rmse = rmse_matrix(
        &fitted.rows(0, n_train).into_owned(),
        &actual.rows(0, n_train).into_owned(),
    )?;
    Ok(EvaluationReport {
        mape_train: mean(&ape_train),
        mape_test: (n_test > 0).then(|| mean(&ape_test)),
        ape_train,
        ape_test,
        rmse,
        n_train,
        n_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let f: Vec<f64> = a.iter().map(|v| v + 0.3).collect();
        assert_relative_eq!(rmse(&f, &a).unwrap(), 0.3 * (5.0f64 / 4.0).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(rmse(&[1.0, 2.5], &[1.0, 2.0]).unwrap(), 0.5);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ape_examples() {
        let e = ape(&[102.50], &[102.24]).unwrap();
        assert!((e[0] - 0.25).abs() < 0.01);
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!(matches!(ape(&[1.0], &[0.0]), Err(GreyError::Domain(_))));
    }

    #[test]
    fn split_examples() {
        let vals: Vec<f64> = (1..=15).map(|k| k as f64).collect();
        let ts = TimeSeries::unit_spaced(&vals).unwrap();
        let (train, test) = train_test_split(&ts, 11).unwrap();
        assert_eq!((train.len(), test.len()), (11, 4));
        let (_, test) = train_test_split(&ts, 14).unwrap();
        assert_eq!(test.len(), 1);
        assert!(train_test_split(&ts, 15).is_err());
        assert!(train_test_split(&ts, 1).is_err());
        assert!(train_test_split(&ts, 2).is_err());

        let (train, test) = train_test_split(&ts, 6).unwrap();
        let mut times = train.times().to_vec();
        times.extend(&test.times);
        let mut values = train.column(0);
        values.extend(test.values.iter());
        assert_eq!(times, ts.times());
        assert_eq!(values, vals);
    }

    #[test]
    fn rmse_shift() {
        let a = [1.0, 4.0, 2.0, 8.0];
        let f = [1.5, 3.0, 2.5, 7.0];
        let shifted: Vec<f64> = f.iter().map(|v| v + 0.7).collect();
        let direct = {
            let ss: f64 = shifted.iter().zip(&a).map(|(s, x)| (s - x).powi(2)).sum();
            (ss / 3.0).sqrt()
        };
        assert_relative_eq!(rmse(&shifted, &a).unwrap(), direct, epsilon = 1e-14);
    }

    #[test]
    fn evaluation_segments() {
        let actual = DMatrix::from_column_slice(5, 1, &[10.0, 20.0, 30.0, 40.0, 50.0]);
        let fc = Forecast {
            times: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            values: DMatrix::from_column_slice(6, 1, &[10.0, 22.0, 30.0, 44.0, 45.0, 60.0]),
            horizon: 3,
            blow_up: None,
        };
        let r = evaluate(&fc, &actual, 3).unwrap();
        assert_eq!(r.ape_train.len(), 3);
        assert_relative_eq!(r.mape_train, 10.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(r.mape_test.unwrap(), 10.0, epsilon = 1e-12);
        assert_relative_eq!(r.mape_all(), 6.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn mape_permutation_invariant(pairs in prop::collection::vec((1.0f64..100.0, 1.0f64..100.0), 1..20), rot in 0usize..20) {
            let f: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let a: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let k = rot % pairs.len();
            let mut f2 = f.clone();
            let mut a2 = a.clone();
            f2.rotate_left(k);
            a2.rotate_left(k);
            let m1 = mape(&f, &a).unwrap();
            let m2 = mape(&f2, &a2).unwrap();
            prop_assert!((m1 - m2).abs() <= 1e-12 * m1.max(1.0));
        }
    }
}
