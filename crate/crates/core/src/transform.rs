//! Cusum accumulation, its inverse, and the trapezoidal integral proxy.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::model::{cusum_weights, validate_grid, TimeSeries};

/// Accumulated series `y(t_k) = sum_{i<=k} h_i x(t_i)` with `h_1 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumSeries {
    times: Vec<f64>,
    cum_values: DMatrix<f64>,
}

impl CusumSeries {
    pub fn new(times: Vec<f64>, cum_values: DMatrix<f64>) -> Result<Self> {
        validate_grid(&times, &cum_values, TimeSeries::MIN_LEN)?;
        Ok(Self { times, cum_values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.cum_values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.cum_values.ncols()
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        self.cum_values.row(k).iter().copied().collect()
    }
}

pub fn cusum(ts: &TimeSeries) -> CusumSeries {
    let w = ts.cusum_weights();
    let x = ts.values();
    let mut y = DMatrix::zeros(x.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let mut acc = 0.0;
        for k in 0..x.nrows() {
            acc += w[k] * x[(k, j)];
            y[(k, j)] = acc;
        }
    }
    CusumSeries {
        times: ts.times().to_vec(),
        cum_values: y,
    }
}

/// Differencing inverse of [`cusum`].
pub fn inverse_cusum(ycum: &CusumSeries) -> TimeSeries {
    let x = inverse_cusum_rows(ycum.times(), ycum.values());
    TimeSeries::new(ycum.times().to_vec(), x).expect("a valid cusum series has a valid inverse")
}

/// Inverse Cusum on raw rows; `times` may be shorter than 3 entries.
pub(crate) fn inverse_cusum_rows(times: &[f64], y: &DMatrix<f64>) -> DMatrix<f64> {
    let w = cusum_weights(&times[..y.nrows()]);
    let mut x = DMatrix::zeros(y.nrows(), y.ncols());
    for j in 0..y.ncols() {
        for k in 0..y.nrows() {
            x[(k, j)] = if k == 0 {
                y[(0, j)]
            } else {
                (y[(k, j)] - y[(k - 1, j)]) / w[k]
            };
        }
    }
    x
}

/// Trapezoidal running integral `x~(t_k)` of the observations, with `x~(t_1) = 0`.
pub fn trapezoid_cumulative(ts: &TimeSeries) -> DMatrix<f64> {
    trapezoid_rows(ts.times(), ts.values())
}

pub(crate) fn trapezoid_rows(times: &[f64], x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let mut acc = 0.0;
        for k in 1..x.nrows() {
            let h = times[k] - times[k - 1];
            acc += 0.5 * h * (x[(k - 1, j)] + x[(k, j)]);
            out[(k, j)] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn cusum_examples() {
        let ts = TimeSeries::unit_spaced(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(cusum(&ts).values().as_slice(), &[1.0, 3.0, 6.0]);

        let ts = TimeSeries::unit_spaced(&[5.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(cusum(&ts).values().as_slice(), &[5.0; 4]);

        let ts = TimeSeries::univariate(vec![0.0, 0.5, 1.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(cusum(&ts).values().as_slice(), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn inverse_examples() {
        let y = CusumSeries::new(vec![1.0, 2.0, 3.0], DMatrix::from_column_slice(3, 1, &[1.0, 3.0, 6.0]))
            .unwrap();
        assert_eq!(inverse_cusum(&y).values().as_slice(), &[1.0, 2.0, 3.0]);
        let y = CusumSeries::new(vec![1.0, 2.0, 3.0], DMatrix::from_element(3, 1, 4.0)).unwrap();
        assert_eq!(inverse_cusum(&y).values().as_slice(), &[4.0, 0.0, 0.0]);
    }

    #[test]
    fn trapezoid_examples() {
        let ts = TimeSeries::unit_spaced(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(trapezoid_cumulative(&ts).as_slice(), &[0.0, 1.0, 2.0]);
        let ts = TimeSeries::unit_spaced(&[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(trapezoid_cumulative(&ts).as_slice(), &[0.0, 0.5, 2.0]);

        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let ts = TimeSeries::univariate(times.clone(), &times).unwrap();
        assert_relative_eq!(trapezoid_cumulative(&ts)[100], 0.5, epsilon = 1e-14);
    }

    fn sine_max_error(h: f64) -> f64 {
        let n = (4.0 / h).round() as usize + 1;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
        let vals: Vec<f64> = times.iter().map(|t| t.sin()).collect();
        let ts = TimeSeries::univariate(times.clone(), &vals).unwrap();
        let tr = trapezoid_cumulative(&ts);
        times
            .iter()
            .enumerate()
            .map(|(k, t)| (tr[k] - (1.0 - t.cos())).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn trapezoid_second_order() {
        let e1 = sine_max_error(0.04);
        let e2 = sine_max_error(0.02);
        let ratio = e1 / e2;
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn cusum_close_to_integral_plus_eta() {
        let h = 0.01;
        let n = 401;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
        let vals: Vec<f64> = times.iter().map(|t| t.exp()).collect();
        let ts = TimeSeries::univariate(times, &vals).unwrap();
        let y = cusum(&ts);
        let tr = trapezoid_cumulative(&ts);
        let max_x = vals.iter().cloned().fold(0.0, f64::max);
        let diff = (0..n)
            .map(|k| (y.values()[k] - (vals[0] + tr[k])).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 2.0 * max_x * h, "diff {diff}");
    }

    fn series_strategy() -> impl Strategy<Value = TimeSeries> {
        (3usize..30, 1usize..=3).prop_flat_map(|(n, d)| {
            (
                prop::collection::vec(0.01f64..2.0, n),
                prop::collection::vec(-50.0f64..50.0, n * d),
                -5.0f64..5.0,
            )
                .prop_map(move |(gaps, vals, t0)| {
                    let mut t = t0;
                    let times: Vec<f64> = gaps
                        .iter()
                        .map(|g| {
                            t += g;
                            t
                        })
                        .collect();
                    TimeSeries::new(times, DMatrix::from_vec(n, d, vals)).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip(ts in series_strategy()) {
            let back = inverse_cusum(&cusum(&ts));
            let y = cusum(&ts);
            let scale = y.values().amax().max(ts.values().amax()).max(1.0);
            for (a, b) in back.values().iter().zip(ts.values().iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
            }
        }

        #[test]
        fn nonnegative_input_gives_nondecreasing_cusum(vals in prop::collection::vec(0.0f64..10.0, 3..20)) {
            let ts = TimeSeries::unit_spaced(&vals).unwrap();
            let y = cusum(&ts);
            for k in 1..vals.len() {
                prop_assert!(y.values()[k] >= y.values()[k - 1]);
            }
        }
    }
}
