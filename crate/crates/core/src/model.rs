//! Domain types shared across the estimators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::NonlinearBasis;
use crate::error::{GreyError, Result};
use crate::ode::BlowUp;

/// A sampled multivariate trajectory with strictly increasing time stamps.
///
/// Row `k` of `values` is the observation `x(t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: DMatrix<f64>,
}

impl TimeSeries {
    pub const MIN_LEN: usize = 3;

    pub fn new(times: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        validate_grid(&times, &values, Self::MIN_LEN)?;
        Ok(Self { times, values })
    }

    /// Univariate series from a slice of observations.
    pub fn univariate(times: Vec<f64>, values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::new(times, DMatrix::from_column_slice(n, 1, values))
    }

    /// Univariate series sampled at `t = 1, 2, ..., n`.
    pub fn unit_spaced(values: &[f64]) -> Result<Self> {
        let times = (1..=values.len()).map(|k| k as f64).collect();
        Self::univariate(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Observation `x(t_k)` (0-based `k`).
    pub fn row(&self, k: usize) -> Vec<f64> {
        self.values.row(k).iter().copied().collect()
    }

    /// Column `i` as a vector.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.column(i).iter().copied().collect()
    }

    /// Spacings `h_k = t_k - t_{k-1}` for `k >= 1` (0-based), with `h_0 = 1`
    /// as used by the Cusum operator.
    pub fn cusum_weights(&self) -> Vec<f64> {
        cusum_weights(&self.times)
    }

    /// Mean sampling interval.
    pub fn mean_spacing(&self) -> f64 {
        let n = self.times.len();
        (self.times[n - 1] - self.times[0]) / (n - 1) as f64
    }

    pub fn into_parts(self) -> (Vec<f64>, DMatrix<f64>) {
        (self.times, self.values)
    }
}

pub(crate) fn cusum_weights(times: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(times.len());
    if !times.is_empty() {
        w.push(1.0);
    }
    w.extend(times.windows(2).map(|p| p[1] - p[0]));
    w
}

pub(crate) fn validate_grid(times: &[f64], values: &DMatrix<f64>, min_len: usize) -> Result<()> {
    if times.len() < min_len {
        return Err(GreyError::InvalidSeries(format!(
            "need at least {min_len} samples, got {}",
            times.len()
        )));
    }
    if values.nrows() != times.len() {
        return Err(GreyError::InvalidSeries(format!(
            "{} time stamps but {} value rows",
            times.len(),
            values.nrows()
        )));
    }
    if values.ncols() == 0 {
        return Err(GreyError::InvalidSeries("series has no columns".into()));
    }
    if times.iter().any(|t| !t.is_finite()) || values.iter().any(|v| !v.is_finite()) {
        return Err(GreyError::InvalidSeries("non-finite entry".into()));
    }
    if let Some(k) = times.windows(2).position(|p| p[1] <= p[0]) {
        return Err(GreyError::InvalidSeries(format!(
            "time stamps must be strictly increasing (t[{}] = {} >= t[{}] = {})",
            k,
            times[k],
            k + 1,
            times[k + 1]
        )));
    }
    Ok(())
}

/// Structural shape of the unified model
/// `dy/dt = theta_L y + theta_N N(y) + beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dimension: usize,
    pub basis: NonlinearBasis,
    /// Whether the grey equation carries the constant vector `beta`.
    pub include_constant: bool,
    /// Whether `theta_L` is estimated; when false it is fixed at zero.
    #[serde(default = "default_true")]
    pub include_linear: bool,
    /// Restricts `theta_L` to its diagonal in the grey structural fit, so each
    /// equation carries only its own linear term.
    #[serde(default)]
    pub diagonal_linear: bool,
}

fn default_true() -> bool {
    true
}

impl ModelSpec {
    pub fn new(dimension: usize, basis: NonlinearBasis, include_constant: bool) -> Result<Self> {
        let spec = Self {
            dimension,
            basis,
            include_constant,
            include_linear: true,
            diagonal_linear: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(GreyError::InvalidSpec("dimension must be >= 1".into()));
        }
        self.basis.validate(self.dimension)?;
        if self.diagonal_linear && !self.include_linear {
            return Err(GreyError::InvalidSpec("diagonal_linear requires include_linear".into()));
        }
        if !self.include_linear && self.basis.is_empty() && !self.include_constant {
            return Err(GreyError::InvalidSpec("model has no terms".into()));
        }
        Ok(())
    }

    /// Grey Verhulst model `dy/dt = a y + b y^2`.
    pub fn verhulst() -> Self {
        Self {
            dimension: 1,
            basis: NonlinearBasis::Polynomial { max_degree: 2 },
            include_constant: false,
            include_linear: true,
            diagonal_linear: false,
        }
    }

    /// Univariate polynomial model with `y^2 .. y^max_degree`.
    pub fn polynomial(max_degree: usize, include_constant: bool) -> Result<Self> {
        Self::new(1, NonlinearBasis::Polynomial { max_degree }, include_constant)
    }

    /// Bernoulli-type model `dy/dt = a y + b y^gamma`.
    pub fn bernoulli(gamma: f64) -> Self {
        Self {
            dimension: 1,
            basis: NonlinearBasis::Power { gamma },
            include_constant: false,
            include_linear: true,
            diagonal_linear: false,
        }
    }

    /// Pure power model `dy/dt = b y^gamma` (no linear term).
    pub fn pure_power(gamma: f64) -> Self {
        Self {
            dimension: 1,
            basis: NonlinearBasis::Power { gamma },
            include_constant: false,
            include_linear: false,
            diagonal_linear: false,
        }
    }

    /// Multi-output model with all quadratic interactions.
    pub fn quadratic(dimension: usize) -> Result<Self> {
        Self::new(dimension, NonlinearBasis::Quadratic { dim: dimension }, false)
    }

    /// Two-species grey Lotka-Volterra model
    /// `dy_i/dt = a_i y_i + c_i y1 y2`.
    pub fn lotka_volterra() -> Self {
        Self {
            dimension: 2,
            basis: NonlinearBasis::Interaction { dim: 2 },
            include_constant: false,
            include_linear: true,
            diagonal_linear: true,
        }
    }

    /// Linear grey model `dy/dt = a y + beta`.
    pub fn linear(include_constant: bool) -> Self {
        Self {
            dimension: 1,
            basis: NonlinearBasis::Linear,
            include_constant,
            include_linear: true,
            diagonal_linear: false,
        }
    }

    /// Number of nonlinear basis functions `p`.
    pub fn nonlinear_len(&self) -> usize {
        self.basis.len()
    }

    pub fn with_basis(mut self, basis: NonlinearBasis) -> Result<Self> {
        self.basis = basis;
        self.validate()?;
        Ok(self)
    }
}

/// Which initial-value convention a [`ParameterSet`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterForm {
    /// `eta` is the Cusum initial value `y(t_1)` of the grey equation.
    Grey,
    /// `eta` is the shared integral constant of the integro-differential form.
    Reduced,
}

/// Structural parameters and initial value of the unified model.
///
/// Both forms store the pair `(beta, eta_x)` linked by
/// `eta_x = theta_L eta + theta_N N(eta) + beta`, so converting between forms
/// only changes the tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    theta_l: DMatrix<f64>,
    theta_n: DMatrix<f64>,
    beta: DVector<f64>,
    eta: DVector<f64>,
    eta_x: DVector<f64>,
    form: ParameterForm,
}

impl ParameterSet {
    /// Grey-form parameters with Cusum initial value `eta_y`.
    pub fn grey(
        spec: &ModelSpec,
        theta_l: DMatrix<f64>,
        theta_n: DMatrix<f64>,
        beta: DVector<f64>,
        eta_y: DVector<f64>,
    ) -> Result<Self> {
        check_shapes(spec, &theta_l, &theta_n, &eta_y)?;
        if beta.len() != spec.dimension {
            return Err(GreyError::Dimension(format!(
                "beta has length {}, expected {}",
                beta.len(),
                spec.dimension
            )));
        }
        let eta_x = implied_state_initial(spec, &theta_l, &theta_n, &beta, &eta_y)?;
        let set = Self {
            theta_l,
            theta_n,
            beta,
            eta: eta_y,
            eta_x,
            form: ParameterForm::Grey,
        };
        set.check_finite()?;
        Ok(set)
    }

    /// Reduced-form parameters with the shared initial value `eta`
    /// (`x(t_1) = eta` and `y = eta + integral of x`).
    pub fn reduced(
        spec: &ModelSpec,
        theta_l: DMatrix<f64>,
        theta_n: DMatrix<f64>,
        eta: DVector<f64>,
    ) -> Result<Self> {
        let eta_x = eta.clone();
        Self::reduced_with_state(spec, theta_l, theta_n, eta, eta_x)
    }

    /// Reduced-form parameters with a state initial value `eta_x` that may
    /// differ from the integral constant `eta`.
    pub fn reduced_with_state(
        spec: &ModelSpec,
        theta_l: DMatrix<f64>,
        theta_n: DMatrix<f64>,
        eta: DVector<f64>,
        eta_x: DVector<f64>,
    ) -> Result<Self> {
        check_shapes(spec, &theta_l, &theta_n, &eta)?;
        if eta_x.len() != spec.dimension {
            return Err(GreyError::Dimension("eta_x length".into()));
        }
        let zero = DVector::zeros(spec.dimension);
        let drift = implied_state_initial(spec, &theta_l, &theta_n, &zero, &eta)?;
        let beta = &eta_x - drift;
        let set = Self {
            theta_l,
            theta_n,
            beta,
            eta,
            eta_x,
            form: ParameterForm::Reduced,
        };
        set.check_finite()?;
        Ok(set)
    }

    fn check_finite(&self) -> Result<()> {
        let all = self
            .theta_l
            .iter()
            .chain(self.theta_n.iter())
            .chain(self.beta.iter())
            .chain(self.eta.iter())
            .chain(self.eta_x.iter());
        for v in all {
            if !v.is_finite() {
                return Err(GreyError::InvalidArgument("non-finite parameter".into()));
            }
        }
        Ok(())
    }

    pub fn theta_l(&self) -> &DMatrix<f64> {
        &self.theta_l
    }

    pub fn theta_n(&self) -> &DMatrix<f64> {
        &self.theta_n
    }

    /// Constant vector of the grey equation.
    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// Initial value: `y(t_1)` in grey form, the shared `eta` in reduced form.
    /// The two coincide under the canonical `zeta = eta` convention.
    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    /// State initial value `x(t_1)` implied by the initial-value relation.
    pub fn eta_x(&self) -> &DVector<f64> {
        &self.eta_x
    }

    pub fn form(&self) -> ParameterForm {
        self.form
    }

    pub fn dimension(&self) -> usize {
        self.eta.len()
    }
}

fn check_shapes(
    spec: &ModelSpec,
    theta_l: &DMatrix<f64>,
    theta_n: &DMatrix<f64>,
    eta: &DVector<f64>,
) -> Result<()> {
    let d = spec.dimension;
    let p = spec.nonlinear_len();
    if theta_l.shape() != (d, d) {
        return Err(GreyError::Dimension(format!(
            "theta_L is {:?}, expected ({d}, {d})",
            theta_l.shape()
        )));
    }
    if theta_n.shape() != (d, p) {
        return Err(GreyError::Dimension(format!(
            "theta_N is {:?}, expected ({d}, {p})",
            theta_n.shape()
        )));
    }
    if eta.len() != d {
        return Err(GreyError::Dimension(format!(
            "eta has length {}, expected {d}",
            eta.len()
        )));
    }
    Ok(())
}

/// `theta_L eta + theta_N N(eta) + beta`.
fn implied_state_initial(
    spec: &ModelSpec,
    theta_l: &DMatrix<f64>,
    theta_n: &DMatrix<f64>,
    beta: &DVector<f64>,
    eta: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n_eta = DVector::from_vec(spec.basis.evaluate(eta.as_slice())?);
    Ok(theta_l * eta + theta_n * n_eta + beta)
}

/// Re-expresses grey parameters in the reduced convention. The reduced `eta`
/// is the grey `eta_y` and `eta_x` is carried along for ODE seeding.
pub fn grey_to_reduced(params: &ParameterSet, spec: &ModelSpec) -> Result<ParameterSet> {
    if params.form != ParameterForm::Grey {
        return Err(GreyError::InvalidArgument("expected grey-form parameters".into()));
    }
    check_shapes(spec, &params.theta_l, &params.theta_n, &params.eta)?;
    Ok(ParameterSet {
        form: ParameterForm::Reduced,
        ..params.clone()
    })
}

/// Re-expresses reduced parameters as a grey equation with `eta_y = eta` and
/// `beta = eta_x - theta_L eta - theta_N N(eta)`.
pub fn reduced_to_grey(params: &ParameterSet, spec: &ModelSpec) -> Result<ParameterSet> {
    if params.form != ParameterForm::Reduced {
        return Err(GreyError::InvalidArgument("expected reduced-form parameters".into()));
    }
    check_shapes(spec, &params.theta_l, &params.theta_n, &params.eta)?;
    Ok(ParameterSet {
        form: ParameterForm::Grey,
        ..params.clone()
    })
}

/// Splits regression coefficients laid out as
/// `[linear (d rows, optional), nonlinear (p rows), constant (1 row, optional)]`
/// into `(theta_L, theta_N, constant)`.
pub(crate) fn unpack_coefficients(
    spec: &ModelSpec,
    coef: &DMatrix<f64>,
    with_linear: bool,
    with_constant: bool,
) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let d = spec.dimension;
    let p = spec.nonlinear_len();
    let mut row = 0;
    let theta_l = if with_linear {
        row += d;
        coef.rows(0, d).transpose()
    } else {
        DMatrix::zeros(d, d)
    };
    let theta_n = coef.rows(row, p).transpose();
    row += p;
    let constant = if with_constant {
        coef.row(row).transpose()
    } else {
        DVector::zeros(d)
    };
    (theta_l, theta_n, constant)
}

/// Estimator that produced a [`FitResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    GreyTwoStep,
    IntegralMatching,
    IntegralMatchingPowerFallback,
}

impl FitMethod {
    pub fn label(&self) -> &'static str {
        match self {
            FitMethod::GreyTwoStep => "grey_two_step",
            FitMethod::IntegralMatching => "integral_matching",
            FitMethod::IntegralMatchingPowerFallback => "integral_matching_power",
        }
    }
}

/// Coefficients of the pseudo-linear regression
/// `x(t_k) = vartheta_L x~ + vartheta_N N(x~) + eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedParameters {
    pub vartheta_l: DMatrix<f64>,
    pub vartheta_n: DMatrix<f64>,
    pub intercept: DVector<f64>,
}

/// An estimated model together with the regression that produced it.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: ParameterSet,
    pub method: FitMethod,
    /// Time stamps of the fitted sample.
    pub times: Vec<f64>,
    /// Regression design (`Theta` or `Omega`), one row per `k = 2..n`.
    pub design: DMatrix<f64>,
    /// Regression targets `x(t_k)`, `k = 2..n`.
    pub targets: DMatrix<f64>,
    /// `targets - design * coefficients`, shape `(n - 1) x d`.
    pub residuals: DMatrix<f64>,
    /// Condition estimate of the (column-equilibrated) normal matrix.
    pub condition_estimate: f64,
    /// Raw transformed coefficients for integral-matching fits.
    pub transformed: Option<TransformedParameters>,
}

impl FitResult {
    pub fn n(&self) -> usize {
        self.times.len()
    }
}

/// In-sample fits followed by `horizon` out-of-sample forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    /// All requested times, `n + horizon` entries.
    pub times: Vec<f64>,
    /// Computed rows of `x^(t_k)`; shorter than `times` when the solution blew up.
    pub values: DMatrix<f64>,
    pub horizon: usize,
    pub blow_up: Option<BlowUp>,
}

impl Forecast {
    pub fn is_complete(&self) -> bool {
        self.blow_up.is_none() && self.values.nrows() == self.times.len()
    }

    /// Number of in-sample rows.
    pub fn fitted_len(&self) -> usize {
        self.times.len() - self.horizon
    }

    /// Column `i` of the computed rows.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.column(i).iter().copied().collect()
    }

    /// Returns an error if the trajectory did not reach every requested time.
    pub fn require_complete(&self) -> Result<()> {
        match self.blow_up {
            Some(b) => Err(GreyError::BlowUp {
                index: b.index,
                time: b.time,
            }),
            None => Ok(()),
        }
    }
}

/// Times `t_1..t_n` followed by `horizon` stamps spaced by the sample's mean interval.
pub fn extend_times(times: &[f64], horizon: usize) -> Vec<f64> {
    let n = times.len();
    let step = if n > 1 {
        (times[n - 1] - times[0]) / (n - 1) as f64
    } else {
        1.0
    };
    let last = times[n - 1];
    let mut out = times.to_vec();
    out.extend((1..=horizon).map(|k| last + step * k as f64));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use nalgebra::dvector;

    #[test]
    fn series_validation() {
        assert!(TimeSeries::unit_spaced(&[1.0, 2.0]).is_err());
        assert!(TimeSeries::univariate(vec![0.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(TimeSeries::univariate(vec![0.0, 1.0, 2.0], &[1.0, f64::NAN, 3.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0, 2.0], DMatrix::zeros(2, 1)).is_err());
        let ts = TimeSeries::univariate(vec![0.0, 0.5, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ts.cusum_weights(), vec![1.0, 0.5, 1.5]);
        assert_eq!(ts.dim(), 1);
    }

    #[test]
    fn verhulst_initial_value_relation() {
        let spec = ModelSpec::verhulst();
        let p = ParameterSet::grey(&spec, dmatrix![1.2], dmatrix![-0.5], dvector![0.0], dvector![0.4])
            .unwrap();
        let r = grey_to_reduced(&p, &spec).unwrap();
        assert_relative_eq!(r.eta_x()[0], 1.2 * 0.4 - 0.5 * 0.16, epsilon = 1e-15);
        assert_relative_eq!(r.eta_x()[0], 0.4, epsilon = 1e-15);
        assert_eq!(r.eta()[0], 0.4);
    }

    #[test]
    fn linear_case_state_initial() {
        let spec = ModelSpec::verhulst();
        let p = ParameterSet::grey(&spec, dmatrix![0.7], dmatrix![0.0], dvector![0.0], dvector![2.0])
            .unwrap();
        assert_relative_eq!(p.eta_x()[0], 1.4);
    }

    #[test]
    fn reduced_to_grey_beta() {
        let spec = ModelSpec::verhulst();
        let r = ParameterSet::reduced(&spec, dmatrix![0.0], dmatrix![0.0], dvector![3.5]).unwrap();
        let g = reduced_to_grey(&r, &spec).unwrap();
        assert_eq!(g.beta()[0], 3.5);

        let r = ParameterSet::reduced(&spec, dmatrix![1.2], dmatrix![-0.5], dvector![0.4]).unwrap();
        let g = reduced_to_grey(&r, &spec).unwrap();
        assert_relative_eq!(g.beta()[0], 0.4 - 0.48 + 0.08, epsilon = 1e-15);
        assert!(g.beta()[0].abs() < 1e-15);
    }

    #[test]
    fn round_trips() {
        let spec = ModelSpec::quadratic(2).unwrap();
        let theta_l = dmatrix![1.0, 0.2; -0.3, 0.5];
        let theta_n = dmatrix![0.1, -0.3, 0.0; 0.0, 0.4, 0.02];
        let g = ParameterSet::grey(&spec, theta_l, theta_n, dvector![0.3, -0.1], dvector![5.0, 0.6])
            .unwrap();
        let back = reduced_to_grey(&grey_to_reduced(&g, &spec).unwrap(), &spec).unwrap();
        assert_eq!(back, g);

        let r = ParameterSet::reduced(&spec, g.theta_l().clone(), g.theta_n().clone(), dvector![1.0, 2.0])
            .unwrap();
        let again = grey_to_reduced(&reduced_to_grey(&r, &spec).unwrap(), &spec).unwrap();
        assert_eq!(again, r);
        assert!(grey_to_reduced(&r, &spec).is_err());
        assert!(reduced_to_grey(&g, &spec).is_err());
    }

    #[test]
    fn shape_errors() {
        let spec = ModelSpec::verhulst();
        assert!(ParameterSet::reduced(&spec, dmatrix![1.0, 2.0], dmatrix![0.0], dvector![1.0]).is_err());
        assert!(ParameterSet::reduced(&spec, dmatrix![1.0], dmatrix![0.0, 1.0], dvector![1.0]).is_err());
    }

    #[test]
    fn extended_grid_uses_mean_spacing() {
        assert_eq!(extend_times(&[1.0, 2.0, 3.0], 2), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(extend_times(&[0.0, 1.0, 4.0], 1), vec![0.0, 1.0, 4.0, 6.0]);
        assert_eq!(extend_times(&[0.0, 1.0, 4.0], 0), vec![0.0, 1.0, 4.0]);
    }
}
