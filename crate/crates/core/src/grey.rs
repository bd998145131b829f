//! Classical two-step grey modelling: Cusum, background-value design, least
//! squares for the structure, then a separate initial-value choice.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::brent::BrentRoot;
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GreyError, Result};
use crate::linalg::{least_squares_solve, LsSolution};
use crate::model::{
    extend_times, unpack_coefficients, FitMethod, FitResult, Forecast, ModelSpec, ParameterForm,
    ParameterSet, TimeSeries,
};
use crate::ode::{GreyField, Integrator, Trajectory};
use crate::transform::{cusum, inverse_cusum_rows, CusumSeries};

/// How the Cusum initial value `eta_y` is chosen once the structure is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStrategy {
    /// `eta_y = y(t_1)`.
    #[default]
    FixFirstPoint,
    /// `eta_y` such that the solution passes through `y(t_n)`.
    FixLastPoint,
    /// `eta_y` minimizing the squared Cusum-level residuals.
    ResidualCorrection,
}

impl std::str::FromStr for InitialStrategy {
    type Err = GreyError;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "fix_first_point" | "first" => Ok(Self::FixFirstPoint),
            "fix_last_point" | "last" => Ok(Self::FixLastPoint),
            "residual_correction" | "residual" => Ok(Self::ResidualCorrection),
            other => Err(GreyError::InvalidArgument(format!("unknown initial strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreyFitConfig {
    /// Background coefficient `lambda` in `z = lambda y(t_{k-1}) + (1 - lambda) y(t_k)`.
    pub background: f64,
    pub initial_strategy: InitialStrategy,
    pub integrator: Integrator,
}

impl Default for GreyFitConfig {
    fn default() -> Self {
        Self {
            background: 0.5,
            initial_strategy: InitialStrategy::FixFirstPoint,
            integrator: Integrator::default(),
        }
    }
}

impl GreyFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.background) {
            return Err(GreyError::InvalidArgument(format!(
                "background coefficient must lie in [0, 1], got {}",
                self.background
            )));
        }
        Ok(())
    }
}

/// Structural estimates `(theta_L, theta_N, beta)` before an initial value is chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub theta_l: DMatrix<f64>,
    pub theta_n: DMatrix<f64>,
    pub beta: DVector<f64>,
}

impl Structure {
    pub fn with_initial(&self, spec: &ModelSpec, eta_y: DVector<f64>) -> Result<ParameterSet> {
        ParameterSet::grey(
            spec,
            self.theta_l.clone(),
            self.theta_n.clone(),
            self.beta.clone(),
            eta_y,
        )
    }
}

/// Design `Theta` with rows `[z^T, N(z)^T, 1]` and targets `X` (rows `x(t_k)`, `k >= 2`).
pub fn build_design_grey(
    ycum: &CusumSeries,
    ts: &TimeSeries,
    spec: &ModelSpec,
    lambda: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    spec.validate()?;
    let d = spec.dimension;
    if ts.dim() != d || ycum.dim() != d || ycum.len() != ts.len() {
        return Err(GreyError::Dimension(format!(
            "series has dimension {}, model expects {d}",
            ts.dim()
        )));
    }
    let p = spec.nonlinear_len();
    let lin = if spec.include_linear { d } else { 0 };
    let cols = lin + p + usize::from(spec.include_constant);
    let n = ts.len();
    let y = ycum.values();
    let mut theta = DMatrix::zeros(n - 1, cols);
    let mut z = vec![0.0; d];
    for k in 1..n {
        for i in 0..d {
            z[i] = lambda * y[(k - 1, i)] + (1.0 - lambda) * y[(k, i)];
        }
        let nz = spec.basis.evaluate(&z)?;
        let r = k - 1;
        for i in 0..lin {
            theta[(r, i)] = z[i];
        }
        for (j, v) in nz.iter().enumerate() {
            theta[(r, lin + j)] = *v;
        }
        if spec.include_constant {
            theta[(r, cols - 1)] = 1.0;
        }
    }
    let x = ts.values().rows(1, n - 1).into_owned();
    Ok((theta, x))
}

fn solve_grey(structure: &Structure, spec: &ModelSpec, eta: &[f64], times: &[f64], integrator: &Integrator) -> Result<Trajectory> {
    let params = structure.with_initial(spec, DVector::from_column_slice(eta))?;
    integrator.integrate(&GreyField::new(spec, &params), eta, times)
}

/// Chooses `eta_y` for fixed structural estimates.
pub fn select_initial(
    strategy: InitialStrategy,
    ycum: &CusumSeries,
    spec: &ModelSpec,
    structure: &Structure,
    integrator: &Integrator,
) -> Result<DVector<f64>> {
    let first = DVector::from_vec(ycum.row(0));
    match strategy {
        InitialStrategy::FixFirstPoint => Ok(first),
        InitialStrategy::FixLastPoint => fix_last_point(ycum, spec, structure, integrator),
        InitialStrategy::ResidualCorrection => residual_correction(ycum, spec, structure, integrator),
    }
}

/// Signed mismatch of component `i` at `t_n`; divergent solutions map to a large
/// value carrying the sign of the last finite state's mismatch.
fn last_point_mismatch(
    spec: &ModelSpec,
    structure: &Structure,
    integrator: &Integrator,
    times: &[f64],
    eta: &[f64],
    i: usize,
    target: f64,
) -> f64 {
    const HUGE: f64 = 1e100;
    match solve_grey(structure, spec, eta, times, integrator) {
        Ok(tr) if tr.blow_up.is_none() => tr.states[(times.len() - 1, i)] - target,
        Ok(tr) if tr.states.nrows() > 0 => {
            let last = tr.states[(tr.states.nrows() - 1, i)] - target;
            if last < 0.0 {
                -HUGE
            } else {
                HUGE
            }
        }
        _ => HUGE,
    }
}

struct LastPointProblem<'a> {
    spec: &'a ModelSpec,
    structure: &'a Structure,
    integrator: &'a Integrator,
    times: &'a [f64],
    eta: Vec<f64>,
    component: usize,
    target: f64,
}

impl CostFunction for LastPointProblem<'_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, v: &f64) -> std::result::Result<f64, ArgminError> {
        let mut eta = self.eta.clone();
        eta[self.component] = *v;
        Ok(last_point_mismatch(
            self.spec,
            self.structure,
            self.integrator,
            self.times,
            &eta,
            self.component,
            self.target,
        ))
    }
}

const MAX_BRACKET_DOUBLINGS: usize = 6;

fn fix_last_point(
    ycum: &CusumSeries,
    spec: &ModelSpec,
    structure: &Structure,
    integrator: &Integrator,
) -> Result<DVector<f64>> {
    let d = spec.dimension;
    let n = ycum.len();
    let y = ycum.values();
    let times = ycum.times();
    let mut eta = ycum.row(0);
    let sweeps = if d == 1 { 1 } else { 100 };
    for _ in 0..sweeps {
        let before = eta.clone();
        for i in 0..d {
            let col = y.column(i);
            let lo = col.min();
            let hi = col.max();
            let (lo, hi) = (lo - 0.5 * lo.abs(), hi + 0.5 * hi.abs());
            let (mut lo, mut hi) = if lo < hi { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
            let problem = LastPointProblem {
                spec,
                structure,
                integrator,
                times,
                eta: eta.clone(),
                component: i,
                target: y[(n - 1, i)],
            };
            // widen geometrically around the initial bracket until the sign changes
            let mut bracketed = false;
            for _ in 0..=MAX_BRACKET_DOUBLINGS {
                let flo = problem.cost(&lo).unwrap_or(f64::NAN);
                let fhi = problem.cost(&hi).unwrap_or(f64::NAN);
                if flo * fhi <= 0.0 {
                    bracketed = true;
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let half = hi - lo;
                lo = mid - half;
                hi = mid + half;
            }
            if !bracketed {
                return Err(GreyError::RootSearch(format!(
                    "component {i}: no sign change of the last-point mismatch on [{lo}, {hi}]"
                )));
            }
            let scale = lo.abs().max(hi.abs()).max(1.0);
            let res = Executor::new(problem, BrentRoot::new(lo, hi, 1e-13 * scale))
                .configure(|s| s.max_iters(200))
                .run()
                .map_err(|e| GreyError::RootSearch(format!("component {i}: {e}")))?;
            let state = res.state();
            if !matches!(
                state.get_termination_status(),
                TerminationStatus::Terminated(TerminationReason::SolverConverged)
            ) {
                return Err(GreyError::RootSearch(format!(
                    "component {i}: no convergence within 200 iterations"
                )));
            }
            let root = state.get_best_param().copied().unwrap_or(state.param.unwrap_or(f64::NAN));
            if !root.is_finite() {
                return Err(GreyError::RootSearch(format!("component {i}: non-finite root")));
            }
            eta[i] = root;
        }
        let change = eta
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max);
        if change < 1e-12 {
            break;
        }
    }
    Ok(DVector::from_vec(eta))
}

struct ResidualProblem<'a> {
    spec: &'a ModelSpec,
    structure: &'a Structure,
    integrator: &'a Integrator,
    ycum: &'a CusumSeries,
}

impl CostFunction for ResidualProblem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, eta: &Vec<f64>) -> std::result::Result<f64, ArgminError> {
        const PENALTY: f64 = 1e150;
        let times = self.ycum.times();
        let tr = match solve_grey(self.structure, self.spec, eta, times, self.integrator) {
            Ok(tr) if tr.blow_up.is_none() => tr,
            _ => return Ok(PENALTY),
        };
        let diff = &tr.states - self.ycum.values();
        Ok(diff.norm_squared().min(PENALTY))
    }
}

fn residual_correction(
    ycum: &CusumSeries,
    spec: &ModelSpec,
    structure: &Structure,
    integrator: &Integrator,
) -> Result<DVector<f64>> {
    let seed = ycum.row(0);
    let mut simplex = vec![seed.clone()];
    for i in 0..seed.len() {
        let mut v = seed.clone();
        v[i] += if v[i] != 0.0 { 0.05 * v[i] } else { 0.05 };
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-10)
        .map_err(|e| GreyError::InvalidArgument(e.to_string()))?;
    let problem = ResidualProblem {
        spec,
        structure,
        integrator,
        ycum,
    };
    let res = Executor::new(problem, solver)
        .configure(|s| s.max_iters(500))
        .run()
        .map_err(|e| GreyError::NoConvergence(e.to_string()))?;
    let state = res.state();
    if !matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    ) {
        return Err(GreyError::NoConvergence(
            "simplex search did not reach the objective tolerance within 500 iterations".into(),
        ));
    }
    let best = state
        .get_best_param()
        .cloned()
        .ok_or_else(|| GreyError::NoConvergence("no best point".into()))?;
    Ok(DVector::from_vec(best))
}

/// Least squares on the full design, or equation by equation when `theta_L`
/// is restricted to its diagonal.
fn structural_solve(theta: &DMatrix<f64>, x: &DMatrix<f64>, spec: &ModelSpec) -> Result<LsSolution> {
    let d = spec.dimension;
    if !(spec.diagonal_linear && d > 1) {
        return least_squares_solve(theta, x);
    }
    let cols = theta.ncols();
    let mut coefficients = DMatrix::zeros(cols, d);
    let mut condition: f64 = 1.0;
    for i in 0..d {
        let keep: Vec<usize> = std::iter::once(i).chain(d..cols).collect();
        let sol = least_squares_solve(&theta.select_columns(&keep), &x.columns(i, 1).into_owned())?;
        for (r, &c) in keep.iter().enumerate() {
            coefficients[(c, i)] = sol.coefficients[(r, 0)];
        }
        condition = condition.max(sol.condition);
    }
    let residuals = x - theta * &coefficients;
    Ok(LsSolution {
        coefficients,
        condition,
        residuals,
    })
}

/// Structural least squares on the Cusum design.
pub fn estimate_structure(
    ts: &TimeSeries,
    spec: &ModelSpec,
    config: &GreyFitConfig,
) -> Result<(Structure, CusumSeries, DMatrix<f64>, DMatrix<f64>, LsSolution)> {
    config.validate()?;
    let ycum = cusum(ts);
    let (theta, x) = build_design_grey(&ycum, ts, spec, config.background)?;
    let ls = structural_solve(&theta, &x, spec)?;
    let (theta_l, theta_n, beta) =
        unpack_coefficients(spec, &ls.coefficients, spec.include_linear, spec.include_constant);
    Ok((
        Structure {
            theta_l,
            theta_n,
            beta,
        },
        ycum,
        theta,
        x,
        ls,
    ))
}

fn assemble(
    ts: &TimeSeries,
    spec: &ModelSpec,
    params: ParameterSet,
    theta: DMatrix<f64>,
    x: DMatrix<f64>,
    ls: LsSolution,
) -> FitResult {
    FitResult {
        spec: *spec,
        params,
        method: FitMethod::GreyTwoStep,
        times: ts.times().to_vec(),
        design: theta,
        targets: x,
        residuals: ls.residuals,
        condition_estimate: ls.condition,
        transformed: None,
    }
}

/// Full two-step pipeline: Cusum, design, least squares, initial value.
pub fn fit_grey(ts: &TimeSeries, spec: &ModelSpec, config: &GreyFitConfig) -> Result<FitResult> {
    let (structure, ycum, theta, x, ls) = estimate_structure(ts, spec, config)?;
    let eta = select_initial(config.initial_strategy, &ycum, spec, &structure, &config.integrator)?;
    let params = structure.with_initial(spec, eta)?;
    Ok(assemble(ts, spec, params, theta, x, ls))
}

/// Two-step fit with a caller-supplied initial value in place of the strategy.
pub fn fit_grey_with_initial(
    ts: &TimeSeries,
    spec: &ModelSpec,
    config: &GreyFitConfig,
    eta_y: DVector<f64>,
) -> Result<FitResult> {
    let (structure, _, theta, x, ls) = estimate_structure(ts, spec, config)?;
    let params = structure.with_initial(spec, eta_y)?;
    Ok(assemble(ts, spec, params, theta, x, ls))
}

/// Solves the grey equation over the sample times plus `horizon` steps and
/// differences the result back to the original scale.
pub fn forecast_grey(fit: &FitResult, config: &GreyFitConfig, horizon: usize) -> Result<Forecast> {
    let times = extend_times(&fit.times, horizon);
    forecast_grey_at(fit, config, &times, horizon)
}

/// As [`forecast_grey`] with explicit output times (`times[..n]` must be the sample times).
pub fn forecast_grey_at(
    fit: &FitResult,
    config: &GreyFitConfig,
    times: &[f64],
    horizon: usize,
) -> Result<Forecast> {
    if fit.params.form() != ParameterForm::Grey {
        return Err(GreyError::InvalidArgument("grey forecast needs grey-form parameters".into()));
    }
    let eta: Vec<f64> = fit.params.eta().iter().copied().collect();
    let field = GreyField::new(&fit.spec, &fit.params);
    let tr = config.integrator.integrate(&field, &eta, times)?;
    let values = inverse_cusum_rows(times, &tr.states);
    Ok(Forecast {
        times: times.to_vec(),
        values,
        horizon,
        blow_up: tr.blow_up,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::verhulst_closed_form_y;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn verhulst_design_example() {
        let ts = TimeSeries::unit_spaced(&[1.0, 2.0, 3.0]).unwrap();
        let y = cusum(&ts);
        let (theta, x) = build_design_grey(&y, &ts, &ModelSpec::verhulst(), 0.5).unwrap();
        assert_eq!(theta, dmatrix![2.0, 4.0; 4.5, 20.25]);
        assert_eq!(x, dmatrix![2.0; 3.0]);
    }

    #[test]
    fn constant_only_design() {
        let ts = TimeSeries::unit_spaced(&[1.0, 2.0, 3.0, 5.0]).unwrap();
        let y = cusum(&ts);
        let (theta, _) = build_design_grey(&y, &ts, &ModelSpec::linear(true), 0.5).unwrap();
        assert_eq!(theta, dmatrix![2.0, 1.0; 4.5, 1.0; 8.5, 1.0]);
    }

    #[test]
    fn design_matches_literal_midpoint_rows() {
        let vals = [3.0, 3.4, 4.1, 4.0, 5.2, 6.0];
        let ts = TimeSeries::unit_spaced(&vals).unwrap();
        let y = cusum(&ts);
        let (theta, _) = build_design_grey(&y, &ts, &ModelSpec::polynomial(3, true).unwrap(), 0.5).unwrap();
        let yv = y.values();
        for k in 1..vals.len() {
            let z = (yv[k - 1] + yv[k]) / 2.0;
            assert_eq!(theta.row(k - 1).iter().copied().collect::<Vec<_>>(), vec![z, z * z, z * z * z, 1.0]);
        }
    }

    #[test]
    fn background_coefficient_checked() {
        let ts = TimeSeries::unit_spaced(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let cfg = GreyFitConfig {
            background: 1.5,
            ..Default::default()
        };
        assert!(fit_grey(&ts, &ModelSpec::verhulst(), &cfg).is_err());
    }

    fn verhulst_cusum(h: f64, t_end: f64) -> (Vec<f64>, Vec<f64>) {
        let n = (t_end / h + 1e-9).floor() as usize + 1;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
        let y = times
            .iter()
            .map(|&t| verhulst_closed_form_y(1.2, -0.5, 0.4, t, 0.0).unwrap())
            .collect();
        (times, y)
    }

    #[test]
    fn strategies_agree_on_clean_data() {
        let (times, y) = verhulst_cusum(0.01, 4.0);
        let ycum = CusumSeries::new(times, DMatrix::from_column_slice(y.len(), 1, &y)).unwrap();
        let spec = ModelSpec::verhulst();
        let s = Structure {
            theta_l: dmatrix![1.2],
            theta_n: dmatrix![-0.5],
            beta: dvector![0.0],
        };
        let integ = Integrator::with_max_step(1e-3);
        let first = select_initial(InitialStrategy::FixFirstPoint, &ycum, &spec, &s, &integ).unwrap();
        let last = select_initial(InitialStrategy::FixLastPoint, &ycum, &spec, &s, &integ).unwrap();
        let resid = select_initial(InitialStrategy::ResidualCorrection, &ycum, &spec, &s, &integ).unwrap();
        assert_eq!(first[0], 0.4);
        assert!((last[0] - 0.4).abs() < 1e-6, "{}", last[0]);
        assert!((resid[0] - 0.4).abs() < 1e-6, "{}", resid[0]);
    }

    #[test]
    fn fix_last_point_linear_closed_form() {
        let a = 0.3;
        let times: Vec<f64> = (1..=8).map(|k| k as f64).collect();
        let y: Vec<f64> = times.iter().map(|t| 2.0 + 0.3 * t + 0.01 * t * t).collect();
        let ycum = CusumSeries::new(times.clone(), DMatrix::from_column_slice(8, 1, &y)).unwrap();
        let spec = ModelSpec::linear(false);
        let s = Structure {
            theta_l: dmatrix![a],
            theta_n: DMatrix::zeros(1, 0),
            beta: dvector![0.0],
        };
        let eta = select_initial(InitialStrategy::FixLastPoint, &ycum, &spec, &s, &Integrator::with_max_step(1e-3))
            .unwrap();
        let expected = y[7] * (-a * (times[7] - times[0])).exp();
        assert_relative_eq!(eta[0], expected, max_relative = 1e-9);
    }

    #[test]
    fn root_search_without_sign_change_fails() {
        let times: Vec<f64> = (1..=5).map(|k| k as f64).collect();
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ycum = CusumSeries::new(times, DMatrix::from_column_slice(5, 1, &y)).unwrap();
        let spec = ModelSpec::verhulst();
        // logistic with carrying capacity 1 never reaches y(t_n) = 5
        let s = Structure {
            theta_l: dmatrix![1.0],
            theta_n: dmatrix![-1.0],
            beta: dvector![0.0],
        };
        let err = select_initial(InitialStrategy::FixLastPoint, &ycum, &spec, &s, &Integrator::with_max_step(1e-3))
            .unwrap_err();
        assert!(matches!(err, GreyError::RootSearch(_)));
    }

    #[test]
    fn horizon_zero_is_fit_only() {
        let ts = TimeSeries::unit_spaced(&[2.0, 2.3, 2.9, 3.4, 4.2, 4.8]).unwrap();
        let cfg = GreyFitConfig::default();
        let fit = fit_grey(&ts, &ModelSpec::verhulst(), &cfg).unwrap();
        assert_eq!(fit.residuals.nrows(), 5);
        let fc = forecast_grey(&fit, &cfg, 0).unwrap();
        assert_eq!(fc.times.len(), 6);
        assert_eq!(fc.values.nrows(), 6);
        assert_eq!(fc.values[0], 2.0);
        let fc3 = forecast_grey(&fit, &cfg, 3).unwrap();
        assert_eq!(fc3.times[8], 9.0);
        assert_eq!(fc3.values.nrows(), 9);
    }

    #[test]
    fn orthogonal_residuals() {
        let ts = TimeSeries::unit_spaced(&[2.0, 2.3, 2.9, 3.4, 4.2, 4.8, 5.1, 6.3]).unwrap();
        let fit = fit_grey(&ts, &ModelSpec::polynomial(3, true).unwrap(), &GreyFitConfig::default()).unwrap();
        let proj = fit.design.transpose() * &fit.residuals;
        let scale = fit.design.amax() * fit.residuals.amax().max(1.0);
        assert!(proj.amax() < 1e-8 * scale);
        let p = &fit.params;
        let coef = DMatrix::from_row_slice(4, 1, &[p.theta_l()[0], p.theta_n()[0], p.theta_n()[1], p.beta()[0]]);
        assert!((&fit.targets - &fit.design * coef - &fit.residuals).amax() < 1e-10);
    }
}
