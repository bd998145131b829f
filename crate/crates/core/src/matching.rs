//! One-step integral matching on the integro-differential form.
//!
//! With `x~(t_k)` the trapezoidal integral of the observations, the model
//! `x(t) = theta_L x~ + theta_N [N(eta + x~) - N(eta)] + eta` is linear in the
//! transformed coefficients after expanding `N(eta + x~)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::NonlinearBasis;
use crate::error::{GreyError, Result};
use crate::linalg::{least_squares_min_norm, least_squares_solve};
use crate::metrics::{mape, rmse_matrix, train_test_split};
use crate::model::{
    extend_times, unpack_coefficients, FitMethod, FitResult, Forecast, ModelSpec, ParameterForm,
    ParameterSet, TimeSeries, TransformedParameters,
};
use crate::ode::{Integrator, ReducedField};
use crate::transform::trapezoid_cumulative;

/// Regression `Omega` with rows `[x~^T, N(x~)^T, 1]` and targets `x(t_k)`, `k >= 2`.
pub fn build_design_matching(ts: &TimeSeries, spec: &ModelSpec) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    spec.validate()?;
    let d = spec.dimension;
    if ts.dim() != d {
        return Err(GreyError::Dimension(format!(
            "series has dimension {}, model expects {d}",
            ts.dim()
        )));
    }
    let p = spec.nonlinear_len();
    let xt = trapezoid_cumulative(ts);
    let n = ts.len();
    let cols = d + p + 1;
    let mut omega = DMatrix::zeros(n - 1, cols);
    for k in 1..n {
        let row: Vec<f64> = xt.row(k).iter().copied().collect();
        let nv = spec.basis.evaluate(&row)?;
        for i in 0..d {
            omega[(k - 1, i)] = row[i];
        }
        for (j, v) in nv.iter().enumerate() {
            omega[(k - 1, d + j)] = *v;
        }
        omega[(k - 1, cols - 1)] = 1.0;
    }
    Ok((omega, ts.values().rows(1, n - 1).into_owned()))
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Polynomial expansion `N(eta + x) - N(eta) = phi x + Phi N(x)` for
/// `N(x) = [x^2, ..., x^(p+1)]`. `Phi` is lower triangular with unit diagonal.
pub fn lemma2_phi_varphi(eta: f64, p: usize) -> (DVector<f64>, DMatrix<f64>) {
    let phi = DVector::from_fn(p, |r, _| {
        let m = r + 1;
        binomial(m + 1, 1) * eta.powi(m as i32)
    });
    let mat = DMatrix::from_fn(p, p, |r, c| {
        let (m, j) = (r + 1, c + 1);
        if j > m {
            0.0
        } else {
            binomial(m + 1, j + 1) * eta.powi((m - j) as i32)
        }
    });
    (phi, mat)
}

/// Quadratic expansion `N(eta + v) - N(eta) = psi v + N(v)`; `psi` is `p x d`.
pub fn lemma2_psi(eta: &[f64]) -> DMatrix<f64> {
    lemma2_psi_pairs(eta, &NonlinearBasis::quadratic_monomials(eta.len()))
}

/// [`lemma2_psi`] restricted to the monomials `pairs`.
pub fn lemma2_psi_pairs(eta: &[f64], pairs: &[(usize, usize)]) -> DMatrix<f64> {
    let d = eta.len();
    let mut psi = DMatrix::zeros(pairs.len(), d);
    for (r, &(i, j)) in pairs.iter().enumerate() {
        psi[(r, j)] += eta[i];
        psi[(r, i)] += eta[j];
    }
    psi
}

/// Linear part `L(eta)` of `N(eta + v) - N(eta)` and the matrix `M(eta)` acting on `N(v)`.
fn expansion(spec: &ModelSpec, eta: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = spec.dimension;
    match spec.basis {
        NonlinearBasis::Linear => Ok((DMatrix::zeros(0, d), DMatrix::zeros(0, 0))),
        NonlinearBasis::Polynomial { max_degree } => {
            let (phi, mat) = lemma2_phi_varphi(eta[0], max_degree - 1);
            Ok((DMatrix::from_column_slice(phi.len(), 1, phi.as_slice()), mat))
        }
        NonlinearBasis::Quadratic { .. } | NonlinearBasis::Interaction { .. } => {
            let pairs = spec.basis.monomial_pairs().expect("quadratic-type basis");
            let p = pairs.len();
            Ok((lemma2_psi_pairs(eta.as_slice(), &pairs), DMatrix::identity(p, p)))
        }
        NonlinearBasis::Power { .. } => Err(GreyError::InvalidSpec(
            "the power basis has no exact linearizing expansion; use the power fallback".into(),
        )),
    }
}

/// Forward map from structural parameters to the pseudo-linear regression coefficients.
pub fn transform_parameters(params: &ParameterSet, spec: &ModelSpec) -> Result<TransformedParameters> {
    let (lin, mat) = expansion(spec, params.eta())?;
    let theta_n = params.theta_n();
    Ok(TransformedParameters {
        vartheta_l: params.theta_l() + theta_n * lin,
        vartheta_n: theta_n * mat,
        intercept: params.eta().clone(),
    })
}

/// Inverts [`transform_parameters`] given the estimated intercept `eta`.
pub fn recover_parameters(pi: &TransformedParameters, spec: &ModelSpec) -> Result<ParameterSet> {
    let d = spec.dimension;
    let p = spec.nonlinear_len();
    if pi.vartheta_l.shape() != (d, d) || pi.vartheta_n.shape() != (d, p) || pi.intercept.len() != d {
        return Err(GreyError::Dimension("transformed parameter shapes do not match the model".into()));
    }
    let eta = pi.intercept.clone();
    let (lin, mat) = expansion(spec, &eta)?;
    let theta_n = match spec.basis {
        NonlinearBasis::Polynomial { .. } => {
            // theta_N Phi = vartheta_N with Phi unit lower triangular
            let mut t = DMatrix::zeros(d, p);
            for r in 0..d {
                for j in (0..p).rev() {
                    let mut v = pi.vartheta_n[(r, j)];
                    for m in j + 1..p {
                        v -= t[(r, m)] * mat[(m, j)];
                    }
                    t[(r, j)] = v;
                }
            }
            t
        }
        _ => pi.vartheta_n.clone(),
    };
    let theta_l = &pi.vartheta_l - &theta_n * lin;
    ParameterSet::reduced(spec, theta_l, theta_n, eta)
}

/// Integral-matching fit; power bases go through [`fit_matching_power`].
pub fn fit_matching(ts: &TimeSeries, spec: &ModelSpec) -> Result<FitResult> {
    if let NonlinearBasis::Power { .. } = spec.basis {
        return fit_matching_power(ts, spec);
    }
    if !spec.include_linear {
        return Err(GreyError::InvalidSpec(
            "integral matching with an exact expansion needs the linear term".into(),
        ));
    }
    let (omega, x) = build_design_matching(ts, spec)?;
    let ls = least_squares_solve(&omega, &x)?;
    let (vartheta_l, vartheta_n, intercept) = unpack_coefficients(spec, &ls.coefficients, true, true);
    let pi = TransformedParameters {
        vartheta_l,
        vartheta_n,
        intercept,
    };
    let params = recover_parameters(&pi, spec)?;
    Ok(FitResult {
        spec: *spec,
        params,
        method: FitMethod::IntegralMatching,
        times: ts.times().to_vec(),
        design: omega,
        targets: x,
        residuals: ls.residuals,
        condition_estimate: ls.condition,
        transformed: Some(pi),
    })
}

/// Approximate matching for `N(y) = y^gamma`: `eta` inside `N` is replaced by
/// `x(t_1)`, giving columns `[x~, (x(t_1) + x~)^gamma - x(t_1)^gamma, 1]`.
pub fn fit_matching_power(ts: &TimeSeries, spec: &ModelSpec) -> Result<FitResult> {
    spec.validate()?;
    let NonlinearBasis::Power { .. } = spec.basis else {
        return Err(GreyError::InvalidSpec("power fallback needs a power basis".into()));
    };
    if ts.dim() != 1 {
        return Err(GreyError::Dimension("power fallback is univariate".into()));
    }
    let basis = spec.basis;
    let xt = trapezoid_cumulative(ts);
    let x1 = ts.values()[(0, 0)];
    let n = ts.len();
    let lin = usize::from(spec.include_linear);
    let cols = lin + 2;
    let n_x1 = basis.evaluate(&[x1])?[0];
    let mut omega = DMatrix::zeros(n - 1, cols);
    for k in 1..n {
        let v = xt[(k, 0)];
        if lin == 1 {
            omega[(k - 1, 0)] = v;
        }
        omega[(k - 1, lin)] = basis.evaluate(&[x1 + v])?[0] - n_x1;
        omega[(k - 1, lin + 1)] = 1.0;
    }
    let x = ts.values().rows(1, n - 1).into_owned();
    let ls = least_squares_min_norm(&omega, &x)?;
    let c = &ls.coefficients;
    let a = if lin == 1 { c[(0, 0)] } else { 0.0 };
    let b = c[(lin, 0)];
    let eta = c[(lin + 1, 0)];
    let params = ParameterSet::reduced(
        spec,
        DMatrix::from_element(1, 1, a),
        DMatrix::from_element(1, 1, b),
        DVector::from_element(1, eta),
    )?;
    Ok(FitResult {
        spec: *spec,
        params,
        method: FitMethod::IntegralMatchingPowerFallback,
        times: ts.times().to_vec(),
        design: omega,
        targets: x,
        residuals: ls.residuals,
        condition_estimate: ls.condition,
        transformed: Some(TransformedParameters {
            vartheta_l: DMatrix::from_element(1, 1, a),
            vartheta_n: DMatrix::from_element(1, 1, b),
            intercept: DVector::from_element(1, eta),
        }),
    })
}

/// Solves the reduced augmented system over the sample times plus `horizon` steps.
pub fn forecast_matching(fit: &FitResult, horizon: usize) -> Result<Forecast> {
    let times = extend_times(&fit.times, horizon);
    forecast_matching_at(fit, &times, horizon, &Integrator::default())
}

/// As [`forecast_matching`] with explicit times and step policy.
pub fn forecast_matching_at(
    fit: &FitResult,
    times: &[f64],
    horizon: usize,
    integrator: &Integrator,
) -> Result<Forecast> {
    if fit.params.form() != ParameterForm::Reduced {
        return Err(GreyError::InvalidArgument(
            "matching forecast needs reduced-form parameters".into(),
        ));
    }
    let field = ReducedField::new(&fit.spec, &fit.params);
    let tr = integrator.integrate(&field, &ReducedField::initial_state(&fit.params), times)?;
    Ok(Forecast {
        times: times.to_vec(),
        values: tr.columns(0, fit.spec.dimension),
        horizon,
        blow_up: tr.blow_up,
    })
}

/// Power-law families searched over `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerFamily {
    /// `dy/dt = b y^gamma`.
    Ingm,
    /// `dy/dt = a y + b y^gamma`.
    Ingbm,
}

impl PowerFamily {
    pub fn spec(&self, gamma: f64) -> ModelSpec {
        match self {
            PowerFamily::Ingm => ModelSpec::pure_power(gamma),
            PowerFamily::Ingbm => ModelSpec::bernoulli(gamma),
        }
    }
}

/// How `gamma` candidates are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaScore {
    /// MAPE over fitted training points and forecast test points together.
    FullSeriesMape,
    /// MAPE over the held-out points only.
    HoldoutMape,
    /// RMSE of the in-sample fit.
    InSampleRmse,
}

impl GammaScore {
    pub fn default_for(split: Option<usize>) -> Self {
        if split.is_some() {
            GammaScore::FullSeriesMape
        } else {
            GammaScore::InSampleRmse
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl GammaGrid {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(end >= start) || !start.is_finite() || !end.is_finite() {
            return Err(GreyError::InvalidArgument(format!(
                "bad gamma grid [{start}, {end}] step {step}"
            )));
        }
        Ok(Self { start, end, step })
    }

    pub fn candidates(&self) -> Vec<f64> {
        let count = ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| {
                let g = self.start + i as f64 * self.step;
                (g * 1e10).round() / 1e10
            })
            .collect()
    }
}

impl Default for GammaGrid {
    fn default() -> Self {
        Self {
            start: 0.0,
            end: 2.0,
            step: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GammaSearch {
    pub gamma: f64,
    pub score: f64,
    pub fit: FitResult,
    /// Every candidate with its score, `None` when skipped.
    pub candidates: Vec<(f64, Option<f64>)>,
}

fn score_candidate(
    ts: &TimeSeries,
    family: PowerFamily,
    gamma: f64,
    split: Option<usize>,
    score: GammaScore,
) -> Result<(f64, FitResult)> {
    let spec = family.spec(gamma);
    let (train, n_train) = match split {
        Some(k) => (train_test_split(ts, k)?.0, k),
        None => (ts.clone(), ts.len()),
    };
    let fit = fit_matching_power(&train, &spec)?;
    if fit.design.column(usize::from(spec.include_linear)).amax() == 0.0 {
        return Err(GreyError::SingularDesign {
            condition: f64::INFINITY,
        });
    }
    let fc = forecast_matching_at(&fit, ts.times(), ts.len() - n_train, &Integrator::default())?;
    fc.require_complete()?;
    let fitted = fc.column(0);
    let actual = ts.column(0);
    let s = match score {
        GammaScore::FullSeriesMape => mape(&fitted, &actual)?,
        GammaScore::HoldoutMape => {
            if n_train == ts.len() {
                return Err(GreyError::InvalidArgument("holdout scoring needs a split".into()));
            }
            mape(&fitted[n_train..], &actual[n_train..])?
        }
        GammaScore::InSampleRmse => rmse_matrix(
            &fc.values.rows(0, n_train).into_owned(),
            &ts.values().rows(0, n_train).into_owned(),
        )?,
    };
    if !s.is_finite() {
        return Err(GreyError::Domain("non-finite score".into()));
    }
    Ok((s, fit))
}

/// Grid search over the power exponent. Candidates that fail, blow up or
/// have an identically zero power column are skipped; ties go to the smaller `gamma`.
pub fn gamma_line_search(
    ts: &TimeSeries,
    family: PowerFamily,
    grid: GammaGrid,
    split: Option<usize>,
    score: GammaScore,
) -> Result<GammaSearch> {
    let gammas = grid.candidates();
    let results: Vec<(f64, Result<(f64, FitResult)>)> = gammas
        .par_iter()
        .map(|&g| (g, score_candidate(ts, family, g, split, score)))
        .collect();
    let mut best: Option<(f64, f64, FitResult)> = None;
    let mut candidates = Vec::with_capacity(results.len());
    let mut last_error = None;
    for (g, r) in results {
        match r {
            Ok((s, fit)) => {
                candidates.push((g, Some(s)));
                let better = match &best {
                    None => true,
                    Some((bs, bg, _)) => s < *bs || (s == *bs && g < *bg),
                };
                if better {
                    best = Some((s, g, fit));
                }
            }
            Err(e) => {
                candidates.push((g, None));
                last_error = Some(e);
            }
        }
    }
    match best {
        Some((score, gamma, fit)) => Ok(GammaSearch {
            gamma,
            score,
            fit,
            candidates,
        }),
        None => Err(GreyError::AllCandidatesFailed(format!(
            "{} candidates, last error: {}",
            gammas.len(),
            last_error.map(|e| e.to_string()).unwrap_or_default()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn verhulst_design_example() {
        let ts = TimeSeries::unit_spaced(&[1.0, 1.0, 1.0]).unwrap();
        let (omega, x) = build_design_matching(&ts, &ModelSpec::verhulst()).unwrap();
        assert_eq!(omega, dmatrix![1.0, 1.0, 1.0; 2.0, 4.0, 1.0]);
        assert_eq!(x, dmatrix![1.0; 1.0]);
    }

    #[test]
    fn phi_examples() {
        let (phi, mat) = lemma2_phi_varphi(0.7, 1);
        assert_eq!(phi, dvector![1.4]);
        assert_eq!(mat, dmatrix![1.0]);
        let (phi, mat) = lemma2_phi_varphi(1.0, 2);
        assert_eq!(phi, dvector![2.0, 3.0]);
        assert_eq!(mat, dmatrix![1.0, 0.0; 3.0, 1.0]);
        let (phi, mat) = lemma2_phi_varphi(0.0, 3);
        assert_eq!(phi, DVector::zeros(3));
        assert_eq!(mat, DMatrix::identity(3, 3));
    }

    #[test]
    fn psi_examples() {
        assert_eq!(lemma2_psi(&[1.0, 3.0]), dmatrix![2.0, 0.0; 3.0, 1.0; 0.0, 6.0]);
        assert_eq!(lemma2_psi(&[0.0, 0.0, 0.0]), DMatrix::zeros(6, 3));
    }

    #[test]
    fn expansion_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in 1..=4 {
            let basis = NonlinearBasis::Polynomial { max_degree: p + 1 };
            for _ in 0..200 {
                let eta: f64 = rng.random_range(-2.0..2.0);
                let v: f64 = rng.random_range(-2.0..2.0);
                let (phi, mat) = lemma2_phi_varphi(eta, p);
                let lhs = DVector::from_vec(basis.evaluate(&[eta + v]).unwrap())
                    - DVector::from_vec(basis.evaluate(&[eta]).unwrap());
                let rhs = &phi * v + &mat * DVector::from_vec(basis.evaluate(&[v]).unwrap());
                assert!((lhs - rhs).amax() < 1e-12);
            }
        }
        for d in 2..=4 {
            let basis = NonlinearBasis::Quadratic { dim: d };
            for _ in 0..200 {
                let eta: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let sum: Vec<f64> = eta.iter().zip(&v).map(|(a, b)| a + b).collect();
                let lhs = DVector::from_vec(basis.evaluate(&sum).unwrap())
                    - DVector::from_vec(basis.evaluate(&eta).unwrap());
                let rhs = lemma2_psi(&eta) * DVector::from_vec(v.clone())
                    + DVector::from_vec(basis.evaluate(&v).unwrap());
                assert!((lhs - rhs).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn interaction_expansion_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 2..=4 {
            let basis = NonlinearBasis::Interaction { dim: d };
            let pairs = basis.monomial_pairs().unwrap();
            for _ in 0..200 {
                let eta: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let sum: Vec<f64> = eta.iter().zip(&v).map(|(a, b)| a + b).collect();
                let lhs = DVector::from_vec(basis.evaluate(&sum).unwrap())
                    - DVector::from_vec(basis.evaluate(&eta).unwrap());
                let rhs = lemma2_psi_pairs(&eta, &pairs) * DVector::from_vec(v.clone())
                    + DVector::from_vec(basis.evaluate(&v).unwrap());
                assert!((lhs - rhs).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn verhulst_recovery_by_hand() {
        let spec = ModelSpec::verhulst();
        let pi = TransformedParameters {
            vartheta_l: dmatrix![0.8],
            vartheta_n: dmatrix![-0.5],
            intercept: dvector![0.4],
        };
        let p = recover_parameters(&pi, &spec).unwrap();
        assert_relative_eq!(p.theta_n()[0], -0.5);
        assert_relative_eq!(p.theta_l()[0], 0.8 + 2.0 * 0.5 * 0.4, epsilon = 1e-15);
        assert_eq!(p.eta()[0], 0.4);

        let pi0 = TransformedParameters {
            vartheta_l: dmatrix![0.8],
            vartheta_n: dmatrix![0.0],
            intercept: dvector![3.0],
        };
        assert_eq!(recover_parameters(&pi0, &spec).unwrap().theta_l()[0], 0.8);
    }

    #[test]
    fn forward_then_recover_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut specs: Vec<ModelSpec> = (2..=5).map(|m| ModelSpec::polynomial(m, false).unwrap()).collect();
        specs.extend((2..=3).map(|d| ModelSpec::quadratic(d).unwrap()));
        for spec in specs {
            let (d, p) = (spec.dimension, spec.nonlinear_len());
            for _ in 0..100 {
                let tl = DMatrix::from_fn(d, d, |_, _| rng.random_range(-2.0..2.0));
                let tn = DMatrix::from_fn(d, p, |_, _| rng.random_range(-2.0..2.0));
                let eta = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
                let params = ParameterSet::reduced(&spec, tl, tn, eta).unwrap();
                let back = recover_parameters(&transform_parameters(&params, &spec).unwrap(), &spec).unwrap();
                assert!((back.theta_l() - params.theta_l()).amax() < 1e-10);
                assert!((back.theta_n() - params.theta_n()).amax() < 1e-10);
                assert!((back.eta() - params.eta()).amax() < 1e-10);
            }
        }
    }

    fn clean_verhulst(h: f64) -> TimeSeries {
        let n = (4.0 / h + 1e-9).floor() as usize + 1;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
        let vals: Vec<f64> = times
            .iter()
            .map(|&t| crate::ode::verhulst_closed_form_x(1.2, -0.5, 0.4, t, 0.0).unwrap())
            .collect();
        TimeSeries::univariate(times, &vals).unwrap()
    }

    #[test]
    fn intercept_equivalence() {
        let ts = clean_verhulst(0.1);
        let (omega, x) = build_design_matching(&ts, &ModelSpec::verhulst()).unwrap();
        let full = least_squares_solve(&omega, &x).unwrap().coefficients;
        let m = omega.nrows() as f64;
        let mut centered = omega.columns(0, 2).into_owned();
        for j in 0..2 {
            let mean = centered.column(j).sum() / m;
            centered.column_mut(j).add_scalar_mut(-mean);
        }
        let xm = x.sum() / m;
        let xc = x.add_scalar(-xm);
        let slopes = least_squares_solve(&centered, &xc).unwrap().coefficients;
        assert!((slopes[0] - full[0]).abs() < 1e-8);
        assert!((slopes[1] - full[1]).abs() < 1e-8);
    }

    #[test]
    fn power_fallback_gamma_two_close_to_exact() {
        let ts = clean_verhulst(0.01);
        let exact = fit_matching(&ts, &ModelSpec::verhulst()).unwrap();
        let power = fit_matching(&ts, &ModelSpec::bernoulli(2.0)).unwrap();
        assert_eq!(power.method, FitMethod::IntegralMatchingPowerFallback);
        for (a, b) in [
            (exact.params.theta_l()[0], power.params.theta_l()[0]),
            (exact.params.theta_n()[0], power.params.theta_n()[0]),
            (exact.params.eta()[0], power.params.eta()[0]),
        ] {
            assert!((a - b).abs() <= 0.02 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn power_fallback_gamma_one_is_exponential() {
        let rate = 0.15;
        let times: Vec<f64> = (1..=12).map(|k| k as f64).collect();
        let vals: Vec<f64> = times.iter().map(|t| 3.0 * (rate * (t - 1.0)).exp()).collect();
        let ts = TimeSeries::univariate(times, &vals).unwrap();
        let fit = fit_matching(&ts, &ModelSpec::bernoulli(1.0)).unwrap();
        let total = fit.params.theta_l()[0] + fit.params.theta_n()[0];
        assert!((total - rate).abs() < 2e-3, "{total}");
    }

    #[test]
    fn power_domain_error() {
        let ts = TimeSeries::unit_spaced(&[-3.0, -2.0, -1.0, -0.5]).unwrap();
        assert!(matches!(
            fit_matching(&ts, &ModelSpec::bernoulli(0.5)),
            Err(GreyError::Domain(_))
        ));
    }

    #[test]
    fn grid_size() {
        assert_eq!(GammaGrid::default().candidates().len(), 201);
        assert_eq!(GammaGrid::default().candidates()[63], 0.63);
    }

    #[test]
    fn matching_forecast_horizon_zero() {
        let ts = clean_verhulst(0.1);
        let fit = fit_matching(&ts, &ModelSpec::verhulst()).unwrap();
        let fc = forecast_matching(&fit, 0).unwrap();
        assert_eq!(fc.values.nrows(), ts.len());
        assert!(fc.is_complete());
    }

    #[test]
    fn linear_basis_matching() {
        // dy/dt = a y + beta with x(t) = x_1 e^{a (t - t_1)}
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.02).collect();
        let vals: Vec<f64> = times.iter().map(|t| 2.0 * (0.5 * t).exp()).collect();
        let ts = TimeSeries::univariate(times, &vals).unwrap();
        let fit = fit_matching(&ts, &ModelSpec::linear(true)).unwrap();
        assert_relative_eq!(fit.params.theta_l()[0], 0.5, max_relative = 1e-3);
        assert_relative_eq!(fit.params.eta()[0], 2.0, max_relative = 1e-3);
    }
}
