//! Synthetic data, Gaussian noise at a target signal-to-noise level, and the
//! Monte Carlo harness comparing the two estimators.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GreyError, Result};
use crate::grey::{fit_grey, fit_grey_with_initial, forecast_grey, GreyFitConfig};
use crate::matching::{fit_matching, forecast_matching_at};
use crate::metrics::rmse_matrix;
use crate::model::{Forecast, ModelSpec, ParameterSet, TimeSeries};
use crate::ode::{Integrator, ReducedField};

/// Generating system of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Truth {
    /// `dy/dt = a y + b y^2` with `b` the Cusum-level coefficient.
    Verhulst { a: f64, b: f64, eta: f64 },
    /// `dy1/dt = a1 y1 - b1 y1 y2`, `dy2/dt = a2 y2 - b2 y1 y2`.
    LotkaVolterra {
        a1: f64,
        b1: f64,
        a2: f64,
        b2: f64,
        eta1: f64,
        eta2: f64,
    },
}

impl Truth {
    pub fn verhulst_default() -> Self {
        Truth::Verhulst {
            a: 1.2,
            b: -0.5,
            eta: 0.4,
        }
    }

    pub fn lotka_volterra_default() -> Self {
        Truth::LotkaVolterra {
            a1: 1.2,
            b1: 0.3,
            a2: -1.0,
            b2: -0.4,
            eta1: 5.0,
            eta2: 2.0 / 3.0,
        }
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Truth::Verhulst { .. } => ModelSpec::verhulst(),
            Truth::LotkaVolterra { .. } => ModelSpec::lotka_volterra(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Truth::Verhulst { .. } => "verhulst",
            Truth::LotkaVolterra { .. } => "lotka_volterra",
        }
    }

    /// Reduced-form parameters with the shared initial value.
    pub fn params(&self) -> Result<ParameterSet> {
        let spec = self.spec();
        match *self {
            Truth::Verhulst { a, b, eta } => ParameterSet::reduced(
                &spec,
                DMatrix::from_element(1, 1, a),
                DMatrix::from_element(1, 1, b),
                DVector::from_element(1, eta),
            ),
            Truth::LotkaVolterra {
                a1,
                b1,
                a2,
                b2,
                eta1,
                eta2,
            } => ParameterSet::reduced(
                &spec,
                DMatrix::from_row_slice(2, 2, &[a1, 0.0, 0.0, a2]),
                DMatrix::from_row_slice(2, 1, &[-b1, -b2]),
                DVector::from_vec(vec![eta1, eta2]),
            ),
        }
    }

    /// Names of the reported parameters, in report order.
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            Truth::Verhulst { .. } => &["a", "b", "eta"],
            Truth::LotkaVolterra { .. } => &["a1", "b1", "a2", "b2", "eta1", "eta2"],
        }
    }

    pub fn true_values(&self) -> Vec<f64> {
        match *self {
            Truth::Verhulst { a, b, eta } => vec![a, b, eta],
            Truth::LotkaVolterra {
                a1,
                b1,
                a2,
                b2,
                eta1,
                eta2,
            } => vec![a1, b1, a2, b2, eta1, eta2],
        }
    }

    /// Reads the named parameters off an estimate (grey-form convention).
    pub fn named_estimates(&self, params: &ParameterSet) -> Vec<f64> {
        let tl = params.theta_l();
        let tn = params.theta_n();
        let eta = params.eta();
        match self {
            Truth::Verhulst { .. } => vec![tl[(0, 0)], tn[(0, 0)], eta[0]],
            Truth::LotkaVolterra { .. } => vec![
                tl[(0, 0)],
                -tn[(0, 0)],
                tl[(1, 1)],
                -tn[(1, 0)],
                eta[0],
                eta[1],
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Two-step grey pipeline with the noisy first Cusum point as initial value.
    GreyTwoStep,
    /// Two-step grey pipeline solved from the true initial value.
    GreyTwoStepTrueInit,
    IntegralMatching,
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::GreyTwoStep => "grey_two_step",
            Estimator::GreyTwoStepTrueInit => "grey_two_step_true_init",
            Estimator::IntegralMatching => "integral_matching",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "grey_two_step" => Some(Estimator::GreyTwoStep),
            "grey_two_step_true_init" => Some(Estimator::GreyTwoStepTrueInit),
            "integral_matching" => Some(Estimator::IntegralMatching),
            _ => None,
        }
    }
}

/// One simulation cell: truth, sampling grid, noise and replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: String,
    pub truth: Truth,
    /// Sampling horizon; samples at `t = 0, h, 2h, ...`.
    pub t_end: f64,
    pub h: f64,
    /// Explicit sample count overriding `floor(t_end / h) + 1`.
    pub n: Option<usize>,
    /// Noise variance as a fraction of the clean signal's variance.
    pub noise_level: f64,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// Step policy for the estimators' trajectory solves.
    pub integrator: Integrator,
}

impl ScenarioConfig {
    pub fn new(id: impl Into<String>, truth: Truth, t_end: f64, h: f64, noise_level: f64) -> Self {
        Self {
            id: id.into(),
            truth,
            t_end,
            h,
            n: None,
            noise_level,
            replications: 500,
            seed: 0,
            estimators: vec![Estimator::GreyTwoStep, Estimator::IntegralMatching],
            integrator: Integrator::default(),
        }
    }

    pub fn sample_count(&self) -> usize {
        self.n
            .unwrap_or_else(|| (self.t_end / self.h + 1e-9).floor() as usize + 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.sample_count()).map(|k| k as f64 * self.h).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(GreyError::config(key, msg));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("h", format!("must be positive, got {}", self.h));
        }
        if self.n.is_none() && !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end", format!("must be positive, got {}", self.t_end));
        }
        if self.sample_count() < TimeSeries::MIN_LEN {
            return bad("n", format!("need at least {} samples", TimeSeries::MIN_LEN));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad("noise_level", format!("must be >= 0, got {}", self.noise_level));
        }
        if self.replications == 0 {
            return bad("replications", "must be >= 1".into());
        }
        if self.estimators.is_empty() {
            return bad("estimators", "at least one estimator is required".into());
        }
        if !(self.integrator.max_step > 0.0) {
            return bad("max_step", "must be positive".into());
        }
        self.truth.params().map_err(|e| GreyError::config("truth", e.to_string()))?;
        Ok(())
    }
}

/// Step used to generate clean trajectories.
pub const CLEAN_MAX_STEP: f64 = 1e-3;

/// Noise-free trajectory of the reduced system at the true parameters.
pub fn generate_clean(config: &ScenarioConfig) -> Result<TimeSeries> {
    config.validate()?;
    let spec = config.truth.spec();
    let params = config.truth.params()?;
    let times = config.times();
    let tr = Integrator::with_max_step(CLEAN_MAX_STEP).integrate(
        &ReducedField::new(&spec, &params),
        &ReducedField::initial_state(&params),
        &times,
    )?;
    if let Some(b) = tr.blow_up {
        return Err(GreyError::config(
            "truth",
            format!("true trajectory diverges at t = {}", b.time),
        ));
    }
    TimeSeries::new(times, tr.columns(0, spec.dimension))
}

fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Adds i.i.d. Gaussian noise with `sigma_i^2 = level * var(clean_i)` per component.
pub fn add_noise(clean: &TimeSeries, level: f64, seed: u64) -> TimeSeries {
    add_noise_stream(clean, level, seed, 0)
}

/// As [`add_noise`] drawing from stream `stream` of the seeded generator, so
/// replication `r` gets an independent, schedule-free sequence.
pub fn add_noise_stream(clean: &TimeSeries, level: f64, seed: u64, stream: u64) -> TimeSeries {
    if level == 0.0 {
        return clean.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let x = clean.values();
    let sigma: Vec<f64> = (0..x.ncols())
        .map(|j| {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            (level * population_variance(&col)).sqrt()
        })
        .collect();
    let mut noisy = x.clone();
    for k in 0..x.nrows() {
        for j in 0..x.ncols() {
            let z: f64 = rng.sample(StandardNormal);
            noisy[(k, j)] += sigma[j] * z;
        }
    }
    TimeSeries::new(clean.times().to_vec(), noisy).expect("noise keeps the grid valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Failed,
}

/// One long-format row of a Monte Carlo report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub scenario_id: String,
    pub estimator: Estimator,
    pub replication: usize,
    pub name: String,
    pub value: Option<f64>,
    /// `ok`, or the error kind of a failed replication.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioMeta {
    pub config: ScenarioConfig,
    pub n: usize,
    pub parameter_names: Vec<String>,
    pub true_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub scenarios: Vec<ScenarioMeta>,
    pub records: Vec<Record>,
}

pub const CSV_HEADER: &str = "scenario_id,estimator,replication,name,value,status";
/// Name of the failure marker row of a failed replication.
pub const FAILURE_NAME: &str = "failure";

impl MonteCarloReport {
    /// Long-format CSV body.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 48);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let value = r.value.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.scenario_id,
                r.estimator.label(),
                r.replication,
                r.name,
                value,
                r.status
            );
        }
        out
    }

    /// Successful estimates of `name` for one scenario and estimator.
    pub fn values(&self, scenario_id: &str, estimator: Estimator, name: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.scenario_id == scenario_id && r.estimator == estimator && r.name == name)
            .filter_map(|r| r.value)
            .collect()
    }

    /// Failed replications for one scenario and estimator.
    pub fn failures(&self, scenario_id: &str, estimator: Estimator) -> Vec<&Record> {
        self.records
            .iter()
            .filter(|r| r.scenario_id == scenario_id && r.estimator == estimator && r.name == FAILURE_NAME)
            .collect()
    }
}

fn in_sample(fc: Forecast, data: &TimeSeries) -> Result<f64> {
    fc.require_complete()?;
    rmse_matrix(&fc.values, data.values())
}

fn run_estimator(
    estimator: Estimator,
    config: &ScenarioConfig,
    spec: &ModelSpec,
    truth: &ParameterSet,
    data: &TimeSeries,
) -> Result<(Vec<f64>, f64)> {
    let grey_cfg = GreyFitConfig {
        integrator: config.integrator,
        ..Default::default()
    };
    let fit = match estimator {
        Estimator::GreyTwoStep => fit_grey(data, spec, &grey_cfg)?,
        Estimator::GreyTwoStepTrueInit => fit_grey_with_initial(data, spec, &grey_cfg, truth.eta().clone())?,
        Estimator::IntegralMatching => fit_matching(data, spec)?,
    };
    let fc = match estimator {
        Estimator::IntegralMatching => forecast_matching_at(&fit, data.times(), 0, &config.integrator)?,
        _ => forecast_grey(&fit, &grey_cfg, 0)?,
    };
    let rmse = in_sample(fc, data)?;
    Ok((config.truth.named_estimates(&fit.params), rmse))
}

fn replicate(config: &ScenarioConfig, clean: &TimeSeries, truth: &ParameterSet, rep: usize) -> Vec<Record> {
    let spec = config.truth.spec();
    let data = add_noise_stream(clean, config.noise_level, config.seed, rep as u64);
    let names = config.truth.parameter_names();
    let mut out = Vec::with_capacity(config.estimators.len() * (names.len() + 1));
    for &est in &config.estimators {
        let record = |name: &str, value: Option<f64>, status: &str| Record {
            scenario_id: config.id.clone(),
            estimator: est,
            replication: rep,
            name: name.to_string(),
            value,
            status: status.to_string(),
        };
        match run_estimator(est, config, &spec, truth, &data) {
            Ok((values, rmse)) => {
                for (name, v) in names.iter().zip(values) {
                    out.push(record(name, Some(v), "ok"));
                }
                out.push(record("rmse", Some(rmse), "ok"));
            }
            Err(e) => out.push(record(FAILURE_NAME, None, e.kind())),
        }
    }
    out
}

/// Runs every scenario; replications fan out over at most `workers` threads
/// (`None` uses the global pool). Output order is independent of scheduling.
pub fn run_monte_carlo(configs: &[ScenarioConfig], workers: Option<usize>) -> Result<MonteCarloReport> {
    let mut scenarios = Vec::with_capacity(configs.len());
    let mut prepared = Vec::with_capacity(configs.len());
    for c in configs {
        c.validate()?;
        let clean = generate_clean(c)?;
        let truth = c.truth.params()?;
        scenarios.push(ScenarioMeta {
            config: c.clone(),
            n: clean.len(),
            parameter_names: c.truth.parameter_names().iter().map(|s| s.to_string()).collect(),
            true_values: c.truth.true_values(),
        });
        prepared.push((c, clean, truth));
    }
    let work = || -> Vec<Record> {
        let mut records = Vec::new();
        for (c, clean, truth) in &prepared {
            let per_rep: Vec<Vec<Record>> = (0..c.replications)
                .into_par_iter()
                .map(|rep| replicate(c, clean, truth, rep))
                .collect();
            records.extend(per_rep.into_iter().flatten());
        }
        records
    };
    let records = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| GreyError::InvalidArgument(e.to_string()))?
            .install(work),
        None => work(),
    };
    Ok(MonteCarloReport { scenarios, records })
}

/// Distribution summary of one parameter for one scenario and estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario_id: String,
    pub estimator: Estimator,
    pub name: String,
    pub truth: Option<f64>,
    pub count: usize,
    pub failures: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl SummaryRow {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile of sorted data (`(n - 1) p` positioning).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn describe(values: &[f64]) -> (f64, f64, f64, f64, f64, f64, f64) {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let std = if s.len() > 1 {
        (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (
        s[0],
        quantile(&s, 0.25),
        quantile(&s, 0.5),
        quantile(&s, 0.75),
        s[s.len() - 1],
        mean,
        std,
    )
}

pub const SUMMARY_HEADER: &str =
    "scenario_id,estimator,name,truth,count,failures,min,q1,median,q3,max,mean,std";

/// Quantile table per (scenario, estimator, parameter) in report order.
pub fn summarize(report: &MonteCarloReport) -> Result<Vec<SummaryRow>> {
    if report.records.is_empty() {
        return Err(GreyError::InvalidArgument("empty report".into()));
    }
    let mut rows = Vec::new();
    for meta in &report.scenarios {
        let c = &meta.config;
        for &est in &c.estimators {
            let failures = report.failures(&c.id, est).len();
            let mut names: Vec<(String, Option<f64>)> = meta
                .parameter_names
                .iter()
                .cloned()
                .zip(meta.true_values.iter().copied().map(Some))
                .collect();
            names.push(("rmse".into(), None));
            for (name, truth) in names {
                let vals = report.values(&c.id, est, &name);
                let (min, q1, median, q3, max, mean, std) = if vals.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
                } else {
                    describe(&vals)
                };
                rows.push(SummaryRow {
                    scenario_id: c.id.clone(),
                    estimator: est,
                    name,
                    truth,
                    count: vals.len(),
                    failures,
                    min,
                    q1,
                    median,
                    q3,
                    max,
                    mean,
                    std,
                });
            }
        }
    }
    Ok(rows)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.scenario_id,
            r.estimator.label(),
            r.name,
            r.truth.map(|v| v.to_string()).unwrap_or_default(),
            r.count,
            r.failures,
            r.min,
            r.q1,
            r.median,
            r.q3,
            r.max,
            r.mean,
            r.std
        );
    }
    out
}
