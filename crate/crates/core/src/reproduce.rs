//! Fits the three single-output models to the embedded annual series with the
//! 11/4 train/test protocol and compares against the published tables.

use crate::datasets::{Dataset, PublishedModel, TRAIN_LEN};
use crate::error::Result;
use crate::matching::{
    fit_matching, forecast_matching_at, gamma_line_search, GammaGrid, GammaScore, PowerFamily,
};
use crate::metrics::{evaluate, train_test_split, EvaluationReport};
use crate::model::{extend_times, FitResult, ModelSpec};
use crate::ode::Integrator;

pub const FORECAST_STEPS: usize = 3;

/// One model column of a reproduced table.
#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub model: &'static str,
    pub gamma: Option<f64>,
    pub fit: FitResult,
    /// Fitted and test-period values for all 15 years.
    pub values: Vec<f64>,
    /// Three out-of-sample forecasts past the last observation.
    pub forecasts: Vec<f64>,
    pub report: EvaluationReport,
    pub published: PublishedModel,
}

impl ModelOutcome {
    /// Linear coefficient `a` (zero when the model has none).
    pub fn a(&self) -> f64 {
        self.fit.params.theta_l()[(0, 0)]
    }

    /// Nonlinear coefficient `b` of the Cusum-level equation.
    pub fn b(&self) -> f64 {
        self.fit.params.theta_n()[(0, 0)]
    }

    pub fn eta(&self) -> f64 {
        self.fit.params.eta()[0]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReproduceOptions {
    pub grid: GammaGrid,
    pub score: GammaScore,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            grid: GammaGrid::default(),
            score: GammaScore::FullSeriesMape,
        }
    }
}

fn outcome(
    ds: &Dataset,
    model: &'static str,
    gamma: Option<f64>,
    fit: FitResult,
) -> Result<ModelOutcome> {
    let ts = ds.series();
    let n = ts.len();
    let horizon = n - TRAIN_LEN + FORECAST_STEPS;
    let times = extend_times(&fit.times, horizon);
    let fc = forecast_matching_at(&fit, &times, horizon, &Integrator::default())?;
    let report = evaluate(&fc, ts.values(), TRAIN_LEN)?;
    let all = fc.column(0);
    Ok(ModelOutcome {
        model,
        gamma,
        fit,
        values: all[..n].to_vec(),
        forecasts: all[n..].to_vec(),
        report,
        published: *ds.model(model).expect("published column exists"),
    })
}

/// Runs IGVM, INGM and INGBM on one dataset.
pub fn reproduce_dataset(ds: &Dataset, options: &ReproduceOptions) -> Result<Vec<ModelOutcome>> {
    let ts = ds.series();
    let (train, _) = train_test_split(&ts, TRAIN_LEN)?;
    let igvm = fit_matching(&train, &ModelSpec::verhulst())?;
    let mut out = vec![outcome(ds, "IGVM", None, igvm)?];
    for (name, family) in [("INGM", PowerFamily::Ingm), ("INGBM", PowerFamily::Ingbm)] {
        let search = gamma_line_search(&ts, family, options.grid, Some(TRAIN_LEN), options.score)?;
        out.push(outcome(ds, name, Some(search.gamma), search.fit)?);
    }
    Ok(out)
}

/// One row of the ours-versus-published comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub dataset: &'static str,
    pub model: &'static str,
    pub metric: String,
    pub ours: f64,
    pub published: Option<f64>,
}

impl ComparisonRow {
    pub fn delta(&self) -> Option<f64> {
        self.published.map(|p| self.ours - p)
    }
}

pub fn comparison_rows(ds: &Dataset, outcomes: &[ModelOutcome]) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    let mut push = |model: &'static str, metric: String, ours: f64, published: Option<f64>| {
        rows.push(ComparisonRow {
            dataset: ds.name,
            model,
            metric,
            ours,
            published,
        })
    };
    for o in outcomes {
        push(o.model, "mape_train".into(), o.report.mape_train, Some(o.published.mape_train));
        push(
            o.model,
            "mape_test".into(),
            o.report.mape_test.unwrap_or(f64::NAN),
            Some(o.published.mape_test),
        );
        if let Some(g) = o.gamma {
            push(o.model, "gamma".into(), g, None);
        }
        push(o.model, "a".into(), o.a(), None);
        push(o.model, "b".into(), o.b(), None);
        push(o.model, "eta".into(), o.eta(), None);
        for (k, year) in ds.years().iter().enumerate() {
            push(o.model, format!("value_{year}"), o.values[k], Some(o.published.values[k]));
        }
    }
    rows
}

/// Forecast rows for 2019-2021 against the published power-model forecasts.
pub fn forecast_rows(ds: &Dataset, outcomes: &[ModelOutcome]) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    let last_year = ds.years().last().copied().unwrap_or(0);
    for o in outcomes {
        for (k, v) in o.forecasts.iter().enumerate() {
            rows.push(ComparisonRow {
                dataset: ds.name,
                model: o.model,
                metric: format!("forecast_{}", last_year + 1 + k as u32),
                ours: *v,
                published: (o.model == "INGBM").then(|| ds.forecasts[k]),
            });
        }
    }
    rows
}
