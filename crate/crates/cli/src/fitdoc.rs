//! The `fit.json` document: a flat, versioned record of one fit.

use std::collections::BTreeMap;

use greyfit::grey::GreyFitConfig;
use greyfit::metrics::EvaluationReport;
use greyfit::ode::Integrator;
use greyfit::{FitMethod, FitResult, ModelSpec, ParameterForm, ParameterSet};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vartheta {
    pub l: Vec<Vec<f64>>,
    pub n: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
}

/// Exact parameter state for reloading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub form: ParameterForm,
    pub theta_l: Vec<Vec<f64>>,
    pub theta_n: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub condition_estimate: Option<f64>,
    pub rmse: f64,
    pub mape_train: f64,
    pub mape_test: Option<f64>,
    pub gamma_score: Option<f64>,
    pub gamma_candidates_scored: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema_version: u32,
    pub status: String,
    pub error: Option<ErrorInfo>,
    pub model: String,
    pub method: Option<String>,
    pub spec: Option<ModelSpec>,
    pub gamma: Option<f64>,
    pub columns: Vec<String>,
    pub input_times: Vec<f64>,
    pub n_train: Option<usize>,
    pub fit_times: Vec<f64>,
    pub background: Option<f64>,
    pub init_strategy: Option<String>,
    pub max_step: f64,
    /// Grey-form coefficients by name (`a`, `b`, `beta`, `eta`, indexed when multi-valued).
    pub parameters: BTreeMap<String, f64>,
    pub vartheta: Option<Vartheta>,
    pub state: Option<State>,
    pub diagnostics: Option<Diagnostics>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix(r: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> CliResult<DMatrix<f64>> {
    if r.len() != nrows || r.iter().any(|row| row.len() != ncols) {
        return Err(CliError::Parse(format!("{what} must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| r[i][j]))
}

/// Flat names: `a`, `b`, `beta`, `eta` for scalars; `a_i_j`, `b_i_j`,
/// `beta_i`, `eta_i` (1-based) otherwise.
pub fn named_parameters(params: &ParameterSet, spec: &ModelSpec) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let d = spec.dimension;
    let put_matrix = |out: &mut BTreeMap<String, f64>, prefix: &str, m: &DMatrix<f64>| {
        if m.len() == 1 {
            out.insert(prefix.to_string(), m[(0, 0)]);
        } else if m.nrows() == 1 {
            for j in 0..m.ncols() {
                out.insert(format!("{prefix}_{}", j + 1), m[(0, j)]);
            }
        } else {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out.insert(format!("{prefix}_{}_{}", i + 1, j + 1), m[(i, j)]);
                }
            }
        }
    };
    if spec.include_linear {
        put_matrix(&mut out, "a", params.theta_l());
    }
    if spec.nonlinear_len() > 0 {
        put_matrix(&mut out, "b", params.theta_n());
    }
    for (prefix, v) in [("beta", params.beta()), ("eta", params.eta())] {
        if d == 1 {
            out.insert(prefix.to_string(), v[0]);
        } else {
            for i in 0..d {
                out.insert(format!("{prefix}_{}", i + 1), v[i]);
            }
        }
    }
    out
}

pub struct FitMeta<'a> {
    pub model: &'a str,
    pub gamma: Option<f64>,
    pub columns: Vec<String>,
    pub input_times: Vec<f64>,
    pub n_train: Option<usize>,
    pub grey: Option<(GreyFitConfig, String)>,
    pub max_step: f64,
    pub gamma_score: Option<f64>,
    pub gamma_candidates_scored: Option<usize>,
}

pub fn success(fit: &FitResult, report: &EvaluationReport, meta: FitMeta<'_>) -> FitDocument {
    let p = &fit.params;
    FitDocument {
        schema_version: SCHEMA_VERSION,
        status: "ok".into(),
        error: None,
        model: meta.model.to_string(),
        method: Some(fit.method.label().to_string()),
        spec: Some(fit.spec),
        gamma: meta.gamma,
        columns: meta.columns,
        input_times: meta.input_times,
        n_train: meta.n_train,
        fit_times: fit.times.clone(),
        background: meta.grey.as_ref().map(|(c, _)| c.background),
        init_strategy: meta.grey.map(|(_, s)| s),
        max_step: meta.max_step,
        parameters: named_parameters(p, &fit.spec),
        vartheta: fit.transformed.as_ref().map(|t| Vartheta {
            l: rows(&t.vartheta_l),
            n: rows(&t.vartheta_n),
            intercept: t.intercept.iter().copied().collect(),
        }),
        state: Some(State {
            form: p.form(),
            theta_l: rows(p.theta_l()),
            theta_n: rows(p.theta_n()),
            beta: p.beta().iter().copied().collect(),
            eta: p.eta().iter().copied().collect(),
            eta_x: p.eta_x().iter().copied().collect(),
        }),
        diagnostics: Some(Diagnostics {
            condition_estimate: Some(fit.condition_estimate).filter(|c| c.is_finite()),
            rmse: report.rmse,
            mape_train: report.mape_train,
            mape_test: report.mape_test,
            gamma_score: meta.gamma_score,
            gamma_candidates_scored: meta.gamma_candidates_scored,
        }),
    }
}

pub fn failure(model: &str, method: Option<&str>, error: &CliError) -> FitDocument {
    FitDocument {
        schema_version: SCHEMA_VERSION,
        status: "error".into(),
        error: Some(ErrorInfo {
            kind: error.kind().to_string(),
            message: error.to_string(),
            exit_code: error.exit_code(),
        }),
        model: model.to_string(),
        method: method.map(str::to_string),
        spec: None,
        gamma: None,
        columns: Vec::new(),
        input_times: Vec::new(),
        n_train: None,
        fit_times: Vec::new(),
        background: None,
        init_strategy: None,
        max_step: Integrator::default().max_step,
        parameters: BTreeMap::new(),
        vartheta: None,
        state: None,
        diagnostics: None,
    }
}

impl FitDocument {
    pub fn parse(text: &str) -> CliResult<Self> {
        let doc: FitDocument =
            serde_json::from_str(text).map_err(|e| CliError::Parse(format!("fit.json: {e}")))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(CliError::Parse(format!(
                "fit.json schema version {} is not supported (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        if doc.status != "ok" {
            return Err(CliError::Config("fit.json records a failed fit".into()));
        }
        Ok(doc)
    }

    pub fn method(&self) -> CliResult<FitMethod> {
        match self.method.as_deref() {
            Some("grey_two_step") => Ok(FitMethod::GreyTwoStep),
            Some("integral_matching") => Ok(FitMethod::IntegralMatching),
            Some("integral_matching_power") => Ok(FitMethod::IntegralMatchingPowerFallback),
            other => Err(CliError::Parse(format!("unknown method {other:?}"))),
        }
    }

    /// Rebuilds the parts of the fit needed for forecasting.
    pub fn to_fit(&self) -> CliResult<FitResult> {
        let spec = self
            .spec
            .ok_or_else(|| CliError::Parse("fit.json has no spec".into()))?;
        spec.validate()?;
        let s = self
            .state
            .as_ref()
            .ok_or_else(|| CliError::Parse("fit.json has no parameter state".into()))?;
        let d = spec.dimension;
        let theta_l = matrix(&s.theta_l, d, d, "theta_l")?;
        let theta_n = matrix(&s.theta_n, d, spec.nonlinear_len(), "theta_n")?;
        let vec = |v: &[f64], what: &str| {
            if v.len() == d {
                Ok(DVector::from_column_slice(v))
            } else {
                Err(CliError::Parse(format!("{what} must have length {d}")))
            }
        };
        let params = match s.form {
            ParameterForm::Grey => {
                ParameterSet::grey(&spec, theta_l, theta_n, vec(&s.beta, "beta")?, vec(&s.eta, "eta")?)?
            }
            ParameterForm::Reduced => ParameterSet::reduced_with_state(
                &spec,
                theta_l,
                theta_n,
                vec(&s.eta, "eta")?,
                vec(&s.eta_x, "eta_x")?,
            )?,
        };
        Ok(FitResult {
            spec,
            params,
            method: self.method()?,
            times: self.fit_times.clone(),
            design: DMatrix::zeros(0, 0),
            targets: DMatrix::zeros(0, 0),
            residuals: DMatrix::zeros(0, 0),
            condition_estimate: f64::NAN,
            transformed: None,
        })
    }
}
