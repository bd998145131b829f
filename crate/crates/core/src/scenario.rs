//! TOML sweep files: shared settings, a `[truth]` table and `[[scenarios]]` cells.
//!
//! Top-level keys (`seed`, `replications`, `estimators`, `t_end`, `h`, `n`,
//! `noise_level`, `max_step`) are defaults that each scenario may override.

use toml::{Table, Value};

use crate::error::{GreyError, Result};
use crate::ode::Integrator;
use crate::simulate::{Estimator, ScenarioConfig, Truth};

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub scenarios: Vec<ScenarioConfig>,
}

/// Bundled sweep files by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("verhulst-n-sweep", include_str!("../scenarios/verhulst-n-sweep.toml")),
    ("verhulst-noise-sweep", include_str!("../scenarios/verhulst-noise-sweep.toml")),
    ("lv-noise-sweep", include_str!("../scenarios/lv-noise-sweep.toml")),
    ("lv-n-sweep", include_str!("../scenarios/lv-n-sweep.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

const SHARED_KEYS: [&str; 8] = [
    "seed",
    "replications",
    "estimators",
    "t_end",
    "h",
    "n",
    "noise_level",
    "max_step",
];

fn float(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(GreyError::config(key, format!("expected a number, got {}", v.type_str()))),
    }
}

fn unsigned(v: &Value, key: &str) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(GreyError::config(key, "expected a non-negative integer")),
    }
}

fn estimators(v: &Value, key: &str) -> Result<Vec<Estimator>> {
    let arr = v
        .as_array()
        .ok_or_else(|| GreyError::config(key, "expected an array of estimator names"))?;
    arr.iter()
        .map(|e| {
            let s = e
                .as_str()
                .ok_or_else(|| GreyError::config(key, "estimator names must be strings"))?;
            Estimator::parse(s).ok_or_else(|| {
                GreyError::config(
                    key,
                    format!("unknown estimator `{s}` (grey_two_step, grey_two_step_true_init, integral_matching)"),
                )
            })
        })
        .collect()
}

fn parse_truth(t: &Table) -> Result<Truth> {
    let family = t
        .get("family")
        .and_then(Value::as_str)
        .ok_or_else(|| GreyError::config("truth.family", "missing or not a string"))?;
    let (defaults, names): (Truth, &[&str]) = match family {
        "verhulst" => (Truth::verhulst_default(), &["a", "b", "eta"]),
        "lotka_volterra" => (
            Truth::lotka_volterra_default(),
            &["a1", "b1", "a2", "b2", "eta1", "eta2"],
        ),
        other => {
            return Err(GreyError::config(
                "truth.family",
                format!("unknown family `{other}` (verhulst, lotka_volterra)"),
            ))
        }
    };
    for key in t.keys() {
        if key != "family" && !names.contains(&key.as_str()) {
            return Err(GreyError::config(format!("truth.{key}"), "unknown key"));
        }
    }
    let mut v = defaults.true_values();
    for (slot, name) in v.iter_mut().zip(names) {
        if let Some(x) = t.get(*name) {
            *slot = float(x, &format!("truth.{name}"))?;
        }
    }
    Ok(match defaults {
        Truth::Verhulst { .. } => Truth::Verhulst {
            a: v[0],
            b: v[1],
            eta: v[2],
        },
        Truth::LotkaVolterra { .. } => Truth::LotkaVolterra {
            a1: v[0],
            b1: v[1],
            a2: v[2],
            b2: v[3],
            eta1: v[4],
            eta2: v[5],
        },
    })
}

fn apply(config: &mut ScenarioConfig, table: &Table, prefix: &str) -> Result<()> {
    for (key, v) in table {
        let path = format!("{prefix}{key}");
        match key.as_str() {
            "seed" => config.seed = unsigned(v, &path)?,
            "replications" => config.replications = unsigned(v, &path)? as usize,
            "estimators" => config.estimators = estimators(v, &path)?,
            "t_end" => config.t_end = float(v, &path)?,
            "h" => config.h = float(v, &path)?,
            "n" => config.n = Some(unsigned(v, &path)? as usize),
            "noise_level" => config.noise_level = float(v, &path)?,
            "max_step" => config.integrator = Integrator::with_max_step(float(v, &path)?),
            _ => {}
        }
    }
    Ok(())
}

/// Parses and validates a sweep; errors name the offending key.
pub fn parse_sweep(text: &str) -> Result<Sweep> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| GreyError::config("toml", e.message().to_string()))?;
    for key in root.keys() {
        if !SHARED_KEYS.contains(&key.as_str()) && !["name", "truth", "scenarios"].contains(&key.as_str()) {
            return Err(GreyError::config(key.clone(), "unknown key"));
        }
    }
    let name = match root.get("name") {
        Some(v) => v
            .as_str()
            .ok_or_else(|| GreyError::config("name", "expected a string"))?
            .to_string(),
        None => "sweep".to_string(),
    };
    let truth = parse_truth(
        root.get("truth")
            .and_then(Value::as_table)
            .ok_or_else(|| GreyError::config("truth", "missing [truth] table"))?,
    )?;
    let mut base = ScenarioConfig::new(name.clone(), truth, f64::NAN, f64::NAN, f64::NAN);
    apply(&mut base, &root, "")?;
    let cells = root
        .get("scenarios")
        .and_then(Value::as_array)
        .ok_or_else(|| GreyError::config("scenarios", "missing [[scenarios]] entries"))?;
    if cells.is_empty() {
        return Err(GreyError::config("scenarios", "at least one scenario is required"));
    }
    let mut scenarios = Vec::with_capacity(cells.len());
    for (k, cell) in cells.iter().enumerate() {
        let prefix = format!("scenarios[{k}].");
        let table = cell
            .as_table()
            .ok_or_else(|| GreyError::config(format!("scenarios[{k}]"), "expected a table"))?;
        for key in table.keys() {
            if key != "id" && !SHARED_KEYS.contains(&key.as_str()) {
                return Err(GreyError::config(format!("{prefix}{key}"), "unknown key"));
            }
        }
        let mut config = base.clone();
        config.id = match table.get("id") {
            Some(v) => v
                .as_str()
                .ok_or_else(|| GreyError::config(format!("{prefix}id"), "expected a string"))?
                .to_string(),
            None => format!("{name}-{k}"),
        };
        apply(&mut config, table, &prefix)?;
        if config.n.is_some() && config.t_end.is_nan() {
            config.t_end = (config.n.unwrap_or(1) - 1) as f64 * config.h;
        }
        config.validate().map_err(|e| match e {
            GreyError::Config { key, message } => GreyError::config(format!("{prefix}{key}"), message),
            other => other,
        })?;
        if scenarios.iter().any(|s: &ScenarioConfig| s.id == config.id) {
            return Err(GreyError::config(format!("{prefix}id"), format!("duplicate id `{}`", config.id)));
        }
        scenarios.push(config);
    }
    Ok(Sweep { name, scenarios })
}
