use std::fmt::Write as _;
use std::path::Path;

use greyfit::datasets::{self, Dataset};
use greyfit::grey::{fit_grey, forecast_grey_at, GreyFitConfig, InitialStrategy};
use greyfit::matching::{fit_matching, forecast_matching_at, gamma_line_search, GammaGrid, GammaScore, PowerFamily};
use greyfit::metrics::{ape, evaluate, train_test_split, EvaluationReport};
use greyfit::model::extend_times;
use greyfit::ode::Integrator;
use greyfit::reproduce::{comparison_rows, forecast_rows, reproduce_dataset, ComparisonRow, ReproduceOptions};
use greyfit::scenario::{bundled, parse_sweep};
use greyfit::simulate::{run_monte_carlo, summarize, summary_csv};
use greyfit::{FitMethod, FitResult, Forecast, ModelSpec, TimeSeries};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::fitdoc::{self, FitDocument, FitMeta};
use crate::io::{self, num, write_manifest, write_output, Clock};
use crate::{FitArgs, ForecastArgs, McArgs, ReproduceArgs};

pub const WORKERS_ENV: &str = "GREYFIT_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq)]
enum ModelChoice {
    Igvm,
    Ingm,
    Ingbm,
    Poly(usize),
    Lv,
}

impl ModelChoice {
    fn parse(s: &str) -> CliResult<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "igvm" => Ok(Self::Igvm),
            "ingm" => Ok(Self::Ingm),
            "ingbm" => Ok(Self::Ingbm),
            "lv" => Ok(Self::Lv),
            _ => {
                if let Some(p) = lower.strip_prefix("poly:") {
                    let p: usize = p
                        .parse()
                        .map_err(|_| CliError::Config(format!("--model: bad degree in `{s}`")))?;
                    return Ok(Self::Poly(p));
                }
                Err(CliError::Config(format!(
                    "--model: unknown model `{s}` (igvm, ingm, ingbm, poly:P, lv)"
                )))
            }
        }
    }

    fn family(&self) -> Option<PowerFamily> {
        match self {
            Self::Ingm => Some(PowerFamily::Ingm),
            Self::Ingbm => Some(PowerFamily::Ingbm),
            _ => None,
        }
    }

    fn spec(&self, gamma: Option<f64>) -> CliResult<ModelSpec> {
        Ok(match (self, gamma) {
            (Self::Igvm, _) => ModelSpec::verhulst(),
            (Self::Lv, _) => ModelSpec::lotka_volterra(),
            (Self::Poly(p), _) => ModelSpec::polynomial(*p, false)?,
            (Self::Ingm | Self::Ingbm, Some(g)) => self.family().expect("power family").spec(g),
            (_, None) => return Err(CliError::Config("--gamma is required for this model".into())),
        })
    }
}

fn parse_score(s: &str) -> CliResult<GammaScore> {
    match s {
        "full" => Ok(GammaScore::FullSeriesMape),
        "holdout" => Ok(GammaScore::HoldoutMape),
        "rmse" => Ok(GammaScore::InSampleRmse),
        other => Err(CliError::Config(format!("--score: unknown score `{other}` (full, holdout, rmse)"))),
    }
}

fn parse_grid(s: &str) -> CliResult<GammaGrid> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("--gamma-search: expected start,end,step, got `{s}`")))?;
    if parts.len() != 3 {
        return Err(CliError::Config(format!("--gamma-search: expected start,end,step, got `{s}`")));
    }
    GammaGrid::new(parts[0], parts[1], parts[2]).map_err(|e| CliError::Config(format!("--gamma-search: {e}")))
}

fn strategy_name(s: InitialStrategy) -> &'static str {
    match s {
        InitialStrategy::FixFirstPoint => "fix_first_point",
        InitialStrategy::FixLastPoint => "fix_last_point",
        InitialStrategy::ResidualCorrection => "residual_correction",
    }
}

enum Plan {
    Grey(ModelSpec, GreyFitConfig),
    Matching(ModelSpec),
    Search(PowerFamily, GammaGrid, GammaScore),
}

fn plan(args: &FitArgs, model: ModelChoice) -> CliResult<Plan> {
    let grey = match args.method.as_str() {
        "grey" => true,
        "matching" => false,
        other => return Err(CliError::Config(format!("--method: unknown method `{other}` (grey, matching)"))),
    };
    let power = model.family().is_some();
    if !power && (args.gamma.is_some() || args.gamma_search.is_some()) {
        return Err(CliError::Config("--gamma/--gamma-search apply only to ingm and ingbm".into()));
    }
    if !grey && (args.init_strategy.is_some() || args.lambda.is_some()) {
        return Err(CliError::Config("--init-strategy/--lambda apply only to --method grey".into()));
    }
    let integrator = Integrator::with_max_step(args.max_step);
    if !(args.max_step > 0.0) {
        return Err(CliError::Config("--max-step must be positive".into()));
    }
    let searching = power && args.gamma.is_none();
    if args.score.is_some() && !searching {
        return Err(CliError::Config("--score applies only to the exponent search".into()));
    }
    if grey {
        if searching {
            return Err(CliError::Config("the exponent search runs with --method matching; pass --gamma for grey".into()));
        }
        let initial_strategy = match &args.init_strategy {
            Some(s) => s.parse().map_err(|e| CliError::Config(format!("--init-strategy: {e}")))?,
            None => InitialStrategy::default(),
        };
        let config = GreyFitConfig {
            background: args.lambda.unwrap_or(0.5),
            initial_strategy,
            integrator,
        };
        config.validate().map_err(|e| CliError::Config(e.to_string()))?;
        return Ok(Plan::Grey(model.spec(args.gamma)?, config));
    }
    if searching {
        let grid = match &args.gamma_search {
            Some(s) => parse_grid(s)?,
            None => GammaGrid::default(),
        };
        let score = match &args.score {
            Some(s) => parse_score(s)?,
            None => GammaScore::default_for(args.split),
        };
        return Ok(Plan::Search(model.family().expect("power family"), grid, score));
    }
    Ok(Plan::Matching(model.spec(args.gamma)?))
}

struct FitOutcome {
    fit: FitResult,
    forecast: Forecast,
    report: EvaluationReport,
    gamma: Option<f64>,
    grey: Option<GreyFitConfig>,
    gamma_score: Option<f64>,
    scored: Option<usize>,
}

fn forecast_over(fit: &FitResult, grey: Option<&GreyFitConfig>, times: &[f64], horizon: usize, max_step: f64) -> CliResult<Forecast> {
    let fc = match grey {
        Some(cfg) => forecast_grey_at(fit, cfg, times, horizon)?,
        None => forecast_matching_at(fit, times, horizon, &Integrator::with_max_step(max_step))?,
    };
    fc.require_complete()?;
    Ok(fc)
}

fn run_fit(ts: &TimeSeries, args: &FitArgs, plan: &Plan) -> CliResult<FitOutcome> {
    let n = ts.len();
    let n_train = args.split.unwrap_or(n);
    let train = match args.split {
        Some(k) => train_test_split(ts, k)?.0,
        None => ts.clone(),
    };
    let (fit, gamma, grey, gamma_score, scored) = match plan {
        Plan::Grey(spec, cfg) => (fit_grey(&train, spec, cfg)?, args.gamma, Some(*cfg), None, None),
        Plan::Matching(spec) => (fit_matching(&train, spec)?, args.gamma, None, None, None),
        Plan::Search(family, grid, score) => {
            let s = gamma_line_search(ts, *family, *grid, args.split, *score)?;
            let scored = s.candidates.iter().filter(|c| c.1.is_some()).count();
            (s.fit, Some(s.gamma), None, Some(s.score), Some(scored))
        }
    };
    let forecast = forecast_over(&fit, grey.as_ref(), ts.times(), n - n_train, args.max_step)?;
    let report = evaluate(&forecast, ts.values(), n_train)?;
    Ok(FitOutcome {
        fit,
        forecast,
        report,
        gamma,
        grey,
        gamma_score,
        scored,
    })
}

fn report_csv(ts: &TimeSeries, columns: &[String], fc: &Forecast, n_train: usize) -> CliResult<String> {
    let mut out = String::from("t,segment");
    for c in columns {
        let _ = write!(out, ",{c},fitted_{c},ape_{c}");
    }
    out.push('\n');
    let apes: Vec<Vec<f64>> = (0..ts.dim())
        .map(|j| ape(&fc.column(j)[..ts.len()], &ts.column(j)))
        .collect::<Result<_, _>>()?;
    for k in 0..ts.len() {
        let seg = if k < n_train { "train" } else { "test" };
        let _ = write!(out, "{},{seg}", num(ts.times()[k]));
        for j in 0..ts.dim() {
            let _ = write!(
                out,
                ",{},{},{}",
                num(ts.values()[(k, j)]),
                num(fc.values[(k, j)]),
                num(apes[j][k])
            );
        }
        out.push('\n');
    }
    Ok(out)
}

fn write_fit_doc(dir: &Path, doc: &FitDocument, outputs: &mut Vec<std::path::PathBuf>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(doc).map_err(|e| CliError::Io(e.to_string()))?;
    write_output(dir, "fit.json", &(text + "\n"), outputs)
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let clock = Clock::start();
    let bytes = io::read_bytes(&args.input)?;
    let input = io::parse_series(&bytes)?;
    let model = ModelChoice::parse(&args.model)?;
    let plan = plan(args, model)?;
    let mut outputs = Vec::new();
    let outcome = match run_fit(&input.series, args, &plan) {
        Ok(o) => o,
        Err(e) => {
            write_fit_doc(&args.out_dir, &fitdoc::failure(&args.model, Some(&args.method), &e), &mut outputs)?;
            write_manifest(&args.out_dir, "fit", args, input.digest, outputs, &clock)?;
            return Err(e);
        }
    };
    let n_train = args.split.unwrap_or(input.series.len());
    let doc = fitdoc::success(
        &outcome.fit,
        &outcome.report,
        FitMeta {
            model: &args.model.to_ascii_lowercase(),
            gamma: outcome.gamma,
            columns: input.columns.clone(),
            input_times: input.series.times().to_vec(),
            n_train: args.split,
            grey: outcome
                .grey
                .map(|c| (c, strategy_name(c.initial_strategy).to_string())),
            max_step: args.max_step,
            gamma_score: outcome.gamma_score,
            gamma_candidates_scored: outcome.scored,
        },
    );
    write_fit_doc(&args.out_dir, &doc, &mut outputs)?;
    let report = report_csv(&input.series, &input.columns, &outcome.forecast, n_train)?;
    write_output(&args.out_dir, "report.csv", &report, &mut outputs)?;
    write_manifest(&args.out_dir, "fit", args, input.digest, outputs, &clock)?;

    let mut summary = format!("{} via {}", doc.model, outcome.fit.method.label());
    if let Some(g) = outcome.gamma {
        let _ = write!(summary, ", gamma = {g}");
    }
    for (k, v) in &doc.parameters {
        let _ = write!(summary, ", {k} = {v:.6}");
    }
    let _ = write!(summary, "\nMAPE_train = {:.4}%", outcome.report.mape_train);
    if let Some(t) = outcome.report.mape_test {
        let _ = write!(summary, ", MAPE_test = {t:.4}%");
    }
    let _ = write!(summary, ", RMSE = {:.6}", outcome.report.rmse);
    println!("{summary}");
    Ok(())
}

pub fn forecast(args: &ForecastArgs) -> CliResult<()> {
    let clock = Clock::start();
    let bytes = io::read_bytes(&args.fit)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Parse("fit.json is not UTF-8".into()))?;
    let doc = FitDocument::parse(&text)?;
    let fit = doc.to_fit()?;
    if doc.input_times.len() < fit.times.len() {
        return Err(CliError::Parse("fit.json input_times shorter than fit_times".into()));
    }
    let grey = match fit.method {
        FitMethod::GreyTwoStep => Some(GreyFitConfig {
            background: doc.background.unwrap_or(0.5),
            initial_strategy: InitialStrategy::default(),
            integrator: Integrator::with_max_step(doc.max_step),
        }),
        _ => None,
    };
    let times = extend_times(&doc.input_times, args.horizon);
    let fc = forecast_over(&fit, grey.as_ref(), &times, args.horizon, doc.max_step)?;
    let mut out = String::from("t");
    for c in &doc.columns {
        let _ = write!(out, ",{c}");
    }
    out.push_str(",blow_up\n");
    for (k, t) in fc.times.iter().enumerate() {
        let _ = write!(out, "{}", num(*t));
        for j in 0..fc.values.ncols() {
            let _ = write!(out, ",{}", num(fc.values[(k, j)]));
        }
        out.push_str(",false\n");
    }
    let mut outputs = Vec::new();
    write_output(&args.out_dir, "forecast.csv", &out, &mut outputs)?;
    write_manifest(&args.out_dir, "forecast", args, io::digest(&bytes), outputs, &clock)?;
    let tail: Vec<String> = (fc.times.len() - args.horizon..fc.times.len())
        .map(|k| format!("{:.4}", fc.values[(k, 0)]))
        .collect();
    println!("{} rows, forecasts: [{}]", fc.times.len(), tail.join(", "));
    Ok(())
}

fn workers(flag: Option<usize>) -> CliResult<Option<usize>> {
    if let Some(w) = flag {
        return Ok(Some(w));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|w| *w > 0)
            .map(Some)
            .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        _ => Ok(None),
    }
}

#[derive(Serialize)]
struct McConfig<'a> {
    args: &'a McArgs,
    sweep: String,
    source: String,
    workers: Option<usize>,
    scenarios: Vec<greyfit::simulate::ScenarioConfig>,
}

pub fn mc(args: &McArgs) -> CliResult<()> {
    let clock = Clock::start();
    let path = Path::new(&args.config);
    let (text, source) = if path.is_file() {
        let bytes = io::read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|_| CliError::Parse("config is not UTF-8".into()))?;
        (text, path.display().to_string())
    } else if let Some(text) = bundled(&args.config) {
        (text.to_string(), format!("bundled:{}", args.config))
    } else {
        return Err(CliError::Parse(format!(
            "`{}` is neither a file nor a bundled sweep (verhulst-n-sweep, verhulst-noise-sweep, lv-noise-sweep, lv-n-sweep)",
            args.config
        )));
    };
    let mut sweep = parse_sweep(&text)?;
    if let Some(r) = args.replications {
        if r == 0 {
            return Err(CliError::Config("--replications must be >= 1".into()));
        }
        sweep.scenarios.iter_mut().for_each(|s| s.replications = r);
    }
    let workers = workers(args.workers)?;
    let report = run_monte_carlo(&sweep.scenarios, workers)?;
    let summary = summarize(&report)?;
    let mut outputs = Vec::new();
    write_output(&args.out_dir, "report.csv", &report.to_csv(), &mut outputs)?;
    write_output(&args.out_dir, "summary.csv", &summary_csv(&summary), &mut outputs)?;
    let failures = report.records.iter().filter(|r| r.value.is_none()).count();
    println!(
        "{}: {} scenarios, {} records, {} failed replications",
        sweep.name,
        sweep.scenarios.len(),
        report.records.len(),
        failures
    );
    let config = McConfig {
        args,
        sweep: sweep.name.clone(),
        source,
        workers,
        scenarios: sweep.scenarios,
    };
    write_manifest(&args.out_dir, "mc", config, io::digest(text.as_bytes()), outputs, &clock)
}

fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("dataset,model,metric,ours,published,delta\n");
    for r in rows {
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.dataset,
            r.model,
            r.metric,
            num(r.ours),
            opt(r.published),
            opt(r.delta())
        );
    }
    out
}

fn dataset_digest(sets: &[&Dataset]) -> String {
    let mut text = String::new();
    for ds in sets {
        let _ = write!(text, "{}:{:?};", ds.name, ds.values);
    }
    io::digest(text.as_bytes())
}

pub fn reproduce(args: &ReproduceArgs) -> CliResult<()> {
    let clock = Clock::start();
    let options = ReproduceOptions {
        score: parse_score(&args.score)?,
        ..Default::default()
    };
    let (sets, forecasts): (Vec<&Dataset>, bool) = match args.table.as_str() {
        "3" => (vec![&datasets::SEWAGE], false),
        "4" => (vec![&datasets::WATER], false),
        "forecasts" => (vec![&datasets::SEWAGE, &datasets::WATER], true),
        other => return Err(CliError::Config(format!("--table: expected 3, 4 or forecasts, got `{other}`"))),
    };
    let mut rows = Vec::new();
    for ds in &sets {
        let outcomes = reproduce_dataset(ds, &options)?;
        if forecasts {
            rows.extend(forecast_rows(ds, &outcomes));
        } else {
            rows.extend(comparison_rows(ds, &outcomes));
        }
    }
    let csv = comparison_csv(&rows);
    print!("{csv}");
    eprintln!(
        "note: the exponent is chosen by forecasting error over the same test years that are reported, as in the published protocol"
    );
    let mut outputs = Vec::new();
    write_output(&args.out_dir, "comparison.csv", &csv, &mut outputs)?;
    write_manifest(&args.out_dir, "reproduce", args, dataset_digest(&sets), outputs, &clock)
}

pub fn data(name: &str) -> CliResult<()> {
    let ds = datasets::by_name(name)
        .ok_or_else(|| CliError::Config(format!("unknown dataset `{name}` (sewage, water)")))?;
    let mut out = format!("t,{}\n", ds.name);
    for (year, v) in ds.years().iter().zip(ds.values.iter()) {
        let _ = writeln!(out, "{year},{}", num(*v));
    }
    print!("{out}");
    Ok(())
}
