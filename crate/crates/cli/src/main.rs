mod commands;
mod error;
mod fitdoc;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "greyfit", version, about = "Nonlinear grey models: fitting, forecasting and Monte Carlo runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a `t,x1[,x2,...]` CSV; writes fit.json, report.csv, manifest.json.
    Fit(FitArgs),
    /// Solve a saved fit over its sample times plus a horizon; writes forecast.csv.
    Forecast(ForecastArgs),
    /// Run a Monte Carlo sweep (TOML file or bundled name); writes report.csv, summary.csv.
    Mc(McArgs),
    /// Re-run the published real-data comparisons with the embedded series.
    Reproduce(ReproduceArgs),
    /// Print an embedded dataset (`sewage` or `water`) as CSV.
    Data { name: String },
}

#[derive(clap::Args, Serialize)]
pub struct FitArgs {
    pub input: PathBuf,
    /// igvm | ingm | ingbm | poly:P | lv
    #[arg(long)]
    pub model: String,
    /// grey | matching
    #[arg(long, default_value = "matching")]
    pub method: String,
    /// Fixed power exponent (ingm / ingbm).
    #[arg(long, conflicts_with = "gamma_search")]
    pub gamma: Option<f64>,
    /// Grid `start,end,step` for the exponent search (ingm / ingbm, matching).
    #[arg(long)]
    pub gamma_search: Option<String>,
    /// Score for the exponent search: full | holdout | rmse.
    #[arg(long)]
    pub score: Option<String>,
    /// Train on the first K points and test on the rest.
    #[arg(long)]
    pub split: Option<usize>,
    /// Background coefficient (grey).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// first | last | residual (grey).
    #[arg(long)]
    pub init_strategy: Option<String>,
    /// Largest RK4 step used when solving trajectories.
    #[arg(long, default_value_t = 0.01)]
    pub max_step: f64,
    #[arg(short, long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(clap::Args, Serialize)]
pub struct ForecastArgs {
    pub fit: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub horizon: usize,
    #[arg(short, long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(clap::Args, Serialize)]
pub struct McArgs {
    /// Sweep file, or one of the bundled sweeps.
    pub config: String,
    /// Override every scenario's replication count.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Worker threads (default: $GREYFIT_WORKERS, else all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(short, long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(clap::Args, Serialize)]
pub struct ReproduceArgs {
    /// 3 | 4 | forecasts
    #[arg(long)]
    pub table: String,
    /// Exponent-search score: full | holdout | rmse.
    #[arg(long, default_value = "full")]
    pub score: String,
    #[arg(short, long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Forecast(a) => commands::forecast(a),
        Command::Mc(a) => commands::mc(a),
        Command::Reproduce(a) => commands::reproduce(a),
        Command::Data { name } => commands::data(name),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("greyfit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
