use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use greyfit::TimeSeries;
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// A parsed input CSV with its header names and raw-byte digest.
pub struct Input {
    pub series: TimeSeries,
    pub columns: Vec<String>,
    pub digest: String,
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Reads `t,x1[,x2,...]`; every cell must be a finite number.
pub fn parse_series(bytes: &[u8]) -> CliResult<Input> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Parse(e.to_string()))?
        .clone();
    if headers.len() < 2 {
        return Err(CliError::Parse("header must be `t,x1[,x2,...]`".into()));
    }
    let d = headers.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| CliError::Parse(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(CliError::Parse(format!("line {line}: expected {} fields", headers.len())));
        }
        for (j, cell) in rec.iter().enumerate() {
            if cell.is_empty() {
                return Err(CliError::Parse(format!("line {line}: missing value in `{}`", &headers[j])));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| CliError::Parse(format!("line {line}: `{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(CliError::Parse(format!("line {line}: non-finite value")));
            }
            if j == 0 {
                times.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let n = times.len();
    let matrix = DMatrix::from_row_slice(n, d, &values);
    let series = TimeSeries::new(times, matrix).map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(Input {
        series,
        columns: headers.iter().skip(1).map(str::to_string).collect(),
        digest: digest(bytes),
    })
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

pub fn write_output(dir: &Path, name: &str, contents: &str, outputs: &mut Vec<PathBuf>) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    outputs.push(path);
    Ok(())
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    v.to_string()
}

#[derive(Serialize)]
pub struct Manifest<C: Serialize> {
    pub command: &'static str,
    pub config: C,
    pub input_digest: String,
    pub outputs: Vec<String>,
    pub version: &'static str,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
}

pub struct Clock {
    start: Instant,
    unix: u64,
}

impl Clock {
    pub fn start() -> Self {
        Self {
            start: Instant::now(),
            unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Writes `manifest.json` describing a finished command.
pub fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &'static str,
    config: C,
    input_digest: String,
    mut outputs: Vec<PathBuf>,
    clock: &Clock,
) -> CliResult<()> {
    let manifest_path = dir.join("manifest.json");
    outputs.push(manifest_path.clone());
    let m = Manifest {
        command,
        config,
        input_digest,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        version: env!("CARGO_PKG_VERSION"),
        started_unix_seconds: clock.unix,
        wall_clock_seconds: clock.start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Io(e.to_string()))?;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    fs::write(&manifest_path, text + "\n").map_err(|e| CliError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_multicolumn() {
        let inp = parse_series(b"t,x1,x2\n0,1,2\n1,3,4\n2,5,6\n").unwrap();
        assert_eq!(inp.columns, vec!["x1", "x2"]);
        assert_eq!(inp.series.dim(), 2);
        assert_eq!(inp.series.row(2), vec![5.0, 6.0]);
        assert!(inp.digest.starts_with("sha256:"));
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            &b"t\n1\n2\n3\n"[..],
            b"t,x\n1,\n2,3\n3,4\n",
            b"t,x\n1,a\n2,3\n3,4\n",
            b"t,x\n1,1\n1,3\n3,4\n",
            b"t,x\n1,1\n2,2\n",
        ] {
            assert!(matches!(parse_series(bad), Err(CliError::Parse(_))));
        }
    }
}
