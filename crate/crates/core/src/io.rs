//! On-disk formats: signal records as CSV with a JSON metadata sidecar, and
//! estimate rows.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimators::EstimateResult;
use crate::sim::{RecordMeta, SignalRecord};

pub const SIGNAL_COLUMNS: &str = "t,count";
pub const ESTIMATE_COLUMNS: &str =
    "method,l_true,l_hat,err_pct,sigma2_hat,t_peak_hat,cond1_ratio,alpha3,alpha4,seed,rep";

/// Writes `# units`/`# seed` header lines followed by `t,count` rows.
pub fn write_signal_csv<W: Write>(mut out: W, record: &SignalRecord) -> Result<()> {
    writeln!(out, "# units: um, s")?;
    writeln!(
        out,
        "# seed={} rep={}",
        record.meta.config.seed, record.meta.replication
    )?;
    writeln!(out, "{SIGNAL_COLUMNS}")?;
    for (t, c) in record.timestamps.iter().zip(&record.counts) {
        writeln!(out, "{t},{c}")?;
    }
    Ok(())
}

/// Contents of a signal CSV without its sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTable {
    pub seed: Option<u64>,
    pub replication: Option<u32>,
    pub timestamps: Vec<f64>,
    pub counts: Vec<u32>,
}

fn header_field<T: std::str::FromStr>(line: &str, key: &str) -> Option<T> {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(key)?.strip_prefix('=')?.parse().ok())
}

pub fn parse_signal_csv(text: &str) -> Result<SignalTable> {
    let mut seed = None;
    let mut replication = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        seed = seed.or_else(|| header_field(line, "seed"));
        replication = replication.or_else(|| header_field(line, "rep"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
    };
    let (ti, ci) = (col("t")?, col("count")?);
    let mut timestamps = Vec::new();
    let mut counts = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        timestamps.push(
            field(ti)
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad time `{}`", row + 1, field(ti))))?,
        );
        counts.push(
            field(ci)
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad count `{}`", row + 1, field(ci))))?,
        );
    }
    Ok(SignalTable {
        seed,
        replication,
        timestamps,
        counts,
    })
}

/// Sidecar path for a signal CSV: `name.csv` → `name.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Writes `csv_path` and its metadata sidecar.
pub fn save_signal(csv_path: &Path, record: &SignalRecord) -> Result<()> {
    let mut buf = Vec::new();
    write_signal_csv(&mut buf, record)?;
    fs::write(csv_path, buf)?;
    fs::write(
        sidecar_path(csv_path),
        serde_json::to_string_pretty(&record.meta)? + "\n",
    )?;
    Ok(())
}

/// Reads a signal CSV and its sidecar back into a [`SignalRecord`].
pub fn load_signal(csv_path: &Path) -> Result<SignalRecord> {
    let table = parse_signal_csv(&fs::read_to_string(csv_path)?)?;
    let meta: RecordMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(csv_path))?)?;
    if table.seed.is_some_and(|s| s != meta.config.seed)
        || table.replication.is_some_and(|r| r != meta.replication)
    {
        return Err(Error::Parse(format!(
            "{}: header disagrees with its metadata sidecar",
            csv_path.display()
        )));
    }
    Ok(SignalRecord {
        timestamps: table.timestamps,
        counts: table.counts,
        meta,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One estimate as a CSV row matching [`ESTIMATE_COLUMNS`].
pub fn estimate_row(result: &EstimateResult, l_true: Option<f64>, seed: u64, replication: u32) -> String {
    let err_pct = l_true.map(|l| 100.0 * result.relative_error(l));
    let approx = &result.diagnostics.approximation;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        result.method.as_str(),
        opt(l_true),
        result.l_hat,
        opt(err_pct),
        opt(result.sigma2_hat),
        opt(result.t_peak_hat),
        opt(result.diagnostics.condition1_ratio),
        approx.alpha3,
        approx.alpha4,
        seed,
        replication
    )
}
