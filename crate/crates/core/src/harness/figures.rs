//! Desk- and full-scale reruns of the verification figures. Each figure is a
//! sweep whose grid lives in `configs/<figure>.json`. The velocity, radius and
//! width grids there are reconstructions.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde_json::json;

use super::output::{diagnostic_fields, opt, write_series_csv, write_sweep_csv, UNITS_HEADER};
use super::{parse_sweep_spec, run_sweep, Axis, PointResult, SweepResult, SweepSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4a,
    Fig4b,
    Fig5,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig2, Figure::Fig3, Figure::Fig4a, Figure::Fig4b, Figure::Fig5];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4a => "fig4a",
            Figure::Fig4b => "fig4b",
            Figure::Fig5 => "fig5",
        }
    }

    fn config(self) -> &'static str {
        match self {
            Figure::Fig2 => include_str!("../../configs/fig2.json"),
            Figure::Fig3 => include_str!("../../configs/fig3.json"),
            Figure::Fig4a => include_str!("../../configs/fig4a.json"),
            Figure::Fig4b => include_str!("../../configs/fig4b.json"),
            Figure::Fig5 => include_str!("../../configs/fig5.json"),
        }
    }

    /// The figure's sweep at the given scale and seed.
    pub fn spec(self, scale: Scale, seed: Option<u64>) -> Result<SweepSpec> {
        let mut spec = parse_sweep_spec(self.config())?;
        if scale == Scale::Full {
            spec.sim.molecules = 1_000_000;
            spec.n_reps = 1000;
        }
        if let Some(seed) = seed {
            spec.sim.seed = seed;
        }
        Ok(spec)
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown figure `{s}`")))
    }
}

/// Desk scale uses 10⁵ molecules and 20–100 replications as set in each
/// figure's config; full scale uses 10⁶ molecules and 1000 replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    Full,
    #[default]
    Desk,
}

impl Scale {
    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Full => "full",
            Scale::Desk => "desk",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FigureReport {
    pub figure: Figure,
    pub files: Vec<PathBuf>,
    pub result: SweepResult,
    /// Human-readable headline numbers.
    pub summary: Vec<String>,
}

fn series_r2(result: &SweepResult, p: &PointResult) -> Option<f64> {
    let q = &p.params;
    result
        .series
        .iter()
        .find(|s| {
            s.diffusion == q.diffusion
                && s.vessel_radius == q.vessel_radius
                && s.receiver_width == q.receiver_width
                && s.mean_velocity == q.mean_velocity
        })
        .and_then(|s| s.r_squared)
}

const DIAGNOSTIC_COLUMNS: &str = "cond1_ratio,cond1_pass,cond2_ratio,alpha3,alpha4,approx_pass";

/// Variance against distance with one other swept axis (Figs. 3 and 4).
fn variance_table(result: &SweepResult, axis: Axis) -> String {
    let mut out = format!(
        "{UNITS_HEADER}\n{},l,sigma2_sim_mean,sigma2_sim_std,sigma2_theory,R2,{DIAGNOSTIC_COLUMNS}\n",
        axis.key()
    );
    for p in &result.points {
        let (mean, std) = match &p.variance {
            Some(v) if v.count > 0 => (v.mean.to_string(), v.std.to_string()),
            _ => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{mean},{std},{},{},{}",
            axis.get(&p.params),
            p.params.distance,
            p.theory_variance,
            opt(series_r2(result, p)),
            diagnostic_fields(p)
        )
        .unwrap();
    }
    out
}

fn error_table(result: &SweepResult) -> String {
    let mut out = format!(
        "{UNITS_HEADER}, percent\nv_avg,l,err_pct_valor,err_pct_peak,err_pct_valor_std,err_pct_peak_std,\
l_hat_valor_mean,l_hat_peak_mean,peak_boundary_reps,{DIAGNOSTIC_COLUMNS}\n"
    );
    for p in &result.points {
        let stat = |d: Option<&super::DistanceSummary>, f: fn(&super::DistanceSummary) -> f64| {
            opt(d.filter(|d| d.l_hat.count > 0).map(f))
        };
        let (va, pk) = (p.valor.as_ref(), p.peak_time.as_ref());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            p.params.mean_velocity,
            p.params.distance,
            stat(va, |d| d.abs_err_pct.mean),
            stat(pk, |d| d.abs_err_pct.mean),
            stat(va, |d| d.abs_err_pct.std),
            stat(pk, |d| d.abs_err_pct.std),
            stat(va, |d| d.l_hat.mean),
            stat(pk, |d| d.l_hat.mean),
            opt(pk.map(|d| d.boundary_peaks)),
            diagnostic_fields(p)
        )
        .unwrap();
    }
    out
}

fn panel_name(p: &PointResult) -> String {
    format!("fig2_v{}_l{}.csv", p.params.mean_velocity, p.params.distance)
}

fn panel_table(p: &PointResult) -> Option<String> {
    let m = p.model_match.as_ref()?;
    let mut out = format!("{UNITS_HEADER}, percent\nt,sim_pct,eq16_pct,eq9_pct\n");
    for k in 0..m.times.len() {
        writeln!(
            out,
            "{},{},{},{}",
            m.times[k],
            100.0 * m.simulated[k],
            100.0 * m.gaussian[k],
            100.0 * m.small_width[k]
        )
        .unwrap();
    }
    Some(out)
}

fn panel_summary(result: &SweepResult) -> String {
    let mut out = format!(
        "{UNITS_HEADER}, percent\nv_avg,l,nrmse_eq16,nrmse_eq9,nrmse_eq16_full,peak_sim_pct,peak_eq16_pct,\
{DIAGNOSTIC_COLUMNS}\n"
    );
    for p in &result.points {
        let Some(m) = &p.model_match else { continue };
        let peak = |v: &[f64]| 100.0 * v.iter().copied().fold(0.0, f64::max);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.params.mean_velocity,
            p.params.distance,
            m.nrmse_gaussian,
            m.nrmse_small_width,
            m.nrmse_gaussian_full,
            peak(&m.simulated),
            peak(&m.gaussian),
            diagnostic_fields(p)
        )
        .unwrap();
    }
    out
}

fn scaling_table(result: &SweepResult) -> String {
    let mut out = format!("{UNITS_HEADER}\nD,r_v,w,n_velocities,exponent,exponent_at_fixed_De\n");
    for s in &result.velocity_scaling {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.diffusion,
            s.vessel_radius,
            s.receiver_width,
            s.velocities.len(),
            s.exponent,
            s.exponent_at_fixed_de
        )
        .unwrap();
    }
    out
}

fn headline(figure: Figure, result: &SweepResult) -> Vec<String> {
    let mut lines = Vec::new();
    for p in &result.points {
        if let Some(e) = &p.error {
            lines.push(format!(
                "point v_avg={} l={} r_v={} w={} failed: {e}",
                p.params.mean_velocity, p.params.distance, p.params.vessel_radius, p.params.receiver_width
            ));
        }
    }
    match figure {
        Figure::Fig2 => {
            for p in &result.points {
                if let Some(m) = &p.model_match {
                    lines.push(format!(
                        "v_avg={} l={}: nRMSE vs Gaussian {:.4} (±3σ), vs small-width model {:.4}",
                        p.params.mean_velocity, p.params.distance, m.nrmse_gaussian, m.nrmse_small_width
                    ));
                }
            }
        }
        Figure::Fig3 | Figure::Fig4a | Figure::Fig4b => {
            for s in &result.series {
                lines.push(format!(
                    "v_avg={} r_v={} w={}: R² = {}, fitted/theory slope = {:.4}",
                    s.mean_velocity,
                    s.vessel_radius,
                    s.receiver_width,
                    opt(s.r_squared),
                    s.fitted_slope / s.theory_slope
                ));
            }
            for v in &result.velocity_scaling {
                lines.push(format!(
                    "velocity exponent of slope/(2·D_e): {:.3} (theory −3)",
                    v.exponent_at_fixed_de
                ));
            }
        }
        Figure::Fig5 => {
            for p in &result.points {
                let e = |d: &Option<super::DistanceSummary>| {
                    d.as_ref().map_or(f64::NAN, |d| d.abs_err_pct.mean)
                };
                lines.push(format!(
                    "v_avg={} l={}: |err| VALOR {:.3} %, peak-time {:.3} %",
                    p.params.mean_velocity,
                    p.params.distance,
                    e(&p.valor),
                    e(&p.peak_time)
                ));
            }
        }
    }
    lines
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

/// Runs the figure's sweep and writes its CSVs and a `<figure>_manifest.json`
/// run record into `out_dir`. CSV contents depend only on the figure, scale
/// and seed.
pub fn reproduce_figure(figure: Figure, scale: Scale, seed: Option<u64>, out_dir: &Path) -> Result<FigureReport> {
    let spec = figure.spec(scale, seed)?;
    fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let result = run_sweep(&spec)?;
    let wall = started.elapsed().as_secs_f64();

    let name = figure.as_str();
    let mut files = Vec::new();
    match figure {
        Figure::Fig2 => {
            for p in &result.points {
                if let Some(table) = panel_table(p) {
                    write(out_dir, &panel_name(p), &table, &mut files)?;
                }
            }
            write(out_dir, "fig2_summary.csv", &panel_summary(&result), &mut files)?;
        }
        Figure::Fig3 => {
            write(out_dir, "fig3.csv", &variance_table(&result, Axis::VAvg), &mut files)?;
            write(out_dir, "fig3_scaling.csv", &scaling_table(&result), &mut files)?;
        }
        Figure::Fig4a => write(out_dir, "fig4a.csv", &variance_table(&result, Axis::RV), &mut files)?,
        Figure::Fig4b => write(out_dir, "fig4b.csv", &variance_table(&result, Axis::W), &mut files)?,
        Figure::Fig5 => write(out_dir, "fig5.csv", &error_table(&result), &mut files)?,
    }
    if !matches!(figure, Figure::Fig2 | Figure::Fig5) {
        write(out_dir, &format!("{name}_series.csv"), &write_series_csv(&result), &mut files)?;
    }
    write(out_dir, &format!("{name}_points.csv"), &write_sweep_csv(&result), &mut files)?;

    let grid: serde_json::Map<String, serde_json::Value> = spec
        .axes
        .iter()
        .map(|(axis, values)| (axis.key().to_string(), json!(values)))
        .collect();
    let manifest = json!({
        "figure": name,
        "scale": scale.as_str(),
        "seed": spec.sim.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "units": "um, s",
        "base": spec.base,
        "sim": spec.sim,
        "grid": grid,
        "n_reps": spec.n_reps,
        "metrics": spec.metrics,
        "wall_time_s": wall,
        "threads": rayon::current_num_threads(),
        "files": files.iter().map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned())).collect::<Vec<_>>(),
    });
    let manifest_path = out_dir.join(format!("{name}_manifest.json"));
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;

    let summary = headline(figure, &result);
    files.push(manifest_path);
    Ok(FigureReport {
        figure,
        files,
        result,
        summary,
    })
}
