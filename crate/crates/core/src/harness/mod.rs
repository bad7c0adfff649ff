//! Parameter sweeps over the simulator and estimators, aggregate metrics,
//! and the figure reproductions built on them.

mod config;
mod figures;
mod output;

pub use config::{parse_sweep_spec, Axis, Metric, SweepSpec};
pub use figures::{reproduce_figure, Figure, FigureReport, Scale};
pub use output::{write_sweep_csv, SWEEP_COLUMNS};

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{
    approximation_diagnostics, detection_probability, gaussian_approximation, ApproxDiagnostics,
    ReceiverIntegral,
};
use crate::error::Result;
use crate::estimators::{estimate_peak_time, estimate_valor, signal_moments, KnownChannel};
use crate::physics::{
    check_condition1, effective_diffusion, peclet, predicted_variance, ChannelParams,
    ConditionCheck, DEFAULT_MARGIN,
};
use crate::sim::{run_replication_multi, SignalRecord};
use crate::stats;

/// Half-width, in predicted standard deviations, of the window around the
/// peak on which the ensemble-mean signal is compared with the models.
pub const MODEL_MATCH_SIGMAS: f64 = 3.0;

/// Mean and spread of one metric over the replications of a grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub count: u32,
    pub failures: u32,
    pub first_error: Option<String>,
}

impl MetricSummary {
    fn from_values<'a>(values: impl IntoIterator<Item = &'a std::result::Result<f64, String>>) -> Self {
        let mut ok = Vec::new();
        let mut failures = 0;
        let mut first_error = None;
        for v in values {
            match v {
                Ok(x) => ok.push(*x),
                Err(e) => {
                    failures += 1;
                    first_error.get_or_insert_with(|| e.clone());
                }
            }
        }
        let (mean, std) = if ok.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (stats::mean(&ok), stats::std_dev(&ok))
        };
        MetricSummary {
            mean,
            std,
            count: ok.len() as u32,
            failures,
            first_error,
        }
    }
}

/// Distance estimates of one method at a grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceSummary {
    pub l_hat: MetricSummary,
    /// `100·|l̂ − l| / l`.
    pub abs_err_pct: MetricSummary,
    /// Replications whose smoothed peak sat on the record boundary.
    pub boundary_peaks: u32,
}

/// Ensemble-mean signal against the Gaussian approximation and the
/// small-width channel model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMatch {
    /// Time since emission, s.
    pub times: Vec<f64>,
    /// Mean fraction of released molecules in the receiver.
    pub simulated: Vec<f64>,
    pub gaussian: Vec<f64>,
    pub small_width: Vec<f64>,
    /// RMS difference to the Gaussian model within ±3σ of the peak,
    /// divided by its amplitude.
    pub nrmse_gaussian: f64,
    /// Same, against the small-width model.
    pub nrmse_small_width: f64,
    /// Gaussian comparison over the whole record.
    pub nrmse_gaussian_full: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointDiagnostics {
    pub peclet: f64,
    pub effective_diffusion: f64,
    pub condition1: ConditionCheck,
    pub approximation: ApproxDiagnostics,
}

impl PointDiagnostics {
    pub fn of(params: &ChannelParams) -> Self {
        PointDiagnostics {
            peclet: peclet(params),
            effective_diffusion: effective_diffusion(params),
            condition1: check_condition1(params, DEFAULT_MARGIN),
            approximation: approximation_diagnostics(params, DEFAULT_MARGIN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub params: ChannelParams,
    pub diagnostics: PointDiagnostics,
    /// `2·D_e·l / v_avg³`, s².
    pub theory_variance: f64,
    /// Set when the point could not be simulated at all.
    pub error: Option<String>,
    pub variance: Option<MetricSummary>,
    pub valor: Option<DistanceSummary>,
    pub peak_time: Option<DistanceSummary>,
    pub model_match: Option<ModelMatch>,
}

/// Variance against distance for one combination of the other axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesFit {
    pub diffusion: f64,
    pub vessel_radius: f64,
    pub receiver_width: f64,
    pub mean_velocity: f64,
    pub distances: Vec<f64>,
    /// R² of the simulated mean variances against the theory line.
    pub r_squared: Option<f64>,
    pub r_squared_error: Option<String>,
    /// Least-squares slope of σ̂² against l through the origin, s²/µm.
    pub fitted_slope: f64,
    /// `2·D_e / v_avg³`.
    pub theory_slope: f64,
}

/// How the fitted variance slope scales with velocity across series that
/// share the other axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityScaling {
    pub diffusion: f64,
    pub vessel_radius: f64,
    pub receiver_width: f64,
    pub velocities: Vec<f64>,
    /// Log-log slope of the fitted slope itself. `D_e` grows with `v_avg`,
    /// so this is not −3.
    pub exponent: f64,
    /// Log-log slope of `fitted_slope / (2·D_e)`; −3 in theory.
    pub exponent_at_fixed_de: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<PointResult>,
    pub series: Vec<SeriesFit>,
    pub velocity_scaling: Vec<VelocityScaling>,
}

type Outcome<T> = std::result::Result<T, String>;

/// Metrics of one channel in one replication.
#[derive(Debug, Clone, Default)]
struct RepValues {
    variance: Option<Outcome<f64>>,
    valor: Option<Outcome<f64>>,
    peak: Option<Outcome<(f64, bool)>>,
}

fn rep_values(spec: &SweepSpec, record: &SignalRecord) -> RepValues {
    let params = &record.meta.params;
    let known = KnownChannel::from(params);
    let mut out = RepValues::default();
    if spec.has(Metric::Variance) {
        out.variance = Some(
            signal_moments(record)
                .map(|m| m.variance)
                .map_err(|e| e.to_string()),
        );
    }
    if spec.has(Metric::LHatValor) {
        out.valor = Some(
            estimate_valor(record, &known)
                .map(|r| r.l_hat)
                .map_err(|e| e.to_string()),
        );
    }
    if spec.has(Metric::LHatPeak) {
        let emission = spec.emission_time.unwrap_or(spec.sim.tau_offset);
        out.peak = Some(
            estimate_peak_time(record, emission, params.mean_velocity, spec.smoothing_window)
                .map(|r| (r.l_hat, r.peak_at_boundary))
                .map_err(|e| e.to_string()),
        );
    }
    out
}

/// Per-replication values and summed counts of a group of channels that
/// share one simulation.
struct GroupAcc {
    reps: Vec<(u32, Vec<RepValues>)>,
    counts: Vec<Vec<u64>>,
    error: Option<(u32, String)>,
}

impl GroupAcc {
    fn new(sizes: &[usize], keep_counts: bool) -> Self {
        GroupAcc {
            reps: Vec::new(),
            counts: if keep_counts {
                sizes.iter().map(|&n| vec![0; n]).collect()
            } else {
                Vec::new()
            },
            error: None,
        }
    }

    fn merge(mut self, other: GroupAcc) -> GroupAcc {
        self.reps.extend(other.reps);
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        // keep the failure of the lowest replication so the report does not
        // depend on scheduling
        self.error = match (self.error, other.error) {
            (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
            (a, b) => a.or(b),
        };
        self
    }
}

fn distance_summary(values: &[&Outcome<(f64, bool)>], true_distance: f64) -> DistanceSummary {
    let l_hat: Vec<Outcome<f64>> = values
        .iter()
        .map(|v| v.as_ref().map(|x| x.0).map_err(Clone::clone))
        .collect();
    let err: Vec<Outcome<f64>> = l_hat
        .iter()
        .map(|v| v.as_ref().map(|l| 100.0 * (l - true_distance).abs() / true_distance).map_err(Clone::clone))
        .collect();
    DistanceSummary {
        l_hat: MetricSummary::from_values(&l_hat),
        abs_err_pct: MetricSummary::from_values(&err),
        boundary_peaks: values.iter().filter(|v| matches!(v, Ok((_, true)))).count() as u32,
    }
}

fn model_match(spec: &SweepSpec, params: &ChannelParams, summed: &[u64]) -> ModelMatch {
    let spacing = spec.sim.sample_spacing();
    let norm = spec.n_reps as f64 * spec.sim.molecules as f64;
    let pulse = gaussian_approximation(params);
    let times: Vec<f64> = (1..=summed.len()).map(|k| k as f64 * spacing).collect();
    let simulated: Vec<f64> = summed.iter().map(|&c| c as f64 / norm).collect();
    let gaussian: Vec<f64> = times.iter().map(|&t| pulse.eval(t)).collect();
    let small_width: Vec<f64> = times
        .iter()
        .map(|&t| detection_probability(t, params, ReceiverIntegral::SmallWidth))
        .collect();

    let half = MODEL_MATCH_SIGMAS * pulse.std_dev();
    let window: Vec<usize> = (0..times.len())
        .filter(|&k| (times[k] - pulse.mean).abs() <= half)
        .collect();
    let pick = |v: &[f64]| window.iter().map(|&k| v[k]).collect::<Vec<f64>>();
    let sim_w = pick(&simulated);
    ModelMatch {
        nrmse_gaussian: stats::normalized_rmse(&sim_w, &pick(&gaussian), pulse.amplitude),
        nrmse_small_width: stats::normalized_rmse(&sim_w, &pick(&small_width), pulse.amplitude),
        nrmse_gaussian_full: stats::normalized_rmse(&simulated, &gaussian, pulse.amplitude),
        times,
        simulated,
        gaussian,
        small_width,
    }
}

/// Simulates every replication of one group and reduces it to per-point
/// results.
fn run_group(spec: &SweepSpec, channels: &[ChannelParams]) -> Vec<PointResult> {
    let blank = |p: &ChannelParams, error: Option<String>| PointResult {
        params: *p,
        diagnostics: PointDiagnostics::of(p),
        theory_variance: predicted_variance(effective_diffusion(p), p.distance, p.mean_velocity),
        error,
        variance: None,
        valor: None,
        peak_time: None,
        model_match: None,
    };
    let sizes: Result<Vec<usize>> = channels.iter().map(|c| spec.sim.sample_count(c)).collect();
    let sizes = match sizes {
        Ok(s) => s,
        Err(e) => return channels.iter().map(|c| blank(c, Some(e.to_string()))).collect(),
    };
    let keep_counts = spec.has(Metric::ModelMatch);

    let mut acc = (0..spec.n_reps)
        .into_par_iter()
        .fold(
            || GroupAcc::new(&sizes, keep_counts),
            |mut acc, rep| {
                match run_replication_multi(channels, &spec.sim, rep) {
                    Ok(records) => {
                        acc.reps
                            .push((rep, records.iter().map(|r| rep_values(spec, r)).collect()));
                        for (sum, r) in acc.counts.iter_mut().zip(&records) {
                            for (s, &c) in sum.iter_mut().zip(&r.counts) {
                                *s += c as u64;
                            }
                        }
                    }
                    Err(e) => {
                        acc = acc.merge(GroupAcc {
                            reps: Vec::new(),
                            counts: Vec::new(),
                            error: Some((rep, e.to_string())),
                        })
                    }
                }
                acc
            },
        )
        .reduce(|| GroupAcc::new(&sizes, keep_counts), GroupAcc::merge);

    if let Some((rep, e)) = acc.error {
        let msg = format!("replication {rep}: {e}");
        log::warn!("{msg}");
        return channels.iter().map(|c| blank(c, Some(msg.clone()))).collect();
    }
    acc.reps.sort_by_key(|r| r.0);

    channels
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let mut point = blank(p, None);
            let column = || acc.reps.iter().map(move |(_, v)| &v[j]);
            if spec.has(Metric::Variance) {
                point.variance = Some(MetricSummary::from_values(
                    column().filter_map(|v| v.variance.as_ref()),
                ));
            }
            if spec.has(Metric::LHatValor) {
                let vals: Vec<Outcome<(f64, bool)>> = column()
                    .filter_map(|v| v.valor.as_ref())
                    .map(|v| v.as_ref().map(|&l| (l, false)).map_err(Clone::clone))
                    .collect();
                point.valor = Some(distance_summary(&vals.iter().collect::<Vec<_>>(), p.distance));
            }
            if spec.has(Metric::LHatPeak) {
                let vals: Vec<&Outcome<(f64, bool)>> =
                    column().filter_map(|v| v.peak.as_ref()).collect();
                point.peak_time = Some(distance_summary(&vals, p.distance));
            }
            if keep_counts {
                point.model_match = Some(model_match(spec, p, &acc.counts[j]));
            }
            point
        })
        .collect()
}

fn series_fits(points: &[PointResult]) -> Vec<SeriesFit> {
    let key = |p: &ChannelParams| {
        [p.diffusion, p.vessel_radius, p.receiver_width, p.mean_velocity].map(f64::to_bits)
    };
    let mut keys: Vec<[u64; 4]> = Vec::new();
    for pt in points {
        let k = key(&pt.params);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .filter_map(|k| {
            let members: Vec<&PointResult> = points
                .iter()
                .filter(|pt| key(&pt.params) == k)
                .filter(|pt| pt.variance.as_ref().is_some_and(|v| v.count > 0))
                .collect();
            let mut distances: Vec<f64> = members.iter().map(|pt| pt.params.distance).collect();
            distances.dedup();
            if distances.len() < 3 || distances.len() != members.len() {
                return None;
            }
            let observed: Vec<f64> = members
                .iter()
                .map(|pt| pt.variance.as_ref().map_or(f64::NAN, |v| v.mean))
                .collect();
            let predicted: Vec<f64> = members.iter().map(|pt| pt.theory_variance).collect();
            let first = members[0].params;
            let (r_squared, r_squared_error) = match stats::r_squared(&observed, &predicted) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Some(SeriesFit {
                diffusion: first.diffusion,
                vessel_radius: first.vessel_radius,
                receiver_width: first.receiver_width,
                mean_velocity: first.mean_velocity,
                r_squared,
                r_squared_error,
                fitted_slope: stats::slope_through_origin(&distances, &observed),
                theory_slope: predicted_variance(effective_diffusion(&first), 1.0, first.mean_velocity),
                distances,
            })
        })
        .collect()
}

fn velocity_scaling(series: &[SeriesFit]) -> Vec<VelocityScaling> {
    let key = |s: &SeriesFit| [s.diffusion, s.vessel_radius, s.receiver_width].map(f64::to_bits);
    let mut keys: Vec<[u64; 3]> = Vec::new();
    for s in series {
        if !keys.contains(&key(s)) {
            keys.push(key(s));
        }
    }
    keys.into_iter()
        .filter_map(|k| {
            let group: Vec<&SeriesFit> = series.iter().filter(|s| key(s) == k).collect();
            if group.len() < 2 {
                return None;
            }
            let v: Vec<f64> = group.iter().map(|s| s.mean_velocity).collect();
            let slope: Vec<f64> = group.iter().map(|s| s.fitted_slope).collect();
            let at_fixed_de: Vec<f64> = group
                .iter()
                .map(|s| {
                    let p = ChannelParams {
                        diffusion: s.diffusion,
                        vessel_radius: s.vessel_radius,
                        mean_velocity: s.mean_velocity,
                        distance: 1.0,
                        receiver_width: s.receiver_width,
                    };
                    s.fitted_slope / (2.0 * effective_diffusion(&p))
                })
                .collect();
            Some(VelocityScaling {
                diffusion: group[0].diffusion,
                vessel_radius: group[0].vessel_radius,
                receiver_width: group[0].receiver_width,
                exponent: stats::log_log_slope(&v, &slope),
                exponent_at_fixed_de: stats::log_log_slope(&v, &at_fixed_de),
                velocities: v,
            })
        })
        .collect()
}

/// Runs every grid point of `spec`. Points that share the diffusion
/// coefficient and vessel radius are simulated together with one set of
/// molecules per replication. A point that cannot be simulated carries its
/// error and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let grid = spec.grid();
    let mut group_keys: Vec<[u64; 2]> = Vec::new();
    for p in &grid {
        let k = [p.diffusion.to_bits(), p.vessel_radius.to_bits()];
        if !group_keys.contains(&k) {
            group_keys.push(k);
        }
    }
    let mut results: Vec<Option<PointResult>> = vec![None; grid.len()];
    for (g, k) in group_keys.iter().enumerate() {
        let idx: Vec<usize> = (0..grid.len())
            .filter(|&i| [grid[i].diffusion.to_bits(), grid[i].vessel_radius.to_bits()] == *k)
            .collect();
        let channels: Vec<ChannelParams> = idx.iter().map(|&i| grid[i]).collect();
        log::info!(
            "group {}/{}: {} points, {} replications",
            g + 1,
            group_keys.len(),
            channels.len(),
            spec.n_reps
        );
        for (i, r) in idx.into_iter().zip(run_group(spec, &channels)) {
            results[i] = Some(r);
        }
    }
    let points: Vec<PointResult> = results.into_iter().map(|r| r.expect("every point run")).collect();
    let series = series_fits(&points);
    let velocity_scaling = velocity_scaling(&series);
    Ok(SweepResult {
        points,
        series,
        velocity_scaling,
    })
}
