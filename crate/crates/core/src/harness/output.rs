//! CSV rendering of sweep results.

use std::fmt::Write as _;

use super::{DistanceSummary, MetricSummary, PointResult, SweepResult};

pub const UNITS_HEADER: &str = "# units: um, s";

pub const SWEEP_COLUMNS: &str = "D,r_v,w,v_avg,l,cond1_ratio,cond1_pass,cond2_ratio,alpha3,alpha4,\
approx_pass,sigma2_theory,sigma2_sim_mean,sigma2_sim_std,l_hat_valor_mean,l_hat_valor_std,\
err_pct_valor,err_pct_valor_std,l_hat_peak_mean,l_hat_peak_std,err_pct_peak,err_pct_peak_std,\
peak_boundary_reps,nrmse_eq16,nrmse_eq9,nrmse_eq16_full,failed_reps,error";

pub(crate) fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV-safe free text.
pub(crate) fn text(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "'"))
}

/// `cond1_ratio,cond1_pass,cond2_ratio,alpha3,alpha4,approx_pass`
pub(crate) fn diagnostic_fields(p: &PointResult) -> String {
    let d = &p.diagnostics;
    format!(
        "{},{},{},{},{},{}",
        d.condition1.ratio,
        d.condition1.pass,
        d.approximation.condition2_ratio,
        d.approximation.alpha3,
        d.approximation.alpha4,
        d.approximation.pass
    )
}

fn mean_std(m: Option<&MetricSummary>) -> [String; 2] {
    match m {
        Some(m) if m.count > 0 => [m.mean.to_string(), m.std.to_string()],
        _ => [String::new(), String::new()],
    }
}

fn distance_fields(d: Option<&DistanceSummary>) -> String {
    let [lm, ls] = mean_std(d.map(|d| &d.l_hat));
    let [em, es] = mean_std(d.map(|d| &d.abs_err_pct));
    format!("{lm},{ls},{em},{es}")
}

fn failures(p: &PointResult) -> (u32, Option<String>) {
    let mut n = 0;
    let mut first = None;
    let metrics = [
        p.variance.as_ref(),
        p.valor.as_ref().map(|d| &d.l_hat),
        p.peak_time.as_ref().map(|d| &d.l_hat),
    ];
    for m in metrics.into_iter().flatten() {
        n = n.max(m.failures);
        if first.is_none() {
            first = m.first_error.clone();
        }
    }
    (n, p.error.clone().or(first))
}

/// One row per grid point, columns as in [`SWEEP_COLUMNS`].
pub fn write_sweep_csv(result: &SweepResult) -> String {
    let mut out = format!("{UNITS_HEADER}\n{SWEEP_COLUMNS}\n");
    for p in &result.points {
        let q = &p.params;
        let [vm, vs] = mean_std(p.variance.as_ref());
        let mm = p.model_match.as_ref();
        let boundary = p.peak_time.as_ref().map(|d| d.boundary_peaks);
        let (failed, error) = failures(p);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{vm},{vs},{},{},{},{},{},{},{failed},{}",
            q.diffusion,
            q.vessel_radius,
            q.receiver_width,
            q.mean_velocity,
            q.distance,
            diagnostic_fields(p),
            p.theory_variance,
            distance_fields(p.valor.as_ref()),
            distance_fields(p.peak_time.as_ref()),
            opt(boundary),
            opt(mm.map(|m| m.nrmse_gaussian)),
            opt(mm.map(|m| m.nrmse_small_width)),
            opt(mm.map(|m| m.nrmse_gaussian_full)),
            error.map(|e| text(&e)).unwrap_or_default(),
        )
        .unwrap();
    }
    out
}

/// Per-series fit summary.
pub(crate) fn write_series_csv(result: &SweepResult) -> String {
    let mut out = format!(
        "{UNITS_HEADER}\nD,r_v,w,v_avg,n_distances,R2,fitted_slope,theory_slope,slope_ratio\n"
    );
    for s in &result.series {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.diffusion,
            s.vessel_radius,
            s.receiver_width,
            s.mean_velocity,
            s.distances.len(),
            opt(s.r_squared),
            s.fitted_slope,
            s.theory_slope,
            s.fitted_slope / s.theory_slope
        )
        .unwrap();
    }
    out
}
