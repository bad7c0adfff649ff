//! Distance estimation from an observed receiver signal.
//!
//! * VALOR: `l̂ = σ̂²·v_avg³ / (2·D_e)` from the temporal variance of the
//!   signal. Needs no emission time, so it is unaffected by clock offsets
//!   between transmitter and receiver.
//! * Peak time: `l̂ = v_avg·(t̂_peak − t_emit)` from the smoothed signal's
//!   maximum. Needs the emission time.

use serde::{Deserialize, Serialize};

use crate::analytic::ApproxDiagnostics;
use crate::error::{Error, Result};
use crate::physics::{condition1_ratio, DEFAULT_MARGIN};
use crate::sim::SignalRecord;

/// Default moving-average window of the peak-time estimator, in samples.
pub const DEFAULT_SMOOTHING_WINDOW: usize = 51;

/// A uniformly sampled, non-negative waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    /// Time of the first sample, s.
    pub start: f64,
    /// Sample spacing, s.
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl Waveform {
    pub fn new(start: f64, spacing: f64, values: Vec<f64>) -> Self {
        Waveform { start, spacing, values }
    }

    /// Samples `f` at `start + k·spacing` for `k = 0 .. n`.
    pub fn sample(start: f64, spacing: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|k| f(start + k as f64 * spacing)).collect();
        Waveform { start, spacing, values }
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start + index as f64 * self.spacing
    }

    /// The same waveform observed on a clock running `offset` seconds ahead.
    pub fn shifted(&self, offset: f64) -> Self {
        Waveform {
            start: self.start + offset,
            ..self.clone()
        }
    }
}

impl From<&SignalRecord> for Waveform {
    fn from(record: &SignalRecord) -> Self {
        Waveform {
            start: record.timestamps.first().copied().unwrap_or(record.meta.config.tau_offset),
            spacing: record.spacing(),
            values: record.counts.iter().map(|&c| c as f64).collect(),
        }
    }
}

/// Zeroth, first and second central moments of a waveform in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalMoments {
    /// `Σ values · spacing`.
    pub mass: f64,
    pub mean_time: f64,
    pub variance: f64,
}

/// Optional low-amplitude suppression before taking moments. Samples below
/// `fraction · max` are ignored. Biases the variance low; meant only for
/// records too short to contain the tails.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TailClip {
    pub fraction: f64,
}

pub fn signal_moments(signal: &SignalRecord) -> Result<SignalMoments> {
    waveform_moments(&Waveform::from(signal), None)
}

/// Moments of the waveform treated as a mass distribution over sample times.
/// Computed on the local time axis `k·spacing`, so the variance does not
/// depend on `start` at all.
pub fn waveform_moments(wave: &Waveform, clip: Option<TailClip>) -> Result<SignalMoments> {
    let floor = match clip {
        Some(c) => c.fraction * wave.values.iter().copied().fold(0.0, f64::max),
        None => 0.0,
    };
    let kept = |v: f64| if v >= floor { v } else { 0.0 };

    let mut total = 0.0;
    let mut first = 0.0;
    for (k, &v) in wave.values.iter().enumerate() {
        let v = kept(v);
        total += v;
        first += v * k as f64;
    }
    if !(total > 0.0) {
        return Err(Error::NoSignal);
    }
    let mean_index = first / total;
    let mut second = 0.0;
    for (k, &v) in wave.values.iter().enumerate() {
        let d = k as f64 - mean_index;
        second += kept(v) * d * d;
    }
    Ok(SignalMoments {
        mass: total * wave.spacing,
        mean_time: wave.start + mean_index * wave.spacing,
        variance: second / total * wave.spacing * wave.spacing,
    })
}

/// The channel knowledge the estimators are allowed to use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnownChannel {
    /// Mean flow velocity, µm/s.
    pub mean_velocity: f64,
    /// Effective diffusion coefficient, µm²/s.
    pub effective_diffusion: f64,
}

impl KnownChannel {
    fn validate(&self) -> Result<()> {
        if !(self.mean_velocity > 0.0 && self.effective_diffusion > 0.0) {
            return Err(Error::InvalidParams(format!(
                "known channel needs v_avg > 0 and D_e > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

impl From<&crate::physics::ChannelParams> for KnownChannel {
    fn from(p: &crate::physics::ChannelParams) -> Self {
        KnownChannel {
            mean_velocity: p.mean_velocity,
            effective_diffusion: crate::physics::effective_diffusion(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Valor,
    PeakTime,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Valor => "valor",
            Method::PeakTime => "peak_time",
        }
    }
}

/// Validity diagnostics evaluated at the estimated distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateDiagnostics {
    pub approximation: ApproxDiagnostics,
    /// `Pe / (4·l̂/r_v)`; only known when the vessel geometry is supplied.
    pub condition1_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub l_hat: f64,
    pub method: Method,
    pub sigma2_hat: Option<f64>,
    pub t_peak_hat: Option<f64>,
    /// Set when the smoothed maximum sits on the first or last sample.
    pub peak_at_boundary: bool,
    pub diagnostics: EstimateDiagnostics,
}

impl EstimateResult {
    /// Fills in the dispersion-regime ratio from the vessel geometry.
    pub fn with_geometry(mut self, peclet: f64, vessel_radius: f64) -> Self {
        self.diagnostics.condition1_ratio = Some(condition1_ratio(peclet, self.l_hat, vessel_radius));
        self
    }

    pub fn relative_error(&self, true_distance: f64) -> f64 {
        (self.l_hat - true_distance).abs() / true_distance
    }
}

fn diagnostics(known: &KnownChannel, l_hat: f64) -> EstimateDiagnostics {
    EstimateDiagnostics {
        approximation: ApproxDiagnostics::from_parts(
            known.effective_diffusion,
            l_hat,
            known.mean_velocity,
            DEFAULT_MARGIN,
        ),
        condition1_ratio: None,
    }
}

/// Inverts the variance–distance relation `σ² = 2·D_e·l / v_avg³`.
pub fn distance_from_variance(variance: f64, known: &KnownChannel) -> f64 {
    variance * known.mean_velocity.powi(3) / (2.0 * known.effective_diffusion)
}

pub fn estimate_valor(signal: &SignalRecord, known: &KnownChannel) -> Result<EstimateResult> {
    estimate_valor_waveform(&Waveform::from(signal), known, None)
}

pub fn estimate_valor_waveform(
    wave: &Waveform,
    known: &KnownChannel,
    clip: Option<TailClip>,
) -> Result<EstimateResult> {
    known.validate()?;
    let moments = waveform_moments(wave, clip)?;
    if !(moments.variance > 0.0) {
        return Err(Error::DegenerateSignal(format!(
            "temporal variance is {}",
            moments.variance
        )));
    }
    let l_hat = distance_from_variance(moments.variance, known);
    Ok(EstimateResult {
        l_hat,
        method: Method::Valor,
        sigma2_hat: Some(moments.variance),
        t_peak_hat: None,
        peak_at_boundary: false,
        diagnostics: diagnostics(known, l_hat),
    })
}

/// Centred moving average; the window shrinks at the edges.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Index of the first maximum.
fn argmax(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

pub fn estimate_peak_time(
    signal: &SignalRecord,
    emission_time: f64,
    mean_velocity: f64,
    smoothing_window: usize,
) -> Result<EstimateResult> {
    let known = KnownChannel {
        mean_velocity,
        effective_diffusion: crate::physics::effective_diffusion(&signal.meta.params),
    };
    estimate_peak_time_waveform(&Waveform::from(signal), emission_time, &known, smoothing_window)
}

/// Peak-time baseline. `known.effective_diffusion` only feeds the
/// diagnostics.
pub fn estimate_peak_time_waveform(
    wave: &Waveform,
    emission_time: f64,
    known: &KnownChannel,
    smoothing_window: usize,
) -> Result<EstimateResult> {
    if smoothing_window == 0 || smoothing_window.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!(
            "smoothing window must be odd and >= 1, got {smoothing_window}"
        )));
    }
    known.validate()?;
    if !wave.values.iter().any(|&v| v > 0.0) {
        return Err(Error::NoSignal);
    }
    let smoothed = moving_average(&wave.values, smoothing_window);
    let peak = argmax(&smoothed).ok_or(Error::NoSignal)?;
    let t_peak = wave.time(peak) - emission_time;
    let l_hat = known.mean_velocity * t_peak;
    if !(l_hat > 0.0) {
        return Err(Error::DegenerateSignal(format!(
            "peak at {} s precedes the emission time {emission_time} s",
            wave.time(peak)
        )));
    }
    let peak_at_boundary = peak == 0 || peak + 1 == wave.values.len();
    if peak_at_boundary {
        log::warn!("signal maximum lies on the record boundary; the record may be truncated");
    }
    Ok(EstimateResult {
        l_hat,
        method: Method::PeakTime,
        sigma2_hat: None,
        t_peak_hat: Some(t_peak),
        peak_at_boundary,
        diagnostics: diagnostics(known, l_hat),
    })
}

/// Whether an ensemble is reduced before or after estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    /// Estimate per replication, then average the distances.
    #[default]
    PerReplication,
    /// Estimate once from the sample-wise mean signal.
    MeanSignal,
}

/// VALOR over an ensemble. Per-replication mode returns one result per
/// record; mean-signal mode returns a single result.
pub fn estimate_valor_ensemble(
    records: &[SignalRecord],
    known: &KnownChannel,
    mode: EnsembleMode,
) -> Result<Vec<EstimateResult>> {
    match mode {
        EnsembleMode::PerReplication => records.iter().map(|r| estimate_valor(r, known)).collect(),
        EnsembleMode::MeanSignal => {
            let first = records.first().ok_or(Error::NoSignal)?;
            let wave = Waveform {
                values: crate::sim::ensemble_mean_fraction(records),
                ..Waveform::from(first)
            };
            Ok(vec![estimate_valor_waveform(&wave, known, None)?])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{gaussian_approximation, GaussianPulse};
    use crate::physics::ChannelParams;
    use approx::assert_relative_eq;

    fn capillary_known() -> KnownChannel {
        KnownChannel::from(&ChannelParams::capillary())
    }

    fn pulse_wave(pulse: &GaussianPulse, spacing: f64) -> Waveform {
        let span = pulse.mean + 12.0 * pulse.std_dev();
        let n = (span / spacing).ceil() as usize;
        Waveform::sample(spacing, spacing, n, |t| pulse.eval(t))
    }

    /// Brute-force oracle: explicit two-pass weighted moments on absolute times.
    fn oracle_variance(wave: &Waveform) -> f64 {
        let times: Vec<f64> = (0..wave.values.len()).map(|k| wave.time(k)).collect();
        let w: f64 = wave.values.iter().sum();
        let mean = times.iter().zip(&wave.values).map(|(t, v)| t * v).sum::<f64>() / w;
        times
            .iter()
            .zip(&wave.values)
            .map(|(t, v)| (t - mean).powi(2) * v)
            .sum::<f64>()
            / w
    }

    #[test]
    fn moments_of_sampled_gaussian() {
        let pulse = GaussianPulse { amplitude: 1.0, mean: 0.5, variance: 1.811e-3 };
        let wave = pulse_wave(&pulse, 1e-4);
        let m = waveform_moments(&wave, None).unwrap();
        assert_relative_eq!(m.variance, oracle_variance(&wave), max_relative = 1e-9);
        assert!((m.variance / 1.811e-3 - 1.0).abs() < 1e-3);
        assert_relative_eq!(m.mean_time, 0.5, max_relative = 1e-6);
        let mass = (2.0 * std::f64::consts::PI * 1.811e-3).sqrt();
        assert_relative_eq!(m.mass, mass, max_relative = 1e-6);
    }

    #[test]
    fn moments_are_shift_invariant() {
        let pulse = GaussianPulse { amplitude: 1.0, mean: 0.5, variance: 1.811e-3 };
        let wave = pulse_wave(&pulse, 1e-4);
        let a = waveform_moments(&wave, None).unwrap();
        let b = waveform_moments(&wave.shifted(7.3), None).unwrap();
        assert_eq!(a.variance, b.variance);
        assert_relative_eq!(b.mean_time - a.mean_time, 7.3, max_relative = 1e-12);
    }

    #[test]
    fn single_bin_has_zero_variance() {
        let mut values = vec![0.0; 10];
        values[4] = 3.0;
        let m = waveform_moments(&Waveform::new(0.0, 1e-4, values), None).unwrap();
        assert_eq!(m.variance, 0.0);
        assert_relative_eq!(m.mean_time, 4e-4);
    }

    #[test]
    fn empty_signal_is_rejected() {
        let wave = Waveform::new(0.0, 1e-4, vec![0.0; 5]);
        assert!(matches!(waveform_moments(&wave, None), Err(Error::NoSignal)));
        assert!(matches!(
            estimate_valor_waveform(&wave, &capillary_known(), None),
            Err(Error::NoSignal)
        ));
        assert!(matches!(
            estimate_peak_time_waveform(&wave, 0.0, &capillary_known(), 5),
            Err(Error::NoSignal)
        ));
    }

    #[test]
    fn degenerate_signal_is_rejected() {
        let wave = Waveform::new(0.0, 1e-4, vec![0.0, 5.0, 0.0]);
        assert!(matches!(
            estimate_valor_waveform(&wave, &capillary_known(), None),
            Err(Error::DegenerateSignal(_))
        ));
    }

    #[test]
    fn valor_inverts_predicted_variance() {
        let known = capillary_known();
        assert_relative_eq!(distance_from_variance(1.811e-3, &known), 1000.0, max_relative = 1e-3);
        let exact = gaussian_approximation(&ChannelParams::capillary()).variance;
        assert_relative_eq!(distance_from_variance(exact, &known), 1000.0, max_relative = 1e-12);
    }

    #[test]
    fn valor_is_scale_free() {
        let pulse = gaussian_approximation(&ChannelParams::capillary());
        let wave = pulse_wave(&pulse, 1e-4);
        let scaled = Waveform {
            values: wave.values.iter().map(|v| v * 1234.5).collect(),
            ..wave.clone()
        };
        let a = estimate_valor_waveform(&wave, &capillary_known(), None).unwrap();
        let b = estimate_valor_waveform(&scaled, &capillary_known(), None).unwrap();
        assert_relative_eq!(a.l_hat, b.l_hat, max_relative = 1e-12);
    }

    #[test]
    fn valor_recovers_distance_from_model_pulses() {
        let base = ChannelParams::capillary();
        for l in [500.0, 1000.0, 2000.0, 4000.0] {
            let p = base.with_distance(l);
            let wave = pulse_wave(&gaussian_approximation(&p), 1e-4);
            let est = estimate_valor_waveform(&wave, &KnownChannel::from(&p), None).unwrap();
            assert!(est.relative_error(l) < 5e-3, "l={l}: {}", est.l_hat);
            assert!(est.diagnostics.approximation.pass);
        }
    }

    #[test]
    fn tail_clip_biases_variance_low() {
        let pulse = gaussian_approximation(&ChannelParams::capillary());
        let wave = pulse_wave(&pulse, 1e-4);
        let full = waveform_moments(&wave, None).unwrap();
        let clipped = waveform_moments(&wave, Some(TailClip { fraction: 0.1 })).unwrap();
        assert!(clipped.variance < full.variance);
    }

    #[test]
    fn peak_time_on_noiseless_pulse() {
        let pulse = gaussian_approximation(&ChannelParams::capillary());
        let wave = pulse_wave(&pulse, 1e-4);
        let known = capillary_known();
        let est = estimate_peak_time_waveform(&wave, 0.0, &known, 51).unwrap();
        assert!((est.l_hat - 1000.0).abs() <= 1e-4 * 2000.0 + 1e-9, "{}", est.l_hat);
        assert!(!est.peak_at_boundary);

        let late = estimate_peak_time_waveform(&wave, 0.1, &known, 51).unwrap();
        assert!((late.l_hat - 800.0).abs() <= 1e-4 * 2000.0 + 1e-9, "{}", late.l_hat);
    }

    #[test]
    fn peak_time_flags_truncated_record() {
        let wave = Waveform::new(0.1, 1e-3, (0..20).map(|k| k as f64).collect());
        let est = estimate_peak_time_waveform(&wave, 0.0, &capillary_known(), 3).unwrap();
        assert!(est.peak_at_boundary);
    }

    #[test]
    fn peak_time_rejects_even_window() {
        let wave = Waveform::new(0.0, 1e-3, vec![1.0, 2.0, 1.0]);
        assert!(estimate_peak_time_waveform(&wave, 0.0, &capillary_known(), 4).is_err());
        assert!(estimate_peak_time_waveform(&wave, 0.0, &capillary_known(), 0).is_err());
    }

    #[test]
    fn moving_average_edges() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(moving_average(&v, 1), v.to_vec());
        assert_eq!(moving_average(&v, 3), vec![1.5, 2.0, 3.0, 4.0, 4.5]);
    }

    #[test]
    fn argmax_takes_first_maximum() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn geometry_fills_condition1() {
        let pulse = gaussian_approximation(&ChannelParams::capillary());
        let est = estimate_valor_waveform(&pulse_wave(&pulse, 1e-4), &capillary_known(), None)
            .unwrap()
            .with_geometry(100.0 / 3.0, 5.0);
        let ratio = est.diagnostics.condition1_ratio.unwrap();
        assert!((ratio - (100.0 / 3.0) / (4.0 * est.l_hat / 5.0)).abs() < 1e-12);
    }
}
