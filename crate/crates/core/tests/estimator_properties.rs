use proptest::prelude::*;

use valor::analytic::gaussian_approximation;
use valor::estimators::{
    distance_from_variance, estimate_peak_time, estimate_peak_time_waveform, estimate_valor,
    estimate_valor_ensemble, estimate_valor_waveform, EnsembleMode, KnownChannel, Waveform,
};
use valor::physics::ChannelParams;
use valor::sim::{run_ensemble, run_replication, SimConfig};

/// Gaussian pulse plus a deterministic ripple, so the waveform is not
/// perfectly symmetric.
fn noisy_pulse(mean: f64, var: f64, ripple: f64, spacing: f64) -> Waveform {
    let sd = var.sqrt();
    let n = ((mean + 10.0 * sd) / spacing) as usize;
    Waveform::sample(spacing, spacing, n, |t| {
        let g = (-(t - mean).powi(2) / (2.0 * var)).exp();
        g * (1.0 + ripple * (t * 977.0).sin())
    })
}

fn known() -> KnownChannel {
    KnownChannel::from(&ChannelParams::capillary())
}

proptest! {
    #[test]
    fn valor_ignores_any_time_offset(
        mean in 0.2..2.0f64,
        var in 1e-4..1e-2f64,
        ripple in 0.0..0.3f64,
        offset in 0.0..500.0f64,
    ) {
        let wave = noisy_pulse(mean, var, ripple, 1e-4);
        let a = estimate_valor_waveform(&wave, &known(), None).unwrap();
        let b = estimate_valor_waveform(&wave.shifted(offset), &known(), None).unwrap();
        prop_assert!((a.l_hat - b.l_hat).abs() <= 1e-12 * a.l_hat);
    }

    #[test]
    fn valor_ignores_signal_scale(ripple in 0.0..0.3f64, k in 1e-3..1e3f64) {
        let wave = noisy_pulse(0.5, 1.811e-3, ripple, 1e-4);
        let scaled = Waveform { values: wave.values.iter().map(|v| v * k).collect(), ..wave.clone() };
        let a = estimate_valor_waveform(&wave, &known(), None).unwrap();
        let b = estimate_valor_waveform(&scaled, &known(), None).unwrap();
        prop_assert!((a.l_hat / b.l_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_increases_with_variance(s in 1e-6..1.0f64, f in 1.0001..10.0f64) {
        prop_assert!(distance_from_variance(s * f, &known()) > distance_from_variance(s, &known()));
    }

    #[test]
    fn peak_time_error_is_linear_in_the_emission_error(delta in -0.3..0.3f64) {
        let p = ChannelParams::capillary();
        let pulse = gaussian_approximation(&p);
        let wave = Waveform::sample(1e-4, 1e-4, 12_000, |t| pulse.eval(t));
        let k = known();
        let exact = estimate_peak_time_waveform(&wave, 0.0, &k, 1).unwrap();
        let off = estimate_peak_time_waveform(&wave, delta, &k, 1).unwrap();
        let shift = off.l_hat - exact.l_hat;
        prop_assert!((shift + p.mean_velocity * delta).abs() < 1e-9 * p.distance);
    }
}

#[test]
fn simulated_signals_give_offset_free_valor_but_not_peak_time() {
    let p = ChannelParams::capillary().with_distance(400.0);
    let k = KnownChannel::from(&p);
    let base = SimConfig { molecules: 5000, seed: 3, ..SimConfig::default() };
    let reference = run_replication(&p, &base, 0).unwrap();
    let valor0 = estimate_valor(&reference, &k).unwrap().l_hat;
    let peak0 = estimate_peak_time(&reference, 0.0, p.mean_velocity, 51).unwrap().l_hat;
    for tau in [1.0, 7.3, 100.0] {
        let rec = run_replication(&p, &SimConfig { tau_offset: tau, ..base }, 0).unwrap();
        assert_eq!(rec.counts, reference.counts);
        let v = estimate_valor(&rec, &k).unwrap().l_hat;
        assert!((v - valor0).abs() <= 1e-12 * valor0);
        // the baseline is only right when told the true emission time
        let told = estimate_peak_time(&rec, tau, p.mean_velocity, 51).unwrap().l_hat;
        assert!((told - peak0).abs() < 1e-9 * peak0);
        let untold = estimate_peak_time(&rec, 0.0, p.mean_velocity, 51).unwrap().l_hat;
        assert!((untold - peak0 - p.mean_velocity * tau).abs() < 1e-6 * untold);
    }
}

#[test]
fn ensemble_modes_agree_roughly() {
    let p = ChannelParams::capillary().with_distance(300.0);
    let cfg = SimConfig { molecules: 4000, seed: 8, ..SimConfig::default() };
    let recs = run_ensemble(&p, &cfg, 4).unwrap();
    let k = KnownChannel::from(&p);
    let per = estimate_valor_ensemble(&recs, &k, EnsembleMode::PerReplication).unwrap();
    let pooled = estimate_valor_ensemble(&recs, &k, EnsembleMode::MeanSignal).unwrap();
    assert_eq!(per.len(), 4);
    assert_eq!(pooled.len(), 1);
    let mean = per.iter().map(|r| r.l_hat).sum::<f64>() / 4.0;
    assert!((pooled[0].l_hat / mean - 1.0).abs() < 0.05, "{} vs {mean}", pooled[0].l_hat);
}
