use valor::analytic::{detection_probability, ReceiverIntegral};
use valor::io::write_signal_csv;
use valor::physics::ChannelParams;
use valor::rng::{ParticleStream, Philox};
use valor::sim::{
    run_ensemble, run_replication, run_replication_multi, step, Particle, SimConfig, SimDuration,
};

fn still_water(vessel_radius: f64) -> ChannelParams {
    ChannelParams {
        diffusion: 300.0,
        vessel_radius,
        mean_velocity: 0.0,
        distance: 1000.0,
        receiver_width: 1.0,
    }
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// `|s² − σ²|` in standard errors of a Gaussian sample variance.
fn standard_errors(xs: &[f64], sigma2: f64) -> f64 {
    let se = sigma2 * (2.0 / (xs.len() as f64 - 1.0)).sqrt();
    (sample_variance(xs) - sigma2).abs() / se
}

#[test]
fn single_steps_from_origin_have_brownian_variance() {
    let p = still_water(1e6);
    let dt = 1e-4;
    let rng = Philox::new(21);
    let mut coords = [Vec::new(), Vec::new(), Vec::new()];
    for id in 0..50_000 {
        for n in ParticleStream::new(&rng, 0, id).step_pair() {
            let q = step(Particle::default(), dt, &p, [n.0, n.1, n.2]).unwrap();
            coords[0].push(q.x);
            coords[1].push(q.y);
            coords[2].push(q.z);
        }
    }
    for c in &coords {
        assert_eq!(c.len(), 100_000);
        let z = standard_errors(c, 2.0 * p.diffusion * dt);
        assert!(z < 3.0, "{z} standard errors");
    }
}

#[test]
fn random_walk_spreads_as_two_d_t() {
    let p = still_water(1e6);
    let dt = 1e-4;
    let steps = 200;
    let rng = Philox::new(4);
    let mut xs = Vec::new();
    for id in 0..5000 {
        let mut s = ParticleStream::new(&rng, 1, id);
        let mut q = Particle::default();
        for _ in 0..steps / 2 {
            for n in s.step_pair() {
                q = step(q, dt, &p, [n.0, n.1, n.2]).unwrap();
            }
        }
        xs.push(q.x);
    }
    let z = standard_errors(&xs, 2.0 * p.diffusion * dt * steps as f64);
    assert!(z < 3.0, "{z} standard errors");
}

#[test]
fn every_step_stays_inside_the_wall() {
    let p = ChannelParams::capillary();
    let rng = Philox::new(8);
    for id in 0..200 {
        let mut s = ParticleStream::new(&rng, 0, id);
        let mut q = Particle::default();
        for _ in 0..500 {
            for n in s.step_pair() {
                q = step(q, 1e-4, &p, [n.0, n.1, n.2]).unwrap();
                assert!(q.is_contained(p.vessel_radius));
            }
        }
    }
}

#[test]
fn receiver_residence_matches_the_model_mass() {
    // Σ counts·Δt / M against ∫ w·p(l, t) dt, with the standard error taken
    // from the spread between replications
    let p = ChannelParams::capillary().with_distance(300.0);
    let cfg = SimConfig { molecules: 10_000, seed: 17, ..SimConfig::default() };
    let reps = run_ensemble(&p, &cfg, 10).unwrap();
    let masses: Vec<f64> = reps
        .iter()
        .map(|r| r.counts.iter().map(|&c| c as f64).sum::<f64>() * r.spacing() / cfg.molecules as f64)
        .collect();
    let n = masses.len() as f64;
    let mean = masses.iter().sum::<f64>() / n;
    let se = (sample_variance(&masses) / n).sqrt();

    let t_end = reps[0].timestamps.last().copied().unwrap();
    let panels = 200_000;
    let h = t_end / panels as f64;
    let model: f64 = (0..panels)
        .map(|i| {
            let t = (i as f64 + 0.5) * h;
            detection_probability(t, &p, ReceiverIntegral::SmallWidth) * h
        })
        .sum();
    assert!((mean - model).abs() < 3.0 * se, "sim {mean} ± {se}, model {model}");
}

#[test]
fn receivers_do_not_remove_particles() {
    // slabs tiling [50, 1250] µm hold every molecule once the cloud has left
    // the emitter and before it can reach the far end
    let base = ChannelParams::capillary();
    let channels: Vec<ChannelParams> = (1..=24)
        .map(|k| ChannelParams { distance: 50.0 * k as f64, receiver_width: 50.0, ..base })
        .collect();
    let cfg = SimConfig {
        molecules: 3000,
        duration: SimDuration::Fixed(0.2),
        seed: 2,
        ..SimConfig::default()
    };
    let records = run_replication_multi(&channels, &cfg, 0).unwrap();
    let last = records[0].len() - 1;
    let total: u32 = records.iter().map(|r| r.counts[last]).sum();
    assert_eq!(total, cfg.molecules);
    for k in 0..=last {
        assert!(records.iter().map(|r| r.counts[k]).sum::<u32>() <= cfg.molecules);
    }
}

#[test]
fn shared_run_matches_separate_runs() {
    let base = ChannelParams::capillary().with_distance(200.0);
    let channels = [
        base,
        base.with_distance(150.0),
        base.with_velocity(3000.0),
        ChannelParams { receiver_width: 5.0, ..base.with_velocity(3000.0) },
    ];
    let cfg = SimConfig { molecules: 2500, seed: 99, tau_offset: 0.3, ..SimConfig::default() };
    let shared = run_replication_multi(&channels, &cfg, 4).unwrap();
    for (ch, rec) in channels.iter().zip(&shared) {
        assert_eq!(rec, &run_replication(ch, &cfg, 4).unwrap());
    }
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let p = ChannelParams::capillary().with_distance(200.0);
    let cfg = SimConfig { molecules: 6000, seed: 31, ..SimConfig::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_ensemble(&p, &cfg, 3).unwrap())
    };
    let one = run(1);
    let many = run(5);
    assert_eq!(one, many);
    let csv = |recs: &[valor::sim::SignalRecord]| {
        let mut buf = Vec::new();
        for r in recs {
            write_signal_csv(&mut buf, r).unwrap();
        }
        buf
    };
    assert_eq!(csv(&one), csv(&many));
}

#[test]
fn ensemble_of_one_is_the_replication() {
    let p = ChannelParams::capillary().with_distance(100.0);
    let cfg = SimConfig { molecules: 800, seed: 5, ..SimConfig::default() };
    assert_eq!(run_ensemble(&p, &cfg, 1).unwrap()[0], run_replication(&p, &cfg, 0).unwrap());
}

#[test]
fn replications_fluctuate_independently() {
    // first differences remove the shared pulse shape and keep the noise
    let p = ChannelParams::capillary().with_distance(300.0);
    let cfg = SimConfig { molecules: 20_000, seed: 12, ..SimConfig::default() };
    let reps = run_ensemble(&p, &cfg, 2).unwrap();
    let diff = |r: &valor::sim::SignalRecord| -> Vec<f64> {
        r.counts.windows(2).map(|w| w[1] as f64 - w[0] as f64).collect()
    };
    let (a, b) = (diff(&reps[0]), diff(&reps[1]));
    let active: Vec<usize> = (0..a.len())
        .filter(|&k| reps[0].counts[k] + reps[1].counts[k] > 0)
        .collect();
    let pick = |v: &[f64]| active.iter().map(|&k| v[k]).collect::<Vec<f64>>();
    let (a, b) = (pick(&a), pick(&b));
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    let corr = cov / (var(&a, ma) * var(&b, mb)).sqrt();
    assert!(corr.abs() < 4.0 / n.sqrt(), "corr {corr} over {n} samples");
}

#[test]
fn tiny_diffusion_never_reaches_a_distant_receiver() {
    let p = ChannelParams {
        diffusion: 1e-9,
        vessel_radius: 5.0,
        mean_velocity: 1e-9,
        distance: 1000.0,
        receiver_width: 1.0,
    };
    let cfg = SimConfig { molecules: 1, duration: SimDuration::Fixed(1.0), ..SimConfig::default() };
    let rec = run_replication(&p, &cfg, 0).unwrap();
    assert!(rec.counts.iter().all(|&c| c == 0));
}
