//! Particle-based Monte Carlo simulation of the vessel channel.
//!
//! Molecules are released together at `x = 0`, advected by the Poiseuille
//! profile, diffuse in all three directions and reflect off the lateral wall.
//! The receiver is transparent: it counts how many molecules occupy the slab
//! `[l, l + w]` at each sample time without disturbing them, so several
//! receivers can observe the same molecules in one run.

mod kernel;
mod particle;

pub use particle::{reflect, step, Particle, MAX_REFLECTIONS};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::gaussian_approximation;
use crate::error::{Error, Result};
use crate::physics::ChannelParams;
use crate::rng::Philox;
use kernel::{simulate_particles, KernelSetup, Slab};
use particle::StepConstants;

/// Default time step, s.
pub const DEFAULT_DT: f64 = 1e-4;

/// Number of predicted standard deviations past the peak covered by an
/// automatically sized run.
pub const AUTO_SIGMAS: f64 = 12.0;

/// Particles simulated per work item. Fixed so that work division never
/// depends on the thread count.
const CHUNK: u32 = 2048;

/// Simulated duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimDuration {
    /// `t_peak + 12·σ` from the analytic model of each receiver.
    Auto,
    Fixed(f64),
}

/// Monte Carlo controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub molecules: u32,
    /// Time step, s.
    pub dt: f64,
    pub duration: SimDuration,
    /// Steps between recorded samples.
    pub record_every: u32,
    pub seed: u64,
    /// Radial position of the emitter, µm.
    pub tx_radial_offset: f64,
    /// Added to every recorded timestamp, s.
    pub tau_offset: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            molecules: 100_000,
            dt: DEFAULT_DT,
            duration: SimDuration::Auto,
            record_every: 1,
            seed: 0,
            tx_radial_offset: 0.0,
            tau_offset: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, params: &ChannelParams) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.molecules == 0 {
            return bad("molecule count must be at least 1".into());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("time step must be > 0, got {}", self.dt));
        }
        if let SimDuration::Fixed(t) = self.duration {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("duration must be > 0, got {t}"));
            }
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.tx_radial_offset >= 0.0 && self.tx_radial_offset < params.vessel_radius) {
            return bad(format!(
                "emitter radial offset {} must lie in [0, {})",
                self.tx_radial_offset, params.vessel_radius
            ));
        }
        if !(self.tau_offset.is_finite() && self.tau_offset >= 0.0) {
            return bad(format!("time offset must be >= 0, got {}", self.tau_offset));
        }
        Ok(())
    }

    /// Time between recorded samples, s.
    pub fn sample_spacing(&self) -> f64 {
        self.record_every as f64 * self.dt
    }

    /// Number of recorded samples for a receiver described by `params`.
    pub fn sample_count(&self, params: &ChannelParams) -> Result<usize> {
        let t_end = match self.duration {
            SimDuration::Fixed(t) => t,
            SimDuration::Auto => {
                let pulse = gaussian_approximation(params);
                pulse.mean + AUTO_SIGMAS * pulse.std_dev()
            }
        };
        let n = (t_end / self.sample_spacing()).ceil();
        if n * self.record_every as f64 > u32::MAX as f64 {
            return Err(Error::InvalidParams(format!(
                "run of {t_end} s at dt = {} s needs too many steps",
                self.dt
            )));
        }
        Ok((n as usize).max(1))
    }
}

/// Provenance carried with every recorded signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub params: ChannelParams,
    pub config: SimConfig,
    pub replication: u32,
}

/// Receiver occupancy over time for one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    /// Sample times in the receiver's clock (shifted by `tau_offset`), s.
    pub timestamps: Vec<f64>,
    pub counts: Vec<u32>,
    pub meta: RecordMeta,
}

impl SignalRecord {
    pub fn spacing(&self) -> f64 {
        self.meta.config.sample_spacing()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Counts divided by the number of released molecules.
    pub fn fractions(&self) -> Vec<f64> {
        let m = self.meta.config.molecules as f64;
        self.counts.iter().map(|&c| c as f64 / m).collect()
    }
}

fn timestamps(cfg: &SimConfig, samples: usize) -> Vec<f64> {
    let spacing = cfg.sample_spacing();
    (1..=samples)
        .map(|k| cfg.tau_offset + k as f64 * spacing)
        .collect()
}

/// Simulates one replication of several channel variants with a single set
/// of molecules. The variants must share the diffusion coefficient and vessel
/// radius and may differ in mean velocity, receiver distance and width. Each
/// returned record is identical to what [`run_replication`] would produce for
/// that variant alone.
pub fn run_replication_multi(
    channels: &[ChannelParams],
    cfg: &SimConfig,
    replication: u32,
) -> Result<Vec<SignalRecord>> {
    let Some(base) = channels.first() else {
        return Ok(Vec::new());
    };
    let mut flows: Vec<f64> = Vec::new();
    let mut slabs = Vec::with_capacity(channels.len());
    for ch in channels {
        ch.validate()?;
        cfg.validate(ch)?;
        if ch.diffusion != base.diffusion || ch.vessel_radius != base.vessel_radius {
            return Err(Error::InvalidParams(
                "channels simulated together must share D and r_v".into(),
            ));
        }
        let flow = 2.0 * ch.mean_velocity;
        let track = match flows.iter().position(|&f| f == flow) {
            Some(k) => k,
            None => {
                flows.push(flow);
                flows.len() - 1
            }
        };
        slabs.push(Slab {
            track,
            lo: ch.distance,
            hi: ch.distance + ch.receiver_width,
            samples: cfg.sample_count(ch)?,
        });
    }
    let max_samples = slabs.iter().map(|s| s.samples).max().unwrap_or(0);
    let setup = KernelSetup {
        rng: Philox::new(cfg.seed),
        replication,
        consts: StepConstants::new(base, cfg.dt),
        flows,
        release_radius: cfg.tx_radial_offset,
        record_every: cfg.record_every,
        slabs,
        max_samples,
    };

    let chunks: Vec<(u32, u32)> = (0..cfg.molecules)
        .step_by(CHUNK as usize)
        .map(|first| (first, CHUNK.min(cfg.molecules - first)))
        .collect();
    let hist = chunks
        .into_par_iter()
        .map(|(first, count)| simulate_particles(&setup, first, count))
        .try_reduce(
            || vec![0u32; setup.histogram_len()],
            |mut acc, part| {
                for (a, p) in acc.iter_mut().zip(&part) {
                    *a += p;
                }
                Ok(acc)
            },
        )?;

    Ok(channels
        .iter()
        .zip(&setup.slabs)
        .enumerate()
        .map(|(j, (ch, slab))| {
            let row = &hist[j * max_samples..j * max_samples + slab.samples];
            SignalRecord {
                timestamps: timestamps(cfg, slab.samples),
                counts: row.to_vec(),
                meta: RecordMeta {
                    params: *ch,
                    config: *cfg,
                    replication,
                },
            }
        })
        .collect())
}

/// Simulates one replication of the channel with its own receiver.
pub fn run_replication(params: &ChannelParams, cfg: &SimConfig, replication: u32) -> Result<SignalRecord> {
    let mut records = run_replication_multi(std::slice::from_ref(params), cfg, replication)?;
    Ok(records.remove(0))
}

/// Replications `0 .. n_reps` of every channel variant. Returns
/// `records[replication][channel]`.
pub fn run_ensemble_multi(
    channels: &[ChannelParams],
    cfg: &SimConfig,
    n_reps: u32,
) -> Result<Vec<Vec<SignalRecord>>> {
    if n_reps == 0 {
        return Err(Error::InvalidParams("n_reps must be at least 1".into()));
    }
    (0..n_reps)
        .into_par_iter()
        .map(|rep| run_replication_multi(channels, cfg, rep))
        .collect()
}

pub fn run_ensemble(params: &ChannelParams, cfg: &SimConfig, n_reps: u32) -> Result<Vec<SignalRecord>> {
    Ok(run_ensemble_multi(std::slice::from_ref(params), cfg, n_reps)?
        .into_iter()
        .map(|mut r| r.remove(0))
        .collect())
}

/// Sample-wise mean of an ensemble, as fractions of the released molecules.
pub fn ensemble_mean_fraction(records: &[SignalRecord]) -> Vec<f64> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let mut acc = vec![0u64; first.len()];
    for r in records {
        for (a, &c) in acc.iter_mut().zip(&r.counts) {
            *a += c as u64;
        }
    }
    let norm = records.len() as f64 * first.meta.config.molecules as f64;
    acc.into_iter().map(|a| a as f64 / norm).collect()
}
