//! JSON sweep configuration with unit-suffixed physical values.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimators::DEFAULT_SMOOTHING_WINDOW;
use crate::physics::ChannelParams;
use crate::sim::{SimConfig, SimDuration, DEFAULT_DT};
use crate::units::{parse_quantity, Dimension};

/// A sweepable channel parameter. The declaration order is the nesting
/// order of the grid, outermost first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize, serde::Serialize)]
pub enum Axis {
    D,
    #[serde(rename = "r_v")]
    RV,
    #[serde(rename = "w")]
    W,
    #[serde(rename = "v_avg")]
    VAvg,
    #[serde(rename = "l")]
    L,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::D, Axis::RV, Axis::W, Axis::VAvg, Axis::L];

    pub fn key(self) -> &'static str {
        match self {
            Axis::D => "D",
            Axis::RV => "r_v",
            Axis::W => "w",
            Axis::VAvg => "v_avg",
            Axis::L => "l",
        }
    }

    fn dimension(self) -> Dimension {
        match self {
            Axis::D => Dimension::Diffusivity,
            Axis::RV | Axis::W | Axis::L => Dimension::Length,
            Axis::VAvg => Dimension::Velocity,
        }
    }

    pub fn get(self, p: &ChannelParams) -> f64 {
        match self {
            Axis::D => p.diffusion,
            Axis::RV => p.vessel_radius,
            Axis::W => p.receiver_width,
            Axis::VAvg => p.mean_velocity,
            Axis::L => p.distance,
        }
    }

    pub fn set(self, p: &mut ChannelParams, value: f64) {
        match self {
            Axis::D => p.diffusion = value,
            Axis::RV => p.vessel_radius = value,
            Axis::W => p.receiver_width = value,
            Axis::VAvg => p.mean_velocity = value,
            Axis::L => p.distance = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Per-replication temporal variance σ̂².
    Variance,
    LHatValor,
    LHatPeak,
    /// Ensemble-mean signal against the Gaussian and exact channel models.
    ModelMatch,
}

/// A validated parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ChannelParams,
    pub sim: SimConfig,
    /// Values per swept axis, in [`Axis::ALL`] order.
    pub axes: Vec<(Axis, Vec<f64>)>,
    pub n_reps: u32,
    pub metrics: Vec<Metric>,
    pub smoothing_window: usize,
    /// Emission time assumed by the peak-time baseline, in the receiver's
    /// clock. `None` means the true one (`tau_offset`).
    pub emission_time: Option<f64>,
}

impl SweepSpec {
    pub fn has(&self, metric: Metric) -> bool {
        self.metrics.contains(&metric)
    }

    /// Every grid point, outermost axis first.
    pub fn grid(&self) -> Vec<ChannelParams> {
        let mut points = vec![self.base];
        for (axis, values) in &self.axes {
            points = points
                .iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = *p;
                        axis.set(&mut q, v);
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::InvalidParams("n_reps must be at least 1".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::InvalidParams("no metrics requested".into()));
        }
        if self.smoothing_window.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "smoothing_window must be odd, got {}",
                self.smoothing_window
            )));
        }
        for p in self.grid() {
            p.validate()?;
            self.sim.validate(&p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBase {
    #[serde(rename = "D")]
    d: String,
    r_v: String,
    v_avg: String,
    l: String,
    w: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    molecules: Option<u32>,
    dt: Option<String>,
    duration: Option<String>,
    record_every: Option<u32>,
    seed: Option<u64>,
    tx_radial_offset: Option<String>,
    tau_offset: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    base: RawBase,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    axes: BTreeMap<Axis, Vec<String>>,
    n_reps: u32,
    metrics: Vec<Metric>,
    smoothing_window: Option<usize>,
    emission_time: Option<String>,
}

fn field(text: &str, key: &str, dim: Dimension) -> Result<f64> {
    parse_quantity(text, dim).map_err(|e| Error::Parse(format!("{key}: {e}")))
}

/// Parses and validates a sweep configuration.
pub fn parse_sweep_spec(json: &str) -> Result<SweepSpec> {
    let raw: RawSpec = serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
    let b = &raw.base;
    let base = ChannelParams {
        diffusion: field(&b.d, "base.D", Dimension::Diffusivity)?,
        vessel_radius: field(&b.r_v, "base.r_v", Dimension::Length)?,
        mean_velocity: field(&b.v_avg, "base.v_avg", Dimension::Velocity)?,
        distance: field(&b.l, "base.l", Dimension::Length)?,
        receiver_width: field(&b.w, "base.w", Dimension::Length)?,
    };

    let s = &raw.sim;
    let defaults = SimConfig::default();
    let opt = |v: &Option<String>, key: &str, dim, default: f64| {
        v.as_deref().map_or(Ok(default), |t| field(t, key, dim))
    };
    let duration = match s.duration.as_deref().map(str::trim) {
        None | Some("auto") => SimDuration::Auto,
        Some(t) => SimDuration::Fixed(field(t, "sim.duration", Dimension::Time)?),
    };
    let sim = SimConfig {
        molecules: s.molecules.unwrap_or(defaults.molecules),
        dt: opt(&s.dt, "sim.dt", Dimension::Time, DEFAULT_DT)?,
        duration,
        record_every: s.record_every.unwrap_or(1),
        seed: s.seed.unwrap_or(defaults.seed),
        tx_radial_offset: opt(&s.tx_radial_offset, "sim.tx_radial_offset", Dimension::Length, 0.0)?,
        tau_offset: opt(&s.tau_offset, "sim.tau_offset", Dimension::Time, 0.0)?,
    };

    let mut axes = Vec::new();
    for (axis, values) in &raw.axes {
        if values.is_empty() {
            return Err(Error::Parse(format!("axis `{}` has no values", axis.key())));
        }
        let parsed = values
            .iter()
            .map(|v| field(v, &format!("axes.{}", axis.key()), axis.dimension()))
            .collect::<Result<Vec<f64>>>()?;
        axes.push((*axis, parsed));
    }

    let emission_time = raw
        .emission_time
        .as_deref()
        .map(|t| field(t, "emission_time", Dimension::Time))
        .transpose()?;
    let mut metrics = raw.metrics;
    metrics.sort();
    metrics.dedup();
    let spec = SweepSpec {
        base,
        sim,
        axes,
        n_reps: raw.n_reps,
        metrics,
        smoothing_window: raw.smoothing_window.unwrap_or(DEFAULT_SMOOTHING_WINDOW),
        emission_time,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3_LIKE: &str = r#"{
        "base": {"D": "300 um^2/s", "r_v": "5 um", "v_avg": "2 mm/s", "l": "1 mm", "w": "1 um"},
        "sim": {"molecules": 1000, "dt": "0.1 ms", "seed": 9},
        "axes": {"l": ["0.5 mm", "1 mm"], "v_avg": ["1000 um/s", "2 mm/s", "4 mm/s"]},
        "n_reps": 3,
        "metrics": ["variance", "l_hat_valor", "variance"]
    }"#;

    #[test]
    fn grid_nests_in_canonical_order() {
        let spec = parse_sweep_spec(FIG3_LIKE).unwrap();
        assert_eq!(spec.metrics, vec![Metric::Variance, Metric::LHatValor]);
        assert_eq!(spec.sim.seed, 9);
        assert_eq!(spec.sim.duration, SimDuration::Auto);
        let grid = spec.grid();
        let pairs: Vec<(f64, f64)> = grid.iter().map(|p| (p.mean_velocity, p.distance)).collect();
        assert_eq!(
            pairs,
            vec![
                (1000.0, 500.0),
                (1000.0, 1000.0),
                (2000.0, 500.0),
                (2000.0, 1000.0),
                (4000.0, 500.0),
                (4000.0, 1000.0)
            ]
        );
    }

    #[test]
    fn unitless_and_invalid_values_are_rejected() {
        let unitless = FIG3_LIKE.replace("\"300 um^2/s\"", "\"300\"");
        assert!(parse_sweep_spec(&unitless).unwrap_err().to_string().contains("base.D"));
        let wide = FIG3_LIKE.replace("\"w\": \"1 um\"", "\"w\": \"0.8 mm\"");
        assert!(parse_sweep_spec(&wide).is_err());
        let unknown = FIG3_LIKE.replace("\"n_reps\"", "\"reps\"");
        assert!(parse_sweep_spec(&unknown).is_err());
    }
}
