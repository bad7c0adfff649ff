//! Closed-form arrival model of the dispersion-reduced channel and its
//! Gaussian-in-time approximation around the peak.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::physics::{effective_diffusion, predicted_variance, ChannelParams};

/// Exponents below this evaluate to exactly zero.
const EXP_FLOOR: f64 = -700.0;

#[inline]
fn floored_exp(exponent: f64) -> f64 {
    if exponent < EXP_FLOOR {
        0.0
    } else {
        exponent.exp()
    }
}

/// How the receiver integral over `[l, l + w]` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverIntegral {
    /// Difference of Gaussian CDFs.
    Exact,
    /// `w · p(l, t)`.
    #[default]
    SmallWidth,
}

/// Axial density `p(x, t)` of a single molecule released at the origin at
/// `t = 0`, in 1/µm. Zero for `t ≤ 0`.
pub fn p_axial(x: f64, t: f64, params: &ChannelParams) -> f64 {
    axial_density(x, t, params.mean_velocity, effective_diffusion(params))
}

pub(crate) fn axial_density(x: f64, t: f64, velocity: f64, d_eff: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let spread = 4.0 * d_eff * t;
    let drift = x - velocity * t;
    floored_exp(-drift * drift / spread) / (PI * spread).sqrt()
}

/// Standard normal CDF difference `Φ(b) − Φ(a)` for `a ≤ b`, evaluated on
/// whichever tail keeps the subtraction well conditioned.
fn normal_mass(a: f64, b: f64) -> f64 {
    let (ua, ub) = (a / SQRT_2, b / SQRT_2);
    let mass = if a >= 0.0 {
        0.5 * (libm::erfc(ua) - libm::erfc(ub))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-ub) - libm::erfc(-ua))
    } else {
        0.5 * (libm::erf(ub) - libm::erf(ua))
    };
    mass.clamp(0.0, 1.0)
}

/// Probability that a molecule occupies the receiver slab at time `t`.
pub fn detection_probability(t: f64, params: &ChannelParams, mode: ReceiverIntegral) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    match mode {
        ReceiverIntegral::SmallWidth => params.receiver_width * p_axial(params.distance, t, params),
        ReceiverIntegral::Exact => {
            let d_eff = effective_diffusion(params);
            let scale = (2.0 * d_eff * t).sqrt();
            let centre = params.mean_velocity * t;
            normal_mass(
                (params.distance - centre) / scale,
                (params.distance + params.receiver_width - centre) / scale,
            )
        }
    }
}

/// Time at which `w·p(l, t)` attains its maximum, including the `1/√t`
/// prefactor: the positive root of `v²t² + 2·D_e·t − l² = 0`.
pub fn exact_peak_time(params: &ChannelParams) -> f64 {
    let v = params.mean_velocity;
    let d_eff = effective_diffusion(params);
    let l = params.distance;
    // Rationalized form of (−D_e + √(D_e² + v²l²)) / v², free of cancellation.
    l * l / (d_eff + (d_eff * d_eff + v * v * l * l).sqrt())
}

/// Gaussian pulse in time, `amplitude · exp(−(t − mean)² / (2·variance))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPulse {
    pub amplitude: f64,
    pub mean: f64,
    pub variance: f64,
}

impl GaussianPulse {
    pub fn eval(&self, t: f64) -> f64 {
        let dt = t - self.mean;
        self.amplitude * floored_exp(-dt * dt / (2.0 * self.variance))
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Local Gaussian approximation of the arrival pattern around `t_peak`.
pub fn gaussian_approximation(params: &ChannelParams) -> GaussianPulse {
    let d_eff = effective_diffusion(params);
    let v = params.mean_velocity;
    let l = params.distance;
    GaussianPulse {
        amplitude: params.receiver_width * (v / (4.0 * PI * d_eff * l)).sqrt(),
        mean: l / v,
        variance: predicted_variance(d_eff, l, v),
    }
}

/// Size of the cubic and quartic Taylor terms of the arrival exponent at
/// one standard deviation from the peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxDiagnostics {
    pub alpha3: f64,
    pub alpha4: f64,
    /// `D_e / (l · v_avg)`.
    pub condition2_ratio: f64,
    pub pass: bool,
}

impl ApproxDiagnostics {
    /// Diagnostics from the raw inputs; used by the estimators, which know
    /// only `v_avg` and `D_e`.
    pub fn from_parts(effective_diffusion: f64, distance: f64, mean_velocity: f64, margin: f64) -> Self {
        let ratio = effective_diffusion / (distance * mean_velocity);
        let alpha3 = 3.0 * SQRT_2 * ratio.sqrt();
        let alpha4 = 24.0 * ratio;
        ApproxDiagnostics {
            alpha3,
            alpha4,
            condition2_ratio: ratio,
            pass: alpha3.max(alpha4) <= 1.0 && ratio <= margin,
        }
    }
}

pub fn approximation_diagnostics(params: &ChannelParams, margin: f64) -> ApproxDiagnostics {
    ApproxDiagnostics::from_parts(
        effective_diffusion(params),
        params.distance,
        params.mean_velocity,
        margin,
    )
}
