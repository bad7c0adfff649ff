//! Physical parameters of the vessel channel and the closed-form transport
//! quantities derived from them.
//!
//! Units are fixed crate-wide: lengths in micrometres, times in seconds,
//! so velocities are µm/s and diffusivities µm²/s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold used to operationalize "much less than" in the
/// validity conditions.
pub const DEFAULT_MARGIN: f64 = 0.1;

/// The physical scenario: a cylindrical vessel with Poiseuille flow, a point
/// emitter at the origin and a ring receiver spanning `[l, l + w]` axially.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Molecular diffusion coefficient, µm²/s.
    pub diffusion: f64,
    /// Vessel radius, µm.
    pub vessel_radius: f64,
    /// Cross-sectional average flow velocity, µm/s.
    pub mean_velocity: f64,
    /// Axial distance from the emitter to the receiver's leading edge, µm.
    pub distance: f64,
    /// Axial width of the receiver, µm.
    pub receiver_width: f64,
}

impl ChannelParams {
    /// Builds a validated parameter set.
    pub fn new(
        diffusion: f64,
        vessel_radius: f64,
        mean_velocity: f64,
        distance: f64,
        receiver_width: f64,
    ) -> Result<Self> {
        let params = ChannelParams {
            diffusion,
            vessel_radius,
            mean_velocity,
            distance,
            receiver_width,
        };
        params.validate()?;
        Ok(params)
    }

    /// Capillary-scale defaults: D = 300 µm²/s, r_v = 5 µm, w = 1 µm,
    /// v_avg = 2000 µm/s, l = 1 mm.
    pub fn capillary() -> Self {
        ChannelParams {
            diffusion: 300.0,
            vessel_radius: 5.0,
            mean_velocity: 2000.0,
            distance: 1000.0,
            receiver_width: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("diffusion", self.diffusion),
            ("vessel_radius", self.vessel_radius),
            ("mean_velocity", self.mean_velocity),
            ("distance", self.distance),
            ("receiver_width", self.receiver_width),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if self.receiver_width > self.distance {
            return Err(Error::InvalidParams(format!(
                "receiver width {} exceeds distance {}",
                self.receiver_width, self.distance
            )));
        }
        Ok(())
    }

    pub fn with_distance(mut self, distance: f64) -> Self {
        self.distance = distance;
        self
    }

    pub fn with_velocity(mut self, mean_velocity: f64) -> Self {
        self.mean_velocity = mean_velocity;
        self
    }

    /// Centerline (maximum) velocity of the Poiseuille profile, `2·v_avg`.
    pub fn max_velocity(&self) -> f64 {
        2.0 * self.mean_velocity
    }

    /// Wall velocity under the no-slip condition.
    pub fn min_velocity(&self) -> f64 {
        0.0
    }

    pub fn derived(&self) -> DerivedChannel {
        DerivedChannel::from_params(self)
    }
}

/// Quantities computed in closed form from a [`ChannelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedChannel {
    pub peclet: f64,
    pub effective_diffusion: f64,
    /// Peak arrival time `l / v_avg`, s.
    pub peak_time: f64,
    /// Predicted temporal variance of the arrival pattern, s².
    pub predicted_variance: f64,
}

impl DerivedChannel {
    pub fn from_params(params: &ChannelParams) -> Self {
        let d_eff = effective_diffusion(params);
        DerivedChannel {
            peclet: peclet(params),
            effective_diffusion: d_eff,
            peak_time: params.distance / params.mean_velocity,
            predicted_variance: predicted_variance(d_eff, params.distance, params.mean_velocity),
        }
    }
}

/// Axial velocity of the parabolic profile at radial distance `r`.
pub fn poiseuille_velocity(r: f64, params: &ChannelParams) -> Result<f64> {
    let rv = params.vessel_radius;
    if !(0.0..=rv).contains(&r) {
        return Err(Error::Domain {
            quantity: "radial distance",
            value: r,
            lo: 0.0,
            hi: rv,
        });
    }
    Ok(2.0 * params.mean_velocity * (1.0 - (r * r) / (rv * rv)))
}

/// Péclet number `v_avg·r_v / D`.
pub fn peclet(params: &ChannelParams) -> f64 {
    params.mean_velocity * params.vessel_radius / params.diffusion
}

/// Taylor–Aris effective diffusion `D·(1 + Pe²/48)`.
pub fn effective_diffusion(params: &ChannelParams) -> f64 {
    let pe = peclet(params);
    params.diffusion * (1.0 + pe * pe / 48.0)
}

/// Temporal variance `2·D_e·l / v_avg³` of the Gaussian arrival pattern.
pub fn predicted_variance(effective_diffusion: f64, distance: f64, mean_velocity: f64) -> f64 {
    2.0 * effective_diffusion * distance / mean_velocity.powi(3)
}

/// Outcome of a "much less than" check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub ratio: f64,
    pub pass: bool,
}

/// Dispersion-regime condition `Pe ≪ 4·l/r_v`, reported as the ratio
/// `Pe / (4·l/r_v)` and compared against `margin`.
pub fn check_condition1(params: &ChannelParams, margin: f64) -> ConditionCheck {
    let ratio = condition1_ratio(peclet(params), params.distance, params.vessel_radius);
    ConditionCheck {
        ratio,
        pass: ratio <= margin,
    }
}

pub(crate) fn condition1_ratio(peclet: f64, distance: f64, vessel_radius: f64) -> f64 {
    peclet / (4.0 * distance / vessel_radius)
}
