//! Single-particle dynamics: explicit Euler–Maruyama update under Poiseuille
//! flow followed by specular reflection at the vessel wall.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::ChannelParams;

/// Maximum reflection passes before a step is rejected.
pub const MAX_REFLECTIONS: u32 = 8;

/// Position in µm; `x` is axial, `(y, z)` is the cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Particle {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Particle {
    pub fn radius(&self) -> f64 {
        (self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_contained(&self, vessel_radius: f64) -> bool {
        self.y * self.y + self.z * self.z <= vessel_radius * vessel_radius
    }
}

/// Per-step constants shared by the scalar and vectorized paths. Both paths
/// evaluate the same expressions in the same order, so they agree bit for bit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepConstants {
    pub dt: f64,
    pub two_vavg: f64,
    pub inv_rv2: f64,
    pub rv: f64,
    pub rv2: f64,
    /// Diffusive step scale `√(2·D·dt)`.
    pub kick: f64,
}

impl StepConstants {
    pub fn new(params: &ChannelParams, dt: f64) -> Self {
        let rv = params.vessel_radius;
        StepConstants {
            dt,
            two_vavg: 2.0 * params.mean_velocity,
            inv_rv2: 1.0 / (rv * rv),
            rv,
            rv2: rv * rv,
            kick: (2.0 * params.diffusion * dt).sqrt(),
        }
    }

    /// `1 − r²/r_v²`: the flow profile relative to its peak.
    #[inline(always)]
    pub fn shape(&self, r2: f64) -> f64 {
        1.0 - r2 * self.inv_rv2
    }

    /// Axial update for a flow with peak speed `two_vavg`.
    #[inline(always)]
    pub fn axial(&self, x: f64, two_vavg: f64, shape: f64, noise: f64) -> f64 {
        x + two_vavg * shape * self.dt + self.kick * noise
    }
}

/// One reflection pass: maps radius `r > r_v` to `2·r_v − r` along the same
/// polar angle (through the axis when `r > 2·r_v`).
#[inline(always)]
pub(crate) fn reflect_once(y: f64, z: f64, rv: f64) -> (f64, f64) {
    let r = (y * y + z * z).sqrt();
    let scale = (2.0 * rv - r) / r;
    (y * scale, z * scale)
}

/// Applies up to `passes` reflections, returning `None` if the point is
/// still outside afterwards.
#[inline]
pub(crate) fn reflect_passes(mut y: f64, mut z: f64, rv: f64, passes: u32) -> Option<(f64, f64)> {
    let rv2 = rv * rv;
    for _ in 0..passes {
        if y * y + z * z <= rv2 {
            return Some((y, z));
        }
        (y, z) = reflect_once(y, z, rv);
    }
    (y * y + z * z <= rv2).then_some((y, z))
}

/// Specular radial reflection into the disc of radius `vessel_radius`.
pub fn reflect(y: f64, z: f64, vessel_radius: f64) -> Result<(f64, f64)> {
    reflect_passes(y, z, vessel_radius, MAX_REFLECTIONS).ok_or(Error::ReflectionDiverged {
        y,
        z,
        passes: MAX_REFLECTIONS,
    })
}

#[inline(always)]
pub(crate) fn advance(p: Particle, c: &StepConstants, noise: (f64, f64, f64)) -> Particle {
    let shape = c.shape(p.y * p.y + p.z * p.z);
    Particle {
        x: c.axial(p.x, c.two_vavg, shape, noise.0),
        y: p.y + c.kick * noise.1,
        z: p.z + c.kick * noise.2,
    }
}

/// Advances one particle by `dt` using three standard normal draws
/// `(axial, y, z)`. Flow is evaluated at the pre-step radius.
///
/// Returns [`Error::ReflectionDiverged`] when the wall reflection does not
/// settle; the caller is expected to redraw the noise and retry.
pub fn step(particle: Particle, dt: f64, params: &ChannelParams, noise: [f64; 3]) -> Result<Particle> {
    let c = StepConstants::new(params, dt);
    let moved = advance(particle, &c, (noise[0], noise[1], noise[2]));
    let (y, z) = reflect(moved.y, moved.z, c.rv)?;
    Ok(Particle { x: moved.x, y, z })
}
