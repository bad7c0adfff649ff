//! Hot loop of the Monte Carlo engine. Particles advance in blocks of
//! [`LANES`] in lockstep so that random-number generation, the Box–Muller
//! transform and the position update vectorize. Every particle still draws
//! from its own stream, so results are independent of block and chunk
//! boundaries.
//!
//! The cross-sectional motion does not depend on the flow speed, so one set
//! of molecules can carry several axial coordinates ("tracks"), one per mean
//! velocity. Each track sees exactly the trajectory a separate run with that
//! velocity would produce.

use super::particle::{reflect_passes, StepConstants, MAX_REFLECTIONS};
use crate::error::{Error, Result};
use crate::rng::{gaussian_radius, normals3, unit_circle, LaneStreams, ParticleStream, Philox};

pub(crate) const LANES: usize = 16;

/// Draws allowed for a step whose reflection fails to settle.
const MAX_ATTEMPTS: u32 = 64;

/// An axial counting slab on one track and how many samples it records.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Slab {
    pub track: usize,
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct KernelSetup {
    pub rng: Philox,
    pub replication: u32,
    pub consts: StepConstants,
    /// Peak flow speed `2·v_avg` of each track, µm/s.
    pub flows: Vec<f64>,
    pub release_radius: f64,
    pub record_every: u32,
    pub slabs: Vec<Slab>,
    /// Samples recorded by the longest slab; also the histogram stride.
    pub max_samples: usize,
}

impl KernelSetup {
    pub fn histogram_len(&self) -> usize {
        self.slabs.len() * self.max_samples
    }

    /// Samples needed on each track.
    fn track_samples(&self) -> Vec<usize> {
        let mut n = vec![0; self.flows.len()];
        for s in &self.slabs {
            n[s.track] = n[s.track].max(s.samples);
        }
        n
    }

    pub fn stream(&self, particle: u32) -> ParticleStream {
        ParticleStream::new(&self.rng, self.replication, particle)
    }
}

/// Cross-section release point from the first output of a particle's stream:
/// radius `release_radius` at a uniformly random polar angle.
#[inline]
pub(crate) fn release_point(word: u64, release_radius: f64) -> (f64, f64) {
    if release_radius == 0.0 {
        return (0.0, 0.0);
    }
    let theta = std::f64::consts::TAU * ((word >> 32) as f64 + 0.5) / 4_294_967_296.0;
    let (s, c) = theta.sin_cos();
    (release_radius * c, release_radius * s)
}

/// Runs particles `first .. first + count` and returns their occupancy
/// histogram, laid out as `[slab][sample]`.
pub(crate) fn simulate_particles(setup: &KernelSetup, first: u32, count: u32) -> Result<Vec<u32>> {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f")
            && std::arch::is_x86_feature_detected!("avx512dq")
            && std::arch::is_x86_feature_detected!("avx512vl")
            && std::arch::is_x86_feature_detected!("fma")
        {
            // SAFETY: the required target features were detected at runtime.
            return unsafe { simulate_avx512(setup, first, count) };
        }
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: as above.
            return unsafe { simulate_avx2(setup, first, count) };
        }
    }
    simulate_generic(setup, first, count)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,avx512dq,avx512vl,avx2,fma")]
unsafe fn simulate_avx512(setup: &KernelSetup, first: u32, count: u32) -> Result<Vec<u32>> {
    simulate_generic(setup, first, count)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn simulate_avx2(setup: &KernelSetup, first: u32, count: u32) -> Result<Vec<u32>> {
    simulate_generic(setup, first, count)
}

#[inline(always)]
pub(crate) fn simulate_generic(setup: &KernelSetup, first: u32, count: u32) -> Result<Vec<u32>> {
    let mut hist = vec![0u32; setup.histogram_len()];
    let track_samples = setup.track_samples();
    let end = first + count;
    let mut start = first;
    while start < end {
        let active = (end - start).min(LANES as u32) as usize;
        run_block(setup, &track_samples, start, active, &mut hist)?;
        start += LANES as u32;
    }
    Ok(hist)
}

#[inline(always)]
fn run_block(
    setup: &KernelSetup,
    track_samples: &[usize],
    first: u32,
    active: usize,
    hist: &mut [u32],
) -> Result<()> {
    let c = setup.consts;
    let ids: [u32; LANES] = std::array::from_fn(|i| first.wrapping_add(i as u32));
    let live: [u32; LANES] = std::array::from_fn(|i| (i < active) as u32);
    let mut streams = LaneStreams::<LANES>::new(&std::array::from_fn(|i| setup.stream(ids[i])));

    let mut y = [0.0f64; LANES];
    let mut z = [0.0f64; LANES];
    let release = streams.next();
    for i in 0..LANES {
        (y[i], z[i]) = release_point(release[i], setup.release_radius);
    }
    let mut xs = vec![[0.0f64; LANES]; setup.flows.len()];

    let every = setup.record_every as usize;
    let total = setup.max_samples * every;
    let mut n_x = [[0.0f64; LANES]; 2];
    let mut n_y = [[0.0f64; LANES]; 2];
    let mut n_z = [[0.0f64; LANES]; 2];
    for step in 0..total {
        let half = step & 1;
        if half == 0 {
            draw_pair(&mut streams, &mut n_x, &mut n_y, &mut n_z);
        }
        let (mut nx, ny, nz) = (n_x[half], n_y[half], n_z[half]);
        let (y0, z0) = (y, z);
        let mut shape = [0.0f64; LANES];
        let mut outside = [false; LANES];
        for i in 0..LANES {
            shape[i] = c.shape(y[i] * y[i] + z[i] * z[i]);
            y[i] += c.kick * ny[i];
            z[i] += c.kick * nz[i];
            outside[i] = y[i] * y[i] + z[i] * z[i] > c.rv2;
        }
        if outside.iter().any(|&o| o) {
            for i in 0..LANES {
                if !outside[i] {
                    continue;
                }
                if let Some((ry, rz)) = reflect_passes(y[i], z[i], c.rv, MAX_REFLECTIONS) {
                    (y[i], z[i]) = (ry, rz);
                    continue;
                }
                let mut lane = streams.lane(i);
                let (rx, ry, rz) =
                    retry_step(&c, &mut lane, y0[i], z0[i]).ok_or(Error::ReflectionDiverged {
                        y: y[i],
                        z: z[i],
                        passes: MAX_REFLECTIONS,
                    })?;
                streams.set_lane(i, lane);
                (nx[i], y[i], z[i]) = (rx, ry, rz);
            }
        }
        let sample = step / every;
        for (k, x) in xs.iter_mut().enumerate() {
            if sample < track_samples[k] {
                let flow = setup.flows[k];
                for i in 0..LANES {
                    x[i] = c.axial(x[i], flow, shape[i], nx[i]);
                }
            }
        }
        if (step + 1) % every != 0 {
            continue;
        }
        for (j, slab) in setup.slabs.iter().enumerate() {
            if sample >= slab.samples {
                continue;
            }
            let x = &xs[slab.track];
            let mut n = 0u32;
            for i in 0..LANES {
                n += ((x[i] >= slab.lo) & (x[i] <= slab.hi)) as u32 & live[i];
            }
            hist[j * setup.max_samples + sample] += n;
        }
    }
    Ok(())
}

/// Lane-wise [`normals_pair`](crate::rng::normals_pair), split into
/// branch-free passes so each vectorizes.
#[inline(always)]
fn draw_pair(
    streams: &mut LaneStreams<LANES>,
    n_x: &mut [[f64; LANES]; 2],
    n_y: &mut [[f64; LANES]; 2],
    n_z: &mut [[f64; LANES]; 2],
) {
    let out = [streams.next(), streams.next(), streams.next()];
    let mut lo = [[0u32; LANES]; 3];
    let mut hi = [[0u32; LANES]; 3];
    for k in 0..3 {
        for i in 0..LANES {
            lo[k][i] = out[k][i] as u32;
            hi[k][i] = (out[k][i] >> 32) as u32;
        }
    }
    let mut r = [[0.0f32; LANES]; 3];
    let mut cos = [[0.0f32; LANES]; 3];
    let mut sin = [[0.0f32; LANES]; 3];
    for k in 0..3 {
        for i in 0..LANES {
            r[k][i] = gaussian_radius(lo[k][i]);
            (cos[k][i], sin[k][i]) = unit_circle(hi[k][i]);
        }
    }
    for h in 0..2 {
        for i in 0..LANES {
            n_y[h][i] = (r[h][i] * cos[h][i]) as f64;
            n_z[h][i] = (r[h][i] * sin[h][i]) as f64;
        }
    }
    for i in 0..LANES {
        n_x[0][i] = (r[2][i] * cos[2][i]) as f64;
        n_x[1][i] = (r[2][i] * sin[2][i]) as f64;
    }
}

/// Redraws the step of one particle from its pre-step cross-section position
/// until the reflection settles. Returns `(axial noise, y, z)`.
#[cold]
#[inline(never)]
fn retry_step(c: &StepConstants, stream: &mut ParticleStream, y0: f64, z0: f64) -> Option<(f64, f64, f64)> {
    for _ in 1..MAX_ATTEMPTS {
        let (nx, ny, nz) = normals3(stream.step_words());
        if let Some((y, z)) = reflect_passes(y0 + c.kick * ny, z0 + c.kick * nz, c.rv, MAX_REFLECTIONS) {
            return Some((nx, y, z));
        }
    }
    None
}
