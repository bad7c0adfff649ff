//! Reproducible random numbers. Every particle owns an xoshiro256++ stream
//! whose 256-bit state is a Philox4x32-10 block keyed by the master seed at
//! counter (particle, replication). A particle's draws therefore depend only
//! on its coordinates, never on how work is scheduled across threads, while
//! the per-step cost stays that of a small shift/xor generator.
//!
//! Normal variates come from the Box–Muller transform. `ln`, `sin` and `cos`
//! are evaluated with fixed polynomials built from `+` and `*` only, which
//! keeps the output bit-identical between the scalar and vectorized paths.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;
const PHILOX_ROUNDS: usize = 10;

/// Fourth counter word of the blocks that seed particle streams.
const STREAM_DOMAIN: u32 = 0x5354_524D;

/// Philox4x32-10 keyed by a 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Philox {
    key: [u32; 2],
}

impl Philox {
    pub fn new(seed: u64) -> Self {
        Philox {
            key: [seed as u32, (seed >> 32) as u32],
        }
    }

    #[inline(always)]
    pub fn block(&self, counter: [u32; 4]) -> [u32; 4] {
        philox4x32(counter, self.key)
    }

    /// Initial xoshiro256++ state for `particle` of `replication`.
    pub fn stream_state(&self, replication: u32, particle: u32) -> [u64; 4] {
        let join = |w: [u32; 4]| [w[0] as u64 | (w[1] as u64) << 32, w[2] as u64 | (w[3] as u64) << 32];
        let a = join(self.block([particle, replication, 0, STREAM_DOMAIN]));
        let b = join(self.block([particle, replication, 1, STREAM_DOMAIN]));
        let mut s = [a[0], a[1], b[0], b[1]];
        if s == [0; 4] {
            // The all-zero state is a fixed point of xoshiro.
            s[0] = 0x9E37_79B9_7F4A_7C15;
        }
        s
    }
}

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

pub fn philox4x32(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for round in 0..PHILOX_ROUNDS {
        if round > 0 {
            key[0] = key[0].wrapping_add(PHILOX_W0);
            key[1] = key[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

#[inline(always)]
fn xoshiro_next(s: &mut [u64; 4]) -> u64 {
    let out = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
    let t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = s[3].rotate_left(45);
    out
}

/// One particle's random stream.
///
/// Steps consume it in pairs: three outputs give the six normals of two
/// consecutive steps ([`normals_pair`]). A redrawn step takes two further
/// outputs ([`normals3`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParticleStream {
    s: [u64; 4],
}

impl ParticleStream {
    pub fn new(rng: &Philox, replication: u32, particle: u32) -> Self {
        ParticleStream {
            s: rng.stream_state(replication, particle),
        }
    }

    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        xoshiro_next(&mut self.s)
    }

    /// Normals for the next two steps.
    #[inline(always)]
    pub fn step_pair(&mut self) -> [(f64, f64, f64); 2] {
        normals_pair([self.next_u64(), self.next_u64(), self.next_u64()])
    }

    /// Four 32-bit words from two consecutive outputs, as consumed by
    /// [`normals3`].
    #[inline(always)]
    pub fn step_words(&mut self) -> [u32; 4] {
        let a = self.next_u64();
        let b = self.next_u64();
        [a as u32, (a >> 32) as u32, b as u32, (b >> 32) as u32]
    }
}

/// `N` particle streams advanced in lockstep, stored lane-wise.
#[derive(Debug, Clone)]
pub(crate) struct LaneStreams<const N: usize> {
    s: [[u64; N]; 4],
}

impl<const N: usize> LaneStreams<N> {
    pub fn new(streams: &[ParticleStream; N]) -> Self {
        LaneStreams {
            s: std::array::from_fn(|k| std::array::from_fn(|i| streams[i].s[k])),
        }
    }

    #[inline(always)]
    pub fn next(&mut self) -> [u64; N] {
        let [s0, s1, s2, s3] = &mut self.s;
        let mut out = [0u64; N];
        for i in 0..N {
            out[i] = s0[i].wrapping_add(s3[i]).rotate_left(23).wrapping_add(s0[i]);
            let t = s1[i] << 17;
            s2[i] ^= s0[i];
            s3[i] ^= s1[i];
            s1[i] ^= s2[i];
            s0[i] ^= s3[i];
            s2[i] ^= t;
            s3[i] = s3[i].rotate_left(45);
        }
        out
    }

    pub fn lane(&self, i: usize) -> ParticleStream {
        ParticleStream {
            s: [self.s[0][i], self.s[1][i], self.s[2][i], self.s[3][i]],
        }
    }

    pub fn set_lane(&mut self, i: usize, stream: ParticleStream) {
        for k in 0..4 {
            self.s[k][i] = stream.s[k];
        }
    }
}

// Normal variates are generated in single precision: sixteen lanes fit a
// 512-bit register and the division and square root are several times
// cheaper. Positions are still integrated in double precision.

const TWO_POW_M24: f32 = 1.0 / 16_777_216.0;
const TWO_POW_M30: f32 = 1.0 / 1_073_741_824.0;
const LN_2_F32: f32 = std::f32::consts::LN_2;
const SQRT_2_F32: f32 = std::f32::consts::SQRT_2;
const FRAC_1_SQRT_2_F32: f32 = std::f32::consts::FRAC_1_SQRT_2;
const FRAC_PI_2_F32: f32 = std::f32::consts::FRAC_PI_2;
const FRAC_PI_4_F32: f32 = std::f32::consts::FRAC_PI_4;

/// Maps the top 24 bits of a word to `(0, 1]`, in steps of `2⁻²⁴`; every
/// value is exact in single precision.
#[inline(always)]
pub fn unit_interval(word: u32) -> f32 {
    ((word >> 8) + 1) as f32 * TWO_POW_M24
}

/// Natural log of a positive, finite, normal `x`.
#[inline(always)]
pub fn ln_poly(x: f32) -> f32 {
    let bits = x.to_bits();
    let exponent = ((bits >> 23) & 0xff) as i32 - 127;
    let mantissa = f32::from_bits((bits & 0x007F_FFFF) | 0x3F80_0000);
    // Centre the mantissa on 1 so |f| ≤ 3 − 2√2.
    let high = mantissa > SQRT_2_F32;
    let m = if high { mantissa * 0.5 } else { mantissa };
    let e = if high { exponent + 1 } else { exponent } as f32;
    // Minimax polynomial in x = m − 1 (Cephes `logf`); no division, which
    // is slow in wide registers.
    let x = m - 1.0;
    let z = x * x;
    let p = fma(7.037_683_6e-2, x, -1.151_461e-1);
    let p = fma(p, x, 1.167_699_9e-1);
    let p = fma(p, x, -1.242_014_1e-1);
    let p = fma(p, x, 1.424_932_3e-1);
    let p = fma(p, x, -1.666_805_8e-1);
    let p = fma(p, x, 2.000_071_5e-1);
    let p = fma(p, x, -2.499_999_4e-1);
    let p = fma(p, x, 3.333_333_1e-1);
    fma(e, LN_2_F32, fma(x * z, p, fma(-0.5, z, x)))
}

/// Fused multiply-add. Correctly rounded on every path (hardware or libm),
/// so results stay bit-identical across instruction sets.
#[inline(always)]
fn fma(a: f32, b: f32, c: f32) -> f32 {
    a.mul_add(b, c)
}

/// `(sin ψ, cos ψ)` for |ψ| ≤ π/4 from truncated Taylor series.
#[inline(always)]
fn sincos_reduced(psi: f32) -> (f32, f32) {
    let s2 = psi * psi;
    let sp = fma(s2, 1.0 / 362_880.0, -1.0 / 5040.0);
    let sp = fma(s2, sp, 1.0 / 120.0);
    let sp = fma(s2, sp, -1.0 / 6.0);
    let sp = fma(s2, sp, 1.0);
    let cp = fma(s2, -1.0 / 3_628_800.0, 1.0 / 40_320.0);
    let cp = fma(s2, cp, -1.0 / 720.0);
    let cp = fma(s2, cp, 1.0 / 24.0);
    let cp = fma(s2, cp, -0.5);
    let cp = fma(s2, cp, 1.0);
    (psi * sp, cp)
}

/// `(cos θ, sin θ)` for the angle `θ = 2π·(word + ½)/2³²`.
#[inline(always)]
pub fn unit_circle(word: u32) -> (f32, f32) {
    let quadrant = word >> 30;
    let within = ((word & 0x3FFF_FFFF) as f32 + 0.5) * TWO_POW_M30;
    let psi = fma(within, FRAC_PI_2_F32, -FRAC_PI_4_F32);
    let (sp, cp) = sincos_reduced(psi);
    // φ = ψ + π/4 ∈ (0, π/2)
    let s = (sp + cp) * FRAC_1_SQRT_2_F32;
    let c = (cp - sp) * FRAC_1_SQRT_2_F32;
    // Rotate by quadrant·π/2 without branching:
    // q = 0: (c, s), 1: (−s, c), 2: (−c, −s), 3: (s, −c).
    let odd = quadrant & 1 == 1;
    let a = if odd { s } else { c };
    let b = if odd { c } else { s };
    let sign_a = ((quadrant ^ (quadrant >> 1)) & 1) << 31;
    let sign_b = (quadrant >> 1) << 31;
    (
        f32::from_bits(a.to_bits() ^ sign_a),
        f32::from_bits(b.to_bits() ^ sign_b),
    )
}

/// Box–Muller radius `√(−2 ln u)` for the open-unit image of `word`.
/// Bounded by `√(48 ln 2) ≈ 5.77`.
#[inline(always)]
pub fn gaussian_radius(word: u32) -> f32 {
    (-2.0 * ln_poly(unit_interval(word))).sqrt()
}

/// Three standard normals from four random words: `(axial, y, z)`.
#[inline(always)]
pub fn normals3(words: [u32; 4]) -> (f64, f64, f64) {
    let r_yz = gaussian_radius(words[0]);
    let (c, s) = unit_circle(words[1]);
    let r_x = gaussian_radius(words[2]);
    let (cx, _) = unit_circle(words[3]);
    ((r_x * cx) as f64, (r_yz * c) as f64, (r_yz * s) as f64)
}

/// Normals `(axial, y, z)` for two consecutive steps. Each step's
/// cross-section pair is one Box–Muller pair; the two axial draws share a
/// third.
#[inline(always)]
pub fn normals_pair(out: [u64; 3]) -> [(f64, f64, f64); 2] {
    let r_a = gaussian_radius(out[0] as u32);
    let (ca, sa) = unit_circle((out[0] >> 32) as u32);
    let r_b = gaussian_radius(out[1] as u32);
    let (cb, sb) = unit_circle((out[1] >> 32) as u32);
    let r_x = gaussian_radius(out[2] as u32);
    let (cx, sx) = unit_circle((out[2] >> 32) as u32);
    [
        ((r_x * cx) as f64, (r_a * ca) as f64, (r_a * sa) as f64),
        ((r_x * sx) as f64, (r_b * cb) as f64, (r_b * sb) as f64),
    ]
}
