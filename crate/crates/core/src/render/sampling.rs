//! Deterministic per-sample random streams and sampling helpers.
//!
//! Every camera sample owns a generator seeded from
//! `(scene seed, frame stream, pixel x, pixel y, sample index)`, so the
//! rendered value of a pixel never depends on which thread rendered it or
//! in which order.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg32;

use crate::geometry::Vec3;

/// Stream id used for RGB renders.
pub const RGB_STREAM: u64 = u64::MAX;

/// Stream shared by all pattern captures of a scene.
pub const PATTERN_STREAM: u64 = 0;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of keys into one seed.
pub fn derive_seed(keys: &[u64]) -> u64 {
    keys.iter().fold(0x5EED_u64, |acc, &k| mix(acc ^ mix(k)))
}

pub struct SampleRng(Pcg32);

impl SampleRng {
    pub fn new(seed: u64, stream: u64, x: u32, y: u32, sample: u32) -> Self {
        let key = derive_seed(&[seed, stream, u64::from(x), u64::from(y), u64::from(sample)]);
        Self(Pcg32::seed_from_u64(key))
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    #[inline]
    pub fn next2(&mut self) -> [f64; 2] {
        [self.next(), self.next()]
    }

    #[inline]
    pub fn next3(&mut self) -> [f64; 3] {
        [self.next(), self.next(), self.next()]
    }
}

/// Orthonormal frame around a unit normal.
pub struct Frame {
    t: Vec3,
    b: Vec3,
    n: Vec3,
}

impl Frame {
    /// Branchless construction (Duff et al. 2017).
    pub fn new(n: &Vec3) -> Self {
        let sign = 1.0f64.copysign(n.z);
        let a = -1.0 / (sign + n.z);
        let b = n.x * n.y * a;
        Self {
            t: Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x),
            b: Vec3::new(b, sign + n.y * n.y * a, -n.y),
            n: *n,
        }
    }

    #[inline]
    pub fn to_world(&self, v: &Vec3) -> Vec3 {
        self.t * v.x + self.b * v.y + self.n * v.z
    }
}

/// Cosine-weighted direction on the +Z hemisphere.
#[inline]
pub fn cosine_hemisphere(u1: f64, u2: f64) -> Vec3 {
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    Vec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u1).max(0.0).sqrt())
}
