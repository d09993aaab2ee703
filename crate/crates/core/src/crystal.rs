//! Uniform-density spheroidal ion Coulomb crystals.
//!
//! Points are in the cavity frame: the crystal axis is parallel to the cavity
//! axis and the crystal center sits at `(x0, y0, 0)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest half-length or radius accepted by the coupling integrals.
pub const MIN_DIMENSION: f64 = 1e-9;

/// Spheroid with polar half-length `L`, equatorial radius `R`, density `ρ`
/// and transverse offset `(x0, y0)` of its axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalSpec {
    half_length: f64,
    radius: f64,
    density: f64,
    offset_x: f64,
    offset_y: f64,
}

impl CrystalSpec {
    /// On-axis crystal. Lengths in meters, density in ions/m³.
    pub fn new(half_length: f64, radius: f64, density: f64) -> Result<Self> {
        for (name, v) in [("half_length", half_length), ("radius", radius), ("density", density)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self { half_length, radius, density, offset_x: 0.0, offset_y: 0.0 })
    }

    pub fn with_offsets(mut self, offset_x: f64, offset_y: f64) -> Self {
        self.offset_x = offset_x;
        self.offset_y = offset_y;
        self
    }

    pub fn with_radius(self, radius: f64) -> Result<Self> {
        Ok(Self::new(self.half_length, radius, self.density)?.with_offsets(self.offset_x, self.offset_y))
    }

    pub fn with_density(self, density: f64) -> Result<Self> {
        Ok(Self::new(self.half_length, self.radius, density)?.with_offsets(self.offset_x, self.offset_y))
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn offset_x(&self) -> f64 {
        self.offset_x
    }

    pub fn offset_y(&self) -> f64 {
        self.offset_y
    }

    pub fn ion_count(&self) -> f64 {
        self.density * volume(self)
    }
}

/// Boundary-inclusive membership test in cavity-frame coordinates.
pub fn contains(spec: &CrystalSpec, x: f64, y: f64, z: f64) -> bool {
    let dx = (x - spec.offset_x) / spec.radius;
    let dy = (y - spec.offset_y) / spec.radius;
    let dz = z / spec.half_length;
    dx * dx + dy * dy + dz * dz <= 1.0
}

/// `4π R² L / 3`.
pub fn volume(spec: &CrystalSpec) -> f64 {
    4.0 * PI * spec.radius * spec.radius * spec.half_length / 3.0
}

/// Draws `count` points uniformly over the crystal, deterministic in `rng_seed`.
pub fn sample_uniform(spec: &CrystalSpec, rng_seed: u64, count: usize) -> Vec<[f64; 3]> {
    let mut sampler = SpheroidSampler::new(spec, rng_seed);
    (0..count).map(|_| sampler.next_point()).collect()
}

/// Streaming version of [`sample_uniform`].
#[derive(Debug, Clone)]
pub struct SpheroidSampler {
    rng: ChaCha8Rng,
    scale: [f64; 3],
    center: [f64; 3],
}

impl SpheroidSampler {
    pub fn new(spec: &CrystalSpec, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            scale: [spec.radius, spec.radius, spec.half_length],
            center: [spec.offset_x, spec.offset_y, 0.0],
        }
    }

    /// Rejection from the unit cube, then axis scaling and translation.
    pub fn next_point(&mut self) -> [f64; 3] {
        loop {
            let u: [f64; 3] = std::array::from_fn(|_| self.rng.random_range(-1.0..=1.0));
            if u[0] * u[0] + u[1] * u[1] + u[2] * u[2] <= 1.0 {
                return std::array::from_fn(|i| self.center[i] + self.scale[i] * u[i]);
            }
        }
    }
}

impl Iterator for SpheroidSampler {
    type Item = [f64; 3];

    fn next(&mut self) -> Option<[f64; 3]> {
        Some(self.next_point())
    }
}

/// Mixes a base seed with a stream index into an independent seed (splitmix64).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn needle() -> CrystalSpec {
        CrystalSpec::new(240e-6, 21e-6, 3.8e14).unwrap()
    }

    #[test]
    fn rejects_nonpositive_dimensions() {
        assert!(CrystalSpec::new(0.0, 1.0, 1.0).is_err());
        assert!(CrystalSpec::new(1.0, -1.0, 1.0).is_err());
        assert!(CrystalSpec::new(1.0, 1.0, 0.0).is_err());
        assert!(CrystalSpec::new(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn membership() {
        let c = needle().with_offsets(10e-6, -5e-6);
        assert!(contains(&c, 10e-6, -5e-6, 0.0));
        assert!(!contains(&c, 10e-6, -5e-6, 1.0001 * 240e-6));
        assert!(!contains(&c, 10e-6 + 1.0001 * 21e-6, -5e-6, 0.0));
        // binary-exact boundary points
        let c = CrystalSpec::new(2.0, 0.5, 1.0).unwrap().with_offsets(0.25, -0.75);
        assert!(contains(&c, 0.75, -0.75, 0.0));
        assert!(contains(&c, 0.25, -1.25, 0.0));
        assert!(contains(&c, 0.25, -0.75, -2.0));
    }

    #[test]
    fn volumes_and_ion_count() {
        assert_relative_eq!(volume(&needle()), 4.433415552745916e-13, max_relative = 1e-12);
        let unit = CrystalSpec::new(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(volume(&unit), 4.0 * PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(needle().ion_count(), 168.46979100434484, max_relative = 1e-12);
    }

    #[test]
    fn samples_lie_inside_and_are_reproducible() {
        let c = needle().with_offsets(3e-6, 40e-6);
        let a = sample_uniform(&c, 11, 1000);
        assert!(a.iter().all(|p| contains(&c, p[0], p[1], p[2])));
        assert_eq!(a, sample_uniform(&c, 11, 1000));
        assert_ne!(a, sample_uniform(&c, 12, 1000));
    }

    #[test]
    fn sample_moments() {
        // mean within 5 SE of the center, second moments within 5 SE of R²/5, L²/5
        let c = CrystalSpec::new(2.0, 0.5, 1.0).unwrap().with_offsets(0.3, -0.7);
        let n = 1_000_000;
        let pts = sample_uniform(&c, 2024, n);
        let center = [0.3, -0.7, 0.0];
        let second = [0.25 / 5.0, 0.25 / 5.0, 4.0 / 5.0];
        for axis in 0..3 {
            let d: Vec<f64> = pts.iter().map(|p| p[axis] - center[axis]).collect();
            let mean = d.iter().sum::<f64>() / n as f64;
            let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() < 5.0 * (var / n as f64).sqrt(), "axis {axis} mean {mean}");

            let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
            let m2 = sq.iter().sum::<f64>() / n as f64;
            let var2 = sq.iter().map(|v| (v - m2).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((m2 - second[axis]).abs() < 5.0 * (var2 / n as f64).sqrt(), "axis {axis} m2 {m2}");
        }
    }

    proptest! {
        #[test]
        fn volume_scales_cubically(r in 1e-6f64..1e-3, l in 1e-6f64..1e-3, alpha in 0.01f64..100.0) {
            let a = CrystalSpec::new(l, r, 1.0).unwrap();
            let b = CrystalSpec::new(alpha * l, alpha * r, 1.0).unwrap();
            let want = alpha.powi(3) * volume(&a);
            prop_assert!((volume(&b) - want).abs() <= 1e-12 * want);
        }

        #[test]
        fn membership_symmetries(dx in -1.5f64..1.5, dy in -1.5f64..1.5, z in -1.5f64..1.5) {
            let c = CrystalSpec::new(1.2, 0.8, 1.0).unwrap().with_offsets(0.25, -0.5);
            let (x0, y0) = (c.offset_x(), c.offset_y());
            let base = contains(&c, x0 + dx, y0 + dy, z);
            prop_assert_eq!(base, contains(&c, x0 + dy, y0 + dx, z));
            prop_assert_eq!(base, contains(&c, x0 + dx, y0 + dy, -z));
        }
    }
}
