//! Hermite-Gaussian geometry of the cavity field.
//!
//! All lengths are SI meters. The wavefront curvature is carried as
//! `1/r(z) = z / (z² + z_R²)`, which is finite on the waist plane.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest Hermite order accepted by [`hermite_poly`] and the mode functions.
pub const MAX_HERMITE_ORDER: u32 = 20;

/// Relative mismatch allowed between a caller-supplied Rayleigh range and
/// the one implied by wavelength and waist.
pub const RAYLEIGH_MATCH_TOLERANCE: f64 = 0.01;

/// Wavelength, waist, Rayleigh range and wavenumber of a cavity field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    wavelength: f64,
    waist: f64,
    rayleigh_range: f64,
    wavenumber: f64,
}

impl BeamGeometry {
    /// Derives `z_R = π w0² / λ` and `k = 2π / λ`.
    pub fn new(wavelength: f64, waist: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::Config(format!("wavelength must be > 0, got {wavelength}")));
        }
        if !(waist.is_finite() && waist > 0.0) {
            return Err(Error::Config(format!("waist must be > 0, got {waist}")));
        }
        Ok(Self {
            wavelength,
            waist,
            rayleigh_range: PI * waist * waist / wavelength,
            wavenumber: 2.0 * PI / wavelength,
        })
    }

    /// Like [`BeamGeometry::new`], but checks a measured Rayleigh range
    /// against the derived one. The derived value is kept.
    pub fn with_rayleigh_range(wavelength: f64, waist: f64, rayleigh_range: f64) -> Result<Self> {
        let geom = Self::new(wavelength, waist)?;
        let rel = (rayleigh_range - geom.rayleigh_range).abs() / geom.rayleigh_range;
        if !(rel <= RAYLEIGH_MATCH_TOLERANCE) {
            return Err(Error::Config(format!(
                "rayleigh range {rayleigh_range:e} m differs from pi*w0^2/lambda = {:e} m by {:.2}%",
                geom.rayleigh_range,
                100.0 * rel
            )));
        }
        Ok(geom)
    }

    /// 866 nm light in a 37 µm waist.
    pub fn default_cavity() -> Self {
        Self::new(866e-9, 37e-6).expect("default beam parameters are valid")
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn waist(&self) -> f64 {
        self.waist
    }

    pub fn rayleigh_range(&self) -> f64 {
        self.rayleigh_range
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }
}

/// Transverse order of a TEM_mn mode; `m` counts nodal lines along x, `n` along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub m: u32,
    pub n: u32,
}

impl ModeIndex {
    pub const TEM00: ModeIndex = ModeIndex { m: 0, n: 0 };
    pub const TEM10: ModeIndex = ModeIndex { m: 1, n: 0 };
    pub const TEM01: ModeIndex = ModeIndex { m: 0, n: 1 };

    pub fn new(m: u32, n: u32) -> Self {
        Self { m, n }
    }

    /// Multiplier of the Gouy phase, `m + n + 1`.
    pub fn gouy_order(&self) -> u32 {
        self.m + self.n + 1
    }

    /// The mode with its x and y orders exchanged.
    pub fn transposed(&self) -> Self {
        Self { m: self.n, n: self.m }
    }

    pub(crate) fn check_supported(&self) -> Result<()> {
        for order in [self.m, self.n] {
            if order > MAX_HERMITE_ORDER {
                return Err(Error::UnsupportedOrder { order, max: MAX_HERMITE_ORDER });
            }
        }
        Ok(())
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.m < 10 && self.n < 10 {
            write!(f, "{}{}", self.m, self.n)
        } else {
            write!(f, "{}_{}", self.m, self.n)
        }
    }
}

impl FromStr for ModeIndex {
    type Err = Error;

    /// Accepts `"10"`, `"TEM10"` or `"12_3"`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let t = t.strip_prefix("TEM").or_else(|| t.strip_prefix("tem")).unwrap_or(t);
        let bad = || Error::Config(format!("mode must be two digits such as 00 or 10, got {s:?}"));
        let (m, n) = if let Some((a, b)) = t.split_once('_') {
            (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?)
        } else {
            let digits: Vec<u32> = t.chars().map(|c| c.to_digit(10)).collect::<Option<_>>().ok_or_else(bad)?;
            match digits.as_slice() {
                [m, n] => (*m, *n),
                _ => return Err(bad()),
            }
        };
        Ok(Self { m, n })
    }
}

/// Beam radius `w(z) = w0 sqrt(1 + z²/z_R²)`.
pub fn waist_at(geom: &BeamGeometry, z: f64) -> f64 {
    let q = z / geom.rayleigh_range;
    geom.waist * (1.0 + q * q).sqrt()
}

/// Inverse radius of curvature, `z / (z² + z_R²)`.
pub fn curvature_at(geom: &BeamGeometry, z: f64) -> f64 {
    z / (z * z + geom.rayleigh_range * geom.rayleigh_range)
}

/// Physicists' Hermite polynomial by forward recurrence.
pub fn hermite_poly(order: u32, t: f64) -> Result<f64> {
    if order > MAX_HERMITE_ORDER {
        return Err(Error::UnsupportedOrder { order, max: MAX_HERMITE_ORDER });
    }
    Ok(hermite_unchecked(order, t))
}

#[inline]
pub(crate) fn hermite_unchecked(order: u32, t: f64) -> f64 {
    let mut prev = 1.0;
    if order == 0 {
        return prev;
    }
    let mut cur = 2.0 * t;
    for l in 1..order {
        let next = 2.0 * t * cur - 2.0 * l as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `1/sqrt(2^l l!)`, so that `∫ Ψ_l² du` is the same for every order.
#[inline]
pub(crate) fn hermite_norm(order: u32) -> f64 {
    let mut v = 1.0;
    for l in 1..=order {
        v *= 2.0 * l as f64;
    }
    1.0 / v.sqrt()
}

/// Transverse mode function
/// `Ψ_l(u, z) = N_l sqrt(w0/w) H_l(√2 u / w) exp(-u²/w²)`
/// with `N_l = 1/sqrt(2^l l!)` so that all orders carry the same transverse
/// power. `N_0 = 1`, so the fundamental mode is unity at the waist center.
pub fn mode_amplitude(geom: &BeamGeometry, order: u32, u: f64, z: f64) -> Result<f64> {
    if order > MAX_HERMITE_ORDER {
        return Err(Error::UnsupportedOrder { order, max: MAX_HERMITE_ORDER });
    }
    Ok(mode_amplitude_unchecked(geom, order, u, z))
}

#[inline]
pub(crate) fn mode_amplitude_unchecked(geom: &BeamGeometry, order: u32, u: f64, z: f64) -> f64 {
    let w = waist_at(geom, z);
    let s = u / w;
    hermite_norm(order)
        * (geom.waist / w).sqrt()
        * hermite_unchecked(order, std::f64::consts::SQRT_2 * s)
        * (-s * s).exp()
}

/// Standing-wave phase `kz - (m+n+1) atan(z/z_R) + k (x²+y²) / (2 r(z))`.
///
/// `x` and `y` are measured from the mode axis.
pub fn standing_wave_phase(geom: &BeamGeometry, mode: ModeIndex, x: f64, y: f64, z: f64) -> f64 {
    let k = geom.wavenumber;
    k * z - mode.gouy_order() as f64 * (z / geom.rayleigh_range).atan()
        + 0.5 * k * (x * x + y * y) * curvature_at(geom, z)
}
