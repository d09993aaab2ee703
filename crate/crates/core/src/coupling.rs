//! Collective coupling rate of a crystal to a TEM_mn mode.
//!
//! The squared rate is `G² = g² ρ I`, where `I` is the volume integral over
//! the crystal of `Ψ_m² Ψ_n² sin²(phase)`. Three evaluation routes are
//! available:
//!
//! * [`Method::PhaseAveraged`] replaces `sin²` by its mean `1/2` and
//!   integrates the smooth envelope. Transverse nodes are outer, the chord
//!   along z is inner.
//! * [`Method::Oscillatory`] keeps the standing wave. `sin² = (1 - cos 2φ)/2`
//!   splits the integrand into the envelope and a term whose only fast
//!   dependence on z is `exp(2i(kz - Gouy))`. The transverse moments of the
//!   slow part are sampled on a Chebyshev grid in z, and the fast term is
//!   integrated in closed form over slabs no longer than λ/16.
//! * [`Method::MonteCarlo`] averages the full integrand over uniform samples.
//!
//! The transverse disk of radius `r` is parameterized as
//! `ξ = r sin θ`, `η = r cos θ sin ψ` with `θ, ψ ∈ [-π/2, π/2]`. The Jacobian
//! `r² cos²θ cos ψ` and the chord half-length `L cos θ cos ψ` are then smooth,
//! which removes the square-root edge of the spheroid.

use std::cell::Cell;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{self, curvature_at, waist_at, BeamGeometry, ModeIndex};
use crate::crystal::{self, derive_seed, CrystalSpec, SpheroidSampler, MIN_DIMENSION};
use crate::error::{Error, Result};
use crate::quadrature::{clenshaw_curtis_weights, integrate_adaptive, lobatto_nodes, ChebyshevInterpolant};

const MAX_PANELS: usize = 2000;
const MIN_CHEBYSHEV_ORDER: usize = 16;
const MAX_CHEBYSHEV_ORDER: usize = 1024;
const MC_CHUNK: usize = 1 << 16;

/// Slabs are at most this fraction of a wavelength long.
pub const SLAB_FRACTION_OF_WAVELENGTH: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PhaseAveraged,
    Oscillatory,
    MonteCarlo,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::PhaseAveraged => "averaged",
            Method::Oscillatory => "oscillatory",
            Method::MonteCarlo => "mc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "averaged" | "phase_averaged" | "phase-averaged" => Ok(Method::PhaseAveraged),
            "oscillatory" => Ok(Method::Oscillatory),
            "mc" | "montecarlo" | "monte_carlo" | "monte-carlo" => Ok(Method::MonteCarlo),
            other => Err(Error::Config(format!("unknown method {other:?}; expected averaged, oscillatory or mc"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    /// Single-ion coupling at an anti-node of TEM00, rad/s.
    pub single_ion_g: f64,
    pub method: Method,
    pub rel_tolerance: f64,
    pub mc_samples: usize,
    pub mc_seed: u64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            single_ion_g: 1.0,
            method: Method::PhaseAveraged,
            rel_tolerance: 1e-4,
            mc_samples: 1_000_000,
            mc_seed: 0,
        }
    }
}

impl CouplingConfig {
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.single_ion_g.is_finite() && self.single_ion_g > 0.0) {
            return Err(Error::Config(format!("single_ion_g must be > 0, got {}", self.single_ion_g)));
        }
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance <= 0.1) {
            return Err(Error::Config(format!("rel_tolerance must lie in (0, 0.1], got {}", self.rel_tolerance)));
        }
        if self.mc_samples < 1000 {
            return Err(Error::Config(format!("mc_samples must be >= 1000, got {}", self.mc_samples)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    /// `G²` in rad²/s².
    pub g_squared: f64,
    /// `G` in rad/s.
    pub g_rate: f64,
    pub est_rel_error: f64,
    pub method_used: Method,
    pub evaluations: u64,
}

/// Value of the volume integral `I` (m³) with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub value: f64,
    pub est_rel_error: f64,
    pub evaluations: u64,
}

/// `Ψ_m²(u, z) Ψ_n²(v, z)` with `(u, v)` measured from the mode axis.
#[inline]
fn envelope(geom: &BeamGeometry, mode: ModeIndex, u: f64, v: f64, z: f64) -> f64 {
    let w = waist_at(geom, z);
    let (su, sv) = (u / w, v / w);
    let hu = beam::hermite_unchecked(mode.m, std::f64::consts::SQRT_2 * su) * beam::hermite_norm(mode.m);
    let hv = beam::hermite_unchecked(mode.n, std::f64::consts::SQRT_2 * sv) * beam::hermite_norm(mode.n);
    let a = hu * hv;
    let ratio = geom.waist() / w;
    ratio * ratio * a * a * (-2.0 * (su * su + sv * sv)).exp()
}

/// Full integrand with `(x, y)` measured from the mode axis.
pub fn field_intensity(geom: &BeamGeometry, mode: ModeIndex, x: f64, y: f64, z: f64) -> f64 {
    let s = beam::standing_wave_phase(geom, mode, x, y, z).sin();
    envelope(geom, mode, x, y, z) * s * s
}

/// Integrand of the coupling integral at integration point `(x, y, z)`:
/// mode functions and wavefront curvature take the shifted transverse
/// coordinates `(x - x0, y - y0)`.
pub fn integrand(geom: &BeamGeometry, mode: ModeIndex, spec: &CrystalSpec, x: f64, y: f64, z: f64) -> f64 {
    field_intensity(geom, mode, x - spec.offset_x(), y - spec.offset_y(), z)
}

fn check_inputs(mode: ModeIndex, spec: &CrystalSpec, cfg: &CouplingConfig) -> Result<()> {
    cfg.validate()?;
    mode.check_supported()?;
    if spec.radius() < MIN_DIMENSION || spec.half_length() < MIN_DIMENSION {
        return Err(Error::Config(format!(
            "crystal dimensions below 1 nm (R = {:e} m, L = {:e} m)",
            spec.radius(),
            spec.half_length()
        )));
    }
    Ok(())
}

/// Volume integral `I` of the coupling expression with the configured method.
pub fn overlap_integral(
    geom: &BeamGeometry,
    mode: ModeIndex,
    spec: &CrystalSpec,
    cfg: &CouplingConfig,
) -> Result<Overlap> {
    check_inputs(mode, spec, cfg)?;
    match cfg.method {
        Method::PhaseAveraged => phase_averaged(geom, mode, spec, cfg.rel_tolerance),
        Method::Oscillatory => oscillatory(geom, mode, spec, cfg.rel_tolerance),
        Method::MonteCarlo => Ok(monte_carlo(geom, mode, spec, cfg.mc_samples, cfg.mc_seed)),
    }
}

/// `G_mn²` and `G_mn` for the crystal.
pub fn compute_coupling(
    geom: &BeamGeometry,
    mode: ModeIndex,
    spec: &CrystalSpec,
    cfg: &CouplingConfig,
) -> Result<CouplingResult> {
    let overlap = overlap_integral(geom, mode, spec, cfg)?;
    let g_squared = cfg.single_ion_g * cfg.single_ion_g * spec.density() * overlap.value;
    Ok(CouplingResult {
        g_squared,
        g_rate: g_squared.sqrt(),
        est_rel_error: overlap.est_rel_error,
        method_used: cfg.method,
        evaluations: overlap.evaluations,
    })
}

/// `G_mn² / reference.g_squared`.
pub fn normalized_coupling(
    geom: &BeamGeometry,
    mode: ModeIndex,
    spec: &CrystalSpec,
    cfg: &CouplingConfig,
    reference: &CouplingResult,
) -> Result<f64> {
    if !(reference.g_squared > 0.0) {
        return Err(Error::Domain(format!("reference coupling must be positive, got {}", reference.g_squared)));
    }
    Ok(compute_coupling(geom, mode, spec, cfg)?.g_squared / reference.g_squared)
}

/// Single-ion coupling `g` for which the crystal reaches collective rate
/// `target_rate` (rad/s) in `mode`.
pub fn calibrate_single_ion_g(
    geom: &BeamGeometry,
    mode: ModeIndex,
    spec: &CrystalSpec,
    cfg: &CouplingConfig,
    target_rate: f64,
) -> Result<f64> {
    if !(target_rate > 0.0) {
        return Err(Error::Domain(format!("target rate must be positive, got {target_rate}")));
    }
    let overlap = overlap_integral(geom, mode, spec, cfg)?;
    if !(overlap.value > 0.0) {
        return Err(Error::Domain("crystal does not overlap the mode".into()));
    }
    Ok(target_rate / (spec.density() * overlap.value).sqrt())
}

/// Limit of the phase-averaged integral for `R → ∞`: `π w0² L / 2`,
/// independent of the transverse order.
pub fn envelope_limit(geom: &BeamGeometry, half_length: f64) -> f64 {
    std::f64::consts::PI * geom.waist() * geom.waist() * half_length / 2.0
}

fn accuracy(what: &str, value: f64, abs_err: f64) -> Error {
    Error::Accuracy {
        message: format!("{what} did not reach the requested tolerance"),
        best: value,
        rel_error: if value != 0.0 { abs_err / value.abs() } else { f64::INFINITY },
    }
}

fn phase_averaged(geom: &BeamGeometry, mode: ModeIndex, spec: &CrystalSpec, tol: f64) -> Result<Overlap> {
    let (r, l) = (spec.radius(), spec.half_length());
    let (x0, y0) = (spec.offset_x(), spec.offset_y());
    let evaluations = Cell::new(0u64);
    let inner_ok = Cell::new(true);

    let outer = integrate_adaptive(
        |theta: f64| {
            let (st, ct) = theta.sin_cos();
            let xi = r * st;
            let inner = integrate_adaptive(
                |psi: f64| {
                    let (sp, cp) = psi.sin_cos();
                    let eta = r * ct * sp;
                    let zmax = l * ct * cp;
                    // symmetric chord; the factor 2 cancels the 1/2 mean of sin²
                    let chord = integrate_adaptive(
                        |z: f64| ([envelope(geom, mode, xi - x0, eta - y0, z)], 0.0),
                        0.0,
                        zmax,
                        tol / 16.0,
                        0.0,
                        64,
                    );
                    evaluations.set(evaluations.get() + chord.evaluations as u64);
                    inner_ok.set(inner_ok.get() && chord.converged);
                    let jac = r * r * ct * ct * cp;
                    ([jac * chord.value[0]], jac * chord.error)
                },
                -FRAC_PI_2,
                FRAC_PI_2,
                tol / 4.0,
                0.0,
                MAX_PANELS,
            );
            inner_ok.set(inner_ok.get() && inner.converged);
            (inner.value, inner.error)
        },
        -FRAC_PI_2,
        FRAC_PI_2,
        tol,
        0.0,
        MAX_PANELS,
    );

    let value = outer.value[0];
    if !(outer.converged && inner_ok.get()) {
        return Err(accuracy("phase-averaged quadrature", value, outer.error));
    }
    Ok(Overlap {
        value,
        est_rel_error: if value > 0.0 { outer.error / value } else { 0.0 },
        evaluations: evaluations.get(),
    })
}

/// Transverse moments at height `z`: `∫ E dA` and `∫ E exp(i k ρ² / r(z)) dA`
/// over the cross-section of the crystal.
fn cross_section_moments(
    geom: &BeamGeometry,
    mode: ModeIndex,
    spec: &CrystalSpec,
    z: f64,
    tol: f64,
) -> ([f64; 3], f64, u64, bool) {
    let l = spec.half_length();
    let q = z / l;
    let r = spec.radius() * (1.0 - q * q).max(0.0).sqrt();
    if r == 0.0 {
        return ([0.0; 3], 0.0, 0, true);
    }
    let (x0, y0) = (spec.offset_x(), spec.offset_y());
    let kc = geom.wavenumber() * curvature_at(geom, z);
    let evaluations = Cell::new(0u64);
    let inner_ok = Cell::new(true);

    let outer = integrate_adaptive(
        |theta: f64| {
            let (st, ct) = theta.sin_cos();
            let u = r * st - x0;
            let inner = integrate_adaptive(
                |psi: f64| {
                    let (sp, cp) = psi.sin_cos();
                    let v = r * ct * sp - y0;
                    let e = envelope(geom, mode, u, v, z) * r * r * ct * ct * cp;
                    let (s, c) = (kc * (u * u + v * v)).sin_cos();
                    ([e, e * c, e * s], 0.0)
                },
                -FRAC_PI_2,
                FRAC_PI_2,
                tol / 4.0,
                0.0,
                MAX_PANELS,
            );
            evaluations.set(evaluations.get() + inner.evaluations as u64);
            inner_ok.set(inner_ok.get() && inner.converged);
            (inner.value, inner.error)
        },
        -FRAC_PI_2,
        FRAC_PI_2,
        tol,
        0.0,
        MAX_PANELS,
    );
    (outer.value, outer.error, evaluations.get(), outer.converged && inner_ok.get())
}

/// `Re ∫_0^L exp(2i(kz - Gouy(z))) Q(z) dz` by closed-form slabs with the
/// phase and `Q` linear across each slab.
fn standing_wave_term(geom: &BeamGeometry, mode: ModeIndex, l: f64, q: &ChebyshevInterpolant<3>) -> f64 {
    let k = geom.wavenumber();
    let zr = geom.rayleigh_range();
    let gouy = mode.gouy_order() as f64;
    let phase = |z: f64| 2.0 * (k * z - gouy * (z / zr).atan());
    let amp = |z: f64| {
        let v = q.eval(z);
        Complex64::new(v[1], v[2])
    };

    let slabs = (l / (SLAB_FRACTION_OF_WAVELENGTH * geom.wavelength())).ceil().max(1.0) as usize;
    let h = l / slabs as f64;
    let i = Complex64::i();
    let mut total = Complex64::new(0.0, 0.0);
    let (mut za, mut pa, mut qa) = (0.0, phase(0.0), amp(0.0));
    for s in 1..=slabs {
        let zb = if s == slabs { l } else { s as f64 * h };
        let width = zb - za;
        let (pb, qb) = (phase(zb), amp(zb));
        let beta = (pb - pa) / width;
        let e = Complex64::from_polar(1.0, beta * width);
        let m0 = (e - 1.0) / (i * beta);
        let m1 = e * width / (i * beta) + (e - 1.0) / (beta * beta);
        total += Complex64::from_polar(1.0, pa) * (qa * m0 + (qb - qa) / width * m1);
        za = zb;
        pa = pb;
        qa = qb;
    }
    total.re
}

fn oscillatory(geom: &BeamGeometry, mode: ModeIndex, spec: &CrystalSpec, tol: f64) -> Result<Overlap> {
    let l = spec.half_length();
    let slice_tol = tol / 8.0;
    let mut evaluations = 0u64;
    let mut all_converged = true;

    let mut order = MIN_CHEBYSHEV_ORDER;
    let mut values: Vec<([f64; 3], f64)> = Vec::new();
    let mut previous: Option<f64> = None;

    loop {
        // the integrand is even in z, so only [0, L] is sampled
        let nodes = lobatto_nodes(order, 0.0, l);
        let mut next = Vec::with_capacity(order + 1);
        for (j, &z) in nodes.iter().enumerate() {
            if !values.is_empty() && j % 2 == 0 {
                next.push(values[j / 2]);
            } else {
                let (v, err, ev, ok) = cross_section_moments(geom, mode, spec, z, slice_tol);
                evaluations += ev;
                all_converged &= ok;
                next.push((v, err));
            }
        }
        values = next;

        let weights = clenshaw_curtis_weights(order, 0.0, l);
        let smooth: f64 = weights.iter().zip(&values).map(|(w, (v, _))| w * v[0]).sum();
        let slice_err: f64 = weights.iter().zip(&values).map(|(w, (_, e))| w.abs() * e).sum();
        let interp = ChebyshevInterpolant::new(nodes, values.iter().map(|(v, _)| *v).collect());
        // ∫_{-L}^{L} (1 - cos 2φ)/2 = ∫_0^L (P - Re[e^{2iφ0} Q])
        let total = smooth - standing_wave_term(geom, mode, l, &interp);

        if let Some(prev) = previous {
            let change = (total - prev).abs();
            let err = change + 2.0 * slice_err;
            if err <= tol * total.abs() {
                if !all_converged {
                    return Err(accuracy("oscillatory cross-section quadrature", total, err));
                }
                return Ok(Overlap {
                    value: total,
                    est_rel_error: if total > 0.0 { err / total } else { 0.0 },
                    evaluations,
                });
            }
            if order >= MAX_CHEBYSHEV_ORDER {
                return Err(accuracy("oscillatory Chebyshev refinement", total, err));
            }
        }
        previous = Some(total);
        order *= 2;
    }
}

fn monte_carlo(geom: &BeamGeometry, mode: ModeIndex, spec: &CrystalSpec, samples: usize, seed: u64) -> Overlap {
    let chunks = samples.div_ceil(MC_CHUNK);
    // per-chunk (count, mean, sum of squared deviations); combined in chunk order
    let stats: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut sampler = SpheroidSampler::new(spec, derive_seed(seed, c as u64));
            let (mut mean, mut m2) = (0.0, 0.0);
            for i in 0..count {
                let [x, y, z] = sampler.next_point();
                let f = field_intensity(geom, mode, x, y, z);
                let d = f - mean;
                mean += d / (i + 1) as f64;
                m2 += d * (f - mean);
            }
            (count as f64, mean, m2)
        })
        .collect();

    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for (nb, mb, m2b) in stats {
        let total = n + nb;
        let d = mb - mean;
        mean += d * nb / total;
        m2 += m2b + d * d * n * nb / total;
        n = total;
    }
    let vol = crystal::volume(spec);
    let se = (m2 / (n - 1.0) / n).sqrt();
    Overlap { value: mean * vol, est_rel_error: if mean > 0.0 { se / mean } else { 0.0 }, evaluations: samples as u64 }
}
