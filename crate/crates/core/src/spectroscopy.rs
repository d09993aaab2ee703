//! Broadened cavity linewidth, synthetic cavity scans and their fits.
//!
//! All rates (`κ`, `κ′`, `γ`, `G`, `Δ`) are angular half-widths in rad/s.
//! A value quoted as "(2π)·X MHz" is `2π · X · 10⁶` here.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::levenberg_marquardt;

const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-8;
const MIN_SPECTRUM_POINTS: usize = 16;

/// `2π · f`, for frequencies quoted in MHz.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f * 1e6
}

/// Inverse of [`mhz`].
pub fn to_mhz(rate: f64) -> f64 {
    rate / (2.0 * PI * 1e6)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePhysics {
    /// Cavity field half-linewidth.
    pub kappa: f64,
    /// Optical dipole decay rate.
    pub gamma: f64,
    /// Probe detuning from the atomic resonance.
    pub delta: f64,
}

impl Default for ProbePhysics {
    fn default() -> Self {
        Self { kappa: mhz(2.15), gamma: mhz(11.2), delta: 0.0 }
    }
}

impl ProbePhysics {
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::Config(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !self.delta.is_finite() {
            return Err(Error::Config("delta must be finite".into()));
        }
        Ok(())
    }
}

/// Broadened half-width `κ′ = κ + G² γ / (γ² + Δ²)`.
pub fn effective_halfwidth(g_rate: f64, physics: &ProbePhysics) -> f64 {
    physics.kappa + broadening(g_rate, physics.gamma, physics.delta)
}

/// `G² γ / (γ² + Δ²)`.
pub fn broadening(g_rate: f64, gamma: f64, delta: f64) -> f64 {
    g_rate * g_rate * gamma / (gamma * gamma + delta * delta)
}

/// Cooperativity-form optical depth `G² / (κ γ)`.
pub fn optical_depth(g_rate: f64, physics: &ProbePhysics) -> f64 {
    g_rate * g_rate / (physics.kappa * physics.gamma)
}

/// Symmetric, evenly spaced cavity scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    /// Half of the scanned range, rad/s.
    pub half_span: f64,
    pub points: usize,
}

impl Default for ScanGrid {
    /// 1.2 GHz total scan sampled at 201 points.
    fn default() -> Self {
        Self { half_span: mhz(600.0), points: 201 }
    }
}

impl ScanGrid {
    pub fn detunings(&self) -> Vec<f64> {
        let n = self.points;
        let step = 2.0 * self.half_span / (n - 1) as f64;
        (0..n).map(|i| -self.half_span + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionSpectrum {
    scan_detunings: Vec<f64>,
    samples: Vec<f64>,
    noise_sigma: f64,
}

impl TransmissionSpectrum {
    pub fn new(scan_detunings: Vec<f64>, samples: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        if scan_detunings.len() != samples.len() {
            return Err(Error::Config(format!(
                "spectrum has {} detunings but {} samples",
                scan_detunings.len(),
                samples.len()
            )));
        }
        if samples.len() < MIN_SPECTRUM_POINTS {
            return Err(Error::Config(format!(
                "spectrum needs at least {MIN_SPECTRUM_POINTS} points, got {}",
                samples.len()
            )));
        }
        if scan_detunings.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("scan detunings must be strictly increasing".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("spectrum contains non-finite samples".into()));
        }
        if !(noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {noise_sigma}")));
        }
        Ok(Self { scan_detunings, samples, noise_sigma })
    }

    pub fn scan_detunings(&self) -> &[f64] {
        &self.scan_detunings
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }
}

/// Unit-height Lorentzian of half-width `κ′` plus Gaussian noise.
pub fn synthesize_spectrum(
    g_rate: f64,
    physics: &ProbePhysics,
    scan: &ScanGrid,
    noise_sigma: f64,
    seed: u64,
) -> Result<TransmissionSpectrum> {
    physics.validate()?;
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise_sigma must be >= 0, got {noise_sigma}")));
    }
    if !(scan.half_span > 0.0) || scan.points < MIN_SPECTRUM_POINTS {
        return Err(Error::Config(format!("scan needs a positive span and at least {MIN_SPECTRUM_POINTS} points")));
    }
    let width = effective_halfwidth(g_rate, physics);
    let w2 = width * width;
    let detunings = scan.detunings();
    let mut samples: Vec<f64> = detunings.iter().map(|d| w2 / (w2 + d * d)).collect();
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("finite sigma");
        for s in &mut samples {
            *s += normal.sample(&mut rng);
        }
    }
    TransmissionSpectrum::new(detunings, samples, noise_sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianUncertainties {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
    pub baseline: f64,
    pub uncertainties: LorentzianUncertainties,
    /// Root of the residual sum of squares.
    pub residual_norm: f64,
    pub iterations: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Robust white-noise level from first differences (MAD scaled to σ).
fn difference_noise(samples: &[f64]) -> f64 {
    let mut d: Vec<f64> = samples.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    1.482_602_218_505_602 * median(&mut d) / std::f64::consts::SQRT_2
}

/// Linear interpolation of the first crossing of `level` walking away from
/// `peak` in direction `dir` (±1), as a detuning.
fn half_crossing(x: &[f64], y: &[f64], peak: usize, level: f64, dir: isize) -> Option<f64> {
    let mut i = peak as isize;
    loop {
        let j = i + dir;
        if j < 0 || j as usize >= y.len() {
            return None;
        }
        let (a, b) = (i as usize, j as usize);
        if y[b] <= level {
            let t = (y[a] - level) / (y[a] - y[b]);
            return Some(x[a] + t * (x[b] - x[a]));
        }
        i = j;
    }
}

/// Least-squares fit of `A w² / (w² + (δ - c)²) + b`.
pub fn fit_lorentzian(spectrum: &TransmissionSpectrum) -> Result<LorentzianFit> {
    let x = spectrum.scan_detunings();
    let y = spectrum.samples();
    let n = y.len();

    let edge = (n / 10).max(3);
    let mut edges: Vec<f64> = y[..edge].iter().chain(&y[n - edge..]).copied().collect();
    let b0 = median(&mut edges);
    let (peak, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("spectrum is nonempty");
    let noise = spectrum.noise_sigma().max(difference_noise(y));
    let height = ymax - b0;
    if !(height > 5.0 * noise) || height <= 0.0 {
        return Err(Error::FitDegenerate(format!(
            "peak height {height:.3e} does not exceed 5x the noise level {noise:.3e}"
        )));
    }

    let a0 = ymax - y.iter().copied().fold(f64::INFINITY, f64::min);
    let level = b0 + 0.5 * height;
    let spacing = x[1] - x[0];
    let left = half_crossing(x, y, peak, level, -1);
    let right = half_crossing(x, y, peak, level, 1);
    let c0 = x[peak];
    let w0 = match (left, right) {
        (Some(l), Some(r)) => 0.5 * (r - l),
        (Some(l), None) => c0 - l,
        (None, Some(r)) => r - c0,
        (None, None) => spacing,
    }
    .max(0.5 * spacing);

    // fit in units of the width guess
    let scale = w0;
    let xs: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let p0 = DVector::from_vec(vec![a0, c0 / scale, 1.0, b0]);
    let out = levenberg_marquardt(
        p0,
        |p| {
            let (a, c, w, b) = (p[0], p[1], p[2], p[3]);
            let w2 = w * w;
            let mut r = DVector::zeros(n);
            let mut j = DMatrix::zeros(n, 4);
            for i in 0..n {
                let d = xs[i] - c;
                let den = w2 + d * d;
                let shape = w2 / den;
                r[i] = a * shape + b - y[i];
                j[(i, 0)] = shape;
                j[(i, 1)] = 2.0 * a * w2 * d / (den * den);
                j[(i, 2)] = 2.0 * a * w * d * d / (den * den);
                j[(i, 3)] = 1.0;
            }
            (r, j)
        },
        MAX_ITERATIONS,
        STEP_TOLERANCE,
    );

    let p = &out.params;
    let residual_norm = out.cost().sqrt();
    if !out.converged {
        return Err(Error::Accuracy {
            message: format!("Lorentzian fit did not converge in {MAX_ITERATIONS} iterations"),
            best: p[2].abs() * scale,
            rel_error: f64::NAN,
        });
    }
    let s2 = out.cost() / (n - 4) as f64;
    let cov = out
        .normal_matrix
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned("singular normal matrix in Lorentzian fit".into()))?;
    let se = |k: usize| (s2 * cov[(k, k)]).max(0.0).sqrt();
    Ok(LorentzianFit {
        center: p[1] * scale,
        half_width: p[2].abs() * scale,
        amplitude: p[0],
        baseline: p[3],
        uncertainties: LorentzianUncertainties {
            center: se(1) * scale,
            half_width: se(2) * scale,
            amplitude: se(0),
            baseline: se(3),
        },
        residual_norm,
        iterations: out.iterations,
    })
}

/// Measured linewidth broadening `κ′ - κ` at one probe detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BroadeningPoint {
    pub detuning: f64,
    pub broadening: f64,
    /// Standard error of `broadening`; zero means unknown.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingFit {
    /// Fitted `G`, rad/s.
    pub g_rate: f64,
    /// Fitted `γ`, rad/s.
    pub gamma_fit: f64,
    pub g_sigma: f64,
    pub gamma_sigma: f64,
    /// Root of the (weighted) residual sum of squares.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Data-consistency notes, e.g. significantly negative broadenings.
    pub warnings: Vec<String>,
}

/// Weighted least-squares fit of `G² γ / (γ² + Δ²)` with free `G` and `γ`.
///
/// Uncertainties are taken as absolute when every point has `sigma > 0`;
/// when all are zero the points are weighted equally and the errors are
/// scaled by the residual variance.
pub fn fit_coupling(series: &[BroadeningPoint], physics: &ProbePhysics) -> Result<CouplingFit> {
    physics.validate()?;
    if series.iter().any(|p| !(p.detuning.is_finite() && p.broadening.is_finite() && p.sigma >= 0.0)) {
        return Err(Error::Config("broadening series contains invalid values".into()));
    }
    let mut distinct: Vec<f64> = series.iter().map(|p| p.detuning).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let gamma_ref = physics.gamma;
    if distinct.len() < 4 {
        return Err(Error::IllConditioned(format!("need at least 4 distinct detunings, got {}", distinct.len())));
    }
    if distinct[0] > -gamma_ref || distinct[distinct.len() - 1] < gamma_ref {
        return Err(Error::IllConditioned("detunings must span at least -gamma..+gamma".into()));
    }
    let weighted = series.iter().all(|p| p.sigma > 0.0);
    if !weighted && series.iter().any(|p| p.sigma > 0.0) {
        return Err(Error::Config("either all or none of the points must carry uncertainties".into()));
    }

    // initial guess from the peak and its half-maximum span
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.detuning.total_cmp(&b.detuning));
    let xs: Vec<f64> = sorted.iter().map(|p| p.detuning).collect();
    let ys: Vec<f64> = sorted.iter().map(|p| p.broadening).collect();
    let (peak, &bmax) = ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
    if !(bmax > 0.0) {
        return Err(Error::IllConditioned("no positive broadening in the series".into()));
    }
    let level = 0.5 * bmax;
    let gamma0 = match (half_crossing(&xs, &ys, peak, level, -1), half_crossing(&xs, &ys, peak, level, 1)) {
        (Some(l), Some(r)) => 0.5 * (r - l),
        (Some(l), None) => xs[peak] - l,
        (None, Some(r)) => r - xs[peak],
        (None, None) => gamma_ref,
    };
    let gamma0 = if gamma0 > 0.0 { gamma0 } else { gamma_ref };

    let scale = gamma_ref;
    let n = series.len();
    let d: Vec<f64> = series.iter().map(|p| p.detuning / scale).collect();
    let b: Vec<f64> = series.iter().map(|p| p.broadening / scale).collect();
    let sw: Vec<f64> = series.iter().map(|p| if weighted { scale / p.sigma } else { 1.0 }).collect();
    let g0 = (bmax * gamma0).sqrt() / scale;
    let p0 = DVector::from_vec(vec![g0, gamma0 / scale]);

    let out = levenberg_marquardt(
        p0,
        |p| {
            let (g, gam) = (p[0], p[1]);
            let mut r = DVector::zeros(n);
            let mut j = DMatrix::zeros(n, 2);
            for i in 0..n {
                let den = gam * gam + d[i] * d[i];
                r[i] = sw[i] * (g * g * gam / den - b[i]);
                j[(i, 0)] = sw[i] * 2.0 * g * gam / den;
                j[(i, 1)] = sw[i] * g * g * (d[i] * d[i] - gam * gam) / (den * den);
            }
            (r, j)
        },
        MAX_ITERATIONS,
        STEP_TOLERANCE,
    );
    let p = &out.params;
    if !out.converged {
        return Err(Error::Accuracy {
            message: format!("coupling fit did not converge in {MAX_ITERATIONS} iterations"),
            best: p[0].abs() * scale,
            rel_error: f64::NAN,
        });
    }
    let cov = out
        .normal_matrix
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned("singular normal matrix in coupling fit".into()))?;
    let s2 = if weighted {
        1.0
    } else if n > 2 {
        out.cost() / (n - 2) as f64
    } else {
        0.0
    };

    let warnings = series
        .iter()
        .filter(|p| p.sigma > 0.0 && p.broadening < -3.0 * p.sigma)
        .map(|p| {
            format!(
                "broadening {:.4} MHz at detuning {:.4} MHz is negative beyond 3 sigma",
                to_mhz(p.broadening),
                to_mhz(p.detuning)
            )
        })
        .collect();

    let residual_norm = if weighted { out.cost().sqrt() } else { out.cost().sqrt() * scale };
    Ok(CouplingFit {
        g_rate: p[0].abs() * scale,
        gamma_fit: p[1].abs() * scale,
        g_sigma: (s2 * cov[(0, 0)]).max(0.0).sqrt() * scale,
        gamma_sigma: (s2 * cov[(1, 1)]).max(0.0).sqrt() * scale,
        residual_norm,
        iterations: out.iterations,
        warnings,
    })
}

/// Noise-free broadening series at the given detunings.
pub fn broadening_series(g_rate: f64, physics: &ProbePhysics, detunings: &[f64]) -> Vec<BroadeningPoint> {
    detunings
        .iter()
        .map(|&delta| BroadeningPoint {
            detuning: delta,
            broadening: effective_halfwidth(g_rate, &physics.with_delta(delta)) - physics.kappa,
            sigma: 0.0,
        })
        .collect()
}

/// `count` detunings evenly spaced over `[-half_span, half_span]`.
pub fn symmetric_detunings(half_span: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.0];
    }
    (0..count).map(|i| -half_span + 2.0 * half_span * i as f64 / (count - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const G00: f64 = 11.6;

    #[test]
    fn halfwidth_anchor_values() {
        let p = ProbePhysics::default();
        // 2.15 + 11.6²/11.2
        assert_relative_eq!(effective_halfwidth(mhz(G00), &p), mhz(14.164285714285714), max_relative = 1e-12);
        assert_eq!(effective_halfwidth(0.0, &p), p.kappa);
        let b0 = effective_halfwidth(mhz(G00), &p) - p.kappa;
        let bg = effective_halfwidth(mhz(G00), &p.with_delta(p.gamma)) - p.kappa;
        assert_relative_eq!(bg, 0.5 * b0, max_relative = 1e-15);
        assert_relative_eq!(optical_depth(mhz(G00), &p), 11.6 * 11.6 / (2.15 * 11.2), max_relative = 1e-12);
    }

    #[test]
    fn broadening_sum_rule() {
        // ∫ G²γ/(γ²+Δ²) dΔ = π G², for any γ
        let g = mhz(G00);
        for gamma in [mhz(5.0), mhz(11.2), mhz(30.0)] {
            let p = ProbePhysics { gamma, ..ProbePhysics::default() };
            let span = 1e6 * gamma;
            let r = crate::quadrature::integrate(
                |t: f64| {
                    // Δ = γ tan t
                    let delta = gamma * t.tan();
                    let jac = gamma / t.cos().powi(2);
                    (effective_halfwidth(g, &p.with_delta(delta)) - p.kappa) * jac
                },
                -(span / gamma).atan(),
                (span / gamma).atan(),
                1e-12,
            );
            assert_relative_eq!(r.value[0], PI * g * g, max_relative = 1e-6);
            let a = effective_halfwidth(g, &p.with_delta(3.3e7));
            assert_eq!(a, effective_halfwidth(g, &p.with_delta(-3.3e7)));
        }
    }

    #[test]
    fn synthesized_spectrum_shape() {
        let p = ProbePhysics::default();
        let width = effective_halfwidth(mhz(G00), &p);
        let s = synthesize_spectrum(mhz(G00), &p, &ScanGrid::default(), 0.0, 1).unwrap();
        assert_eq!(s.samples().len(), 201);
        assert_eq!(s.samples()[100], 1.0);
        let grid = ScanGrid { half_span: 8.0 * width, points: 17 };
        let s = synthesize_spectrum(mhz(G00), &p, &grid, 0.0, 1).unwrap();
        assert_relative_eq!(s.samples()[9], 0.5, max_relative = 1e-14);
        let a = synthesize_spectrum(mhz(G00), &p, &ScanGrid::default(), 0.01, 5).unwrap();
        let b = synthesize_spectrum(mhz(G00), &p, &ScanGrid::default(), 0.01, 5).unwrap();
        assert_eq!(a, b);
        assert!(synthesize_spectrum(mhz(G00), &p, &ScanGrid::default(), -0.1, 5).is_err());
    }

    #[test]
    fn spectrum_validation() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(TransmissionSpectrum::new(x.clone(), vec![0.0; 19], 0.0).is_err());
        assert!(TransmissionSpectrum::new(x[..10].to_vec(), vec![0.0; 10], 0.0).is_err());
        let mut bad = x.clone();
        bad[5] = bad[4];
        assert!(TransmissionSpectrum::new(bad, vec![0.0; 20], 0.0).is_err());
    }

    #[test]
    fn noiseless_lorentzian_is_recovered() {
        let (a, c, w, b) = (0.8, mhz(3.0), mhz(14.0), 0.05);
        let x = ScanGrid::default().detunings();
        let y = x.iter().map(|d| a * w * w / (w * w + (d - c).powi(2)) + b).collect();
        let fit = fit_lorentzian(&TransmissionSpectrum::new(x, y, 0.0).unwrap()).unwrap();
        assert_relative_eq!(fit.amplitude, a, max_relative = 1e-6);
        assert_relative_eq!(fit.center, c, max_relative = 1e-6);
        assert_relative_eq!(fit.half_width, w, max_relative = 1e-6);
        assert_relative_eq!(fit.baseline, b, max_relative = 1e-6);
    }

    #[test]
    fn noisy_halfwidth_coverage() {
        let p = ProbePhysics::default();
        let truth = effective_halfwidth(mhz(G00), &p);
        let hits = (0..100)
            .filter(|&seed| {
                let s = synthesize_spectrum(mhz(G00), &p, &ScanGrid::default(), 0.01, seed).unwrap();
                let f = fit_lorentzian(&s).unwrap();
                (f.half_width - truth).abs() <= 3.0 * f.uncertainties.half_width
            })
            .count();
        assert!(hits >= 95, "{hits}/100");
    }

    #[test]
    fn pure_noise_is_degenerate() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normal = Normal::new(0.0, 0.01).unwrap();
        let x = ScanGrid::default().detunings();
        for _ in 0..20 {
            let y = x.iter().map(|_| normal.sample(&mut rng)).collect();
            let s = TransmissionSpectrum::new(x.clone(), y, 0.0).unwrap();
            assert!(matches!(fit_lorentzian(&s), Err(Error::FitDegenerate(_))));
        }
    }

    #[test]
    fn noiseless_coupling_series_is_recovered() {
        let p = ProbePhysics::default();
        let truth = ProbePhysics { gamma: mhz(11.2), ..p };
        let series = broadening_series(mhz(G00), &truth, &symmetric_detunings(mhz(30.0), 9));
        let fit = fit_coupling(&series, &p).unwrap();
        assert_relative_eq!(fit.g_rate, mhz(G00), max_relative = 1e-6);
        assert_relative_eq!(fit.gamma_fit, mhz(11.2), max_relative = 1e-6);
        assert!(fit.warnings.is_empty());
    }

    #[test]
    fn coupling_series_guards() {
        let p = ProbePhysics::default();
        let zeros: Vec<_> = (0..6).map(|_| BroadeningPoint { detuning: 0.0, broadening: 1e7, sigma: 1e5 }).collect();
        assert!(matches!(fit_coupling(&zeros, &p), Err(Error::IllConditioned(_))));
        let narrow = broadening_series(mhz(G00), &p, &symmetric_detunings(mhz(5.0), 9));
        assert!(matches!(fit_coupling(&narrow, &p), Err(Error::IllConditioned(_))));
        let mut mixed = broadening_series(mhz(G00), &p, &symmetric_detunings(mhz(30.0), 9));
        mixed[0].sigma = 1.0;
        assert!(matches!(fit_coupling(&mixed, &p), Err(Error::Config(_))));
    }

    #[test]
    fn negative_broadening_is_flagged() {
        let p = ProbePhysics::default();
        let mut series = broadening_series(mhz(G00), &p, &symmetric_detunings(mhz(30.0), 9));
        for pt in &mut series {
            pt.sigma = mhz(0.1);
        }
        series[0].broadening = -mhz(0.5);
        let fit = fit_coupling(&series, &p).unwrap();
        assert_eq!(fit.warnings.len(), 1);
    }

    #[test]
    fn fitted_g_ignores_common_weight_scale() {
        use rand::SeedableRng;
        let p = ProbePhysics::default();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut series = broadening_series(mhz(G00), &p, &symmetric_detunings(mhz(30.0), 9));
        for pt in &mut series {
            pt.sigma = mhz(0.1);
            pt.broadening += pt.sigma * normal.sample(&mut rng);
        }
        let a = fit_coupling(&series, &p).unwrap();
        let scaled: Vec<_> = series.iter().map(|pt| BroadeningPoint { sigma: 7.5 * pt.sigma, ..*pt }).collect();
        let b = fit_coupling(&scaled, &p).unwrap();
        assert_relative_eq!(a.g_rate, b.g_rate, max_relative = 1e-9);
        assert_relative_eq!(b.g_sigma, 7.5 * a.g_sigma, max_relative = 1e-6);
    }
}
