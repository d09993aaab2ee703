//! Built-in invariant and consistency suite, run by `cavicrys selftest`.

use std::f64::consts::PI;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::beam::{mode_amplitude, waist_at, BeamGeometry, ModeIndex};
use crate::coupling::{compute_coupling, envelope_limit, overlap_integral, CouplingConfig, Method};
use crate::crystal::{derive_seed, sample_uniform, CrystalSpec};
use crate::spectroscopy::{
    broadening, broadening_series, effective_halfwidth, fit_coupling, fit_lorentzian, mhz, symmetric_detunings,
    synthesize_spectrum, to_mhz, BroadeningPoint, ProbePhysics, ScanGrid,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<28} {} ({:.2} s)", self.name, self.detail, self.seconds)
    }
}

type Check = fn() -> Result<String, String>;

const CHECKS: &[(&str, Check)] = &[
    ("mode_power_conservation", mode_power_conservation),
    ("mode_parity", mode_parity),
    ("rayleigh_range", rayleigh_range),
    ("sampler_moments", sampler_moments),
    ("coupling_linearity", coupling_linearity),
    ("coupling_symmetries", coupling_symmetries),
    ("method_agreement", method_agreement),
    ("radius_saturation", radius_saturation),
    ("linewidth_anchor", linewidth_anchor),
    ("lorentzian_bias", lorentzian_bias),
    ("coupling_fit_pulls", coupling_fit_pulls),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs every check in order.
pub fn run_selftest() -> Vec<CheckOutcome> {
    CHECKS.iter().map(|&(name, check)| run_one(name, check)).collect()
}

/// Runs the named check, or `None` if no check has that name.
pub fn run_check(name: &str) -> Option<CheckOutcome> {
    CHECKS.iter().find(|(n, _)| *n == name).map(|&(n, c)| run_one(n, c))
}

fn run_one(name: &'static str, check: Check) -> CheckOutcome {
    let start = Instant::now();
    let result = check();
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(detail) => CheckOutcome { name, passed: true, detail, seconds },
        Err(detail) => CheckOutcome { name, passed: false, detail, seconds },
    }
}

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn geom() -> BeamGeometry {
    BeamGeometry::default_cavity()
}

fn cfg(method: Method) -> CouplingConfig {
    CouplingConfig::default().with_method(method)
}

fn mode_power_conservation() -> Result<String, String> {
    let g = geom();
    let expected = g.waist() * (PI / 2.0).sqrt();
    let mut worst: f64 = 0.0;
    for z in [0.0, 336e-6, g.rayleigh_range()] {
        let w = waist_at(&g, z);
        let (a, n) = (-12.0 * w, 4000);
        let h = -2.0 * a / n as f64;
        for l in 0..=5 {
            let mut sum = 0.0;
            for i in 0..=n {
                let c = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let psi = mode_amplitude(&g, l, a + i as f64 * h, z).map_err(|e| e.to_string())?;
                sum += c * psi * psi;
            }
            worst = worst.max(rel(sum * h / 3.0, expected));
        }
    }
    ensure(worst < 1e-6, || format!("max relative deviation {worst:.2e}"))?;
    Ok(format!("orders 0..=5, max relative deviation {worst:.1e}"))
}

fn mode_parity() -> Result<String, String> {
    let g = geom();
    for l in 0..=8 {
        for i in 1..=20 {
            let u = i as f64 * 7.3e-6;
            let z = i as f64 * 1.7e-4 - 1.5e-3;
            let a = mode_amplitude(&g, l, u, z).map_err(|e| e.to_string())?;
            let b = mode_amplitude(&g, l, -u, z).map_err(|e| e.to_string())?;
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            ensure(b == sign * a, || format!("order {l} at u={u:e}: {a} vs {b}"))?;
        }
    }
    Ok("orders 0..=8 exact".into())
}

fn rayleigh_range() -> Result<String, String> {
    let zr = geom().rayleigh_range();
    ensure(rel(zr, 5e-3) <= 0.01, || format!("z_R = {zr:e} m"))?;
    Ok(format!("z_R = {:.4} mm", zr * 1e3))
}

fn sampler_moments() -> Result<String, String> {
    let spec = CrystalSpec::new(300e-6, 60e-6, 1e14).map_err(|e| e.to_string())?.with_offsets(10e-6, -5e-6);
    let n = 1_000_000;
    let pts = sample_uniform(&spec, 7, n);
    let nf = n as f64;
    let mut sums = [[0.0; 2]; 3];
    for p in &pts {
        let centered = [p[0] - spec.offset_x(), p[1] - spec.offset_y(), p[2]];
        for (s, c) in sums.iter_mut().zip(centered) {
            s[0] += c;
            s[1] += c * c;
        }
    }
    let extents = [spec.radius(), spec.radius(), spec.half_length()];
    let mut worst: f64 = 0.0;
    for (s, a) in sums.iter().zip(extents) {
        let var = a * a / 5.0;
        let mean_pull = (s[0] / nf) / (var / nf).sqrt();
        // fourth moment of the coordinate: 3a⁴/35
        let var2 = 3.0 * a.powi(4) / 35.0 - var * var;
        let second_pull = (s[1] / nf - var) / (var2 / nf).sqrt();
        worst = worst.max(mean_pull.abs()).max(second_pull.abs());
    }
    ensure(worst < 5.0, || format!("moment pull {worst:.2}"))?;
    Ok(format!("1e6 samples, max moment pull {worst:.2} SE"))
}

fn coupling_linearity() -> Result<String, String> {
    let g = geom();
    let spec = CrystalSpec::new(336e-6, 40e-6, 3.8e14).map_err(|e| e.to_string())?;
    let base = compute_coupling(&g, ModeIndex::TEM00, &spec, &cfg(Method::PhaseAveraged)).map_err(|e| e.to_string())?;
    let dense = compute_coupling(
        &g,
        ModeIndex::TEM00,
        &spec.with_density(7.6e14).map_err(|e| e.to_string())?,
        &cfg(Method::PhaseAveraged),
    )
    .map_err(|e| e.to_string())?;
    let strong = compute_coupling(
        &g,
        ModeIndex::TEM00,
        &spec,
        &CouplingConfig { single_ion_g: 3.0, ..cfg(Method::PhaseAveraged) },
    )
    .map_err(|e| e.to_string())?;
    let d1 = rel(dense.g_squared, 2.0 * base.g_squared);
    let d2 = rel(strong.g_squared, 9.0 * base.g_squared);
    ensure(d1 < 1e-12 && d2 < 1e-12, || format!("density {d1:.1e}, g {d2:.1e}"))?;
    Ok("G² ∝ ρ and ∝ g² to 1e-12".into())
}

fn coupling_symmetries() -> Result<String, String> {
    let g = geom();
    let c = cfg(Method::PhaseAveraged);
    let spec = CrystalSpec::new(336e-6, 20e-6, 3.8e14).map_err(|e| e.to_string())?;
    let at = |mode, x, y| {
        compute_coupling(&g, mode, &spec.with_offsets(x, y), &c).map(|r| r.g_squared).map_err(|e| e.to_string())
    };
    let mut worst: f64 = 0.0;
    for mode in [ModeIndex::TEM00, ModeIndex::TEM10] {
        worst = worst.max(rel(at(mode, -25e-6, 0.0)?, at(mode, 25e-6, 0.0)?));
    }
    worst = worst.max(rel(at(ModeIndex::TEM10, 15e-6, 0.0)?, at(ModeIndex::TEM01, 0.0, 15e-6)?));
    ensure(worst < 1e-6, || format!("max asymmetry {worst:.2e}"))?;
    Ok(format!("reflection and mode swap, max asymmetry {worst:.1e}"))
}

fn method_agreement() -> Result<String, String> {
    let g = geom();
    let mut worst_det: f64 = 0.0;
    let mut worst_mc: f64 = 0.0;
    for (l, r) in [(336e-6, 40e-6), (240e-6, 10e-6)] {
        let spec = CrystalSpec::new(l, r, 3.8e14).map_err(|e| e.to_string())?;
        for mode in [ModeIndex::TEM00, ModeIndex::TEM10] {
            let run = |m| overlap_integral(&g, mode, &spec, &cfg(m)).map_err(|e| e.to_string());
            let pa = run(Method::PhaseAveraged)?;
            let osc = run(Method::Oscillatory)?;
            let mc = run(Method::MonteCarlo)?;
            let d = rel(osc.value, pa.value);
            let pull = (mc.value - pa.value).abs() / (mc.est_rel_error * mc.value.abs());
            ensure(d <= 5e-3, || format!("{mode} L={l:e} R={r:e}: averaged vs oscillatory {d:.2e}"))?;
            ensure(pull <= 4.0, || format!("{mode} L={l:e} R={r:e}: Monte Carlo off by {pull:.2} SE"))?;
            worst_det = worst_det.max(d);
            worst_mc = worst_mc.max(pull);
        }
    }
    Ok(format!("averaged/oscillatory {worst_det:.1e}, Monte Carlo within {worst_mc:.2} SE"))
}

fn radius_saturation() -> Result<String, String> {
    let g = geom();
    let c = cfg(Method::PhaseAveraged);
    let l = 336e-6;
    let limit = envelope_limit(&g, l);
    let base = CrystalSpec::new(l, 1e-6, 1.0).map_err(|e| e.to_string())?;
    let mut last = [0.0; 2];
    let mut values = [0.0; 2];
    for r in [5e-6, 20e-6, 40e-6, 80e-6, 148e-6, 300e-6] {
        let spec = base.with_radius(r).map_err(|e| e.to_string())?;
        for (i, mode) in [ModeIndex::TEM00, ModeIndex::TEM10].into_iter().enumerate() {
            let v = overlap_integral(&g, mode, &spec, &c).map_err(|e| e.to_string())?.value;
            ensure(v > last[i], || format!("{mode} not increasing at R={r:e}"))?;
            ensure(v < limit, || format!("{mode} exceeds the envelope limit at R={r:e}"))?;
            last[i] = v;
            values[i] = v;
        }
    }
    let ratio = values[1] / values[0];
    ensure(ratio > 0.97, || format!("G10²/G00² = {ratio:.4} at R = 300 µm"))?;
    Ok(format!("monotone, below π w0² L/2, G10²/G00² = {ratio:.4} at R = 300 µm"))
}

fn linewidth_anchor() -> Result<String, String> {
    let p = ProbePhysics::default();
    let k = to_mhz(effective_halfwidth(mhz(11.6), &p));
    let expected = 2.15 + 11.6 * 11.6 / 11.2;
    ensure(rel(k, expected) < 1e-12, || format!("κ′/2π = {k} MHz"))?;
    let g = mhz(5.0);
    let half = broadening(g, p.gamma, p.gamma) / broadening(g, p.gamma, 0.0);
    ensure((half - 0.5).abs() < 1e-12, || format!("broadening ratio at Δ = γ is {half}"))?;
    Ok(format!("κ′/2π = {k:.9} MHz"))
}

fn lorentzian_bias() -> Result<String, String> {
    let p = ProbePhysics::default();
    let g = mhz(10.0);
    let truth = effective_halfwidth(g, &p);
    let scan = ScanGrid::default();
    let n = 1000;
    let (mut sum_w, mut sum_se) = (0.0, 0.0);
    for seed in 0..n {
        let s = synthesize_spectrum(g, &p, &scan, 0.01, derive_seed(11, seed)).map_err(|e| e.to_string())?;
        let fit = fit_lorentzian(&s).map_err(|e| format!("seed {seed}: {e}"))?;
        sum_w += fit.half_width;
        sum_se += fit.uncertainties.half_width;
    }
    let bias = sum_w / n as f64 - truth;
    let se = sum_se / n as f64;
    ensure(bias.abs() < 0.1 * se, || format!("bias {:.3} of the standard error", bias / se))?;
    Ok(format!("1000 scans, bias {:+.3} SE", bias / se))
}

fn coupling_fit_pulls() -> Result<String, String> {
    let p = ProbePhysics::default();
    let g = mhz(5.3);
    let sigma = mhz(0.1);
    let detunings = symmetric_detunings(mhz(30.0), 9);
    let clean = broadening_series(g, &p, &detunings);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let n = 500;
    let mut pulls = Vec::with_capacity(n);
    for seed in 0..n as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(23, seed));
        let series: Vec<BroadeningPoint> = clean
            .iter()
            .map(|pt| BroadeningPoint { broadening: pt.broadening + normal.sample(&mut rng), sigma, ..*pt })
            .collect();
        let fit = fit_coupling(&series, &p).map_err(|e| format!("seed {seed}: {e}"))?;
        pulls.push((fit.g_rate - g) / fit.g_sigma);
    }
    let mean = pulls.iter().sum::<f64>() / n as f64;
    let width = (pulls.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    ensure(mean.abs() < 0.2 && (0.8..=1.2).contains(&width), || format!("pull mean {mean:.3}, width {width:.3}"))?;
    Ok(format!("500 series, pull mean {mean:+.3}, width {width:.3}"))
}
