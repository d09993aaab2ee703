//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use cavicrys::coupling::{calibrate_single_ion_g, compute_coupling, overlap_integral};
use cavicrys::crystal::derive_seed;
use cavicrys::selftest::run_selftest;
use cavicrys::spectroscopy::{broadening, effective_halfwidth, mhz, symmetric_detunings, to_mhz, ProbePhysics};
use cavicrys::sweeps::{run_detuning_sweep, run_displacement_sweep, run_radius_sweep, SweepKind, SweepRequest};
use cavicrys::{BeamGeometry, CouplingConfig, CrystalSpec, Method, ModeIndex};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn um(v: f64) -> f64 {
    v * 1e-6
}

fn geom() -> BeamGeometry {
    BeamGeometry::default_cavity()
}

fn cfg(method: Method) -> CouplingConfig {
    CouplingConfig::default().with_method(method)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn check(failures: &mut Vec<String>, cond: bool, message: String) {
    if !cond {
        failures.push(message);
    }
}

fn verdict(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", failures.join("; ")))
    }
}

fn engine_cross_validation() -> Outcome {
    let g = geom();
    let mut failures = Vec::new();
    let (mut worst_det, mut worst_pull): (f64, f64) = (0.0, 0.0);
    for l in [240.0, 336.0, 600.0] {
        for r in [10.0, 40.0, 120.0] {
            let spec = CrystalSpec::new(um(l), um(r), 3.8e14).unwrap();
            for mode in [ModeIndex::TEM00, ModeIndex::TEM10] {
                let label = format!("L={l} µm R={r} µm TEM{mode}");
                let pa = overlap_integral(&g, mode, &spec, &cfg(Method::PhaseAveraged))
                    .map_err(|e| format!("{label}: {e}"))?;
                let osc = overlap_integral(&g, mode, &spec, &cfg(Method::Oscillatory))
                    .map_err(|e| format!("{label}: {e}"))?;
                let mc_cfg = CouplingConfig {
                    mc_samples: 1_000_000,
                    mc_seed: derive_seed(1, (l * 1000.0 + r) as u64 * 4 + mode.m as u64),
                    ..cfg(Method::MonteCarlo)
                };
                let mc = overlap_integral(&g, mode, &spec, &mc_cfg).map_err(|e| format!("{label}: {e}"))?;
                let d = rel(osc.value, pa.value);
                let pull = (mc.value - pa.value).abs() / (mc.est_rel_error * mc.value);
                check(&mut failures, d <= 5e-3, format!("{label}: averaged vs oscillatory {d:.2e}"));
                check(&mut failures, pull <= 4.0, format!("{label}: Monte Carlo {pull:.2} SE"));
                worst_det = worst_det.max(d);
                worst_pull = worst_pull.max(pull);
            }
        }
    }
    verdict(
        failures,
        format!("18 cases, averaged/oscillatory max {worst_det:.1e} (limit 5e-3), Monte Carlo max {worst_pull:.2} SE (limit 4)"),
    )
}

fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len() - 1).filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1]).collect()
}

fn displacement_sweep() -> Outcome {
    let g = geom();
    let needle = CrystalSpec::new(um(240.0), um(21.0), 3.8e14).unwrap();
    let grid: Vec<f64> = (-16..=16).map(|i| um(5.0 * i as f64)).collect();
    let req = SweepRequest::new(SweepKind::Displacement, g, needle, grid.clone());
    let records = run_displacement_sweep(&req).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    let n = grid.len();
    let centre = n / 2;

    let series = |mode: ModeIndex| -> Vec<(f64, f64)> {
        records.iter().filter(|r| r.mode == mode).map(|r| (r.raw_g_squared, r.est_rel_error)).collect()
    };
    let g00 = series(ModeIndex::TEM00);
    let g10 = series(ModeIndex::TEM10);

    for (name, s) in [("TEM00", &g00), ("TEM10", &g10)] {
        for i in 0..centre {
            let (a, ea) = s[i];
            let (b, eb) = s[n - 1 - i];
            let tol = 2.0 * ea.max(eb) * a.max(b);
            check(
                &mut failures,
                (a - b).abs() <= tol,
                format!("{name} asymmetric at ±{:.0} µm: {a:e} vs {b:e}", grid[n - 1 - i] * 1e6),
            );
        }
    }
    let v00: Vec<f64> = g00.iter().map(|p| p.0).collect();
    let v10: Vec<f64> = g10.iter().map(|p| p.0).collect();
    let unimodal = (0..centre).all(|i| v00[i] < v00[i + 1]) && (centre..n - 1).all(|i| v00[i] > v00[i + 1]);
    check(&mut failures, unimodal, "TEM00 is not unimodal with its peak at 0".into());
    let maxima = local_maxima(&v10);
    let bimodal = maxima.len() == 2 && v10[centre] < v10[centre - 1] && v10[centre] < v10[centre + 1];
    check(&mut failures, bimodal, format!("TEM10 local maxima at indices {maxima:?}, no minimum at 0"));

    let mut worst: f64 = 0.0;
    for r in &records {
        let spec = needle.with_offsets(r.sweep_value, 0.0);
        let mc_cfg = CouplingConfig {
            mc_samples: 10_000_000,
            mc_seed: derive_seed(2, r.sweep_value.to_bits() ^ r.mode.m as u64),
            ..cfg(Method::MonteCarlo)
        };
        let mc = compute_coupling(&g, r.mode, &spec, &mc_cfg).map_err(|e| e.to_string())?;
        let sigma = (mc.est_rel_error * mc.g_squared).hypot(r.est_rel_error * r.raw_g_squared);
        let pull = (mc.g_squared - r.raw_g_squared).abs() / sigma;
        check(
            &mut failures,
            pull <= 4.0,
            format!("TEM{} at {:.0} µm: Monte Carlo {pull:.2} σ", r.mode, r.sweep_value * 1e6),
        );
        worst = worst.max(pull);
    }

    // independent Monte Carlo oracle (1e7 samples for the reference, 2.5e6 per point)
    let ref_i = 1.7357207357817702e-13;
    let ref_se = 4.0344421668876036e-17;
    let pa = cfg(Method::PhaseAveraged);
    let i0 = overlap_integral(&g, ModeIndex::TEM00, &needle, &pa).map_err(|e| e.to_string())?.value;
    let p0 = (i0 - ref_i).abs() / ref_se;
    check(&mut failures, p0 <= 4.0, format!("TEM00 on-axis integral {i0:e} is {p0:.2} σ from the oracle"));
    let oracle = [
        (ModeIndex::TEM00, 37.0, 0.20960, 9.9e-5),
        (ModeIndex::TEM10, 0.0, 0.23005963692514042, 2.0666899468510313e-4),
        (ModeIndex::TEM10, 10.0, 0.3564534220345246, 2.975002231305199e-4),
        (ModeIndex::TEM10, 20.0, 0.5823624804830478, 3.5538835731277187e-4),
        (ModeIndex::TEM10, 25.0, 0.6468222136751293, 3.576912284498182e-4),
        (ModeIndex::TEM10, 30.0, 0.6507207299351411, 3.553120741390273e-4),
        (ModeIndex::TEM10, 40.0, 0.500256662396105, 3.2120680735136836e-4),
        (ModeIndex::TEM10, 50.0, 0.273822605208167, 2.2133909792764847e-4),
    ];
    let mut worst_oracle: f64 = p0;
    for (mode, x0, value, se) in oracle {
        let v = overlap_integral(&g, mode, &needle.with_offsets(um(x0), 0.0), &pa).map_err(|e| e.to_string())?.value;
        let pull = (v / i0 - value).abs() / se;
        check(&mut failures, pull <= 4.0, format!("TEM{mode} at {x0} µm: {pull:.2} σ from the oracle"));
        worst_oracle = worst_oracle.max(pull);
    }

    verdict(
        failures,
        format!(
            "{} points, symmetric, TEM00 unimodal, TEM10 bimodal, 1e7-sample Monte Carlo max {worst:.2} σ, \
             frozen oracle max {worst_oracle:.2} σ (limit 4)",
            records.len()
        ),
    )
}

fn radius_sweep() -> Outcome {
    let g = geom();
    let base = CrystalSpec::new(um(336.0), um(10.0), 3.8e14).unwrap();
    let grid: Vec<f64> = (0..=69).map(|i| um(10.0 + 2.0 * i as f64)).collect();
    let req = SweepRequest::new(SweepKind::Radius, g, base, grid.clone());
    let records = run_radius_sweep(&req).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    let v =
        |mode: ModeIndex| -> Vec<f64> { records.iter().filter(|r| r.mode == mode).map(|r| r.raw_g_squared).collect() };
    let (g00, g10) = (v(ModeIndex::TEM00), v(ModeIndex::TEM10));
    for (name, s) in [("TEM00", &g00), ("TEM10", &g10)] {
        let bad = s.windows(2).position(|w| w[1] < w[0]);
        check(&mut failures, bad.is_none(), format!("{name} decreases after index {bad:?}"));
    }
    let ratio = g10.last().unwrap() / g00.last().unwrap();
    check(&mut failures, ratio >= 0.97, format!("G10²/G00² = {ratio:.5} at R = 148 µm"));
    let (oracle, se) = (0.98382, 0.0016);
    let pull = (ratio - oracle).abs() / se;
    check(&mut failures, pull <= 4.0, format!("ratio is {pull:.2} σ from the oracle"));
    verdict(
        failures,
        format!(
            "{} radii, both monotone, G10²/G00² = {ratio:.5} at R = 148 µm (limit 0.97; oracle {oracle} ± {se}, {pull:.2} σ)",
            grid.len()
        ),
    )
}

fn detuning_round_trip() -> Outcome {
    let g = geom();
    let physics = ProbePhysics::default();
    let crystal = CrystalSpec::new(um(600.0), um(200.0), 5.4e14).unwrap();
    let target = mhz(11.6);
    let mut coupling = cfg(Method::PhaseAveraged);
    coupling.single_ion_g =
        calibrate_single_ion_g(&g, ModeIndex::TEM00, &crystal, &coupling, target).map_err(|e| e.to_string())?;

    let mut failures = Vec::new();
    let pa = overlap_integral(&g, ModeIndex::TEM00, &crystal, &coupling).map_err(|e| e.to_string())?.value;
    let p10 = overlap_integral(&g, ModeIndex::TEM10, &crystal, &coupling).map_err(|e| e.to_string())?.value;
    let (i_oracle, i_se) = (1.28199e-12, 2.2e-15);
    let (r_oracle, r_se) = (0.98896, 0.0022);
    check(&mut failures, (pa - i_oracle).abs() <= 4.0 * i_se, format!("TEM00 integral {pa:e} vs oracle {i_oracle:e}"));
    check(&mut failures, (p10 / pa - r_oracle).abs() <= 4.0 * r_se, format!("G10²/G00² {:.5} vs oracle", p10 / pa));

    let mut req = SweepRequest::new(SweepKind::Detuning, g, crystal, symmetric_detunings(mhz(30.0), 9));
    req.modes = vec![ModeIndex::TEM00];
    req.coupling_cfg = coupling;
    req.physics = Some(physics);
    req.detuning.end_to_end = true;
    req.detuning.noise_sigma = NOISE_SIGMA;

    let (mut g_ok, mut gamma_ok, mut both_ok) = (0, 0, 0);
    let seeds = 100;
    for seed in 0..seeds {
        req.detuning.seed = seed;
        let sweep = run_detuning_sweep(&req).map_err(|e| e.to_string())?;
        let Some(fit) = &sweep.fits[0].fit else {
            continue;
        };
        let gok = (fit.g_rate - target).abs() <= mhz(0.1);
        let yok = (fit.gamma_fit - physics.gamma).abs() <= mhz(0.3);
        g_ok += gok as usize;
        gamma_ok += yok as usize;
        both_ok += (gok && yok) as usize;
    }
    check(&mut failures, both_ok >= 90, format!("only {both_ok} of {seeds} seeds within both bounds"));
    verdict(
        failures,
        format!(
            "noise {NOISE_SIGMA}: G within ±2π·0.1 MHz in {g_ok}/{seeds}, γ within ±2π·0.3 MHz in {gamma_ok}/{seeds}, \
             both in {both_ok}/{seeds} (need 90)"
        ),
    )
}

/// Noise of the synthetic scans, as a fraction of the peak transmission.
/// Gives a half-width standard error near 2π·0.1 MHz per scan.
const NOISE_SIGMA: f64 = 0.01;

fn linewidth_anchor() -> Outcome {
    let p = ProbePhysics::default();
    let k = effective_halfwidth(mhz(11.6), &p);
    let expected = mhz(2.15 + 11.6 * 11.6 / 11.2);
    let quoted = mhz(14.166);
    let mut failures = Vec::new();
    check(&mut failures, rel(k, expected) <= 1e-9, format!("κ′/2π = {} MHz", to_mhz(k)));
    let g = mhz(11.6);
    let ratio = broadening(g, p.gamma, p.gamma) / broadening(g, p.gamma, 0.0);
    check(&mut failures, (ratio - 0.5).abs() <= 1e-15, format!("broadening ratio at Δ = γ is {ratio}"));
    verdict(
        failures,
        format!(
            "κ′/2π = {:.9} MHz (recomputed, rel {:.1e}; quoted 14.166 differs by {:.1e}), broadening at Δ = γ is {ratio}",
            to_mhz(k),
            rel(k, expected),
            rel(k, quoted)
        ),
    )
}

fn invariant_suite() -> Outcome {
    let outcomes = run_selftest();
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.to_string()).collect();
    let seconds: f64 = outcomes.iter().map(|o| o.seconds).sum();
    let summary = format!("{} of {} checks in {seconds:.1} s", outcomes.len() - failed.len(), outcomes.len());
    let mut failures = failed;
    if seconds >= 300.0 {
        failures.push("selftest exceeds 5 minutes".into());
    }
    verdict(failures, summary)
}

fn rayleigh_anchor() -> Outcome {
    let zr = geom().rayleigh_range();
    let expected = PI * 37e-6 * 37e-6 / 866e-9;
    let mut failures = Vec::new();
    check(&mut failures, rel(zr, expected) <= 1e-12, format!("z_R = {zr:e}"));
    check(&mut failures, rel(zr, 5e-3) <= 0.01, format!("z_R = {zr:e} is not within 1% of 5 mm"));
    verdict(
        failures,
        format!(
            "z_R = {:.4} mm, {:.2}% from 5 mm (limit 1%); quoted 4.963 mm differs by {:.2}%",
            zr * 1e3,
            100.0 * rel(zr, 5e-3),
            100.0 * rel(zr, 4.963e-3)
        ),
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("engine cross-validation", engine_cross_validation),
        ("displacement sweep shape", displacement_sweep),
        ("radius sweep convergence", radius_sweep),
        ("detuning round trip", detuning_round_trip),
        ("linewidth anchor", linewidth_anchor),
        ("invariant suite", invariant_suite),
        ("Rayleigh range anchor", rayleigh_anchor),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = criterion();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
