//! Parameter sweeps: crystal displacement, crystal radius and probe detuning.
//!
//! Grid points are evaluated independently (in parallel) and records are
//! returned in grid order. Monte Carlo seeds are derived from the request
//! seed, the mode and the grid value, so a point's value does not depend on
//! the rest of the grid.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{BeamGeometry, ModeIndex};
use crate::coupling::{compute_coupling, CouplingConfig, CouplingResult};
use crate::crystal::{derive_seed, CrystalSpec};
use crate::error::{Error, Result};
use crate::spectroscopy::{
    effective_halfwidth, fit_coupling, fit_lorentzian, synthesize_spectrum, BroadeningPoint, CouplingFit, ProbePhysics,
    ScanGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Displacement,
    Radius,
    Detuning,
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "displacement" => Ok(SweepKind::Displacement),
            "radius" => Ok(SweepKind::Radius),
            "detuning" => Ok(SweepKind::Detuning),
            other => {
                Err(Error::Config(format!("unknown sweep kind {other:?}; expected displacement, radius or detuning")))
            }
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::Displacement => "displacement",
            SweepKind::Radius => "radius",
            SweepKind::Detuning => "detuning",
        })
    }
}

/// Direction of a displacement sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            other => Err(Error::Config(format!("unknown axis {other:?}; expected x or y"))),
        }
    }
}

/// Options of the detuning experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningOptions {
    /// Synthesize and fit a cavity scan per detuning instead of using the
    /// linewidth formula directly.
    pub end_to_end: bool,
    /// Noise of the synthetic scans (fraction of the peak transmission).
    pub noise_sigma: f64,
    pub scan: ScanGrid,
    pub seed: u64,
}

impl Default for DetuningOptions {
    fn default() -> Self {
        Self { end_to_end: false, noise_sigma: 0.0, scan: ScanGrid::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRequest {
    pub kind: SweepKind,
    pub axis: Axis,
    pub geometry: BeamGeometry,
    pub base_crystal: CrystalSpec,
    pub modes: Vec<ModeIndex>,
    /// Offsets or radii in meters, detunings in rad/s.
    pub grid: Vec<f64>,
    pub coupling_cfg: CouplingConfig,
    pub physics: Option<ProbePhysics>,
    pub normalize: bool,
    /// Radius sweeps only: normalize to TEM00 at this radius instead of the
    /// largest grid radius.
    pub reference_radius: Option<f64>,
    pub detuning: DetuningOptions,
}

impl SweepRequest {
    pub fn new(kind: SweepKind, geometry: BeamGeometry, base_crystal: CrystalSpec, grid: Vec<f64>) -> Self {
        Self {
            kind,
            axis: Axis::X,
            geometry,
            base_crystal,
            modes: vec![ModeIndex::TEM00, ModeIndex::TEM10],
            grid,
            coupling_cfg: CouplingConfig::default(),
            physics: None,
            normalize: kind != SweepKind::Detuning,
            reference_radius: None,
            detuning: DetuningOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Request("sweep grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::Request("sweep grid contains non-finite values".into()));
        }
        let increasing = self.grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Request("sweep grid must be strictly monotone".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Request("no modes requested".into()));
        }
        self.coupling_cfg.validate()?;
        match self.kind {
            SweepKind::Radius if self.grid.iter().any(|&r| r <= 0.0) => {
                Err(Error::Request("radius grid must be positive".into()))
            }
            SweepKind::Detuning => match &self.physics {
                None => Err(Error::Request("detuning sweep needs probe physics".into())),
                Some(p) => {
                    p.validate()?;
                    if !(self.detuning.noise_sigma >= 0.0) {
                        return Err(Error::Request("noise_sigma must be >= 0".into()));
                    }
                    Ok(())
                }
            },
            _ => Ok(()),
        }
    }

    fn expect_kind(&self, kind: SweepKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Request(format!("expected a {kind} request, got {}", self.kind)));
        }
        self.validate()
    }

    fn point_config(&self, mode: ModeIndex, value: f64) -> CouplingConfig {
        let stream = derive_seed(value.to_bits(), ((mode.m as u64) << 32) | mode.n as u64);
        CouplingConfig { mc_seed: derive_seed(self.coupling_cfg.mc_seed, stream), ..self.coupling_cfg }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep_value: f64,
    pub mode: ModeIndex,
    /// `G²` in rad²/s²; NaN when the point failed.
    pub raw_g_squared: f64,
    pub normalized_value: Option<f64>,
    pub est_rel_error: f64,
    /// Error of this point, if its coupling could not be computed.
    pub error: Option<String>,
}

fn record(value: f64, mode: ModeIndex, result: Result<CouplingResult>, reference: Option<f64>) -> SweepRecord {
    match result {
        Ok(r) => SweepRecord {
            sweep_value: value,
            mode,
            raw_g_squared: r.g_squared,
            normalized_value: reference.map(|g| r.g_squared / g),
            est_rel_error: r.est_rel_error,
            error: None,
        },
        Err(e) => SweepRecord {
            sweep_value: value,
            mode,
            raw_g_squared: f64::NAN,
            normalized_value: None,
            est_rel_error: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

fn reference_value(req: &SweepRequest, crystal: &CrystalSpec, value: f64) -> Result<Option<f64>> {
    if !req.normalize {
        return Ok(None);
    }
    let r = compute_coupling(&req.geometry, ModeIndex::TEM00, crystal, &req.point_config(ModeIndex::TEM00, value))?;
    if !(r.g_squared > 0.0) {
        return Err(Error::Domain("normalization reference is zero".into()));
    }
    Ok(Some(r.g_squared))
}

fn grid_points(req: &SweepRequest) -> Vec<(f64, ModeIndex)> {
    req.grid.iter().flat_map(|&v| req.modes.iter().map(move |&m| (v, m))).collect()
}

/// `G_mn²` against crystal offset along one axis, optionally normalized to
/// on-axis TEM00.
pub fn run_displacement_sweep(req: &SweepRequest) -> Result<Vec<SweepRecord>> {
    req.expect_kind(SweepKind::Displacement)?;
    let centered = req.base_crystal.with_offsets(0.0, 0.0);
    let reference = reference_value(req, &centered, 0.0)?;
    Ok(grid_points(req)
        .into_par_iter()
        .map(|(a, mode)| {
            let crystal = match req.axis {
                Axis::X => req.base_crystal.with_offsets(a, 0.0),
                Axis::Y => req.base_crystal.with_offsets(0.0, a),
            };
            record(a, mode, compute_coupling(&req.geometry, mode, &crystal, &req.point_config(mode, a)), reference)
        })
        .collect())
}

/// `G_mn²` against crystal radius at fixed length, on axis. Normalized to
/// TEM00 at the largest grid radius unless `reference_radius` is set.
pub fn run_radius_sweep(req: &SweepRequest) -> Result<Vec<SweepRecord>> {
    req.expect_kind(SweepKind::Radius)?;
    let base = req.base_crystal.with_offsets(0.0, 0.0);
    let reference_r = req.reference_radius.unwrap_or_else(|| req.grid.iter().copied().fold(f64::MIN, f64::max));
    let reference = reference_value(req, &base.with_radius(reference_r)?, reference_r)?;
    Ok(grid_points(req)
        .into_par_iter()
        .map(|(r, mode)| {
            let result =
                base.with_radius(r).and_then(|c| compute_coupling(&req.geometry, mode, &c, &req.point_config(mode, r)));
            record(r, mode, result, reference)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningRecord {
    pub mode: ModeIndex,
    pub detuning: f64,
    /// `κ′ - κ`, rad/s.
    pub broadening: f64,
    /// Standard error of `broadening`; zero in analytic mode.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFit {
    pub mode: ModeIndex,
    /// Coupling computed from the crystal.
    pub coupling: CouplingResult,
    pub fit: Option<CouplingFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningSweep {
    pub records: Vec<DetuningRecord>,
    pub fits: Vec<ModeFit>,
}

fn broadening_at(
    req: &SweepRequest,
    physics: &ProbePhysics,
    mode: ModeIndex,
    g_rate: f64,
    delta: f64,
) -> Result<BroadeningPoint> {
    let at = physics.with_delta(delta);
    if !req.detuning.end_to_end {
        return Ok(BroadeningPoint {
            detuning: delta,
            broadening: effective_halfwidth(g_rate, &at) - physics.kappa,
            sigma: 0.0,
        });
    }
    let opts = &req.detuning;
    let seed = derive_seed(opts.seed, derive_seed(delta.to_bits(), ((mode.m as u64) << 32) | mode.n as u64));
    let spectrum = synthesize_spectrum(g_rate, &at, &opts.scan, opts.noise_sigma, seed)?;
    let fit = fit_lorentzian(&spectrum)?;
    Ok(BroadeningPoint {
        detuning: delta,
        broadening: fit.half_width - physics.kappa,
        sigma: fit.uncertainties.half_width,
    })
}

/// Broadening `κ′ - κ` against probe detuning for each mode, followed by a
/// fit of `(G, γ)` per mode. Fit failures are reported per mode.
pub fn run_detuning_sweep(req: &SweepRequest) -> Result<DetuningSweep> {
    req.expect_kind(SweepKind::Detuning)?;
    let physics = req.physics.expect("validated");
    let crystal = req.base_crystal;

    let per_mode: Vec<Result<(CouplingResult, Vec<BroadeningPoint>)>> = req
        .modes
        .par_iter()
        .map(|&mode| {
            let coupling = compute_coupling(&req.geometry, mode, &crystal, &req.point_config(mode, 0.0))?;
            let points = req
                .grid
                .par_iter()
                .map(|&delta| broadening_at(req, &physics, mode, coupling.g_rate, delta))
                .collect::<Result<Vec<_>>>()?;
            Ok((coupling, points))
        })
        .collect();

    let mut records = Vec::new();
    let mut fits = Vec::new();
    for (&mode, outcome) in req.modes.iter().zip(per_mode) {
        let (coupling, points) = outcome?;
        records.extend(points.iter().map(|p| DetuningRecord {
            mode,
            detuning: p.detuning,
            broadening: p.broadening,
            sigma: p.sigma,
        }));
        let (fit, error) = match fit_coupling(&points, &physics) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        fits.push(ModeFit { mode, coupling, fit, error });
    }
    Ok(DetuningSweep { records, fits })
}
