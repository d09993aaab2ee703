use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cavicrys::beam::{self, BeamGeometry, ModeIndex};
use cavicrys::coupling::{self, CouplingConfig, CouplingResult, Method};
use cavicrys::crystal::{self, CrystalSpec};
use cavicrys::spectroscopy::{self, BroadeningPoint, ProbePhysics, ScanGrid, TransmissionSpectrum};
use cavicrys::sweeps::{self, Axis, SweepKind, SweepRecord, SweepRequest};
use cavicrys::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Accuracy { .. } | Error::FitDegenerate(_) | Error::IllConditioned(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr>(text: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    text.parse().map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

fn physics(kappa: Option<f64>, gamma: Option<f64>, delta: f64) -> ProbePhysics {
    let d = ProbePhysics::default();
    ProbePhysics { kappa: kappa.unwrap_or(d.kappa), gamma: gamma.unwrap_or(d.gamma), delta }
}

#[pyclass(name = "BeamGeometry", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBeamGeometry(BeamGeometry);

#[pymethods]
impl PyBeamGeometry {
    #[new]
    #[pyo3(signature = (wavelength=866e-9, waist=37e-6, rayleigh_range=None))]
    fn new(wavelength: f64, waist: f64, rayleigh_range: Option<f64>) -> PyResult<Self> {
        match rayleigh_range {
            Some(zr) => BeamGeometry::with_rayleigh_range(wavelength, waist, zr),
            None => BeamGeometry::new(wavelength, waist),
        }
        .map(Self)
        .map_err(to_py)
    }

    #[getter]
    fn wavelength(&self) -> f64 {
        self.0.wavelength()
    }

    #[getter]
    fn waist(&self) -> f64 {
        self.0.waist()
    }

    #[getter]
    fn rayleigh_range(&self) -> f64 {
        self.0.rayleigh_range()
    }

    fn waist_at(&self, z: f64) -> f64 {
        beam::waist_at(&self.0, z)
    }

    fn curvature_at(&self, z: f64) -> f64 {
        beam::curvature_at(&self.0, z)
    }

    fn mode_amplitude(&self, order: u32, u: f64, z: f64) -> PyResult<f64> {
        beam::mode_amplitude(&self.0, order, u, z).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("BeamGeometry(wavelength={:e}, waist={:e})", self.0.wavelength(), self.0.waist())
    }
}

#[pyclass(name = "ModeIndex", frozen, skip_from_py_object, eq, hash)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyModeIndex(ModeIndex);

#[pymethods]
impl PyModeIndex {
    #[new]
    fn new(m: u32, n: u32) -> Self {
        Self(ModeIndex::new(m, n))
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse(text).map(Self)
    }

    #[getter]
    fn m(&self) -> u32 {
        self.0.m
    }

    #[getter]
    fn n(&self) -> u32 {
        self.0.n
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("ModeIndex({}, {})", self.0.m, self.0.n)
    }
}

/// Accepts a `ModeIndex` or a string such as `"10"`.
fn mode_arg(obj: &Bound<'_, PyAny>) -> PyResult<ModeIndex> {
    if let Ok(m) = obj.cast::<PyModeIndex>() {
        return Ok(m.get().0);
    }
    parse(&obj.extract::<String>()?)
}

#[pyclass(name = "CrystalSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCrystalSpec(CrystalSpec);

#[pymethods]
impl PyCrystalSpec {
    #[new]
    #[pyo3(signature = (half_length, radius, density, offset_x=0.0, offset_y=0.0))]
    fn new(half_length: f64, radius: f64, density: f64, offset_x: f64, offset_y: f64) -> PyResult<Self> {
        CrystalSpec::new(half_length, radius, density).map(|c| Self(c.with_offsets(offset_x, offset_y))).map_err(to_py)
    }

    #[getter]
    fn half_length(&self) -> f64 {
        self.0.half_length()
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.0.radius()
    }

    #[getter]
    fn density(&self) -> f64 {
        self.0.density()
    }

    #[getter]
    fn offset_x(&self) -> f64 {
        self.0.offset_x()
    }

    #[getter]
    fn offset_y(&self) -> f64 {
        self.0.offset_y()
    }

    fn ion_count(&self) -> f64 {
        self.0.ion_count()
    }

    fn volume(&self) -> f64 {
        crystal::volume(&self.0)
    }

    fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        crystal::contains(&self.0, x, y, z)
    }

    fn with_offsets(&self, offset_x: f64, offset_y: f64) -> Self {
        Self(self.0.with_offsets(offset_x, offset_y))
    }

    /// `count` uniform points as `(x, y, z)` tuples.
    fn sample(&self, seed: u64, count: usize) -> Vec<(f64, f64, f64)> {
        crystal::sample_uniform(&self.0, seed, count).into_iter().map(|[x, y, z]| (x, y, z)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "CrystalSpec(half_length={:e}, radius={:e}, density={:e}, offset_x={:e}, offset_y={:e})",
            self.0.half_length(),
            self.0.radius(),
            self.0.density(),
            self.0.offset_x(),
            self.0.offset_y()
        )
    }
}

fn coupling_config(
    method: &str,
    g: f64,
    rel_tolerance: f64,
    mc_samples: usize,
    mc_seed: u64,
) -> PyResult<CouplingConfig> {
    let cfg = CouplingConfig { single_ion_g: g, method: parse::<Method>(method)?, rel_tolerance, mc_samples, mc_seed };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

fn result_dict<'py>(py: Python<'py>, r: &CouplingResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("g_squared", r.g_squared)?;
    d.set_item("g_rate", r.g_rate)?;
    d.set_item("est_rel_error", r.est_rel_error)?;
    d.set_item("method", r.method_used.name())?;
    d.set_item("evaluations", r.evaluations)?;
    Ok(d)
}

/// Collective coupling of `mode` to the crystal. Returns a dict with
/// `g_squared`, `g_rate` (rad/s), `est_rel_error`, `method`, `evaluations`.
#[pyfunction]
#[pyo3(signature = (geometry, mode, crystal, method="averaged", g=1.0, rel_tolerance=1e-4, mc_samples=1_000_000, mc_seed=0))]
#[allow(clippy::too_many_arguments)]
fn compute_coupling<'py>(
    py: Python<'py>,
    geometry: &PyBeamGeometry,
    mode: &Bound<'py, PyAny>,
    crystal: &PyCrystalSpec,
    method: &str,
    g: f64,
    rel_tolerance: f64,
    mc_samples: usize,
    mc_seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = mode_arg(mode)?;
    let cfg = coupling_config(method, g, rel_tolerance, mc_samples, mc_seed)?;
    let (geom, c) = (geometry.0, crystal.0);
    let r = py.detach(|| coupling::compute_coupling(&geom, mode, &c, &cfg)).map_err(to_py)?;
    result_dict(py, &r)
}

/// Single-ion `g` for which TEM`mode` reaches `target_rate` (rad/s).
#[pyfunction]
#[pyo3(signature = (geometry, mode, crystal, target_rate, method="averaged"))]
fn calibrate_single_ion_g(
    py: Python<'_>,
    geometry: &PyBeamGeometry,
    mode: &Bound<'_, PyAny>,
    crystal: &PyCrystalSpec,
    target_rate: f64,
    method: &str,
) -> PyResult<f64> {
    let mode = mode_arg(mode)?;
    let cfg = coupling_config(method, 1.0, 1e-4, 1_000_000, 0)?;
    let (geom, c) = (geometry.0, crystal.0);
    py.detach(|| coupling::calibrate_single_ion_g(&geom, mode, &c, &cfg, target_rate)).map_err(to_py)
}

#[pyfunction]
fn mhz(f: f64) -> f64 {
    spectroscopy::mhz(f)
}

#[pyfunction]
fn to_mhz(rate: f64) -> f64 {
    spectroscopy::to_mhz(rate)
}

/// Broadened cavity half-width `κ′` (rad/s).
#[pyfunction]
#[pyo3(signature = (g_rate, kappa=None, gamma=None, delta=0.0))]
fn effective_halfwidth(g_rate: f64, kappa: Option<f64>, gamma: Option<f64>, delta: f64) -> PyResult<f64> {
    let p = physics(kappa, gamma, delta);
    p.validate().map_err(to_py)?;
    Ok(spectroscopy::effective_halfwidth(g_rate, &p))
}

/// Synthetic cavity scan; returns `(detunings, samples)`.
#[pyfunction]
#[pyo3(signature = (g_rate, noise_sigma, seed, kappa=None, gamma=None, delta=0.0, half_span=None, points=None))]
#[allow(clippy::too_many_arguments)]
fn synthesize_spectrum(
    g_rate: f64,
    noise_sigma: f64,
    seed: u64,
    kappa: Option<f64>,
    gamma: Option<f64>,
    delta: f64,
    half_span: Option<f64>,
    points: Option<usize>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let d = ScanGrid::default();
    let scan = ScanGrid { half_span: half_span.unwrap_or(d.half_span), points: points.unwrap_or(d.points) };
    let s = spectroscopy::synthesize_spectrum(g_rate, &physics(kappa, gamma, delta), &scan, noise_sigma, seed)
        .map_err(to_py)?;
    Ok((s.scan_detunings().to_vec(), s.samples().to_vec()))
}

/// Lorentzian fit of a transmission scan.
#[pyfunction]
#[pyo3(signature = (detunings, samples, noise_sigma=0.0))]
fn fit_lorentzian<'py>(
    py: Python<'py>,
    detunings: Vec<f64>,
    samples: Vec<f64>,
    noise_sigma: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = TransmissionSpectrum::new(detunings, samples, noise_sigma).map_err(to_py)?;
    let f = spectroscopy::fit_lorentzian(&s).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("center", f.center)?;
    d.set_item("half_width", f.half_width)?;
    d.set_item("amplitude", f.amplitude)?;
    d.set_item("baseline", f.baseline)?;
    d.set_item("center_sigma", f.uncertainties.center)?;
    d.set_item("half_width_sigma", f.uncertainties.half_width)?;
    d.set_item("amplitude_sigma", f.uncertainties.amplitude)?;
    d.set_item("baseline_sigma", f.uncertainties.baseline)?;
    d.set_item("residual_norm", f.residual_norm)?;
    d.set_item("iterations", f.iterations)?;
    Ok(d)
}

/// Fit of `(G, γ)` to broadenings `κ′ - κ` against probe detuning.
#[pyfunction]
#[pyo3(signature = (detunings, broadenings, sigmas=None, kappa=None, gamma=None))]
fn fit_coupling<'py>(
    py: Python<'py>,
    detunings: Vec<f64>,
    broadenings: Vec<f64>,
    sigmas: Option<Vec<f64>>,
    kappa: Option<f64>,
    gamma: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let sigmas = sigmas.unwrap_or_else(|| vec![0.0; detunings.len()]);
    if broadenings.len() != detunings.len() || sigmas.len() != detunings.len() {
        return Err(PyValueError::new_err("detunings, broadenings and sigmas must have equal length"));
    }
    let series: Vec<BroadeningPoint> = detunings
        .iter()
        .zip(&broadenings)
        .zip(&sigmas)
        .map(|((&detuning, &broadening), &sigma)| BroadeningPoint { detuning, broadening, sigma })
        .collect();
    let f = spectroscopy::fit_coupling(&series, &physics(kappa, gamma, 0.0)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("g_rate", f.g_rate)?;
    d.set_item("gamma", f.gamma_fit)?;
    d.set_item("g_sigma", f.g_sigma)?;
    d.set_item("gamma_sigma", f.gamma_sigma)?;
    d.set_item("residual_norm", f.residual_norm)?;
    d.set_item("iterations", f.iterations)?;
    d.set_item("warnings", f.warnings)?;
    Ok(d)
}

fn records_to_py<'py>(py: Python<'py>, records: &[SweepRecord]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("sweep_value", r.sweep_value)?;
            d.set_item("mode", r.mode.to_string())?;
            d.set_item("raw_g_squared", r.raw_g_squared)?;
            d.set_item("normalized_value", r.normalized_value)?;
            d.set_item("est_rel_error", r.est_rel_error)?;
            d.set_item("error", r.error.clone())?;
            Ok(d)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_sweep<'py>(
    py: Python<'py>,
    kind: SweepKind,
    geometry: &PyBeamGeometry,
    crystal: &PyCrystalSpec,
    grid: Vec<f64>,
    modes: Option<Vec<Bound<'py, PyAny>>>,
    axis: &str,
    method: &str,
    normalize: bool,
    mc_seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut req = SweepRequest::new(kind, geometry.0, crystal.0, grid);
    if let Some(modes) = modes {
        req.modes = modes.iter().map(mode_arg).collect::<PyResult<_>>()?;
    }
    req.axis = parse::<Axis>(axis)?;
    req.normalize = normalize;
    req.coupling_cfg = coupling_config(method, 1.0, 1e-4, 1_000_000, mc_seed)?;
    req.validate().map_err(to_py)?;
    let records = py
        .detach(|| match kind {
            SweepKind::Radius => sweeps::run_radius_sweep(&req),
            _ => sweeps::run_displacement_sweep(&req),
        })
        .map_err(to_py)?;
    records_to_py(py, &records)
}

/// `G²` against crystal offset; one dict per (offset, mode).
#[pyfunction]
#[pyo3(signature = (geometry, crystal, offsets, modes=None, axis="x", method="averaged", normalize=true, mc_seed=0))]
#[allow(clippy::too_many_arguments)]
fn displacement_sweep<'py>(
    py: Python<'py>,
    geometry: &PyBeamGeometry,
    crystal: &PyCrystalSpec,
    offsets: Vec<f64>,
    modes: Option<Vec<Bound<'py, PyAny>>>,
    axis: &str,
    method: &str,
    normalize: bool,
    mc_seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    run_sweep(py, SweepKind::Displacement, geometry, crystal, offsets, modes, axis, method, normalize, mc_seed)
}

/// `G²` against crystal radius at fixed length; one dict per (radius, mode).
#[pyfunction]
#[pyo3(signature = (geometry, crystal, radii, modes=None, method="averaged", normalize=true, mc_seed=0))]
#[allow(clippy::too_many_arguments)]
fn radius_sweep<'py>(
    py: Python<'py>,
    geometry: &PyBeamGeometry,
    crystal: &PyCrystalSpec,
    radii: Vec<f64>,
    modes: Option<Vec<Bound<'py, PyAny>>>,
    method: &str,
    normalize: bool,
    mc_seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    run_sweep(py, SweepKind::Radius, geometry, crystal, radii, modes, "x", method, normalize, mc_seed)
}

#[pymodule]
pub fn pycavicrys(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBeamGeometry>()?;
    m.add_class::<PyModeIndex>()?;
    m.add_class::<PyCrystalSpec>()?;
    m.add_function(wrap_pyfunction!(compute_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_single_ion_g, m)?)?;
    m.add_function(wrap_pyfunction!(mhz, m)?)?;
    m.add_function(wrap_pyfunction!(to_mhz, m)?)?;
    m.add_function(wrap_pyfunction!(effective_halfwidth, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lorentzian, m)?)?;
    m.add_function(wrap_pyfunction!(fit_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(displacement_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(radius_sweep, m)?)?;
    Ok(())
}
