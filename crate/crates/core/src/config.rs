//! Run configuration: a line-based `key = value` format with `[section]`
//! headers. `#` starts a comment. Physical values take unit suffixes:
//!
//! | quantity | suffixes |
//! |----------|----------|
//! | length   | `m`, `cm`, `mm`, `um` (`µm`), `nm` |
//! | rate     | `Hz`, `kHz`, `MHz`, `GHz` (read as `2π·f`), `rad/s` |
//! | density  | `m^-3`, `cm^-3` (also `m-3`, `/m3`, `cm-3`, `/cm3`) |
//!
//! A bare number is taken in SI units (meters, rad/s, ions/m³).
//!
//! ```text
//! [beam]
//! wavelength = 866nm
//! waist = 37um
//!
//! [crystal]
//! half_length = 336um
//! radius = 50um
//! density = 3.8e8cm^-3
//!
//! [sweep]
//! kind = radius
//! start = 10um
//! stop = 148um
//! count = 24
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::beam::{BeamGeometry, ModeIndex};
use crate::coupling::{CouplingConfig, Method};
use crate::crystal::CrystalSpec;
use crate::spectroscopy::{mhz, ProbePhysics, ScanGrid};
use crate::sweeps::{Axis, SweepKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key {key:?} in section [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("invalid value for {key}: {message}")]
    Validation { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?}; expected csv or json")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    /// `None` leaves the choice to the command: JSON for `coupling`, CSV
    /// otherwise.
    pub format: Option<OutputFormat>,
    pub path: Option<PathBuf>,
    /// Significant digits of every number written.
    pub precision: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub axis: Axis,
    /// Resolved grid in SI units (meters or rad/s by kind).
    pub grid: Vec<f64>,
    pub modes: Vec<ModeIndex>,
    pub normalize: Option<bool>,
    pub reference_radius: Option<f64>,
    pub end_to_end: bool,
    pub noise: Option<f64>,
    pub scan: ScanGrid,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub beam: BeamGeometry,
    pub crystal: CrystalSpec,
    pub physics: ProbePhysics,
    pub coupling: CouplingConfig,
    /// When set, `g` is calibrated so that TEM00 reaches this rate (rad/s).
    pub target_rate: Option<f64>,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Length,
    Rate,
    Density,
    Plain,
}

fn split_number(text: &str) -> Option<(f64, &str)> {
    let t = text.trim();
    // longest prefix that parses as a float
    let mut best = None;
    for (i, _) in t.char_indices().skip(1).chain(std::iter::once((t.len(), ' '))) {
        if let Ok(v) = t[..i].trim().parse::<f64>() {
            best = Some((v, t[i..].trim()));
        }
    }
    best
}

fn parse_quantity(text: &str, unit: Unit) -> Result<f64, String> {
    let (value, suffix) = split_number(text).ok_or_else(|| format!("expected a number, got {text:?}"))?;
    if !value.is_finite() {
        return Err(format!("non-finite value {text:?}"));
    }
    let factor = match (unit, suffix) {
        (_, "") => 1.0,
        (Unit::Length, "m") => 1.0,
        (Unit::Length, "cm") => 1e-2,
        (Unit::Length, "mm") => 1e-3,
        (Unit::Length, "um" | "µm" | "μm") => 1e-6,
        (Unit::Length, "nm") => 1e-9,
        (Unit::Rate, "rad/s") => 1.0,
        (Unit::Rate, "Hz") => 2.0 * PI,
        (Unit::Rate, "kHz") => 2.0 * PI * 1e3,
        (Unit::Rate, "MHz") => 2.0 * PI * 1e6,
        (Unit::Rate, "GHz") => 2.0 * PI * 1e9,
        (Unit::Density, "m^-3" | "m-3" | "/m3" | "/m^3") => 1.0,
        (Unit::Density, "cm^-3" | "cm-3" | "/cm3" | "/cm^3") => 1e6,
        (_, other) => return Err(format!("unit {other:?} is not valid here")),
    };
    Ok(value * factor)
}

fn parse_bool(text: &str) -> Result<bool, String> {
    match text.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(format!("expected true or false, got {other:?}")),
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("beam", &["wavelength", "waist", "rayleigh_range"]),
    ("crystal", &["half_length", "radius", "density", "offset_x", "offset_y"]),
    ("physics", &["kappa", "gamma"]),
    ("coupling", &["g", "target_rate", "method", "tolerance", "samples", "seed"]),
    (
        "sweep",
        &[
            "kind",
            "axis",
            "start",
            "stop",
            "count",
            "values",
            "modes",
            "normalize",
            "reference_radius",
            "end_to_end",
            "noise",
            "scan_half_span",
            "scan_points",
            "seed",
        ],
    ),
    ("output", &["format", "path", "precision"]),
];

/// Parses and validates a configuration, filling defaults for every
/// missing key.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut section: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Parse { line, message: "unterminated section header".into() })?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::Parse { line, message: format!("unknown section [{name}]") });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line, message: format!("expected key = value, got {content:?}") })?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .as_deref()
            .ok_or_else(|| ConfigError::Parse { line, message: "key outside of a [section]".into() })?;
        let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(ConfigError::UnknownKey { line, section: sec.to_string(), key: key.to_string() });
        }
        if value.is_empty() {
            return Err(ConfigError::Parse { line, message: format!("empty value for {key}") });
        }
        let full = format!("{sec}.{key}");
        if entries.insert(full.clone(), (line, value.to_string())).is_some() {
            return Err(ConfigError::Parse { line, message: format!("duplicate key {full}") });
        }
    }

    Resolver { entries }.resolve()
}

struct Resolver {
    entries: BTreeMap<String, (usize, String)>,
}

impl Resolver {
    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn quantity(&self, key: &str, unit: Unit, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => parse_quantity(v, unit).map_err(|m| invalid(key, m)),
        }
    }

    fn positive(&self, key: &str, unit: Unit, default: f64) -> Result<f64, ConfigError> {
        let v = self.quantity(key, unit, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(invalid(key, format!("must be positive, got {v}")))
        }
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| invalid(key, e.to_string())),
        }
    }

    fn resolve(self) -> Result<RunConfig, ConfigError> {
        let wavelength = self.positive("beam.wavelength", Unit::Length, 866e-9)?;
        let waist = self.positive("beam.waist", Unit::Length, 37e-6)?;
        let beam = match self.raw("beam.rayleigh_range") {
            None => BeamGeometry::new(wavelength, waist),
            Some(_) => {
                let zr = self.positive("beam.rayleigh_range", Unit::Length, 0.0)?;
                BeamGeometry::with_rayleigh_range(wavelength, waist, zr)
            }
        }
        .map_err(|e| invalid("beam.rayleigh_range", e.to_string()))?;

        let crystal = CrystalSpec::new(
            self.positive("crystal.half_length", Unit::Length, 336e-6)?,
            self.positive("crystal.radius", Unit::Length, 50e-6)?,
            self.positive("crystal.density", Unit::Density, 3.8e14)?,
        )
        .expect("validated above")
        .with_offsets(
            self.quantity("crystal.offset_x", Unit::Length, 0.0)?,
            self.quantity("crystal.offset_y", Unit::Length, 0.0)?,
        );

        let physics = ProbePhysics {
            kappa: self.positive("physics.kappa", Unit::Rate, mhz(2.15))?,
            gamma: self.positive("physics.gamma", Unit::Rate, mhz(11.2))?,
            delta: 0.0,
        };

        let coupling = CouplingConfig {
            single_ion_g: self.positive("coupling.g", Unit::Rate, 1.0)?,
            method: self.parsed("coupling.method", Method::PhaseAveraged)?,
            rel_tolerance: self.quantity("coupling.tolerance", Unit::Plain, 1e-4)?,
            mc_samples: self.parsed("coupling.samples", 1_000_000usize)?,
            mc_seed: self.parsed("coupling.seed", 0u64)?,
        };
        coupling.validate().map_err(|e| {
            let key = if !(coupling.rel_tolerance > 0.0 && coupling.rel_tolerance <= 0.1) {
                "coupling.tolerance"
            } else {
                "coupling.samples"
            };
            invalid(key, e.to_string())
        })?;
        let target_rate = match self.raw("coupling.target_rate") {
            None => None,
            Some(_) => Some(self.positive("coupling.target_rate", Unit::Rate, 0.0)?),
        };
        if target_rate.is_some() && self.raw("coupling.g").is_some() {
            return Err(invalid("coupling.target_rate", "give either g or target_rate, not both"));
        }

        let sweep = self.sweep()?;

        let output = OutputSection {
            format: self.raw("output.format").map(|_| self.parsed("output.format", OutputFormat::Csv)).transpose()?,
            path: self.raw("output.path").map(PathBuf::from),
            precision: self.parsed("output.precision", 9usize)?,
        };
        if !(1..=17).contains(&output.precision) {
            return Err(invalid("output.precision", "must lie in 1..=17"));
        }

        Ok(RunConfig { beam, crystal, physics, coupling, target_rate, sweep, output })
    }

    fn sweep(&self) -> Result<SweepSection, ConfigError> {
        let kind: SweepKind = self.parsed("sweep.kind", SweepKind::Displacement)?;
        let unit = if kind == SweepKind::Detuning { Unit::Rate } else { Unit::Length };

        let grid = if let Some(list) = self.raw("sweep.values") {
            if ["sweep.start", "sweep.stop", "sweep.count"].iter().any(|k| self.raw(k).is_some()) {
                return Err(invalid("sweep.values", "give either values or start/stop/count"));
            }
            list.split(',')
                .map(|v| parse_quantity(v, unit))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|m| invalid("sweep.values", m))?
        } else {
            let (start, stop, count) = match kind {
                SweepKind::Displacement => (-80e-6, 80e-6, 17),
                SweepKind::Radius => (10e-6, 148e-6, 24),
                SweepKind::Detuning => (-mhz(30.0), mhz(30.0), 9),
            };
            let start = self.quantity("sweep.start", unit, start)?;
            let stop = self.quantity("sweep.stop", unit, stop)?;
            let count: usize = self.parsed("sweep.count", count)?;
            if count == 0 {
                return Err(invalid("sweep.count", "must be at least 1"));
            }
            if count == 1 {
                vec![start]
            } else {
                (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect()
            }
        };
        if grid.len() > 1 {
            let inc = grid.windows(2).all(|w| w[1] > w[0]);
            let dec = grid.windows(2).all(|w| w[1] < w[0]);
            if !(inc || dec) {
                return Err(invalid("sweep.values", "grid must be strictly monotone"));
            }
        }
        if kind == SweepKind::Radius && grid.iter().any(|&r| r <= 0.0) {
            return Err(invalid("sweep.start", "radii must be positive"));
        }

        let modes = match self.raw("sweep.modes") {
            None => vec![ModeIndex::TEM00, ModeIndex::TEM10],
            Some(list) => list
                .split(',')
                .map(|m| m.parse::<ModeIndex>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| invalid("sweep.modes", e.to_string()))?,
        };

        let normalize =
            self.raw("sweep.normalize").map(parse_bool).transpose().map_err(|m| invalid("sweep.normalize", m))?;
        let end_to_end =
            self.raw("sweep.end_to_end").map(parse_bool).transpose().map_err(|m| invalid("sweep.end_to_end", m))?;
        let reference_radius = match self.raw("sweep.reference_radius") {
            None => None,
            Some(_) => Some(self.positive("sweep.reference_radius", Unit::Length, 0.0)?),
        };
        let noise = match self.raw("sweep.noise") {
            None => None,
            Some(_) => {
                let v = self.quantity("sweep.noise", Unit::Plain, 0.0)?;
                if v < 0.0 {
                    return Err(invalid("sweep.noise", "must be >= 0"));
                }
                Some(v)
            }
        };
        let default_scan = ScanGrid::default();
        let scan = ScanGrid {
            half_span: self.positive("sweep.scan_half_span", Unit::Rate, default_scan.half_span)?,
            points: self.parsed("sweep.scan_points", default_scan.points)?,
        };
        if scan.points < 16 {
            return Err(invalid("sweep.scan_points", "must be at least 16"));
        }

        Ok(SweepSection {
            kind,
            axis: self.parsed("sweep.axis", Axis::X)?,
            grid,
            modes,
            normalize,
            reference_radius,
            end_to_end: end_to_end.unwrap_or(false),
            noise,
            scan,
            seed: self.parsed("sweep.seed", 0u64)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.beam, BeamGeometry::new(866e-9, 37e-6).unwrap());
        assert_eq!(cfg.crystal, CrystalSpec::new(336e-6, 50e-6, 3.8e14).unwrap());
        assert_eq!(cfg.physics, ProbePhysics::default());
        assert_eq!(cfg.coupling, CouplingConfig::default());
        assert_eq!(cfg.sweep.kind, SweepKind::Displacement);
        assert_eq!(cfg.sweep.grid.len(), 17);
        assert_eq!(cfg.output.precision, 9);
        assert_eq!(cfg.output.format, None);
    }

    #[test]
    fn unit_suffixes() {
        let cfg = parse_config("[beam]\nwaist = 37um\nwavelength = 866nm\n").unwrap();
        assert_relative_eq!(cfg.beam.waist(), 3.7e-5, max_relative = 1e-15);
        assert_eq!(parse_quantity("3.8e8cm^-3", Unit::Density).unwrap(), 3.8e14);
        assert_eq!(parse_quantity("5 mm", Unit::Length).unwrap(), 5e-3);
        assert_eq!(parse_quantity("1e3", Unit::Length).unwrap(), 1e3);
        assert_relative_eq!(parse_quantity("11.2MHz", Unit::Rate).unwrap(), mhz(11.2), max_relative = 1e-15);
        assert_eq!(parse_quantity("2.5rad/s", Unit::Rate).unwrap(), 2.5);
        assert!(parse_quantity("3furlongs", Unit::Length).is_err());
        assert!(parse_quantity("MHz", Unit::Rate).is_err());
        assert!(parse_quantity("5MHz", Unit::Length).is_err());
    }

    #[test]
    fn negative_gamma_is_rejected() {
        match parse_config("[physics]\ngamma = -1MHz\n") {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "physics.gamma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_location() {
        assert_eq!(
            parse_config("[beam]\nwaist = 37um\ncolour = red\n"),
            Err(ConfigError::UnknownKey { line: 3, section: "beam".into(), key: "colour".into() })
        );
        assert!(matches!(parse_config("waist = 1"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("[beam]\n\nwaist 37um"), Err(ConfigError::Parse { line: 3, .. })));
        assert!(matches!(parse_config("[nowhere]"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("[beam]\nwaist = 1um\nwaist = 2um"), Err(ConfigError::Parse { line: 3, .. })));
        assert!(matches!(parse_config("[beam]\nrayleigh_range = 7mm"), Err(ConfigError::Validation { .. })));
    }

    #[test]
    fn sweep_sections() {
        let cfg = parse_config(
            "# radius scan\n[crystal]\nhalf_length = 336um # 2L = 672 um\n\
             [sweep]\nkind = radius\nvalues = 10um, 40um, 120um\nmodes = 00, 10, 01\nnormalize = false\n\
             [output]\nformat = json\nprecision = 6\npath = out.json\n",
        )
        .unwrap();
        assert_eq!(cfg.sweep.kind, SweepKind::Radius);
        for (got, want) in cfg.sweep.grid.iter().zip([10e-6, 40e-6, 120e-6]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        assert_eq!(cfg.sweep.modes.len(), 3);
        assert_eq!(cfg.sweep.normalize, Some(false));
        assert_eq!(cfg.output.format, Some(OutputFormat::Json));
        assert_eq!(cfg.output.path, Some(PathBuf::from("out.json")));

        let det = parse_config("[sweep]\nkind = detuning\nstart = -30MHz\nstop = 30MHz\ncount = 5\nend_to_end = yes")
            .unwrap();
        assert_relative_eq!(det.sweep.grid[0], -mhz(30.0), max_relative = 1e-15);
        assert!(det.sweep.end_to_end);
        assert!(parse_config("[sweep]\nvalues = 1um, 1um").is_err());
        assert!(parse_config("[sweep]\nkind = radius\nvalues = 0um, 1um").is_err());
        assert!(parse_config("[sweep]\ncount = 0").is_err());
        assert!(parse_config("[coupling]\ng = 1\ntarget_rate = 11.6MHz").is_err());
        assert!(parse_config("[coupling]\ntolerance = 0.5").is_err());
    }
}
