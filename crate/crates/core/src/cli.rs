//! The `cavicrys` command-line tool.
//!
//! Exit status: 0 on success, 1 on usage or configuration errors, 2 on
//! computation or fit errors. Failures print one JSON line to stderr:
//! `{"error":"<kind>","message":"..."}`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::beam::ModeIndex;
use crate::config::{parse_config, OutputFormat, RunConfig};
use crate::coupling::{calibrate_single_ion_g, compute_coupling, Method};
use crate::output;
use crate::selftest;
use crate::spectroscopy::optical_depth;
use crate::sweeps::{
    run_detuning_sweep, run_displacement_sweep, run_radius_sweep, DetuningOptions, SweepKind, SweepRequest,
};

/// Environment variable that sets the worker thread count.
pub const THREADS_ENV: &str = "CAVICRYS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cavicrys", version, about = "Cavity-mode coupling to ion Coulomb crystals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Collective coupling G of one mode to the configured crystal.
    Coupling(CommonArgs),
    /// Displacement, radius or detuning sweep as configured in [sweep].
    Sweep(CommonArgs),
    /// Synthetic scans and linewidth fits against probe detuning.
    SynthFit(CommonArgs),
    /// Built-in invariant checks.
    Selftest {
        /// Run only this check.
        #[arg(long)]
        check: Option<String>,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Transverse mode, e.g. 00 or 10.
    #[arg(long)]
    mode: Option<ModeIndex>,
    /// Integration method: averaged, oscillatory or mc.
    #[arg(long)]
    method: Option<Method>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Seed for Monte Carlo integration and synthetic noise.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Config(String),
    Computation(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Config(_) => 1,
            Failure::Computation(_) => 2,
        }
    }

    fn line(&self) -> String {
        let (kind, message) = match self {
            Failure::Usage(m) => ("usage", m),
            Failure::Config(m) => ("config", m),
            Failure::Computation(m) => ("computation", m),
        };
        json!({ "error": kind, "message": message }).to_string()
    }
}

fn computation(e: impl ToString) -> Failure {
    Failure::Computation(e.to_string())
}

/// Runs the tool with `args` (including the program name) and returns the
/// exit status.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            let message = first.trim_start_matches("error: ").to_string();
            let _ = writeln!(stderr, "{}", Failure::Usage(message).line());
            return 1;
        }
    };

    let pool = match thread_pool() {
        Ok(p) => p,
        Err(f) => {
            let _ = writeln!(stderr, "{}", f.line());
            return f.exit_code();
        }
    };

    let result = pool.install(|| match cli.command {
        Command::Coupling(a) => coupling(&a, stdout),
        Command::Sweep(a) => sweep(&a, stdout, false),
        Command::SynthFit(a) => sweep(&a, stdout, true),
        Command::Selftest { check } => run_selftest(check.as_deref(), stdout),
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "{}", f.line());
            f.exit_code()
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Failure::Computation(e.to_string()))
}

fn load(a: &CommonArgs) -> Result<RunConfig, Failure> {
    let text = match &a.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(m) = a.method {
        cfg.coupling.method = m;
    }
    if let Some(seed) = a.seed {
        cfg.coupling.mc_seed = seed;
        cfg.sweep.seed = seed;
    }
    if let Some(f) = a.format {
        cfg.output.format = Some(f);
    }
    if let Some(p) = &a.out {
        cfg.output.path = Some(p.clone());
    }
    if let Some(mode) = a.mode {
        mode.check_supported().map_err(|e| Failure::Usage(e.to_string()))?;
        cfg.sweep.modes = vec![mode];
    }
    if let Some(target) = cfg.target_rate {
        cfg.coupling.single_ion_g =
            calibrate_single_ion_g(&cfg.beam, ModeIndex::TEM00, &cfg.crystal, &cfg.coupling, target)
                .map_err(computation)?;
    }
    Ok(cfg)
}

fn emit(cfg: &RunConfig, text: &str, stdout: &mut (dyn Write + Send)) -> Result<(), Failure> {
    match &cfg.output.path {
        Some(path) => write_file(path, text),
        None => stdout.write_all(text.as_bytes()).map_err(computation),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Computation(format!("cannot write {}: {e}", path.display())))
}

fn coupling(a: &CommonArgs, stdout: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let cfg = load(a)?;
    let mode = a.mode.unwrap_or(ModeIndex::TEM00);
    let r = compute_coupling(&cfg.beam, mode, &cfg.crystal, &cfg.coupling).map_err(computation)?;
    let od = optical_depth(r.g_rate, &cfg.physics);
    let p = cfg.output.precision;
    let text = match cfg.output.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Csv => output::coupling_csv(mode, &r, od, p),
        OutputFormat::Json => output::coupling_json(mode, &r, od, p),
    };
    emit(&cfg, &text, stdout)
}

fn sweep(a: &CommonArgs, stdout: &mut (dyn Write + Send), synth_fit: bool) -> Result<(), Failure> {
    let mut cfg = load(a)?;
    if synth_fit && cfg.sweep.kind != SweepKind::Detuning {
        let defaults = parse_config("[sweep]\nkind = detuning").expect("default detuning grid");
        cfg.sweep.kind = SweepKind::Detuning;
        cfg.sweep.grid = defaults.sweep.grid;
    }
    let s = &cfg.sweep;
    let mut req = SweepRequest::new(s.kind, cfg.beam, cfg.crystal, s.grid.clone());
    req.axis = s.axis;
    req.modes = s.modes.clone();
    req.coupling_cfg = cfg.coupling;
    req.reference_radius = s.reference_radius;
    if let Some(n) = s.normalize {
        req.normalize = n;
    }
    if s.kind == SweepKind::Detuning {
        req.normalize = false;
        req.physics = Some(cfg.physics);
        req.detuning = DetuningOptions {
            end_to_end: s.end_to_end || synth_fit,
            noise_sigma: s.noise.unwrap_or(if synth_fit { 0.01 } else { 0.0 }),
            scan: s.scan,
            seed: s.seed,
        };
    }
    req.validate().map_err(|e| Failure::Config(e.to_string()))?;

    let p = cfg.output.precision;
    let csv = cfg.output.format.unwrap_or(OutputFormat::Csv) == OutputFormat::Csv;
    match s.kind {
        SweepKind::Displacement | SweepKind::Radius => {
            let records =
                if s.kind == SweepKind::Radius { run_radius_sweep(&req) } else { run_displacement_sweep(&req) }
                    .map_err(computation)?;
            let text = if csv { output::sweep_csv(&records, p) } else { output::sweep_json(s.kind, &records, p) };
            emit(&cfg, &text, stdout)
        }
        SweepKind::Detuning => {
            let result = run_detuning_sweep(&req).map_err(computation)?;
            let text = if csv { output::detuning_csv(&result, p) } else { output::detuning_json(&result, p) };
            emit(&cfg, &text, stdout)?;
            let failed: Vec<String> =
                result.fits.iter().filter_map(|f| f.error.as_ref().map(|e| format!("TEM{}: {e}", f.mode))).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Computation(format!("fit failed for {}", failed.join("; "))))
            }
        }
    }
}

fn run_selftest(check: Option<&str>, stdout: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let outcomes = match check {
        Some(name) => vec![selftest::run_check(name).ok_or_else(|| {
            Failure::Usage(format!("unknown check {name:?}; available: {}", selftest::check_names().join(", ")))
        })?],
        None => {
            let mut all = Vec::new();
            for name in selftest::check_names() {
                let o = selftest::run_check(name).expect("listed check");
                writeln!(stdout, "{o}").map_err(computation)?;
                all.push(o);
            }
            let failed = all.iter().filter(|o| !o.passed).count();
            writeln!(stdout, "{} of {} checks passed", all.len() - failed, all.len()).map_err(computation)?;
            return if failed == 0 {
                Ok(())
            } else {
                Err(Failure::Computation(format!("{failed} selftest checks failed")))
            };
        }
    };
    let o = &outcomes[0];
    writeln!(stdout, "{o}").map_err(computation)?;
    if o.passed {
        Ok(())
    } else {
        Err(Failure::Computation(format!("check {} failed", o.name)))
    }
}
