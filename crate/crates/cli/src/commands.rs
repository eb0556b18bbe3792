//! Subcommands. Each writes its files and a `summary.json` into the output
//! directory and maps its outcome to an exit code.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use twopoint_core::diagnostics::{check_h_monotone, DiagnosticsSeries};
use twopoint_core::discretization::{SemiDiscreteSystem, SpatialGrid};
use twopoint_core::model::Mode;
use twopoint_core::solver::{picard_solve, Termination, TrajectoryRecord};
use twopoint_core::verification::{convergence_study, default_dt};

use crate::config::{expand_sweep, parse_unchecked, preset, Format, LoadedConfig, PRESETS};
use crate::output::{self, cells, config_hash, json_f64, to_json, write_csv, write_json};
use crate::{exit, CliError};

/// Slack on `β₁E ≤ 𝓛 ≤ β₂E`, absorbing rounding in the quadratures.
pub const SANDWICH_SLACK: f64 = 1e-15;
/// Share of recorded intervals that must be resolved for the `H` check.
pub const MIN_RESOLVED: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Verify,
    Blowup,
    Decay,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Verify => "verify",
            Command::Blowup => "blowup",
            Command::Decay => "decay",
            Command::Sweep => "sweep",
        }
    }

    /// The study that matches a config's mode.
    pub fn for_mode(mode: Mode) -> Command {
        match mode {
            Mode::General => Command::Run,
            Mode::Blowup => Command::Blowup,
            Mode::Decay => Command::Decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigSource {
    Path(PathBuf),
    Preset(String),
    Text(String),
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub source: ConfigSource,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    /// Where `summary.json` went, if anywhere.
    pub out_dir: Option<PathBuf>,
    pub summary: Value,
}

struct Report {
    exit_code: i32,
    details: Map<String, Value>,
    files: Vec<String>,
}

fn load_text(source: &ConfigSource) -> Result<String, CliError> {
    match source {
        ConfigSource::Path(p) => fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        ConfigSource::Preset(name) => preset(name).map(|c| c.to_toml()).ok_or_else(|| {
            CliError::Validation(format!("unknown preset '{name}' (available: {})", PRESETS.join(", ")))
        }),
        ConfigSource::Text(t) => Ok(t.clone()),
    }
}

/// Loads the config, applies command-line overrides and runs the command.
pub fn execute(inv: &Invocation) -> Outcome {
    let parsed = load_text(&inv.source).and_then(|t| parse_unchecked(&t));
    let mut config = match parsed {
        Ok(c) => c,
        Err(e) => return failure(inv.command, inv.out.clone(), None, &e),
    };
    if let Some(out) = &inv.out {
        config.outputs.dir = out.clone();
    }
    if let Some(format) = inv.format {
        config.outputs.format = format;
    }
    let dir = config.outputs.dir.clone();
    match config.clone().validate() {
        Ok(loaded) => run_command(inv.command, &loaded, inv.workers),
        Err(e) => failure(inv.command, Some(dir), Some(&config), &e),
    }
}

/// Writes a summary for a run that never started, when there is somewhere to put it.
fn failure(command: Command, dir: Option<PathBuf>, config: Option<&crate::ExperimentConfig>, err: &CliError) -> Outcome {
    let mut summary = Map::new();
    summary.insert("command".into(), json!(command.name()));
    summary.insert("status".into(), json!("error"));
    summary.insert("exit_code".into(), json!(err.exit_code()));
    summary.insert("error".into(), json!(err.to_string()));
    if let Some(c) = config {
        summary.insert("config_hash".into(), json!(config_hash(c)));
        summary.insert("config".into(), json!(c.to_toml()));
    }
    let summary = Value::Object(summary);
    let mut exit_code = err.exit_code();
    let mut out_dir = None;
    if let Some(dir) = dir {
        match fs::create_dir_all(&dir).map_err(CliError::from).and_then(|_| write_json(&dir.join("summary.json"), &summary)) {
            Ok(()) => out_dir = Some(dir),
            Err(_) => exit_code = exit::IO,
        }
    }
    Outcome {
        exit_code,
        out_dir,
        summary,
    }
}

/// Runs one command on a validated config, writing into `config.outputs.dir`.
pub fn run_command(command: Command, loaded: &LoadedConfig, workers: Option<usize>) -> Outcome {
    let config = &loaded.config;
    let dir = config.outputs.dir.clone();
    let hash = config_hash(config);
    let result = fs::create_dir_all(&dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
        .and_then(|_| fs::write(dir.join("config.toml"), config.to_toml()).map_err(CliError::from))
        .and_then(|_| match command {
            Command::Run => run(loaded, &dir, &hash),
            Command::Verify => verify(loaded, &dir, &hash),
            Command::Blowup => blowup(loaded, &dir, &hash),
            Command::Decay => decay(loaded, &dir, &hash),
            Command::Sweep => sweep(loaded, &dir, workers),
        });
    let report = match result {
        Ok(r) => r,
        Err(e) => return failure(command, Some(dir), Some(config), &e),
    };
    let mut summary = Map::new();
    summary.insert("command".into(), json!(command.name()));
    summary.insert(
        "status".into(),
        json!(if report.exit_code == exit::SUCCESS { "ok" } else { "error" }),
    );
    summary.insert("exit_code".into(), json!(report.exit_code));
    summary.insert("config_hash".into(), json!(hash));
    summary.insert("config".into(), json!(config.to_toml()));
    summary.insert("warnings".into(), json!(loaded.warnings));
    summary.insert("assumptions".into(), to_json(&loaded.assumptions));
    summary.insert("compatibility".into(), to_json(&loaded.compatibility));
    summary.insert("files".into(), json!(report.files));
    summary.extend(report.details);
    let summary = Value::Object(summary);
    let exit_code = match write_json(&dir.join("summary.json"), &summary) {
        Ok(()) => report.exit_code,
        Err(_) => exit::IO,
    };
    Outcome {
        exit_code,
        out_dir: Some(dir),
        summary,
    }
}

fn simulate(loaded: &LoadedConfig) -> Result<(SpatialGrid, TrajectoryRecord, DiagnosticsSeries), CliError> {
    let c = &loaded.config;
    let grid = c.grid.build()?;
    let invalid = |e: twopoint_core::Error| CliError::Validation(e.to_string());
    let record = picard_solve(&c.solver, &c.parameters, &c.data, &grid).map_err(invalid)?;
    let series = DiagnosticsSeries::evaluate(&record, &c.parameters, &c.data, &grid, &c.diagnostics).map_err(invalid)?;
    Ok((grid, record, series))
}

/// Exit code for a termination, with blow-up counted as success or not.
fn termination_code(termination: &Termination, blowup_expected: bool) -> i32 {
    match termination {
        Termination::Completed => exit::SUCCESS,
        Termination::BlowupDetected { .. } if blowup_expected => exit::SUCCESS,
        Termination::BlowupDetected { .. } => exit::UNEXPECTED_BLOWUP,
        Termination::PicardFailure { .. } => exit::PICARD_FAILURE,
    }
}

fn trajectory_details(record: &TrajectoryRecord, series: &DiagnosticsSeries) -> Map<String, Value> {
    let mut d = Map::new();
    d.insert("termination".into(), to_json(&record.termination));
    d.insert("final_time".into(), json_f64(record.final_state().t));
    d.insert("recorded_times".into(), json!(record.times.len()));
    d.insert(
        "max_picard_iterations".into(),
        json!(record.picard_iterations.iter().copied().max().unwrap_or(0)),
    );
    d.insert("constants".into(), to_json(&series.constants));
    d
}

fn run(loaded: &LoadedConfig, dir: &Path, hash: &str) -> Result<Report, CliError> {
    let (_, record, series) = simulate(loaded)?;
    let files = output::write_trajectory(dir, loaded.config.outputs.format, hash, &record, &series)?;
    let mut details = trajectory_details(&record, &series);
    let sup: Vec<f64> = record.snapshots.iter().map(|s| s.sup_u()).collect();
    let rise = sup.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]));
    details.insert("max_abs_u_initial".into(), json_f64(sup[0]));
    details.insert("max_abs_u_final".into(), json_f64(*sup.last().unwrap_or(&f64::NAN)));
    details.insert("max_abs_u_largest_rise".into(), json_f64(rise));
    Ok(Report {
        exit_code: termination_code(&record.termination, false),
        details,
        files,
    })
}

fn verify(loaded: &LoadedConfig, dir: &Path, hash: &str) -> Result<Report, CliError> {
    let c = &loaded.config;
    let rows = convergence_study(&c.verify.n_list, default_dt, &c.solver, c.grid.closure)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.n.to_string()];
            row.extend(cells(&[Some(r.dt), r.max_abs, r.observed_order], &[r.failure.as_deref().unwrap_or("")]));
            row
        })
        .collect();
    write_csv(
        &dir.join("convergence.csv"),
        hash,
        &["n", "dt", "max_abs_error", "observed_order", "failure"],
        &table,
    )?;
    let errors: Vec<Option<f64>> = rows.iter().map(|r| r.max_abs).collect();
    let decreasing = errors.windows(2).all(|w| matches!(w, [Some(a), Some(b)] if b < a));
    let min_order = rows.iter().filter_map(|r| r.observed_order).fold(f64::INFINITY, f64::min);
    let exit_code = rows
        .iter()
        .filter_map(|r| r.failure.as_deref())
        .map(|f| if f.contains("blow-up") { exit::UNEXPECTED_BLOWUP } else { exit::PICARD_FAILURE })
        .next()
        .unwrap_or(exit::SUCCESS);
    let mut details = Map::new();
    details.insert("problem".into(), json!("manufactured solution exp(x - t)"));
    details.insert("rows".into(), to_json(&rows));
    details.insert("errors_strictly_decreasing".into(), json!(decreasing));
    details.insert(
        "min_observed_order".into(),
        if min_order.is_finite() { json_f64(min_order) } else { Value::Null },
    );
    Ok(Report {
        exit_code,
        details,
        files: vec!["convergence.csv".into()],
    })
}

fn blowup(loaded: &LoadedConfig, dir: &Path, hash: &str) -> Result<Report, CliError> {
    let c = &loaded.config;
    let (grid, record, series) = simulate(loaded)?;
    let files = output::write_trajectory(dir, c.outputs.format, hash, &record, &series)?;
    let mut details = trajectory_details(&record, &series);
    let first = &series.values[0];
    details.insert("h0".into(), first.h.map_or(Value::Null, json_f64));
    details.insert("h0_positive".into(), json!(first.h.map(|h| h > 0.0)));
    details.insert("l0".into(), first.l_blowup.map_or(Value::Null, json_f64));
    let event = record.blowup();
    details.insert("blowup_detected".into(), json!(event.is_some()));
    details.insert("blowup_time".into(), event.map_or(Value::Null, |e| json_f64(e.t)));
    details.insert(
        "blowup_time_bound".into(),
        series.constants.blowup_time_bound.map_or(Value::Null, json_f64),
    );
    let monotonicity = match series.constants.h_tilde {
        Some(h_tilde) => {
            let system = SemiDiscreteSystem::new(&c.parameters, &c.data, &grid)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let report = check_h_monotone(&record, &system, &c.solver, h_tilde);
            let mut m = to_json(&report);
            if let Value::Object(map) = &mut m {
                map.insert("resolved_fraction".into(), json_f64(report.resolved_fraction()));
                map.insert("nondecreasing".into(), json!(report.ok(MIN_RESOLVED)));
            }
            m
        }
        None => Value::Null,
    };
    details.insert("h_monotonicity".into(), monotonicity);
    Ok(Report {
        exit_code: termination_code(&record.termination, true),
        details,
        files,
    })
}

fn decay(loaded: &LoadedConfig, dir: &Path, hash: &str) -> Result<Report, CliError> {
    let c = &loaded.config;
    let (_, record, series) = simulate(loaded)?;
    let files = output::write_trajectory(dir, c.outputs.format, hash, &record, &series)?;
    let mut details = trajectory_details(&record, &series);
    let k = &series.constants;
    let i_min = series.values.iter().map(|v| v.i).fold(f64::INFINITY, f64::min);
    details.insert("eta_star".into(), k.decay.map_or(Value::Null, |d| json_f64(d.eta_star)));
    details.insert("r".into(), k.decay.map_or(Value::Null, |d| json_f64(d.r)));
    details.insert("eta_star_below_one".into(), json!(k.decay.map(|d| d.decays)));
    details.insert("i_min".into(), json_f64(i_min));
    details.insert(
        "i_positive".into(),
        json!(series.values.iter().all(|v| v.i > 0.0)),
    );
    details.insert("decay_fit".into(), to_json(&k.decay_fit));
    let sandwich = k.sandwich.map(|(b1, b2)| series.sandwich_holds(b1, b2, SANDWICH_SLACK));
    details.insert("sandwich_holds".into(), json!(sandwich));
    Ok(Report {
        exit_code: termination_code(&record.termination, false),
        details,
        files,
    })
}

fn sweep(loaded: &LoadedConfig, dir: &Path, workers: Option<usize>) -> Result<Report, CliError> {
    let points = expand_sweep(&loaded.config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Validation(format!("worker pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, point)| {
                let mut config = point.config.clone();
                config.outputs.dir = dir.join(format!("point-{i:03}"));
                let command = Command::for_mode(config.mode);
                match config.clone().validate() {
                    Ok(l) => run_command(command, &l, None),
                    Err(e) => failure(command, Some(config.outputs.dir.clone()), Some(&config), &e),
                }
            })
            .collect()
    });
    let index: Vec<Vec<String>> = points
        .iter()
        .zip(&outcomes)
        .enumerate()
        .map(|(i, (p, o))| {
            vec![
                format!("point-{i:03}"),
                o.exit_code.to_string(),
                config_hash(&p.config),
                format!("\"{}\"", output::describe_assignments(&p.assignments).replace('"', "\"\"")),
            ]
        })
        .collect();
    write_csv(
        &dir.join("sweep.csv"),
        &config_hash(&loaded.config),
        &["point", "exit_code", "point_config_hash", "assignments"],
        &index,
    )?;
    let exit_code = outcomes
        .iter()
        .map(|o| o.exit_code)
        .find(|&c| c != exit::SUCCESS)
        .unwrap_or(exit::SUCCESS);
    let mut details = Map::new();
    details.insert(
        "points".into(),
        Value::Array(
            points
                .iter()
                .zip(&outcomes)
                .enumerate()
                .map(|(i, (p, o))| {
                    json!({
                        "dir": format!("point-{i:03}"),
                        "assignments": output::describe_assignments(&p.assignments),
                        "exit_code": o.exit_code,
                    })
                })
                .collect(),
        ),
    );
    Ok(Report {
        exit_code,
        details,
        files: vec!["sweep.csv".into()],
    })
}
