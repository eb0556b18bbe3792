//! Experiment configuration: a TOML document with the problem, grid, solver,
//! diagnostics and output settings.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use twopoint_core::diagnostics::FunctionalConfig;
use twopoint_core::discretization::{BoundaryClosure, SpatialGrid};
use twopoint_core::model::{check_assumptions, check_compatibility, AssumptionReport, CompatibilityReport, Mode};
use twopoint_core::solver::SolverConfig;
use twopoint_core::verification::manufactured_problem;
use twopoint_core::{ProblemData, ProblemParameters, ScalarFn};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default)]
    pub closure: BoundaryClosure,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 10,
            closure: BoundaryClosure::default(),
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<SpatialGrid, CliError> {
        Ok(SpatialGrid::new(self.n)
            .map_err(|e| CliError::Validation(format!("grid: {e}")))?
            .with_closure(self.closure))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Refinement levels for the convergence study.
    pub n_list: Vec<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n_list: vec![5, 10, 20, 40],
        }
    }
}

/// One swept setting: a dotted key into the config and the values it takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<SweepAxis>,
}

impl SweepConfig {
    fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub parameters: ProblemParameters,
    pub data: ProblemData,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: FunctionalConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default, skip_serializing_if = "SweepConfig::is_empty")]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

/// A parsed config with the results of the eager model checks.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub assumptions: AssumptionReport,
    pub compatibility: CompatibilityReport,
    pub warnings: Vec<String>,
}

pub const PRESETS: [&str; 3] = ["paper-grid", "blowup", "decay"];

/// Built-in experiments.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let (parameters, manufactured) = manufactured_problem();
    let base = ExperimentConfig {
        mode: Mode::General,
        parameters,
        data: manufactured,
        grid: GridConfig::default(),
        solver: SolverConfig::default(),
        diagnostics: FunctionalConfig::default(),
        verify: VerifyConfig::default(),
        sweep: SweepConfig::default(),
        outputs: OutputConfig::default(),
    };
    match name {
        "paper-grid" => Some(base),
        "blowup" => Some(ExperimentConfig {
            mode: Mode::Blowup,
            data: ProblemData::homogeneous(ScalarFn::constant(5.0), ScalarFn::zero()),
            grid: GridConfig {
                n: 40,
                ..GridConfig::default()
            },
            solver: SolverConfig {
                dt: 0.001,
                ..SolverConfig::default()
            },
            ..base
        }),
        "decay" => Some(ExperimentConfig {
            mode: Mode::Decay,
            data: ProblemData::homogeneous(ScalarFn::constant(0.1), ScalarFn::zero()),
            grid: GridConfig {
                n: 20,
                ..GridConfig::default()
            },
            solver: SolverConfig {
                dt: 0.01,
                t_final: 10.0,
                ..SolverConfig::default()
            },
            ..base
        }),
        _ => None,
    }
}

/// Hypotheses whose failure rejects a config in each mode. The rest are
/// reported as warnings.
fn required(mode: Mode) -> &'static [&'static str] {
    match mode {
        Mode::General => &["A1", "A2"],
        Mode::Blowup => &["A1", "A2'", "A3'"],
        Mode::Decay => &["A1", "A2", "A3''"],
    }
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Runs the model checks, rejecting violations of the mode's hypotheses.
    pub fn validate(self) -> Result<LoadedConfig, CliError> {
        self.data.validate().map_err(|e| CliError::Validation(format!("data: {e}")))?;
        self.solver
            .validate()
            .map_err(|e| CliError::Validation(format!("solver: {e}")))?;
        self.grid.build()?;
        if self.verify.n_list.iter().any(|&n| n < 2) {
            return Err(CliError::Validation("verify: every n in n_list must be at least 2".into()));
        }
        let assumptions = check_assumptions(&self.parameters, &self.data, self.mode, self.solver.t_final);
        let mut warnings = Vec::new();
        for (tag, check) in assumptions.checks() {
            if check.ok {
                continue;
            }
            if required(self.mode).contains(&tag) {
                return Err(CliError::Validation(check.reason.clone()));
            }
            warnings.push(check.reason.clone());
        }
        let compatibility = check_compatibility(&self.parameters, &self.data, 1e-6);
        if !compatibility.pass {
            warnings.push(format!(
                "initial data violate the boundary relations at t = 0: residuals ({:e}, {:e})",
                compatibility.r0, compatibility.r1
            ));
        }
        Ok(LoadedConfig {
            config: self,
            assumptions,
            compatibility,
            warnings,
        })
    }
}

/// Parses a TOML config document and validates it.
pub fn parse_config(text: &str) -> Result<LoadedConfig, CliError> {
    parse_unchecked(text)?.validate()
}

/// Parses without the model checks.
pub fn parse_unchecked(text: &str) -> Result<ExperimentConfig, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Parse("empty config document".into()));
    }
    toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

fn set_dotted(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Validation(format!("sweep key '{key}': '{part}' is not inside a table")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::value::Table::new()));
    }
    Err(CliError::Validation(format!("sweep key '{key}' is empty")))
}

/// One point of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub assignments: Vec<(String, toml::Value)>,
    pub config: ExperimentConfig,
}

/// Cartesian product of the sweep axes, each applied to a copy of `base`.
pub fn expand_sweep(base: &ExperimentConfig) -> Result<Vec<SweepPoint>, CliError> {
    let mut stripped = base.clone();
    stripped.sweep = SweepConfig::default();
    let root = toml::Value::try_from(&stripped).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut points = vec![Vec::new()];
    for axis in &base.sweep.axes {
        if axis.values.is_empty() {
            return Err(CliError::Validation(format!("sweep axis '{}' has no values", axis.key)));
        }
        points = points
            .into_iter()
            .flat_map(|prefix: Vec<(String, toml::Value)>| {
                axis.values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push((axis.key.clone(), v.clone()));
                    next
                })
            })
            .collect();
    }
    points
        .into_iter()
        .map(|assignments| {
            let mut value = root.clone();
            for (key, v) in &assignments {
                set_dotted(&mut value, key, v.clone())?;
            }
            let config: ExperimentConfig = value
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Validation(format!("sweep point: {e}")))?;
            Ok(SweepPoint { assignments, config })
        })
        .collect()
}
