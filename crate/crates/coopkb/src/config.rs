//! Experiment configuration: one TOML file with a section per module.
//!
//! Parsing and validation are separate so the CLI can report syntax errors
//! with the parser's line/column messages and semantic errors with field
//! paths. [`ExperimentConfig::from_toml_str`] does both.

use serde::{Deserialize, Serialize};

use crate::algorithms::{FbConfig, FcConfig};
use crate::design::SolverOptions;
use crate::kernel::ArmKernel;
use crate::protocol::{ArmGenerator, InstanceConfig, TaskRegime};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub fc: FcSection,
    #[serde(default)]
    pub fb: FbSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    pub agents: usize,
    pub arms_per_agent: usize,
    pub feature_dim: usize,
    #[serde(default = "default_generator")]
    pub generator: ArmGenerator,
    #[serde(default = "default_theta_start")]
    pub theta_start: f64,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default = "default_task_blocks")]
    pub task_blocks: usize,
    #[serde(default)]
    pub instance_seed: u64,
}

fn default_generator() -> ArmGenerator {
    ArmGenerator::PaperGrid
}
fn default_theta_start() -> f64 {
    0.1
}
fn default_noise_std() -> f64 {
    1.0
}
fn default_task_blocks() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "default_arm_kernel")]
    pub arm: String,
    #[serde(default = "default_bandwidth")]
    pub rbf_bandwidth: f64,
    /// Row-major explicit Gram for the "table" arm kernel.
    #[serde(default)]
    pub arm_table: Option<Vec<Vec<f64>>>,
    /// Row-major explicit V x V task Gram; overrides the regime's task
    /// kernel when present.
    #[serde(default)]
    pub task_table: Option<Vec<Vec<f64>>>,
}

fn default_arm_kernel() -> String {
    "linear".into()
}
fn default_bandwidth() -> f64 {
    1.0
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            arm: default_arm_kernel(),
            rbf_bandwidth: default_bandwidth(),
            arm_table: None,
            task_table: None,
        }
    }
}

/// Algorithms selectable per setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmChoice {
    /// The collaborative elimination algorithm of the setting.
    Coop,
    /// Per-agent allocation ablation.
    IndAlloc,
    /// Independent single-agent runs per task.
    Independent,
    /// Uniform round-robin sampling (fixed budget only).
    Uniform,
}

impl AlgorithmChoice {
    pub fn name(&self, fixed_budget: bool) -> &'static str {
        match (self, fixed_budget) {
            (AlgorithmChoice::Coop, false) => "coop-kernel-fc",
            (AlgorithmChoice::Coop, true) => "coop-kernel-fb",
            (AlgorithmChoice::IndAlloc, false) => "ind-alloc-fc",
            (AlgorithmChoice::IndAlloc, true) => "ind-alloc-fb",
            (AlgorithmChoice::Independent, false) => "independent-fc",
            (AlgorithmChoice::Independent, true) => "independent-fb",
            (AlgorithmChoice::Uniform, _) => "uniform-fb",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_fc_runs")]
    pub runs: usize,
    #[serde(default = "default_delta_grid")]
    pub delta_min_grid: Vec<f64>,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<TaskRegime>,
    #[serde(default = "default_fc_algorithms")]
    pub algorithms: Vec<AlgorithmChoice>,
    #[serde(default)]
    pub norm_bound: Option<f64>,
}

fn default_delta() -> f64 {
    0.005
}
fn default_eps() -> f64 {
    0.1
}
fn default_fc_runs() -> usize {
    50
}
fn default_delta_grid() -> Vec<f64> {
    // 8 log-spaced gaps spanning [0.1, 0.8]
    vec![0.1, 0.135, 0.181, 0.244, 0.328, 0.442, 0.594, 0.8]
}
fn default_regimes() -> Vec<TaskRegime> {
    vec![TaskRegime::Ones, TaskRegime::Block, TaskRegime::Identity]
}
fn default_fc_algorithms() -> Vec<AlgorithmChoice> {
    vec![AlgorithmChoice::Coop, AlgorithmChoice::IndAlloc, AlgorithmChoice::Independent]
}

impl Default for FcSection {
    fn default() -> Self {
        Self {
            enabled: false,
            delta: default_delta(),
            eps: default_eps(),
            runs: default_fc_runs(),
            delta_min_grid: default_delta_grid(),
            regimes: default_regimes(),
            algorithms: default_fc_algorithms(),
            norm_bound: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_fb_delta_min")]
    pub delta_min: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_fb_runs")]
    pub runs: usize,
    #[serde(default = "default_budget_grid")]
    pub budget_grid: Vec<u64>,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<TaskRegime>,
    #[serde(default = "default_fb_algorithms")]
    pub algorithms: Vec<AlgorithmChoice>,
    #[serde(default)]
    pub xi_star: Option<f64>,
}

fn default_fb_delta_min() -> f64 {
    0.1
}
fn default_fb_runs() -> usize {
    100
}
fn default_budget_grid() -> Vec<u64> {
    // 8 log-spaced budgets spanning [7000, 300000]
    vec![7000, 12020, 20640, 35440, 60860, 104510, 179470, 300000]
}
fn default_fb_algorithms() -> Vec<AlgorithmChoice> {
    vec![
        AlgorithmChoice::Coop,
        AlgorithmChoice::IndAlloc,
        AlgorithmChoice::Independent,
        AlgorithmChoice::Uniform,
    ]
}

impl Default for FbSection {
    fn default() -> Self {
        Self {
            enabled: false,
            delta_min: default_fb_delta_min(),
            eps: default_eps(),
            runs: default_fb_runs(),
            budget_grid: default_budget_grid(),
            regimes: default_regimes(),
            algorithms: default_fb_algorithms(),
            xi_star: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_max_iter() -> usize {
    2000
}
fn default_tol() -> f64 {
    1e-6
}
fn default_patience() -> usize {
    100
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            tol: default_tol(),
            patience: default_patience(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default = "default_sample_cap")]
    pub sample_cap: u64,
    /// Worker threads; 0 means one per core.
    #[serde(default)]
    pub workers: usize,
}

fn default_master_seed() -> u64 {
    17
}
fn default_sample_cap() -> u64 {
    100_000_000
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            master_seed: default_master_seed(),
            sample_cap: default_sample_cap(),
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates. Syntax errors keep the TOML parser's
    /// line/column rendering; semantic errors name the offending field.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let inst = &self.instance;
        if inst.agents == 0 || inst.arms_per_agent == 0 || inst.feature_dim == 0 {
            return Err(Error::Config(
                "instance.agents, instance.arms_per_agent, instance.feature_dim must be positive"
                    .into(),
            ));
        }
        if !(inst.noise_std >= 0.0) {
            return Err(Error::Config("instance.noise_std must be nonnegative".into()));
        }
        if inst.task_blocks == 0 || inst.task_blocks > inst.agents {
            return Err(Error::Config(format!(
                "instance.task_blocks must be in 1..={}, got {}",
                inst.agents, inst.task_blocks
            )));
        }
        match self.kernel.arm.as_str() {
            "linear" => {}
            "rbf" => {
                if !(self.kernel.rbf_bandwidth > 0.0) {
                    return Err(Error::Config("kernel.rbf_bandwidth must be positive".into()));
                }
            }
            "table" => {
                let Some(table) = &self.kernel.arm_table else {
                    return Err(Error::Config(
                        "kernel.arm = \"table\" requires kernel.arm_table".into(),
                    ));
                };
                let m = inst.agents * inst.arms_per_agent;
                if table.len() != m || table.iter().any(|row| row.len() != m) {
                    return Err(Error::Config(format!(
                        "kernel.arm_table must be {m}x{m} (one row per tasked arm)"
                    )));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "kernel.arm must be one of linear, rbf, table; got {other:?}"
                )))
            }
        }
        if let Some(table) = &self.kernel.task_table {
            let v = inst.agents;
            if table.len() != v || table.iter().any(|row| row.len() != v) {
                return Err(Error::Config(format!(
                    "kernel.task_table must be {v}x{v} (one row per agent)"
                )));
            }
        }
        if self.fc.enabled {
            if !(self.fc.delta > 0.0 && self.fc.delta < 1.0) {
                return Err(Error::Config(format!(
                    "fc.delta must be in (0,1), got {}",
                    self.fc.delta
                )));
            }
            if self.fc.runs == 0 || self.fc.delta_min_grid.is_empty() || self.fc.regimes.is_empty()
            {
                return Err(Error::Config(
                    "fc.runs, fc.delta_min_grid, fc.regimes must be nonempty".into(),
                ));
            }
            if self.fc.delta_min_grid.iter().any(|d| !(*d > 0.0)) {
                return Err(Error::Config("fc.delta_min_grid entries must be positive".into()));
            }
            if self.fc.algorithms.contains(&AlgorithmChoice::Uniform) {
                return Err(Error::Config(
                    "fc.algorithms: uniform sampling is a fixed-budget baseline".into(),
                ));
            }
            if !(self.fc.eps > 0.0) {
                return Err(Error::Config("fc.eps must be positive".into()));
            }
        }
        if self.fb.enabled {
            if self.fb.runs == 0 || self.fb.budget_grid.is_empty() || self.fb.regimes.is_empty() {
                return Err(Error::Config(
                    "fb.runs, fb.budget_grid, fb.regimes must be nonempty".into(),
                ));
            }
            if self.fb.budget_grid.iter().any(|t| *t == 0) {
                return Err(Error::Config("fb.budget_grid entries must be positive".into()));
            }
            if !(self.fb.delta_min > 0.0) {
                return Err(Error::Config("fb.delta_min must be positive".into()));
            }
            if !(self.fb.eps > 0.0) {
                return Err(Error::Config("fb.eps must be positive".into()));
            }
            if let Some(xi) = self.fb.xi_star {
                if !(xi > 0.0) {
                    return Err(Error::Config("fb.xi_star must be positive".into()));
                }
            }
        }
        if self.solver.max_iter == 0 || self.solver.patience == 0 || !(self.solver.tol > 0.0) {
            return Err(Error::Config(
                "solver.max_iter, solver.patience, solver.tol must be positive".into(),
            ));
        }
        if self.experiment.sample_cap == 0 {
            return Err(Error::Config("experiment.sample_cap must be positive".into()));
        }
        Ok(())
    }

    pub fn arm_kernel(&self) -> Result<ArmKernel> {
        Ok(match self.kernel.arm.as_str() {
            "linear" => ArmKernel::Linear,
            "rbf" => ArmKernel::Rbf {
                bandwidth: self.kernel.rbf_bandwidth,
            },
            "table" => {
                let table = self.kernel.arm_table.as_ref().expect("validated");
                let m = table.len();
                let mut gram = nalgebra::DMatrix::zeros(m, m);
                for (i, row) in table.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        gram[(i, j)] = *v;
                    }
                }
                ArmKernel::Table { gram }
            }
            other => return Err(Error::Config(format!("unknown arm kernel {other:?}"))),
        })
    }

    /// Instance parameters for one grid point.
    pub fn instance_config(&self, regime: TaskRegime, delta_min: f64) -> Result<InstanceConfig> {
        Ok(InstanceConfig {
            num_agents: self.instance.agents,
            arms_per_agent: self.instance.arms_per_agent,
            feature_dim: self.instance.feature_dim,
            generator: self.instance.generator,
            task_regime: regime,
            task_blocks: self.instance.task_blocks,
            delta_min,
            theta_start: self.instance.theta_start,
            noise_std: self.instance.noise_std,
            instance_seed: self.instance.instance_seed,
            arm_kernel: self.arm_kernel()?,
            task_table: self.kernel.task_table.as_ref().map(|rows| {
                let v = rows.len();
                nalgebra::DMatrix::from_fn(v, v, |i, j| rows[i][j])
            }),
        })
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            max_iter: self.solver.max_iter,
            tol: self.solver.tol,
            patience: self.solver.patience,
        }
    }

    pub fn fc_config(&self) -> FcConfig {
        FcConfig {
            delta: self.fc.delta,
            norm_bound: self.fc.norm_bound,
            eps: self.fc.eps,
            solver: self.solver_options(),
            sample_cap: self.experiment.sample_cap,
        }
    }

    pub fn fb_config(&self, budget_per_agent: u64) -> FbConfig {
        FbConfig {
            budget_per_agent,
            xi_star: self.fb.xi_star,
            eps: self.fb.eps,
            solver: self.solver_options(),
            sample_cap: self.experiment.sample_cap,
        }
    }

    /// Total number of runs the grid resolves to, for `--dry-run`.
    pub fn grid_summary(&self) -> GridSummary {
        let fc_points = if self.fc.enabled {
            self.fc.regimes.len() * self.fc.delta_min_grid.len() * self.fc.algorithms.len()
        } else {
            0
        };
        let fb_points = if self.fb.enabled {
            self.fb.regimes.len() * self.fb.budget_grid.len() * self.fb.algorithms.len()
        } else {
            0
        };
        GridSummary {
            fc_points,
            fc_runs: fc_points * self.fc.runs,
            fb_points,
            fb_runs: fb_points * self.fb.runs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSummary {
    pub fc_points: usize,
    pub fc_runs: usize,
    pub fb_points: usize,
    pub fb_runs: usize,
}
