//! Sweep orchestration: config ingestion, seeded parallel runs, CSV/JSON
//! persistence, and the diagnostics verb.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use coopkb::algorithms::{
    ablation_individual_allocation, baseline_independent_fb, baseline_independent_fc,
    baseline_uniform_fb, coop_kernel_fb, coop_kernel_fc, fb_auto_xi_star, mix_seed, Setting,
};
use coopkb::config::{AlgorithmChoice, ExperimentConfig};
use coopkb::diagnostics::{compute_diagnostics, InstanceDiagnostics};
use coopkb::protocol::{generate_instance, ProblemInstance, RunReport, TaskRegime};
use rayon::prelude::*;
use serde::Serialize;

use crate::{DiagArgs, RunArgs};

/// Stable column order of `results.csv`; documented in the README and relied
/// on by the plot verb.
pub const CSV_HEADER: [&str; 22] = [
    "setting",
    "regime",
    "algorithm",
    "delta_min",
    "budget",
    "run_index",
    "seed",
    "all_correct",
    "total_samples",
    "mean_samples_per_agent",
    "max_samples_per_agent",
    "communication_rounds",
    "phases",
    "payload_total_numbers",
    "incomplete",
    "warnings",
    "rho_star",
    "information_gain",
    "effective_dimension",
    "rank_task",
    "rank_arm",
    "rank_composite",
];

fn regime_name(regime: TaskRegime) -> &'static str {
    match regime {
        TaskRegime::Ones => "ones",
        TaskRegime::Block => "block",
        TaskRegime::Identity => "identity",
    }
}

fn parse_regime(name: &str) -> Option<TaskRegime> {
    match name {
        "ones" => Some(TaskRegime::Ones),
        "block" => Some(TaskRegime::Block),
        "identity" => Some(TaskRegime::Identity),
        _ => None,
    }
}

#[derive(Clone, Copy)]
struct Point {
    setting: Setting,
    regime: TaskRegime,
    /// Gap for fixed-confidence points.
    delta_min: f64,
    /// Per-agent budget for fixed-budget points; 0 for fixed-confidence.
    budget: u64,
    algorithm: AlgorithmChoice,
    point_id: u64,
}

impl Point {
    fn label(&self) -> String {
        match self.setting {
            Setting::FixedConfidence => format!(
                "fc_{}_{}_d{}",
                regime_name(self.regime),
                self.algorithm.name(false),
                self.delta_min
            ),
            Setting::FixedBudget => format!(
                "fb_{}_{}_t{}",
                regime_name(self.regime),
                self.algorithm.name(true),
                self.budget
            ),
        }
    }
}

fn enumerate_points(config: &ExperimentConfig) -> Vec<Point> {
    let mut points = Vec::new();
    let mut id = 0;
    if config.fc.enabled {
        for &regime in &config.fc.regimes {
            for &delta_min in &config.fc.delta_min_grid {
                for &algorithm in &config.fc.algorithms {
                    id += 1;
                    points.push(Point {
                        setting: Setting::FixedConfidence,
                        regime,
                        delta_min,
                        budget: 0,
                        algorithm,
                        point_id: id,
                    });
                }
            }
        }
    }
    if config.fb.enabled {
        for &regime in &config.fb.regimes {
            for &budget in &config.fb.budget_grid {
                for &algorithm in &config.fb.algorithms {
                    id += 1;
                    points.push(Point {
                        setting: Setting::FixedBudget,
                        regime,
                        delta_min: config.fb.delta_min,
                        budget,
                        algorithm,
                        point_id: id,
                    });
                }
            }
        }
    }
    points
}

fn execute(
    config: &ExperimentConfig,
    point: &Point,
    instance: &ProblemInstance,
    seed: u64,
) -> coopkb::Result<RunReport> {
    match point.setting {
        Setting::FixedConfidence => {
            let fc = config.fc_config();
            match point.algorithm {
                AlgorithmChoice::Coop => coop_kernel_fc(instance, &fc, seed),
                AlgorithmChoice::IndAlloc => ablation_individual_allocation(
                    instance,
                    Setting::FixedConfidence,
                    Some(&fc),
                    None,
                    seed,
                ),
                AlgorithmChoice::Independent => baseline_independent_fc(instance, &fc, seed),
                AlgorithmChoice::Uniform => Err(coopkb::Error::Precondition(
                    "uniform sampling has no fixed-confidence form".into(),
                )),
            }
        }
        Setting::FixedBudget => {
            let fb = config.fb_config(point.budget);
            match point.algorithm {
                AlgorithmChoice::Coop => coop_kernel_fb(instance, &fb, seed),
                AlgorithmChoice::IndAlloc => ablation_individual_allocation(
                    instance,
                    Setting::FixedBudget,
                    None,
                    Some(&fb),
                    seed,
                ),
                AlgorithmChoice::Independent => baseline_independent_fb(instance, &fb, seed),
                AlgorithmChoice::Uniform => baseline_uniform_fb(instance, &fb, seed),
            }
        }
    }
}

#[derive(Serialize)]
struct PointReport<'a> {
    label: String,
    setting: &'a str,
    regime: &'a str,
    algorithm: &'a str,
    delta_min: f64,
    budget: u64,
    runs: Vec<RunReport>,
}

fn run_inner(args: &RunArgs) -> Result<bool> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = ExperimentConfig::from_toml_str(&text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.experiment.master_seed = seed;
    }
    if let Some(workers) = args.workers {
        config.experiment.workers = workers;
    }

    let grid = config.grid_summary();
    if args.dry_run {
        println!(
            "resolved grid: {} fixed-confidence points ({} runs), {} fixed-budget points ({} runs)",
            grid.fc_points, grid.fc_runs, grid.fb_points, grid.fb_runs
        );
        return Ok(false);
    }

    if config.experiment.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.experiment.workers)
            .build_global()
            .ok();
    }

    fs::create_dir_all(&args.out)?;
    fs::create_dir_all(args.out.join("reports"))?;
    fs::create_dir_all(args.out.join("plots"))?;
    fs::write(
        args.out.join("resolved_config.toml"),
        config.to_toml_string().map_err(|e| anyhow::anyhow!("{e}"))?,
    )?;

    let points = enumerate_points(&config);
    if points.is_empty() {
        println!("nothing to run: enable [fc] or [fb] in the config");
        return Ok(false);
    }

    // one instance per distinct (regime, gap) pair, shared across algorithms
    let mut instances: BTreeMap<(u8, u64), ProblemInstance> = BTreeMap::new();
    let mut diagnostics: BTreeMap<(u8, u64), InstanceDiagnostics> = BTreeMap::new();
    let solver = config.solver_options();
    for point in &points {
        let key = (point.regime as u8, point.delta_min.to_bits());
        if instances.contains_key(&key) {
            continue;
        }
        let instance = generate_instance(&config.instance_config(point.regime, point.delta_min)?)
            .map_err(|e| anyhow::anyhow!("instance generation: {e}"))?;
        let xi = config
            .fb
            .xi_star
            .map(Ok)
            .unwrap_or_else(|| fb_auto_xi_star(&instance, config.fb.eps, None))
            .map_err(|e| anyhow::anyhow!("xi_star: {e}"))?;
        let diag = compute_diagnostics(&instance, xi, &solver)
            .map_err(|e| anyhow::anyhow!("diagnostics: {e}"))?;
        diagnostics.insert(key, diag);
        instances.insert(key, instance);
    }

    let master = config.experiment.master_seed;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut any_incomplete = false;
    for point in &points {
        let key = (point.regime as u8, point.delta_min.to_bits());
        let instance = &instances[&key];
        let diag = &diagnostics[&key];
        let runs = match point.setting {
            Setting::FixedConfidence => config.fc.runs,
            Setting::FixedBudget => config.fb.runs,
        };
        let reports: Vec<(u64, RunReport)> = (0..runs as u64)
            .into_par_iter()
            .map(|run_idx| {
                let seed = mix_seed(mix_seed(master, point.point_id), run_idx);
                execute(&config, point, instance, seed)
                    .map(|report| (seed, report))
                    .map_err(|e| anyhow::anyhow!("{} run {run_idx}: {e}", point.label()))
            })
            .collect::<Result<_>>()?;

        let (setting_name, fixed_budget) = match point.setting {
            Setting::FixedConfidence => ("fc", false),
            Setting::FixedBudget => ("fb", true),
        };
        for (run_idx, (seed, report)) in reports.iter().enumerate() {
            any_incomplete |= report.incomplete;
            rows.push(vec![
                setting_name.to_string(),
                regime_name(point.regime).to_string(),
                point.algorithm.name(fixed_budget).to_string(),
                format!("{}", point.delta_min),
                point.budget.to_string(),
                run_idx.to_string(),
                seed.to_string(),
                report.all_correct().to_string(),
                report.total_samples.to_string(),
                format!("{}", report.mean_samples_per_agent()),
                report.samples_per_agent.iter().max().copied().unwrap_or(0).to_string(),
                report.communication_rounds.to_string(),
                report.phase_trace.len().to_string(),
                report.payload_numbers_per_round.iter().sum::<u64>().to_string(),
                report.incomplete.to_string(),
                report.warnings.len().to_string(),
                format!("{}", diag.rho_star),
                format!("{}", diag.information_gain),
                diag.effective_dimension.to_string(),
                diag.rank_task.to_string(),
                diag.rank_arm.to_string(),
                diag.rank_composite.to_string(),
            ]);
        }

        let point_report = PointReport {
            label: point.label(),
            setting: setting_name,
            regime: regime_name(point.regime),
            algorithm: point.algorithm.name(fixed_budget),
            delta_min: point.delta_min,
            budget: point.budget,
            runs: reports.into_iter().map(|(_, r)| r).collect(),
        };
        let path = args.out.join("reports").join(format!("{}.json", point.label()));
        fs::write(path, serde_json::to_string_pretty(&point_report)?)?;
    }

    let mut writer = csv::Writer::from_path(args.out.join("results.csv"))?;
    writer.write_record(CSV_HEADER)?;
    for row in &rows {
        writer.write_record(row)?;
    }
    writer.flush()?;

    crate::plots::emit(&args.out)?;
    println!(
        "wrote {} rows across {} grid points to {}",
        rows.len(),
        points.len(),
        args.out.display()
    );
    Ok(any_incomplete)
}

pub fn run(args: RunArgs) -> ExitCode {
    // config problems exit 2; aborted runs exit 3 with partial artifacts kept
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = ExperimentConfig::from_toml_str(&text) {
        eprintln!("error: {}: {e}", args.config.display());
        return ExitCode::from(2);
    }
    match run_inner(&args) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("warning: at least one run aborted at the sample cap; artifacts are partial");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

pub fn diag(args: DiagArgs) -> ExitCode {
    match diag_inner(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn diag_inner(args: &DiagArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let config = ExperimentConfig::from_toml_str(&text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", args.config.display()))?;
    let solver = config.solver_options();
    let mut regimes: Vec<TaskRegime> = Vec::new();
    for r in config.fc.regimes.iter().chain(config.fb.regimes.iter()) {
        if !regimes.contains(r) {
            regimes.push(*r);
        }
    }
    let delta = config.fc.delta_min_grid.first().copied().unwrap_or(config.fb.delta_min);
    let mut blocks = Vec::new();
    for regime in regimes {
        let instance = generate_instance(&config.instance_config(regime, delta)?)
            .map_err(|e| anyhow::anyhow!("instance generation: {e}"))?;
        let xi = match (args.xi_star, config.fb.xi_star) {
            (Some(x), _) => x,
            (None, Some(x)) => x,
            (None, None) => fb_auto_xi_star(&instance, config.fb.eps, None)
                .map_err(|e| anyhow::anyhow!("xi_star: {e}"))?,
        };
        let diag = compute_diagnostics(&instance, xi, &solver)
            .map_err(|e| anyhow::anyhow!("diagnostics: {e}"))?;
        blocks.push(serde_json::json!({
            "regime": regime_name(regime),
            "delta_min": delta,
            "diagnostics": diag,
        }));
    }
    println!("{}", serde_json::to_string_pretty(&blocks)?);
    Ok(())
}

/// Parsed view of one results.csv row, shared with the plot verb.
pub struct CsvRow {
    pub setting: String,
    pub regime: String,
    pub algorithm: String,
    pub delta_min: f64,
    pub budget: u64,
    pub all_correct: bool,
    pub mean_samples_per_agent: f64,
}

pub fn read_results(path: &Path) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow::anyhow!("results.csv lacks column {name}"))
    };
    let (c_setting, c_regime, c_algo) = (col("setting")?, col("regime")?, col("algorithm")?);
    let (c_delta, c_budget) = (col("delta_min")?, col("budget")?);
    let (c_correct, c_mean) = (col("all_correct")?, col("mean_samples_per_agent")?);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(CsvRow {
            setting: record[c_setting].to_string(),
            regime: record[c_regime].to_string(),
            algorithm: record[c_algo].to_string(),
            delta_min: record[c_delta].parse()?,
            budget: record[c_budget].parse()?,
            all_correct: record[c_correct].parse()?,
            mean_samples_per_agent: record[c_mean].parse()?,
        });
    }
    Ok(rows)
}

pub fn known_regime(name: &str) -> bool {
    parse_regime(name).is_some()
}
