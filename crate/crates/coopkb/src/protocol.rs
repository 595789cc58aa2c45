//! The simulated environment and the round-synchronous message bus.
//!
//! Agents sample their own arms from per-agent deterministic RNG streams and
//! exchange nothing but per-arm `(count, mean)` summaries. A round is a
//! barrier: every agent broadcasts one message, receives everyone else's, and
//! the round counter advances — even for a single agent, so round counts stay
//! comparable across agent counts. Payloads are accounted in numbers (2 per
//! arm), treating the bits per real as a constant.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::estimation::ObservationSummary;
use crate::kernel::{check_psd, validate_arms, ArmKernel, KernelSpec, TaskedArm, TaskKernel};
use crate::{Error, Result};

/// Ground-truth reward model, visible only to the environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Truth {
    /// `f(x̃) = phi(x̃)' theta` against the kernel spec's explicit feature map.
    Linear { theta: DVector<f64> },
    /// Tabulated means per global arm index, with the RKHS norm of the
    /// underlying function when known (used as the norm bound `B`).
    Table { means: Vec<f64>, norm: Option<f64> },
}

/// A complete simulation instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub num_agents: usize,
    pub arms_per_agent: usize,
    pub arms: Vec<TaskedArm>,
    pub spec: KernelSpec,
    pub truth: Truth,
    pub noise_std: f64,
    /// Global index of each agent's unique best arm.
    pub best_arms: Vec<usize>,
    /// `f(x̃*_v) - f(x̃)` per arm against the owner's best arm.
    pub gaps: Vec<f64>,
    /// Smallest positive gap across all agents.
    pub delta_min: f64,
    gram: DMatrix<f64>,
}

impl ProblemInstance {
    pub fn new(
        num_agents: usize,
        arms_per_agent: usize,
        arms: Vec<TaskedArm>,
        spec: KernelSpec,
        truth: Truth,
        noise_std: f64,
    ) -> Result<Self> {
        if arms.len() != num_agents * arms_per_agent {
            return Err(Error::Config(format!(
                "expected {} arms, got {}",
                num_agents * arms_per_agent,
                arms.len()
            )));
        }
        validate_arms(&arms, arms_per_agent)?;
        if let Truth::Linear { theta } = &truth {
            let Some(features) = &spec.explicit_features else {
                return Err(Error::Config(
                    "linear truth requires an explicit feature map on the kernel spec".into(),
                ));
            };
            if features.len() != arms.len() || features.iter().any(|f| f.len() != theta.len()) {
                return Err(Error::Config(
                    "explicit feature map does not match theta dimension".into(),
                ));
            }
        }
        if let Truth::Table { means, .. } = &truth {
            if means.len() != arms.len() {
                return Err(Error::Config("truth table length does not match arm count".into()));
            }
        }
        if noise_std < 0.0 {
            return Err(Error::Config("noise standard deviation must be nonnegative".into()));
        }

        let mean_of = |idx: usize| -> f64 {
            match &truth {
                Truth::Linear { theta } => spec.explicit_features.as_ref().expect("validated")[idx]
                    .dot(theta),
                Truth::Table { means, .. } => means[idx],
            }
        };

        let mut best_arms = Vec::with_capacity(num_agents);
        for v in 0..num_agents {
            let lo = v * arms_per_agent;
            let hi = lo + arms_per_agent;
            let mut best = lo;
            let mut best_val = mean_of(lo);
            let mut tie = false;
            for i in (lo + 1)..hi {
                let val = mean_of(i);
                if val > best_val {
                    best = i;
                    best_val = val;
                    tie = false;
                } else if val == best_val {
                    tie = true;
                }
            }
            if tie {
                return Err(Error::Config(format!("agent {v} has a tied best arm")));
            }
            best_arms.push(best);
        }

        let gaps: Vec<f64> = (0..arms.len())
            .map(|i| mean_of(best_arms[i / arms_per_agent]) - mean_of(i))
            .collect();
        let delta_min = gaps
            .iter()
            .copied()
            .filter(|g| *g > 0.0)
            .fold(f64::INFINITY, f64::min);
        // infinity only in the degenerate one-arm-per-agent case, where every
        // arm is its agent's best and nothing needs distinguishing
        if !delta_min.is_finite() && arms_per_agent > 1 {
            return Err(Error::Config("instance has no positive reward gap".into()));
        }

        let gram = spec.gram(&arms)?;
        Ok(Self {
            num_agents,
            arms_per_agent,
            arms,
            spec,
            truth,
            noise_std,
            best_arms,
            gaps,
            delta_min,
            gram,
        })
    }

    pub fn total_arms(&self) -> usize {
        self.arms.len()
    }

    /// Cached plain Gram matrix over all arms.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn reward_mean(&self, index: usize) -> f64 {
        match &self.truth {
            Truth::Linear { theta } => self.spec.explicit_features.as_ref().expect("validated")
                [index]
                .dot(theta),
            Truth::Table { means, .. } => means[index],
        }
    }

    /// RKHS norm of the reward function when the truth exposes it; the
    /// smallest admissible norm bound `B`.
    pub fn truth_norm(&self) -> Option<f64> {
        match &self.truth {
            Truth::Linear { theta } => Some(theta.norm()),
            Truth::Table { norm, .. } => *norm,
        }
    }

    /// Global index range of an agent's arms.
    pub fn agent_range(&self, agent: usize) -> std::ops::Range<usize> {
        agent * self.arms_per_agent..(agent + 1) * self.arms_per_agent
    }

    /// Same instance with a different noise level (noiseless checks).
    pub fn with_noise_override(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    /// Single-agent sub-instance for the independent baselines: agent `v`'s
    /// arms reindexed as agent 0 of a one-agent problem, kernels and truth
    /// restricted accordingly.
    pub fn restrict_to_agent(&self, agent: usize) -> Result<ProblemInstance> {
        if agent >= self.num_agents {
            return Err(Error::Precondition(format!("agent {agent} out of range")));
        }
        let range = self.agent_range(agent);
        let arms: Vec<TaskedArm> = self.arms[range.clone()]
            .iter()
            .enumerate()
            .map(|(i, a)| TaskedArm::new(i, 0, i, a.arm_feature.clone(), a.task_key))
            .collect();
        let arm_kernel = match &self.spec.arm_kernel {
            ArmKernel::Table { gram } => {
                let mut sub = DMatrix::zeros(arms.len(), arms.len());
                for i in 0..arms.len() {
                    for j in 0..arms.len() {
                        sub[(i, j)] = gram[(range.start + i, range.start + j)];
                    }
                }
                ArmKernel::Table { gram: sub }
            }
            other => other.clone(),
        };
        let mut spec = KernelSpec::new(arm_kernel, self.spec.task_kernel.clone())?;
        if let Some(features) = &self.spec.explicit_features {
            spec = spec.with_explicit_features(features[range.clone()].to_vec());
        }
        let truth = match &self.truth {
            Truth::Linear { theta } => Truth::Linear { theta: theta.clone() },
            Truth::Table { means, norm } => Truth::Table {
                means: means[range].to_vec(),
                norm: *norm,
            },
        };
        ProblemInstance::new(1, self.arms_per_agent, arms, spec, truth, self.noise_std)
    }
}

/// Deterministic per-agent RNG stream split from one master seed.
pub fn agent_rng(master_seed: u64, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(agent as u64 + 1);
    rng
}

/// One noisy reward draw: `f(arm) + N(0, noise_std^2)` from the given stream.
pub fn sample(instance: &ProblemInstance, arm_index: usize, rng: &mut ChaCha8Rng) -> f64 {
    let noise: f64 = rng.sample(StandardNormal);
    instance.reward_mean(arm_index) + instance.noise_std * noise
}

/// One agent's broadcast: `(global arm index, count, mean)` for each of its
/// own `n` arms. The payload accounting unit is 2n numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMessage {
    pub sender: usize,
    pub payload: Vec<(usize, u64, f64)>,
}

impl RoundMessage {
    /// Builds agent `v`'s message from its local summary.
    pub fn from_summary(
        instance: &ProblemInstance,
        agent: usize,
        local: &ObservationSummary,
    ) -> Self {
        let payload = instance
            .agent_range(agent)
            .map(|i| (i, local.counts[i], local.means[i]))
            .collect();
        Self {
            sender: agent,
            payload,
        }
    }

    pub fn payload_numbers(&self) -> u64 {
        2 * self.payload.len() as u64
    }
}

/// The round-synchronous bus: executes local steps, validates payloads,
/// delivers every message to every agent, and accounts rounds and payload
/// sizes. A round is a barrier; it counts even when `V = 1`.
#[derive(Debug, Clone)]
pub struct MessageBus {
    num_agents: usize,
    arms_per_agent: usize,
    rounds: u64,
    payload_numbers_per_round: Vec<u64>,
}

impl MessageBus {
    pub fn new(num_agents: usize, arms_per_agent: usize) -> Self {
        Self {
            num_agents,
            arms_per_agent,
            rounds: 0,
            payload_numbers_per_round: Vec::new(),
        }
    }

    /// Runs one communication round from prepared messages. Returns each
    /// agent's independently merged view of the exchanged summaries; with
    /// one contributor per arm the merge is a pure scatter, so all views are
    /// identical.
    pub fn deliver(&mut self, messages: Vec<RoundMessage>) -> Result<Vec<ObservationSummary>> {
        if messages.len() != self.num_agents {
            return Err(Error::Protocol(format!(
                "round needs {} messages, got {}",
                self.num_agents,
                messages.len()
            )));
        }
        let total = self.num_agents * self.arms_per_agent;
        for (expected, msg) in messages.iter().enumerate() {
            if msg.sender != expected {
                return Err(Error::Protocol(format!(
                    "message {expected} sent by agent {}",
                    msg.sender
                )));
            }
            if msg.payload.len() != self.arms_per_agent {
                return Err(Error::Protocol(format!(
                    "agent {} broadcast {} entries, expected {}",
                    msg.sender,
                    msg.payload.len(),
                    self.arms_per_agent
                )));
            }
            for (idx, _, _) in &msg.payload {
                if *idx / self.arms_per_agent != msg.sender {
                    return Err(Error::Protocol(format!(
                        "agent {} broadcast data for foreign arm {idx}",
                        msg.sender
                    )));
                }
            }
        }

        let merged_views: Vec<ObservationSummary> = (0..self.num_agents)
            .map(|_| {
                // every agent merges the same broadcast set in global order
                let mut view = ObservationSummary::empty(total);
                for msg in &messages {
                    for &(idx, count, mean) in &msg.payload {
                        view.counts[idx] = count;
                        view.means[idx] = mean;
                    }
                }
                view
            })
            .collect();

        self.rounds += 1;
        self.payload_numbers_per_round
            .push(messages.iter().map(RoundMessage::payload_numbers).sum());
        Ok(merged_views)
    }

    /// Executes each agent's sampling step, then delivers the round.
    pub fn run_round<F>(&mut self, mut step: F) -> Result<Vec<ObservationSummary>>
    where
        F: FnMut(usize) -> Result<RoundMessage>,
    {
        let messages = (0..self.num_agents).map(&mut step).collect::<Result<Vec<_>>>()?;
        self.deliver(messages)
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn payload_numbers_per_round(&self) -> &[u64] {
        &self.payload_numbers_per_round
    }
}

/// Per-phase record kept for diagnostics and plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: u32,
    pub xi: f64,
    pub rho: f64,
    /// Total samples drawn across agents this phase.
    pub samples: u64,
    pub alive_sizes: Vec<usize>,
    /// The regularization-parameter search hit its floor without satisfying
    /// the bias condition.
    pub xi_floored: bool,
    /// The dimension-halving prefix was empty and got floored to one arm.
    pub prefix_floored: bool,
    /// Sub-task index for independent baselines; `None` in joint runs.
    pub task: Option<usize>,
    /// Fixed-budget runs record each agent's alive-set principle dimension
    /// at the start of the phase (zero for already-singleton sets).
    #[serde(default)]
    pub omegas: Vec<f64>,
}

/// Outcome of one algorithm run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    /// Global index answered per agent.
    pub answers: Vec<usize>,
    pub correct: Vec<bool>,
    pub samples_per_agent: Vec<u64>,
    pub total_samples: u64,
    pub communication_rounds: u64,
    pub payload_numbers_per_round: Vec<u64>,
    pub phase_trace: Vec<PhaseRecord>,
    /// Run hit the hard sample cap and aborted with partial results.
    pub incomplete: bool,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn all_correct(&self) -> bool {
        !self.incomplete && self.correct.iter().all(|c| *c)
    }

    pub fn mean_samples_per_agent(&self) -> f64 {
        if self.samples_per_agent.is_empty() {
            return 0.0;
        }
        self.total_samples as f64 / self.samples_per_agent.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// Column names of the flat CSV row (documented in the README).
    pub const FLAT_HEADER: [&'static str; 8] = [
        "algorithm",
        "all_correct",
        "total_samples",
        "mean_samples_per_agent",
        "max_samples_per_agent",
        "communication_rounds",
        "phases",
        "incomplete",
    ];

    /// Flat CSV row matching [`Self::FLAT_HEADER`].
    pub fn flat_row(&self) -> Vec<String> {
        vec![
            self.algorithm.clone(),
            self.all_correct().to_string(),
            self.total_samples.to_string(),
            format!("{}", self.mean_samples_per_agent()),
            self.samples_per_agent.iter().max().copied().unwrap_or(0).to_string(),
            self.communication_rounds.to_string(),
            self.phase_trace.len().to_string(),
            self.incomplete.to_string(),
        ]
    }

    /// Column names of the per-phase trace CSV.
    pub const PHASE_HEADER: [&'static str; 7] =
        ["phase", "task", "xi", "rho", "samples", "min_alive", "max_alive"];

    /// Phase trace as CSV rows for plotting, matching [`Self::PHASE_HEADER`].
    pub fn phase_trace_rows(&self) -> Vec<Vec<String>> {
        self.phase_trace
            .iter()
            .map(|p| {
                vec![
                    p.phase.to_string(),
                    p.task.map(|t| t.to_string()).unwrap_or_default(),
                    format!("{}", p.xi),
                    format!("{}", p.rho),
                    p.samples.to_string(),
                    p.alive_sizes.iter().min().copied().unwrap_or(0).to_string(),
                    p.alive_sizes.iter().max().copied().unwrap_or(0).to_string(),
                ]
            })
            .collect()
    }
}

/// Named arm-set generators for the experiment family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmGenerator {
    /// Deterministic standard-basis arms plus adjacent-midpoint combination
    /// arms, identical for every agent.
    PaperGrid,
    /// Seeded uniform unit vectors, drawn independently per agent.
    RandomSphere,
}

/// Task-kernel regimes of the experiment family, ordered by rank of `K_Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskRegime {
    /// Rank 1: all tasks identical (fully collaborative).
    Ones,
    /// Rank = number of blocks: agents in the same block share a task.
    Block,
    /// Rank V: all tasks distinct.
    Identity,
}

/// Parameters of [`generate_instance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub num_agents: usize,
    pub arms_per_agent: usize,
    pub feature_dim: usize,
    pub generator: ArmGenerator,
    pub task_regime: TaskRegime,
    /// Number of blocks for the block regime; ignored otherwise.
    pub task_blocks: usize,
    /// Common difference of the arithmetic reward parameter.
    pub delta_min: f64,
    /// First entry of the arithmetic reward parameter.
    pub theta_start: f64,
    pub noise_std: f64,
    /// Seed for the random-sphere generator; unused by the paper grid.
    pub instance_seed: u64,
    pub arm_kernel: ArmKernel,
    /// Explicit V x V task Gram; overrides the regime's task kernel. Truth
    /// falls back to a seeded function-space draw (no finite feature map is
    /// assumed for arbitrary tables).
    pub task_table: Option<DMatrix<f64>>,
}

impl InstanceConfig {
    pub fn paper_grid(num_agents: usize, arms_per_agent: usize, feature_dim: usize, delta_min: f64) -> Self {
        Self {
            num_agents,
            arms_per_agent,
            feature_dim,
            generator: ArmGenerator::PaperGrid,
            task_regime: TaskRegime::Ones,
            task_blocks: 2,
            delta_min,
            theta_start: 0.1,
            noise_std: 1.0,
            instance_seed: 0,
            arm_kernel: ArmKernel::Linear,
            task_table: None,
        }
    }

    pub fn with_regime(mut self, regime: TaskRegime) -> Self {
        self.task_regime = regime;
        self
    }

    pub fn with_noise(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }
}

fn block_of(agent: usize, num_agents: usize, blocks: usize) -> usize {
    agent * blocks / num_agents
}

/// Per-agent arm features for the named generators.
fn arm_features(cfg: &InstanceConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<DVector<f64>>>> {
    let (v, n, d) = (cfg.num_agents, cfg.arms_per_agent, cfg.feature_dim);
    match cfg.generator {
        ArmGenerator::PaperGrid => {
            if n > d + d.saturating_sub(2) {
                return Err(Error::Config(format!(
                    "paper-grid supports at most {} arms at dimension {d}, requested {n}",
                    d + d.saturating_sub(2)
                )));
            }
            let mut feats = Vec::with_capacity(n);
            for k in 0..n.min(d) {
                let mut f = DVector::zeros(d);
                f[k] = 1.0;
                feats.push(f);
            }
            // combination arms: midpoints of adjacent basis pairs, which sit
            // strictly below the top basis arm in reward
            for k in 0..n.saturating_sub(d) {
                let mut f = DVector::zeros(d);
                f[k] = 0.5;
                f[k + 1] = 0.5;
                feats.push(f);
            }
            Ok(vec![feats; v])
        }
        ArmGenerator::RandomSphere => {
            let mut per_agent = Vec::with_capacity(v);
            for _ in 0..v {
                let mut feats = Vec::with_capacity(n);
                for _ in 0..n {
                    let mut x = DVector::zeros(d);
                    loop {
                        for c in x.iter_mut() {
                            *c = rng.sample(StandardNormal);
                        }
                        let norm = x.norm();
                        if norm > 1e-9 {
                            x /= norm;
                            break;
                        }
                    }
                    feats.push(x);
                }
                per_agent.push(feats);
            }
            Ok(per_agent)
        }
    }
}

/// Builds an instance of the experiment family: arithmetic reward parameter
/// `[start, start + delta, ..., start + (d-1) delta]`, the chosen arm-set
/// generator, and a task-kernel regime of rank 1, `blocks`, or `V`.
///
/// The composite explicit feature of arm `x` of agent `v` is `l_v ⊗ x` with
/// `l_v` the `v`-th row of a factor of `K_Z`, so the kernel spec and the
/// explicit map agree exactly; the global parameter repeats the arithmetic
/// block once per task-kernel block, giving every task the same reward
/// function under every regime.
pub fn generate_instance(cfg: &InstanceConfig) -> Result<ProblemInstance> {
    let (v, n, d) = (cfg.num_agents, cfg.arms_per_agent, cfg.feature_dim);
    if v == 0 || n == 0 || d == 0 {
        return Err(Error::Config("agents, arms, and dimension must be positive".into()));
    }
    if !(cfg.delta_min > 0.0) {
        return Err(Error::Config("delta_min must be positive".into()));
    }
    if cfg.task_regime == TaskRegime::Block && (cfg.task_blocks == 0 || cfg.task_blocks > v) {
        return Err(Error::Config(format!(
            "block regime needs 1..=V blocks, got {}",
            cfg.task_blocks
        )));
    }

    let blocks = match cfg.task_regime {
        TaskRegime::Ones => 1,
        TaskRegime::Block => cfg.task_blocks,
        TaskRegime::Identity => v,
    };
    let task_kernel = match &cfg.task_table {
        Some(table) => {
            if table.nrows() != v || table.ncols() != v {
                return Err(Error::Config(format!(
                    "task table must be {v}x{v}, got {}x{}",
                    table.nrows(),
                    table.ncols()
                )));
            }
            check_psd(table, "task kernel table")?;
            TaskKernel::Table { gram: table.clone() }
        }
        None => match cfg.task_regime {
            TaskRegime::Ones => TaskKernel::Ones,
            TaskRegime::Identity => TaskKernel::Identity,
            TaskRegime::Block => TaskKernel::Table {
                gram: DMatrix::from_fn(v, v, |a, b| {
                    if block_of(a, v, blocks) == block_of(b, v, blocks) {
                        1.0
                    } else {
                        0.0
                    }
                }),
            },
        },
    };

    let theta_base = DVector::from_iterator(
        d,
        (0..d).map(|k| cfg.theta_start + k as f64 * cfg.delta_min),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.instance_seed);
    let mut per_agent = arm_features(cfg, &mut rng)?;

    for attempt in 0..100 {
        let mut arms = Vec::with_capacity(v * n);
        for (agent, feats) in per_agent.iter().enumerate() {
            for (local, f) in feats.iter().enumerate() {
                arms.push(TaskedArm::new(
                    agent * n + local,
                    agent,
                    local,
                    f.clone(),
                    agent,
                ));
            }
        }

        // the explicit-feature fast path needs the block structure; custom
        // task tables use the function-space truth below
        let result = match (&cfg.arm_kernel, cfg.task_table.is_none()) {
            (ArmKernel::Linear, true) => {
                // explicit composite features: block indicator ⊗ arm feature
                let features: Vec<DVector<f64>> = arms
                    .iter()
                    .map(|a| {
                        let mut phi = DVector::zeros(blocks * d);
                        let b = block_of(a.agent, v, blocks);
                        phi.rows_mut(b * d, d).copy_from(&a.arm_feature);
                        phi
                    })
                    .collect();
                let mut theta = DVector::zeros(blocks * d);
                for b in 0..blocks {
                    theta.rows_mut(b * d, d).copy_from(&theta_base);
                }
                let spec = KernelSpec::new(ArmKernel::Linear, task_kernel.clone())?
                    .with_explicit_features(features);
                ProblemInstance::new(v, n, arms, spec, Truth::Linear { theta }, cfg.noise_std)
            }
            (other, _) => {
                // no finite feature map: draw a seeded RKHS function
                // f = sum_i c_i K(., x̃_i), rescale so the smallest gap is delta_min
                let spec = KernelSpec::new(other.clone(), task_kernel.clone())?;
                let gram = spec.gram(&arms)?;
                let m = arms.len();
                let mut coeff = DVector::zeros(m);
                for c in coeff.iter_mut() {
                    *c = rng.sample::<f64, _>(StandardNormal) / (m as f64).sqrt();
                }
                let means = &gram * &coeff;
                let mut min_gap = f64::INFINITY;
                for agent in 0..v {
                    let lo = agent * n;
                    let best = (lo..lo + n)
                        .map(|i| means[i])
                        .fold(f64::NEG_INFINITY, f64::max);
                    for i in lo..lo + n {
                        let gap = best - means[i];
                        if gap > 1e-12 {
                            min_gap = min_gap.min(gap);
                        }
                    }
                }
                if !min_gap.is_finite() {
                    Err(Error::Config("degenerate RKHS truth: all arms tie".into()))
                } else {
                    let scale = cfg.delta_min / min_gap;
                    let coeff = coeff * scale;
                    let means: Vec<f64> = (&gram * &coeff).iter().copied().collect();
                    let norm = (coeff.dot(&(&gram * &coeff))).max(0.0).sqrt();
                    ProblemInstance::new(
                        v,
                        n,
                        arms,
                        spec,
                        Truth::Table {
                            means,
                            norm: Some(norm),
                        },
                        cfg.noise_std,
                    )
                }
            }
        };

        match result {
            Ok(instance) => return Ok(instance),
            Err(_) if attempt < 99 => {
                // best-arm tie or degenerate truth: perturb and retry
                for feats in per_agent.iter_mut() {
                    for f in feats.iter_mut() {
                        for c in f.iter_mut() {
                            *c += 1e-6 * rng.sample::<f64, _>(StandardNormal);
                        }
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Config("instance generation failed after 100 attempts".into()))
}
