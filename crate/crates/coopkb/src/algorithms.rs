//! The elimination algorithms and the experiment baselines.
//!
//! Fixed confidence: phased elimination at halving thresholds. Each phase
//! picks a bias-controlling regularizer, solves the global min-max design
//! over alive pairs, rounds, samples, exchanges summaries in one round, and
//! discards arms whose estimated gap to any alive arm reaches `2^-t`.
//!
//! Fixed budget: the phase count is pre-determined from the principle
//! dimension of the full arm set; each phase halves the alive sets in the
//! dimension sense, keeping the top estimated arms.
//!
//! Baselines: independent single-agent runs per task, uniform sampling, and
//! the individual-allocation ablation in which every agent designs against
//! its own alive pairs only.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::{
    find_xi_fc, normalize_pairs, pairs_within, principle_dimension, round_allocation,
    solve_min_max_pairs, Allocation, SolverOptions, WeightedPair, XI_FLOOR,
};
use crate::estimation::{fit, FittedEstimator, ObservationSummary};
use crate::kernel::PairNormContext;
use crate::protocol::{
    agent_rng, sample, MessageBus, PhaseRecord, ProblemInstance, RoundMessage, RunReport,
};
use crate::{Error, Result};

/// Fixed-confidence configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FcConfig {
    /// Failure probability target, in (0, 1).
    pub delta: f64,
    /// Norm bound `B`; defaults to the instance's truth norm in simulation.
    pub norm_bound: Option<f64>,
    /// Rounding approximation parameter.
    pub eps: f64,
    pub solver: SolverOptions,
    /// Hard cap on total samples per run; exceeding it aborts the run with a
    /// partial, flagged report.
    pub sample_cap: u64,
}

impl FcConfig {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            norm_bound: None,
            eps: 0.1,
            solver: SolverOptions::default(),
            sample_cap: 100_000_000,
        }
    }
}

/// Fixed-budget configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FbConfig {
    /// Per-agent sample budget `T`.
    pub budget_per_agent: u64,
    /// Regularizer; `None` derives the largest grid value satisfying the
    /// uniform-design bias condition for the instance's gap and norm bound.
    pub xi_star: Option<f64>,
    pub eps: f64,
    pub solver: SolverOptions,
    pub sample_cap: u64,
}

impl FbConfig {
    pub fn new(budget_per_agent: u64) -> Self {
        Self {
            budget_per_agent,
            xi_star: None,
            eps: 0.1,
            solver: SolverOptions::default(),
            sample_cap: 100_000_000,
        }
    }
}

/// SplitMix64 step; derives independent sub-seeds for per-task baseline runs.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn resolve_norm_bound(instance: &ProblemInstance, configured: Option<f64>) -> Result<f64> {
    let truth = instance.truth_norm();
    let b = match (configured, truth) {
        (Some(b), _) => b,
        (None, Some(n)) => n,
        (None, None) => {
            return Err(Error::Precondition(
                "norm bound B is required when the instance does not expose a truth norm".into(),
            ))
        }
    };
    if !(b > 0.0) {
        return Err(Error::Precondition(format!("norm bound must be positive, got {b}")));
    }
    if let Some(n) = truth {
        if b < n * (1.0 - 1e-12) {
            return Err(Error::Precondition(format!(
                "norm bound {b} is below the truth norm {n}"
            )));
        }
    }
    Ok(b)
}

fn full_alive_sets(instance: &ProblemInstance) -> Vec<Vec<usize>> {
    (0..instance.num_agents)
        .map(|v| instance.agent_range(v).collect())
        .collect()
}

/// Draws `counts[i]` samples of every arm `i` owned by `agent`, updating its
/// local summary and sample tally.
fn sample_own_arms(
    instance: &ProblemInstance,
    agent: usize,
    counts: &[u64],
    local: &mut ObservationSummary,
    rng: &mut rand_chacha::ChaCha8Rng,
    drawn: &mut u64,
) {
    for i in instance.agent_range(agent) {
        for _ in 0..counts[i] {
            let y = sample(instance, i, rng);
            local.record(i, y);
        }
        *drawn += counts[i];
    }
}

struct RunState {
    bus: MessageBus,
    rngs: Vec<rand_chacha::ChaCha8Rng>,
    samples_per_agent: Vec<u64>,
    trace: Vec<PhaseRecord>,
    warnings: Vec<String>,
    incomplete: bool,
}

impl RunState {
    fn new(instance: &ProblemInstance, seed: u64) -> Self {
        Self {
            bus: MessageBus::new(instance.num_agents, instance.arms_per_agent),
            rngs: (0..instance.num_agents).map(|v| agent_rng(seed, v)).collect(),
            samples_per_agent: vec![0; instance.num_agents],
            trace: Vec::new(),
            warnings: Vec::new(),
            incomplete: false,
        }
    }

    /// One sample-then-communicate step: every agent draws its share of
    /// `per_agent_counts`, broadcasts its summary, and the merged view comes
    /// back. Returns the merged summary and its total count.
    fn exchange(
        &mut self,
        instance: &ProblemInstance,
        per_agent_counts: &[Vec<u64>],
    ) -> Result<(ObservationSummary, u64)> {
        let total_arms = instance.total_arms();
        let mut locals = Vec::with_capacity(instance.num_agents);
        for v in 0..instance.num_agents {
            let mut local = ObservationSummary::empty(total_arms);
            let mut drawn = 0;
            sample_own_arms(
                instance,
                v,
                &per_agent_counts[v],
                &mut local,
                &mut self.rngs[v],
                &mut drawn,
            );
            self.samples_per_agent[v] += drawn;
            locals.push(local);
        }
        let views = self.bus.run_round(|v| {
            Ok(RoundMessage::from_summary(instance, v, &locals[v]))
        })?;
        debug_assert!(views.iter().all(|w| w == &views[0]));
        let merged = views.into_iter().next().expect("at least one agent");
        let total = merged.total();
        Ok((merged, total))
    }

    fn finish(self, instance: &ProblemInstance, algorithm: &str, answers: Vec<usize>) -> RunReport {
        let correct = answers
            .iter()
            .zip(&instance.best_arms)
            .map(|(a, b)| a == b)
            .collect();
        RunReport {
            algorithm: algorithm.to_string(),
            answers,
            correct,
            total_samples: self.samples_per_agent.iter().sum(),
            samples_per_agent: self.samples_per_agent,
            communication_rounds: self.bus.rounds(),
            payload_numbers_per_round: self.bus.payload_numbers_per_round().to_vec(),
            phase_trace: self.trace,
            incomplete: self.incomplete,
            warnings: self.warnings,
        }
    }
}

/// Number of samples a fixed-confidence phase requires, or `None` when it
/// exceeds the cap.
fn fc_phase_samples(
    t: u32,
    eps: f64,
    rho: f64,
    n_per_agent: usize,
    num_agents: usize,
    delta_t: f64,
    remaining_cap: u64,
) -> Option<u64> {
    let log_term = (2.0 * (n_per_agent * n_per_agent * num_agents) as f64 / delta_t).ln();
    let raw = 8.0 * 4f64.powi(t as i32) * (1.0 + eps) * (1.0 + eps) * rho * log_term;
    let n = raw.ceil();
    if !n.is_finite() || n > remaining_cap as f64 {
        None
    } else {
        Some((n as u64).max(1))
    }
}

/// Fixed-confidence collaborative elimination.
///
/// When `individual_allocations` is set, every agent solves the design over
/// its own alive pairs only and rounds its own sample budget (the ablation);
/// otherwise one shared design drives everyone. Communication is identical
/// in both modes.
fn run_fc(
    instance: &ProblemInstance,
    config: &FcConfig,
    seed: u64,
    individual_allocations: bool,
) -> Result<RunReport> {
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(Error::Precondition(format!(
            "delta must be in (0,1), got {}",
            config.delta
        )));
    }
    let algorithm = if individual_allocations {
        "ind-alloc-fc"
    } else {
        "coop-kernel-fc"
    };
    let b = resolve_norm_bound(instance, config.norm_bound)?;
    let gram = instance.gram();
    let (v_count, n_per_agent) = (instance.num_agents, instance.arms_per_agent);

    let mut alive = full_alive_sets(instance);
    let full_pairs = pairs_within(&alive);
    let mut state = RunState::new(instance, seed);
    // one warm start per design problem: index 0 shared, else per agent
    let warm_slots = if individual_allocations { v_count } else { 1 };
    let mut warm: Vec<Option<Allocation>> = vec![None; warm_slots];

    let mut t: u32 = 1;
    while alive.iter().any(|s| s.len() > 1) {
        let delta_t = config.delta / (2.0 * (t as f64) * (t as f64));
        let xi = find_xi_fc(gram, &full_pairs, t, b, config.eps)?;
        if xi.floored {
            state
                .warnings
                .push(format!("phase {t}: xi search floored at {XI_FLOOR:.0e}"));
        }

        // per-slot design problems: one shared, or one per agent
        let mut per_agent_counts = vec![vec![0u64; instance.total_arms()]; v_count];
        let mut phase_rho = 0.0f64;
        let mut planned: u64 = 0;
        let mut over_cap = false;
        for slot in 0..warm_slots {
            let pairs = if individual_allocations {
                pairs_within(std::slice::from_ref(&alive[slot]))
            } else {
                pairs_within(&alive)
            };
            if pairs.is_empty() {
                continue;
            }
            let design =
                solve_min_max_pairs(gram, &pairs, xi.xi, warm[slot].as_ref(), &config.solver)?;
            warm[slot] = Some(design.allocation.clone());
            phase_rho = phase_rho.max(design.value);
            let used: u64 = state.samples_per_agent.iter().sum();
            let Some(n_t) = fc_phase_samples(
                t,
                config.eps,
                design.value,
                n_per_agent,
                v_count,
                delta_t,
                config.sample_cap.saturating_sub(used + planned),
            ) else {
                over_cap = true;
                break;
            };
            let counts =
                round_allocation(gram, &pairs, &design.allocation, n_t, xi.xi, config.eps)?;
            if individual_allocations {
                // agent `slot` executes only its own block of its own plan
                for i in instance.agent_range(slot) {
                    per_agent_counts[slot][i] = counts.counts[i];
                    planned += counts.counts[i];
                }
            } else {
                for v in 0..v_count {
                    for i in instance.agent_range(v) {
                        per_agent_counts[v][i] = counts.counts[i];
                        planned += counts.counts[i];
                    }
                }
            }
        }
        if over_cap {
            state.incomplete = true;
            state
                .warnings
                .push(format!("phase {t}: sample cap {} exceeded, aborting", config.sample_cap));
            break;
        }

        let (merged, total) = state.exchange(instance, &per_agent_counts)?;
        let est = fit(gram, &merged, total, xi.xi)?;

        for set in alive.iter_mut() {
            let snapshot = set.clone();
            set.retain(|&x| {
                !snapshot
                    .iter()
                    .any(|&xp| est.estimate_gap(xp, x) >= 2f64.powi(-(t as i32)))
            });
            debug_assert!(!set.is_empty(), "elimination emptied an alive set");
        }

        state.trace.push(PhaseRecord {
            phase: t,
            xi: xi.xi,
            rho: phase_rho,
            samples: total,
            alive_sizes: alive.iter().map(Vec::len).collect(),
            xi_floored: xi.floored,
            prefix_floored: false,
            task: None,
            omegas: Vec::new(),
        });
        t += 1;
    }

    let answers: Vec<usize> = alive.iter().map(|s| s[0]).collect();
    Ok(state.finish(instance, algorithm, answers))
}

pub fn coop_kernel_fc(instance: &ProblemInstance, config: &FcConfig, seed: u64) -> Result<RunReport> {
    run_fc(instance, config, seed, false)
}

/// Largest grid regularizer satisfying the fixed-budget bias condition
/// `sqrt(xi) * max pair norm under the uniform design <= gap / (2 (1+eps) B)`.
pub fn fb_auto_xi_star(
    instance: &ProblemInstance,
    eps: f64,
    norm_bound: Option<f64>,
) -> Result<f64> {
    let b = resolve_norm_bound(instance, norm_bound)?;
    let gram = instance.gram();
    let pairs = pairs_within(&full_alive_sets(instance));
    let rhs = instance.delta_min / (2.0 * (1.0 + eps) * b);
    let uniform = Allocation::uniform(instance.total_arms());
    let mut xi = 1.0;
    loop {
        let ctx = PairNormContext::new(gram, uniform.probs(), xi)?;
        let worst = pairs.iter().map(|p| ctx.pair_norm_sq(p.i, p.j)).fold(0.0, f64::max);
        if (xi * worst).sqrt() <= rhs {
            return Ok(xi);
        }
        xi /= 2.0;
        if xi < XI_FLOOR {
            return Ok(XI_FLOOR);
        }
    }
}

/// Fixed-budget collaborative elimination. `individual_allocations` selects
/// the ablation variant, as in the fixed-confidence runner.
fn run_fb(
    instance: &ProblemInstance,
    config: &FbConfig,
    seed: u64,
    individual_allocations: bool,
) -> Result<RunReport> {
    if config.budget_per_agent == 0 {
        return Err(Error::Precondition("per-agent budget must be at least 1".into()));
    }
    let algorithm = if individual_allocations {
        "ind-alloc-fb"
    } else {
        "coop-kernel-fb"
    };
    let gram = instance.gram();
    let v_count = instance.num_agents;
    let mut state = RunState::new(instance, seed);

    let xi_star = match config.xi_star {
        Some(x) if x > 0.0 => x,
        Some(x) => {
            return Err(Error::Precondition(format!("xi_star must be positive, got {x}")))
        }
        None => fb_auto_xi_star(instance, config.eps, None)?,
    };
    // bias-condition sanity check, possible only in simulation; a violation
    // degrades the guarantee, it does not stop the run
    if let Some(b) = instance.truth_norm() {
        let uniform = Allocation::uniform(instance.total_arms());
        let ctx = PairNormContext::new(gram, uniform.probs(), xi_star)?;
        let worst = pairs_within(&full_alive_sets(instance))
            .iter()
            .map(|p| ctx.pair_norm_sq(p.i, p.j))
            .fold(0.0, f64::max);
        if (xi_star * worst).sqrt() > instance.delta_min / (2.0 * (1.0 + config.eps) * b) {
            state
                .warnings
                .push("xi_star violates the uniform-design bias condition".into());
        }
    }

    let all_arms: Vec<usize> = (0..instance.total_arms()).collect();
    let omega_full = principle_dimension(gram, &all_arms, xi_star, None, &config.solver)?;
    if omega_full <= 1.0 {
        return Err(Error::Precondition(format!(
            "principle dimension {omega_full} must exceed 1 for a fixed-budget run"
        )));
    }
    let rounds_cap = omega_full.log2().ceil() as u32;
    let per_phase = (config.budget_per_agent * v_count as u64) / rounds_cap as u64;
    if per_phase == 0 {
        return Err(Error::Precondition(format!(
            "budget {} spread over {rounds_cap} phases leaves no samples",
            config.budget_per_agent
        )));
    }

    let mut alive = full_alive_sets(instance);
    let warm_slots = if individual_allocations { v_count } else { 1 };
    let mut warm: Vec<Option<Allocation>> = vec![None; warm_slots];
    let dim_opts = config.solver.coarse();

    let mut t: u32 = 1;
    while t <= rounds_cap && alive.iter().any(|s| s.len() > 1) {
        let used: u64 = state.samples_per_agent.iter().sum();
        if used + per_phase > config.sample_cap {
            state.incomplete = true;
            state
                .warnings
                .push(format!("phase {t}: sample cap {} exceeded, aborting", config.sample_cap));
            break;
        }

        let mut per_agent_counts = vec![vec![0u64; instance.total_arms()]; v_count];
        let mut phase_rho = 0.0f64;
        let mut shared_allocation: Option<Allocation> = None;
        for slot in 0..warm_slots {
            let pairs = if individual_allocations {
                pairs_within(std::slice::from_ref(&alive[slot]))
            } else {
                pairs_within(&alive)
            };
            if pairs.is_empty() {
                continue;
            }
            let design =
                solve_min_max_pairs(gram, &pairs, xi_star, warm[slot].as_ref(), &config.solver)?;
            warm[slot] = Some(design.allocation.clone());
            phase_rho = phase_rho.max(design.value);
            if !individual_allocations {
                shared_allocation = Some(design.allocation.clone());
            }
            let counts =
                round_allocation(gram, &pairs, &design.allocation, per_phase, xi_star, config.eps)?;
            if individual_allocations {
                for i in instance.agent_range(slot) {
                    per_agent_counts[slot][i] = counts.counts[i];
                }
            } else {
                for v in 0..v_count {
                    for i in instance.agent_range(v) {
                        per_agent_counts[v][i] = counts.counts[i];
                    }
                }
            }
        }

        let (merged, total) = state.exchange(instance, &per_agent_counts)?;
        let est = fit(gram, &merged, total, xi_star)?;

        let mut prefix_floored = false;
        let mut omegas = vec![0.0f64; v_count];
        for (agent, set) in alive.iter_mut().enumerate() {
            if set.len() <= 1 {
                continue;
            }
            let mut sorted = set.clone();
            sorted.sort_by(|&a, &b| {
                est.estimate_reward(b)
                    .partial_cmp(&est.estimate_reward(a))
                    .expect("finite estimates")
                    .then(a.cmp(&b))
            });
            let omega_set =
                principle_dimension(gram, &sorted, xi_star, shared_allocation.as_ref(), &dim_opts)?;
            omegas[agent] = omega_set;
            let target = omega_set / 2.0 * (1.0 + OMEGA_SLACK);
            // omega grows with the prefix; stop at the first prefix past target
            let mut keep = sorted.len();
            let mut prefix_warm = shared_allocation.clone();
            for len in 2..=sorted.len() {
                let omega_prefix = {
                    let res = solve_prefix_omega(
                        gram,
                        &sorted[..len],
                        xi_star,
                        prefix_warm.as_ref(),
                        &dim_opts,
                    )?;
                    prefix_warm = Some(res.1);
                    res.0
                };
                if omega_prefix > target {
                    keep = len - 1;
                    break;
                }
            }
            if keep == 0 {
                keep = 1;
                prefix_floored = true;
            }
            sorted.truncate(keep);
            *set = sorted;
        }
        if prefix_floored {
            state
                .warnings
                .push(format!("phase {t}: dimension-halving prefix floored to one arm"));
        }

        state.trace.push(PhaseRecord {
            phase: t,
            xi: xi_star,
            rho: phase_rho,
            samples: total,
            alive_sizes: alive.iter().map(Vec::len).collect(),
            xi_floored: false,
            prefix_floored,
            task: None,
            omegas,
        });
        t += 1;
    }

    // answers: the top estimated arm of the final alive set (first in the
    // last sorted order, or the singleton)
    let answers: Vec<usize> = alive.iter().map(|s| s[0]).collect();
    Ok(state.finish(instance, algorithm, answers))
}

/// Relative slack on the dimension-halving comparison. Symmetric grids put
/// `omega(prefix)` within solver noise of the exact half, so the comparison
/// carries the solver's own tolerance scale.
pub const OMEGA_SLACK: f64 = 5e-3;

fn solve_prefix_omega(
    gram: &nalgebra::DMatrix<f64>,
    prefix: &[usize],
    xi_star: f64,
    warm: Option<&Allocation>,
    opts: &SolverOptions,
) -> Result<(f64, Allocation)> {
    let mut pairs = Vec::new();
    for (a, &i) in prefix.iter().enumerate() {
        for &j in prefix.iter().skip(a + 1) {
            pairs.push(WeightedPair::plain(i, j));
        }
    }
    let pairs = normalize_pairs(pairs);
    let res = solve_min_max_pairs(gram, &pairs, xi_star, warm, opts)?;
    Ok((res.value, res.allocation))
}

pub fn coop_kernel_fb(instance: &ProblemInstance, config: &FbConfig, seed: u64) -> Result<RunReport> {
    run_fb(instance, config, seed, false)
}

/// Which algorithm family an ablation or baseline should mirror.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    FixedConfidence,
    FixedBudget,
}

/// The individual-allocation ablation: identical machinery, but each agent
/// solves the min-max design over its own alive pairs only and executes its
/// own rounded plan on its own arms. Communication is unchanged.
pub fn ablation_individual_allocation(
    instance: &ProblemInstance,
    setting: Setting,
    fc: Option<&FcConfig>,
    fb: Option<&FbConfig>,
    seed: u64,
) -> Result<RunReport> {
    match setting {
        Setting::FixedConfidence => {
            let config = fc.ok_or_else(|| {
                Error::Precondition("fixed-confidence ablation needs an FC config".into())
            })?;
            run_fc(instance, config, seed, true)
        }
        Setting::FixedBudget => {
            let config = fb.ok_or_else(|| {
                Error::Precondition("fixed-budget ablation needs an FB config".into())
            })?;
            run_fb(instance, config, seed, true)
        }
    }
}

fn combine_independent(
    instance: &ProblemInstance,
    algorithm: &str,
    sub_reports: Vec<RunReport>,
) -> RunReport {
    let n = instance.arms_per_agent;
    let mut answers = Vec::new();
    let mut samples_per_agent = Vec::new();
    let mut rounds = 0;
    let mut payloads = Vec::new();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut incomplete = false;
    for (task, sub) in sub_reports.into_iter().enumerate() {
        answers.push(task * n + sub.answers[0]);
        samples_per_agent.push(sub.total_samples);
        rounds += sub.communication_rounds;
        payloads.extend(sub.payload_numbers_per_round);
        trace.extend(sub.phase_trace.into_iter().map(|mut p| {
            p.task = Some(task);
            p
        }));
        warnings.extend(sub.warnings.into_iter().map(|w| format!("task {task}: {w}")));
        incomplete |= sub.incomplete;
    }
    let correct = answers
        .iter()
        .zip(&instance.best_arms)
        .map(|(a, b)| a == b)
        .collect();
    RunReport {
        algorithm: algorithm.to_string(),
        total_samples: samples_per_agent.iter().sum(),
        answers,
        correct,
        samples_per_agent,
        communication_rounds: rounds,
        payload_numbers_per_round: payloads,
        phase_trace: trace,
        incomplete,
        warnings,
    }
}

/// Independent single-agent baseline: one fixed-confidence run per task, no
/// information sharing. Per-task sample counts land in `samples_per_agent`;
/// the rounds field sums the per-task phase counts.
pub fn baseline_independent_fc(
    instance: &ProblemInstance,
    config: &FcConfig,
    seed: u64,
) -> Result<RunReport> {
    let mut subs = Vec::with_capacity(instance.num_agents);
    for v in 0..instance.num_agents {
        let sub_instance = instance.restrict_to_agent(v)?;
        let sub = coop_kernel_fc(&sub_instance, config, mix_seed(seed, v as u64 + 1))?;
        subs.push(sub);
    }
    Ok(combine_independent(instance, "independent-fc", subs))
}

/// Independent single-agent baseline for the fixed-budget setting.
pub fn baseline_independent_fb(
    instance: &ProblemInstance,
    config: &FbConfig,
    seed: u64,
) -> Result<RunReport> {
    let mut subs = Vec::with_capacity(instance.num_agents);
    for v in 0..instance.num_agents {
        let sub_instance = instance.restrict_to_agent(v)?;
        let sub = coop_kernel_fb(&sub_instance, config, mix_seed(seed, v as u64 + 1))?;
        subs.push(sub);
    }
    Ok(combine_independent(instance, "independent-fb", subs))
}

/// Uniform-sampling fixed-budget baseline: every agent cycles through its
/// own arms for `T` pulls and answers the empirical-mean argmax. No
/// communication at all.
pub fn baseline_uniform_fb(
    instance: &ProblemInstance,
    config: &FbConfig,
    seed: u64,
) -> Result<RunReport> {
    let v_count = instance.num_agents;
    let n = instance.arms_per_agent;
    let mut answers = Vec::with_capacity(v_count);
    let mut samples_per_agent = Vec::with_capacity(v_count);
    for v in 0..v_count {
        let mut rng = agent_rng(seed, v);
        let mut summary = ObservationSummary::empty(instance.total_arms());
        let range: Vec<usize> = instance.agent_range(v).collect();
        for pull in 0..config.budget_per_agent {
            let arm = range[(pull % n as u64) as usize];
            let y = sample(instance, arm, &mut rng);
            summary.record(arm, y);
        }
        let best = range
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let (ca, cb) = (summary.counts[a], summary.counts[b]);
                let ma = if ca > 0 { summary.means[a] } else { f64::NEG_INFINITY };
                let mb = if cb > 0 { summary.means[b] } else { f64::NEG_INFINITY };
                ma.partial_cmp(&mb).expect("finite means").then(b.cmp(&a))
            })
            .expect("agent has arms");
        answers.push(best);
        samples_per_agent.push(config.budget_per_agent);
    }
    let correct = answers
        .iter()
        .zip(&instance.best_arms)
        .map(|(a, b)| a == b)
        .collect();
    Ok(RunReport {
        algorithm: "uniform-fb".to_string(),
        total_samples: samples_per_agent.iter().sum(),
        answers,
        correct,
        samples_per_agent,
        communication_rounds: 0,
        payload_numbers_per_round: Vec::new(),
        phase_trace: Vec::new(),
        incomplete: false,
        warnings: Vec::new(),
    })
}

/// Reward estimates used by the fixed-budget sort, exposed for tests.
pub fn estimate_rewards(est: &FittedEstimator, arms: &[usize]) -> DVector<f64> {
    DVector::from_iterator(arms.len(), arms.iter().map(|&i| est.estimate_reward(i)))
}
