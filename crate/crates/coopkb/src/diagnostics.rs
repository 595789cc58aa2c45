//! Instance-hardness and information-theoretic diagnostics.
//!
//! Two distinct designs appear here and are never conflated: the hardness
//! `rho*` minimizes the worst gap-normalized pair norm, while the maximum
//! information gain maximizes `log det(I + K_lambda / xi)`. The effective
//! dimension and the rank decomposition are read off the information-gain
//! maximizer, and together they form the numeric chain
//!
//! ```text
//! delta_min^2 rho*  <=  8 Upsilon
//! Upsilon <= d_eff log(2nV (1 + trace(K_l*) / (xi* d_eff)))
//! Upsilon <= rank(K_Z) rank(K_X) log(trace(I + K_l*/xi*) / rank(K_l*))
//! rank(K) <= rank(K_Z) rank(K_X)
//! ```

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{
    project_to_simplex, solve_min_max_pairs, Allocation, SolverOptions, WeightedPair,
};
use crate::kernel::{scale_gram, PairNormContext};
use crate::protocol::{ProblemInstance, RunReport};
use crate::{Error, Result};

/// Hardness of identifying every agent's best arm: the min over designs of
/// the worst `pair_norm(best, x) / gap(x)^2` over sub-optimal arms. The best
/// arm itself is excluded (its gap is zero).
pub fn hardness_rho_star(
    instance: &ProblemInstance,
    xi_star: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let mut pairs = Vec::new();
    for v in 0..instance.num_agents {
        let best = instance.best_arms[v];
        for x in instance.agent_range(v) {
            if x == best {
                continue;
            }
            let gap = instance.gaps[x];
            if gap <= 0.0 {
                return Err(Error::Internal(format!(
                    "arm {x} has non-positive gap {gap} but is not the best arm"
                )));
            }
            pairs.push(WeightedPair::weighted(best, x, 1.0 / (gap * gap)));
        }
    }
    if pairs.is_empty() {
        return Ok(0.0);
    }
    Ok(solve_min_max_pairs(instance.gram(), &pairs, xi_star, None, opts)?.value)
}

/// Result of the information-gain ascent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InformationGain {
    /// `max_lambda log det(I + K_lambda / xi*)`.
    pub value: f64,
    pub maximizer: Allocation,
    pub iterations: usize,
    /// Objective trajectory of accepted iterates (nondecreasing).
    pub trajectory: Vec<f64>,
}

/// Projected gradient ascent on the concave log-det objective. Gradient
/// entries are `phi_x' (xi I + sum lambda phi phi')^{-1} phi_x`, computed
/// through the kernelized identity; backtracking keeps accepted iterates
/// monotone.
pub fn max_information_gain(
    gram: &DMatrix<f64>,
    xi_star: f64,
    opts: &SolverOptions,
) -> Result<InformationGain> {
    let m = gram.nrows();
    let mut lambda = Allocation::uniform(m);
    let eval = |l: &Allocation| -> Result<(f64, DVector<f64>)> {
        let ctx = PairNormContext::new(gram, l.probs(), xi_star)?;
        let grad = DVector::from_iterator(m, (0..m).map(|x| ctx.point_norm_sq(x)));
        Ok((ctx.log_det_information(), grad))
    };
    let (mut value, mut grad) = eval(&lambda)?;
    let mut trajectory = vec![value];
    let grad_scale = grad.amax();
    if grad_scale == 0.0 {
        return Ok(InformationGain {
            value,
            maximizer: lambda,
            iterations: 0,
            trajectory,
        });
    }
    let mut step = 1.0 / grad_scale;
    let step_cap = 1e9 / grad_scale;
    let mut iterations = 0;
    let mut since_progress = 0usize;
    while iterations < opts.max_iter && since_progress < opts.patience {
        iterations += 1;
        let mut accepted = false;
        let mut local_step = step;
        for _ in 0..40 {
            let candidate = project_to_simplex(&(lambda.probs() + local_step * &grad));
            let (cand_value, cand_grad) = eval(&candidate)?;
            if cand_value >= value - 1e-12 {
                if cand_value > value + opts.tol * value.abs().max(1e-30) {
                    since_progress = 0;
                } else {
                    since_progress += 1;
                }
                value = value.max(cand_value);
                lambda = candidate;
                grad = cand_grad;
                trajectory.push(value);
                accepted = true;
                step = (local_step * 1.5).min(step_cap);
                break;
            }
            local_step /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(InformationGain {
        value,
        maximizer: lambda,
        iterations,
        trajectory,
    })
}

/// Effective dimension of a weighted Gram: the smallest `j` with
/// `j * xi* * ln(nV) >= sum of eigenvalues past j`.
pub fn effective_dimension(k_lambda: &DMatrix<f64>, xi_star: f64) -> usize {
    let m = k_lambda.nrows();
    if m == 0 {
        return 0;
    }
    let mut eigs: Vec<f64> = nalgebra::SymmetricEigen::new(k_lambda.clone())
        .eigenvalues
        .iter()
        .map(|e| e.max(0.0))
        .collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    let log_m = (m as f64).ln();
    let mut tail: f64 = eigs.iter().sum();
    for j in 0..=m {
        if j as f64 * xi_star * log_m >= tail {
            return j;
        }
        if j < m {
            tail -= eigs[j];
        }
    }
    m
}

/// Numerical ranks (singular values above `1e-8` of the largest) of the task
/// Gram, the arm Gram, and the composite Gram, with the Hadamard-product rank
/// bound asserted.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RankDecomposition {
    pub rank_task: usize,
    pub rank_arm: usize,
    pub rank_composite: usize,
}

fn numerical_rank(matrix: &DMatrix<f64>) -> usize {
    let svs = matrix.clone().svd(false, false).singular_values;
    let max = svs.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    svs.iter().filter(|s| **s > 1e-8 * max).count()
}

pub fn rank_decomposition(instance: &ProblemInstance) -> Result<RankDecomposition> {
    let task = instance.spec.task_gram(instance.num_agents)?;
    let arm = instance.spec.arm_gram(&instance.arms)?;
    let composite = instance.gram();
    let out = RankDecomposition {
        rank_task: numerical_rank(&task),
        rank_arm: numerical_rank(&arm),
        rank_composite: numerical_rank(composite),
    };
    if out.rank_composite > out.rank_task * out.rank_arm {
        return Err(Error::Internal(format!(
            "rank decomposition violated: {} > {} * {}",
            out.rank_composite, out.rank_task, out.rank_arm
        )));
    }
    Ok(out)
}

/// Empirical speedup: mean per-task samples of the single-agent baseline over
/// mean per-agent samples of the multi-agent run. `None` when degenerate.
pub fn empirical_speedup(multi: &RunReport, single: &RunReport) -> Option<f64> {
    let multi_mean = multi.mean_samples_per_agent();
    let single_mean = single.mean_samples_per_agent();
    if multi_mean <= 0.0 || single_mean <= 0.0 {
        return None;
    }
    Some(single_mean / multi_mean)
}

/// Bootstrap percentile interval for the speedup over paired run sets.
/// Returns `(median, lo, hi)` at the 95% level.
pub fn bootstrap_speedup(
    multi: &[RunReport],
    single: &[RunReport],
    resamples: usize,
    seed: u64,
) -> Option<(f64, f64, f64)> {
    if multi.is_empty() || single.is_empty() {
        return None;
    }
    let multi_means: Vec<f64> = multi.iter().map(RunReport::mean_samples_per_agent).collect();
    let single_means: Vec<f64> = single.iter().map(RunReport::mean_samples_per_agent).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let m: f64 = (0..multi_means.len())
            .map(|_| multi_means[rng.random_range(0..multi_means.len())])
            .sum::<f64>()
            / multi_means.len() as f64;
        let s: f64 = (0..single_means.len())
            .map(|_| single_means[rng.random_range(0..single_means.len())])
            .sum::<f64>()
            / single_means.len() as f64;
        if m > 0.0 {
            stats.push(s / m);
        }
    }
    if stats.is_empty() {
        return None;
    }
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let pick = |q: f64| stats[((stats.len() - 1) as f64 * q).round() as usize];
    Some((pick(0.5), pick(0.025), pick(0.975)))
}

/// The full per-instance diagnostic block emitted by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDiagnostics {
    pub xi_star: f64,
    pub delta_min: f64,
    pub rho_star: f64,
    pub information_gain: f64,
    pub effective_dimension: usize,
    pub rank_task: usize,
    pub rank_arm: usize,
    pub rank_composite: usize,
    pub trace_k_lambda_star: f64,
    /// `delta_min^2 rho* <= 8 Upsilon` within solver tolerance.
    pub chain_hardness_ok: bool,
    /// Information gain bounded through the effective dimension.
    pub chain_effective_dim_ok: bool,
    /// Information gain bounded through the rank decomposition.
    pub chain_rank_ok: bool,
}

/// Solver tolerance allowed on the diagnostic chain inequalities.
pub const CHAIN_TOLERANCE: f64 = 0.05;

pub fn compute_diagnostics(
    instance: &ProblemInstance,
    xi_star: f64,
    opts: &SolverOptions,
) -> Result<InstanceDiagnostics> {
    let gram = instance.gram();
    let m = gram.nrows();
    let rho_star = hardness_rho_star(instance, xi_star, opts)?;
    let gain = max_information_gain(gram, xi_star, opts)?;
    let k_lambda = scale_gram(gram, gain.maximizer.probs())?;
    let d_eff = effective_dimension(&k_lambda, xi_star);
    let ranks = rank_decomposition(instance)?;
    let trace = k_lambda.trace();

    let slack = 1.0 + CHAIN_TOLERANCE;
    let delta_min = if instance.delta_min.is_finite() {
        instance.delta_min
    } else {
        0.0
    };
    let chain_hardness_ok = delta_min * delta_min * rho_star <= 8.0 * gain.value * slack + 1e-9;
    let chain_effective_dim_ok = if d_eff == 0 {
        gain.value <= 1e-9
    } else {
        let bound =
            d_eff as f64 * (2.0 * m as f64 * (1.0 + trace / (xi_star * d_eff as f64))).ln();
        gain.value <= bound * slack + 1e-9
    };
    let rank_k_lambda = numerical_rank(&k_lambda).max(1);
    let rank_bound = (ranks.rank_task * ranks.rank_arm) as f64
        * ((m as f64 + trace / xi_star) / rank_k_lambda as f64).ln();
    let chain_rank_ok = gain.value <= rank_bound * slack + 1e-9;

    Ok(InstanceDiagnostics {
        xi_star,
        delta_min,
        rho_star,
        information_gain: gain.value,
        effective_dimension: d_eff,
        rank_task: ranks.rank_task,
        rank_arm: ranks.rank_arm,
        rank_composite: ranks.rank_composite,
        trace_k_lambda_star: trace,
        chain_hardness_ok,
        chain_effective_dim_ok,
        chain_rank_ok,
    })
}
