//! Optimal-design machinery.
//!
//! The central object is the min-max problem
//!
//! ```text
//! min_{lambda in simplex}  max_{pairs (i,j)}  c_ij ||phi_i - phi_j||^2_{A(xi, lambda)^{-1}}
//! ```
//!
//! solved by projected subgradient descent entirely through kernel calls.
//! The same solver, with different pair sets and coefficients, yields the
//! per-phase sample allocation, the principle dimension, and the hardness
//! quantity in [`crate::diagnostics`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::kernel::{KernelSpec, PairNormContext, TaskedArm};
use crate::{Error, Result};

/// Grid floor for the regularization-parameter search.
pub const XI_FLOOR: f64 = 1e-12;

const SUPPORT_EPS: f64 = 1e-12;

/// A probability vector over all tasked arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    probs: DVector<f64>,
}

impl Allocation {
    pub fn new(probs: DVector<f64>) -> Result<Self> {
        if probs.iter().any(|p| *p < -1e-9 || !p.is_finite()) {
            return Err(Error::Precondition("allocation entries must be nonnegative".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "allocation must sum to 1, got {sum}"
            )));
        }
        Ok(Self {
            probs: probs.map(|p| p.max(0.0)),
        })
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            probs: DVector::from_element(len, 1.0 / len as f64),
        }
    }

    pub fn probs(&self) -> &DVector<f64> {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.len() == 0
    }

    /// Indices with mass above the support threshold.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.probs[i] > SUPPORT_EPS).collect()
    }
}

/// An unordered arm pair with an objective coefficient (1 for plain pair
/// norms; `1 / gap^2` in the hardness problem).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPair {
    pub i: usize,
    pub j: usize,
    pub coeff: f64,
}

impl WeightedPair {
    pub fn plain(i: usize, j: usize) -> Self {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        Self { i, j, coeff: 1.0 }
    }

    pub fn weighted(i: usize, j: usize, coeff: f64) -> Self {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        Self { i, j, coeff }
    }
}

/// Sorts pairs lexicographically and drops duplicates, so that argmax ties
/// always resolve to the lowest `(i, j)`.
pub fn normalize_pairs(mut pairs: Vec<WeightedPair>) -> Vec<WeightedPair> {
    pairs.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    pairs.dedup_by(|a, b| a.i == b.i && a.j == b.j && a.coeff == b.coeff);
    pairs
}

/// All within-set pairs of one agent's alive set, lexicographically ordered.
pub fn pairs_within(sets: &[Vec<usize>]) -> Vec<WeightedPair> {
    let mut pairs = Vec::new();
    for set in sets {
        for (a, &i) in set.iter().enumerate() {
            for &j in set.iter().skip(a + 1) {
                pairs.push(WeightedPair::plain(i, j));
            }
        }
    }
    normalize_pairs(pairs)
}

/// Projected-subgradient options (read from the experiment config).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Relative improvement below which an iteration does not count as progress.
    pub tol: f64,
    /// Stop after this many iterations without progress.
    pub patience: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-6,
            patience: 100,
        }
    }
}

impl SolverOptions {
    /// Coarser settings for dimension queries, where only the leading digits
    /// of the value matter.
    pub fn coarse(&self) -> Self {
        Self {
            max_iter: self.max_iter / 4,
            tol: self.tol * 10.0,
            patience: (self.patience / 2).max(20),
        }
    }
}

/// Output of the min-max solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignResult {
    pub allocation: Allocation,
    /// Objective value at `allocation`, recomputed from scratch.
    pub value: f64,
    /// Global indices of the pair attaining the max at `allocation`.
    pub argmax_pair: (usize, usize),
    pub iterations: usize,
    pub final_step_size: f64,
}

/// Max of coefficient-weighted pair norms and the attaining pair, ties to the
/// lexicographically first pair.
pub fn objective_at(
    ctx: &PairNormContext<'_>,
    pairs: &[WeightedPair],
) -> Result<(f64, (usize, usize))> {
    let mut best: Option<(f64, (usize, usize))> = None;
    for p in pairs {
        let v = p.coeff * ctx.pair_norm_sq(p.i, p.j);
        match &best {
            Some((bv, _)) if v <= *bv => {}
            _ => best = Some((v, (p.i, p.j))),
        }
    }
    best.ok_or_else(|| Error::Precondition("pair list is empty".into()))
}

/// Relative activity band for the subgradient: pieces within this fraction of
/// the max are averaged, which keeps symmetric instances from cycling.
const ACTIVE_BAND: f64 = 1e-3;

/// Averaged subgradient over all near-active pieces of the max objective.
fn active_set_gradient(
    ctx: &PairNormContext<'_>,
    pairs: &[WeightedPair],
    max_value: f64,
) -> DVector<f64> {
    let threshold = max_value * (1.0 - ACTIVE_BAND);
    let mut grad = DVector::zeros(ctx.len());
    let mut active = 0usize;
    for p in pairs {
        let v = p.coeff * ctx.pair_norm_sq(p.i, p.j);
        if v >= threshold {
            grad += gradient_at(ctx, (p.i, p.j), p.coeff);
            active += 1;
        }
    }
    if active > 1 {
        grad /= active as f64;
    }
    grad
}

/// Subgradient of the max objective at the argmax pair:
/// `-c * ((phi_i - phi_j)' A^{-1} phi_x)^2` per arm, via kernel calls only.
pub fn gradient_at(ctx: &PairNormContext<'_>, pair: (usize, usize), coeff: f64) -> DVector<f64> {
    let cross = ctx.pair_cross_row(pair.0, pair.1);
    cross.map(|c| -coeff * c * c)
}

/// Spec-facing objective evaluation: builds the weighting context and returns
/// the max pair norm with the attaining pair.
pub fn design_objective(
    spec: &KernelSpec,
    arms: &[TaskedArm],
    pairs: &[WeightedPair],
    lambda: &Allocation,
    xi: f64,
) -> Result<(f64, (usize, usize))> {
    let gram = spec.gram(arms)?;
    let ctx = PairNormContext::new(&gram, lambda.probs(), xi)?;
    objective_at(&ctx, pairs)
}

/// Spec-facing gradient at a given argmax pair.
pub fn objective_gradient(
    spec: &KernelSpec,
    arms: &[TaskedArm],
    argmax_pair: (usize, usize),
    lambda: &Allocation,
    xi: f64,
) -> Result<DVector<f64>> {
    let gram = spec.gram(arms)?;
    let ctx = PairNormContext::new(&gram, lambda.probs(), xi)?;
    Ok(gradient_at(&ctx, argmax_pair, 1.0))
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &DVector<f64>) -> Allocation {
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    let mut rho = 0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            rho = k + 1;
            tau = candidate;
        }
    }
    debug_assert!(rho > 0);
    let mut probs = v.map(|x| (x - tau).max(0.0));
    // scrub the O(eps * |v|) dust the threshold arithmetic leaves behind
    let sum: f64 = probs.iter().sum();
    if sum > 0.0 {
        probs /= sum;
    }
    Allocation { probs }
}

/// Projected subgradient descent on the max of weighted pair norms over a
/// fixed regularizer. Step size `c / sqrt(k)` with `c` set from the initial
/// gradient scale; tracks and returns the best iterate.
pub fn solve_min_max_pairs(
    gram: &DMatrix<f64>,
    pairs: &[WeightedPair],
    xi: f64,
    warm_start: Option<&Allocation>,
    opts: &SolverOptions,
) -> Result<DesignResult> {
    if pairs.is_empty() {
        return Err(Error::Precondition("min-max solve needs at least one pair".into()));
    }
    let m = gram.nrows();
    let mut lambda = match warm_start {
        Some(w) if w.len() == m => w.clone(),
        _ => Allocation::uniform(m),
    };

    let ctx = PairNormContext::new(gram, lambda.probs(), xi)?;
    let (mut value, argmax) = objective_at(&ctx, pairs)?;
    let mut grad = active_set_gradient(&ctx, pairs, value);

    let mut best_value = value;
    let mut best_lambda = lambda.clone();

    let grad_scale = grad.amax();
    if grad_scale == 0.0 {
        // degenerate objective (identical arms or all-zero kernel)
        return Ok(DesignResult {
            allocation: best_lambda,
            value: best_value,
            argmax_pair: argmax,
            iterations: 0,
            final_step_size: 0.0,
        });
    }
    // c / sqrt(k) schedule, annealed: once a round of iterations stalls, the
    // schedule restarts from the best iterate with c halved, shrinking the
    // subgradient method's convergence ball geometrically.
    let mut step_base = 1.0 / grad_scale;
    let mut iterations = 0usize;
    let mut step = step_base;
    let mut stalled_rounds = 0usize;
    while iterations < opts.max_iter && stalled_rounds < 2 {
        let round_best = best_value;
        let mut k = 0usize;
        let mut last_progress = 0usize;
        while iterations < opts.max_iter {
            k += 1;
            iterations += 1;
            step = step_base / (k as f64).sqrt();
            let candidate = lambda.probs() - step * &grad;
            lambda = project_to_simplex(&candidate);
            let sum: f64 = lambda.probs().iter().sum();
            if (sum - 1.0).abs() > 1e-9 || lambda.probs().iter().any(|p| *p < -1e-9) {
                return Err(Error::Internal(format!(
                    "projected iterate left the simplex (sum {sum})"
                )));
            }
            let ctx = PairNormContext::new(gram, lambda.probs(), xi)?;
            (value, _) = objective_at(&ctx, pairs)?;
            grad = active_set_gradient(&ctx, pairs, value);

            if value < best_value - opts.tol * best_value.abs().max(1e-30) {
                last_progress = k;
            }
            if value < best_value {
                best_value = value;
                best_lambda = lambda.clone();
            }
            if k - last_progress >= opts.patience {
                break;
            }
        }
        if best_value > round_best - opts.tol * round_best.abs().max(1e-30) {
            stalled_rounds += 1;
        } else {
            stalled_rounds = 0;
        }
        lambda = best_lambda.clone();
        let ctx = PairNormContext::new(gram, lambda.probs(), xi)?;
        let (best_now, _) = objective_at(&ctx, pairs)?;
        grad = active_set_gradient(&ctx, pairs, best_now);
        step_base /= 2.0;
    }

    // recompute the reported value from scratch at the best iterate
    let ctx = PairNormContext::new(gram, best_lambda.probs(), xi)?;
    let (final_value, final_argmax) = objective_at(&ctx, pairs)?;
    Ok(DesignResult {
        allocation: best_lambda,
        value: final_value,
        argmax_pair: final_argmax,
        iterations,
        final_step_size: step,
    })
}

/// Min-max allocation over within-agent alive pairs: the per-phase design
/// problem. The simplex ranges over all arms; the max over alive pairs only.
pub fn solve_min_max(
    spec: &KernelSpec,
    arms: &[TaskedArm],
    alive_sets: &[Vec<usize>],
    xi: f64,
    opts: &SolverOptions,
) -> Result<DesignResult> {
    if alive_sets.iter().all(|s| s.len() < 2) {
        return Err(Error::Precondition(
            "all alive sets are singletons; nothing to design for".into(),
        ));
    }
    let gram = spec.gram(arms)?;
    let pairs = pairs_within(alive_sets);
    solve_min_max_pairs(&gram, &pairs, xi, None, opts)
}

/// Result of the regularization-parameter grid search.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct XiSearch {
    pub xi: f64,
    /// Grid exhausted without satisfying the condition; `xi` is the floor and
    /// the bias guarantee may not hold.
    pub floored: bool,
    /// Condition left-hand side at the returned `xi`.
    pub lhs: f64,
}

/// Largest `xi` on the geometric grid `{1, 1/2, 1/4, ...}` such that under
/// the uniform design the worst within-agent pair satisfies
///
/// ```text
/// sqrt((K_ii + K_jj - 2 K_ij) - ||k_u(i) - k_u(j)||^2_{(xi I + K_u)^{-1}})
///   <= 1 / ((1 + eps) * B * 2^(t+1))
/// ```
///
/// The left side equals `sqrt(xi) * ||phi_i - phi_j||` under the regularized
/// inverse, shrinks with `xi`, and vanishes as `xi -> 0` whenever the pair
/// difference lies in the span of the sampled features; if the grid floor is
/// reached anyway the result is flagged rather than failed.
pub fn find_xi_fc(
    gram: &DMatrix<f64>,
    agent_pairs: &[WeightedPair],
    t: u32,
    norm_bound: f64,
    eps: f64,
) -> Result<XiSearch> {
    if t < 1 {
        return Err(Error::Precondition("phase index must be at least 1".into()));
    }
    if !(norm_bound > 0.0) {
        return Err(Error::Precondition("norm bound B must be positive".into()));
    }
    let rhs = 1.0 / ((1.0 + eps) * norm_bound * 2f64.powi(t as i32 + 1));
    let uniform = Allocation::uniform(gram.nrows());
    let lhs_at = |xi: f64| -> Result<f64> {
        let ctx = PairNormContext::new(gram, uniform.probs(), xi)?;
        let worst = agent_pairs
            .iter()
            .map(|p| ctx.pair_norm_sq(p.i, p.j))
            .fold(0.0, f64::max);
        Ok((xi * worst).sqrt())
    };
    let mut xi = 1.0;
    loop {
        let lhs = lhs_at(xi)?;
        if lhs <= rhs {
            return Ok(XiSearch {
                xi,
                floored: false,
                lhs,
            });
        }
        xi /= 2.0;
        if xi < XI_FLOOR {
            let lhs = lhs_at(XI_FLOOR)?;
            return Ok(XiSearch {
                xi: XI_FLOOR,
                floored: lhs > rhs,
                lhs,
            });
        }
    }
}

/// Integer sample counts over all arms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleCounts {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl SampleCounts {
    pub fn as_f64(&self) -> DVector<f64> {
        DVector::from_iterator(self.counts.len(), self.counts.iter().map(|c| *c as f64))
    }
}

/// Rounds an allocation into integer counts summing to `n_total` and verifies
/// the `(1 + eps)` design guarantee post hoc.
///
/// Apportionment: every support arm gets one sample, floors of `N lambda_i`
/// on top, then single-sample adjustments toward the largest deficit
/// (lowest index on ties) until the total is exact. If verification fails,
/// up to `nV` repair steps each move one sample onto the arm with the most
/// negative objective gradient; persistent failure is an error.
pub fn round_allocation(
    gram: &DMatrix<f64>,
    alive_pairs: &[WeightedPair],
    lambda: &Allocation,
    n_total: u64,
    xi: f64,
    eps: f64,
) -> Result<SampleCounts> {
    let m = lambda.len();
    let support = lambda.support();
    if support.is_empty() {
        return Err(Error::Precondition("allocation has empty support".into()));
    }
    if n_total < support.len() as u64 {
        return Err(Error::Precondition(format!(
            "cannot round: {} samples for {} support arms",
            n_total,
            support.len()
        )));
    }
    let n = n_total as f64;
    let probs = lambda.probs();

    let mut counts = vec![0u64; m];
    for &i in &support {
        counts[i] = ((n * probs[i]).floor() as u64).max(1);
    }
    let mut sum: u64 = counts.iter().sum();
    while sum > n_total {
        // shed from the largest overshoot, never emptying a support arm
        let donor = support
            .iter()
            .copied()
            .filter(|&i| counts[i] > 1)
            .max_by(|&a, &b| {
                let da = counts[a] as f64 - n * probs[a];
                let db = counts[b] as f64 - n * probs[b];
                da.partial_cmp(&db).expect("finite").then(b.cmp(&a))
            })
            .ok_or_else(|| Error::Internal("rounding overshoot with all counts at 1".into()))?;
        counts[donor] -= 1;
        sum -= 1;
    }
    while sum < n_total {
        let receiver = support
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let da = n * probs[a] - counts[a] as f64;
                let db = n * probs[b] - counts[b] as f64;
                da.partial_cmp(&db).expect("finite").then(b.cmp(&a))
            })
            .expect("support is nonempty");
        counts[receiver] += 1;
        sum += 1;
    }

    // post-hoc (1 + eps) verification against the ideal fractional design
    let reg = n * xi;
    let ideal = PairNormContext::new(gram, &(probs * n), reg)?;
    let (target, _) = objective_at(&ideal, alive_pairs)?;
    let bound = (1.0 + eps) * target + 1e-12;

    let counts_vec =
        |c: &[u64]| DVector::from_iterator(c.len(), c.iter().map(|x| *x as f64));
    let mut achieved_ctx = PairNormContext::new(gram, &counts_vec(&counts), reg)?;
    let (mut achieved, mut argmax) = objective_at(&achieved_ctx, alive_pairs)?;

    let mut repairs = 0usize;
    while achieved > bound && repairs < m {
        let grad = gradient_at(&achieved_ctx, argmax, 1.0);
        let receiver = (0..m)
            .min_by(|&a, &b| grad[a].partial_cmp(&grad[b]).expect("finite").then(a.cmp(&b)))
            .expect("nonempty");
        let donor = (0..m)
            .filter(|&i| i != receiver && counts[i] > 0)
            .max_by(|&a, &b| {
                let da = counts[a] as f64 - n * probs[a];
                let db = counts[b] as f64 - n * probs[b];
                da.partial_cmp(&db).expect("finite").then(b.cmp(&a))
            })
            .ok_or_else(|| Error::Rounding("no donor arm available for repair".into()))?;
        counts[donor] -= 1;
        counts[receiver] += 1;
        repairs += 1;
        achieved_ctx = PairNormContext::new(gram, &counts_vec(&counts), reg)?;
        (achieved, argmax) = objective_at(&achieved_ctx, alive_pairs)?;
    }
    if achieved > bound {
        return Err(Error::Rounding(format!(
            "rounded design misses the (1+eps) guarantee after {repairs} repairs: \
             {achieved:.6e} > {bound:.6e}"
        )));
    }

    Ok(SampleCounts {
        counts,
        total: n_total,
    })
}

/// Principle dimension of a subset: min over designs on all arms of the max
/// regularized pair norm within the subset. Zero for empty or singleton
/// subsets.
pub fn principle_dimension(
    gram: &DMatrix<f64>,
    subset: &[usize],
    xi_star: f64,
    warm_start: Option<&Allocation>,
    opts: &SolverOptions,
) -> Result<f64> {
    if subset.len() <= 1 {
        return Ok(0.0);
    }
    let mut pairs = Vec::new();
    for (a, &i) in subset.iter().enumerate() {
        for &j in subset.iter().skip(a + 1) {
            pairs.push(WeightedPair::plain(i, j));
        }
    }
    let pairs = normalize_pairs(pairs);
    Ok(solve_min_max_pairs(gram, &pairs, xi_star, warm_start, opts)?.value)
}

/// Spec-facing wrapper over [`principle_dimension`] for callers holding arms
/// rather than a Gram matrix.
pub fn principle_dimension_of_arms(
    spec: &KernelSpec,
    arms: &[TaskedArm],
    subset: &[usize],
    xi_star: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let gram = spec.gram(arms)?;
    principle_dimension(&gram, subset, xi_star, None, opts)
}
