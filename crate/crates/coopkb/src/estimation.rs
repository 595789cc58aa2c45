//! Kernelized regularized least squares from observation summaries.
//!
//! The estimator never materializes a parameter vector in feature space. With
//! per-arm counts `N_i` and means `ybar_i` it solves
//!
//! ```text
//! alpha = (K_N + N xi I)^{-1} ybar_N,
//!   K_N = [sqrt(N_i N_j) K(x̃_i, x̃_j)],  ybar_N = [sqrt(N_i) ybar_i]
//! ```
//!
//! once per phase; every reward and gap query is then a dot product against
//! `alpha`. Since the solve depends on the data only through `(N_i, ybar_i)`,
//! fitting on merged summaries equals fitting on pooled raw samples.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::kernel::{scale_gram, KernelSpec, SpdSolver, TaskedArm};
use crate::{Error, Result};

/// Per-arm pull counts and empirical means over all `nV` arms. Means of
/// unsampled arms are stored as zero; the `sqrt(N_i)` scaling removes them
/// from every downstream computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSummary {
    pub counts: Vec<u64>,
    pub means: Vec<f64>,
}

impl ObservationSummary {
    pub fn empty(len: usize) -> Self {
        Self {
            counts: vec![0; len],
            means: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Online mean update for one observation.
    pub fn record(&mut self, index: usize, value: f64) {
        let n = self.counts[index] as f64;
        self.means[index] = (self.means[index] * n + value) / (n + 1.0);
        self.counts[index] += 1;
    }

    /// Count-weighted merge; associative and commutative up to roundoff.
    pub fn merge(&self, other: &ObservationSummary) -> Result<ObservationSummary> {
        if self.len() != other.len() {
            return Err(Error::Precondition(format!(
                "cannot merge summaries of lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        let mut out = ObservationSummary::empty(self.len());
        for i in 0..self.len() {
            let (na, nb) = (self.counts[i] as f64, other.counts[i] as f64);
            let n = na + nb;
            out.counts[i] = self.counts[i] + other.counts[i];
            out.means[i] = if n > 0.0 {
                (na * self.means[i] + nb * other.means[i]) / n
            } else {
                0.0
            };
        }
        Ok(out)
    }
}

/// A fitted phase estimator: one SPD solve shared by all reward and gap
/// queries of the phase.
#[derive(Debug, Clone)]
pub struct FittedEstimator {
    gram: DMatrix<f64>,
    sqrt_counts: DVector<f64>,
    pub regularizer: f64,
    pub solved_weights: DVector<f64>,
}

/// Fits the estimator from a plain Gram matrix and a merged summary.
/// `n_total` must equal the summary's total count; the regularizer is
/// `n_total * xi`.
pub fn fit(
    gram: &DMatrix<f64>,
    summary: &ObservationSummary,
    n_total: u64,
    xi: f64,
) -> Result<FittedEstimator> {
    let m = gram.nrows();
    if summary.len() != m {
        return Err(Error::Precondition(format!(
            "summary covers {} arms, Gram covers {m}",
            summary.len()
        )));
    }
    if summary.total() != n_total {
        return Err(Error::Precondition(format!(
            "summary total {} does not match declared total {n_total}",
            summary.total()
        )));
    }
    if !(xi > 0.0) {
        return Err(Error::Precondition(format!("xi must be positive, got {xi}")));
    }
    let counts = DVector::from_iterator(m, summary.counts.iter().map(|c| *c as f64));
    let sqrt_counts = counts.map(f64::sqrt);
    let regularizer = n_total.max(1) as f64 * xi;

    let mut system = scale_gram(gram, &counts)?;
    for i in 0..m {
        system[(i, i)] += regularizer;
    }
    let solver = SpdSolver::new(system)?;
    let scaled_means =
        DVector::from_iterator(m, (0..m).map(|i| sqrt_counts[i] * summary.means[i]));
    let solved_weights = solver.solve_vec(&scaled_means);
    Ok(FittedEstimator {
        gram: gram.clone(),
        sqrt_counts,
        regularizer,
        solved_weights,
    })
}

/// Spec-facing wrapper that evaluates the Gram from the kernel spec.
pub fn fit_arms(
    spec: &KernelSpec,
    arms: &[TaskedArm],
    summary: &ObservationSummary,
    n_total: u64,
    xi: f64,
) -> Result<FittedEstimator> {
    let gram = spec.gram(arms)?;
    fit(&gram, summary, n_total, xi)
}

impl FittedEstimator {
    /// `k_t(x̃_i)' alpha` for an instance arm.
    pub fn estimate_reward(&self, index: usize) -> f64 {
        let m = self.gram.nrows();
        let mut acc = 0.0;
        for r in 0..m {
            acc += self.sqrt_counts[r] * self.gram[(r, index)] * self.solved_weights[r];
        }
        acc
    }

    /// Estimated reward of an arbitrary query arm (kernel column computed on
    /// the fly).
    pub fn estimate_reward_query(
        &self,
        spec: &KernelSpec,
        arms: &[TaskedArm],
        query: &TaskedArm,
    ) -> Result<f64> {
        let mut acc = 0.0;
        for (r, arm) in arms.iter().enumerate() {
            acc += self.sqrt_counts[r] * spec.eval(query, arm)? * self.solved_weights[r];
        }
        Ok(acc)
    }

    /// `(k_t(i) - k_t(j))' alpha`. The difference vector is formed first, so
    /// swapping the arguments negates the result exactly.
    pub fn estimate_gap(&self, i: usize, j: usize) -> f64 {
        let m = self.gram.nrows();
        let mut acc = 0.0;
        for r in 0..m {
            let d = self.sqrt_counts[r] * (self.gram[(r, i)] - self.gram[(r, j)]);
            acc += d * self.solved_weights[r];
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{ArmKernel, TaskKernel};
    use crate::oracle;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arm(i: usize, f: &[f64]) -> TaskedArm {
        TaskedArm::new(i, 0, i, DVector::from_row_slice(f), 0)
    }

    fn linear_spec() -> KernelSpec {
        KernelSpec::new(ArmKernel::Linear, TaskKernel::Ones).unwrap()
    }

    fn orthonormal_arms(d: usize) -> Vec<TaskedArm> {
        (0..d)
            .map(|i| {
                let mut f = vec![0.0; d];
                f[i] = 1.0;
                arm(i, &f)
            })
            .collect()
    }

    #[test]
    fn zero_counts_zero_estimates() {
        let arms = orthonormal_arms(3);
        let spec = linear_spec();
        let gram = spec.gram(&arms).unwrap();
        let est = fit(&gram, &ObservationSummary::empty(3), 0, 0.5).unwrap();
        assert!(est.solved_weights.iter().all(|w| *w == 0.0));
        assert_eq!(est.estimate_reward(1), 0.0);
        assert_eq!(est.estimate_gap(0, 2), 0.0);
    }

    #[test]
    fn scalar_ridge_on_orthonormal_arms() {
        let arms = orthonormal_arms(3);
        let spec = linear_spec();
        let gram = spec.gram(&arms).unwrap();
        let mut summary = ObservationSummary::empty(3);
        summary.counts = vec![4, 9, 25];
        summary.means = vec![0.5, -1.2, 2.0];
        let n_total = 38;
        let xi = 0.1;
        let est = fit(&gram, &summary, n_total, xi).unwrap();
        for i in 0..3 {
            let n_i = summary.counts[i] as f64;
            let want = n_i * summary.means[i] / (n_i + n_total as f64 * xi);
            assert_relative_eq!(est.estimate_reward(i), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn matches_explicit_ridge_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let arms: Vec<TaskedArm> = (0..5)
            .map(|i| {
                let f: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                arm(i, &f)
            })
            .collect();
        let spec = linear_spec();
        let gram = spec.gram(&arms).unwrap();
        let mut summary = ObservationSummary::empty(5);
        summary.counts = vec![3, 0, 7, 2, 11];
        summary.means = vec![0.4, 0.0, -0.3, 1.1, 0.8];
        let n_total = 23;
        let xi = 0.2;
        let est = fit(&gram, &summary, n_total, xi).unwrap();
        let feats: Vec<DVector<f64>> = arms.iter().map(|a| a.arm_feature.clone()).collect();
        for (i, phi) in feats.iter().enumerate() {
            let want = oracle::explicit_ridge_predict(
                &feats,
                &summary.counts,
                &summary.means,
                n_total as f64 * xi,
                phi,
            );
            assert_relative_eq!(est.estimate_reward(i), want, max_relative = 1e-8, epsilon = 1e-12);
        }
    }

    #[test]
    fn gap_is_exactly_antisymmetric_and_consistent_with_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let arms: Vec<TaskedArm> = (0..6)
            .map(|i| {
                let f: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                arm(i, &f)
            })
            .collect();
        let spec = linear_spec();
        let gram = spec.gram(&arms).unwrap();
        let mut summary = ObservationSummary::empty(6);
        for i in 0..6 {
            summary.counts[i] = rng.random_range(1..20);
            summary.means[i] = rng.random_range(-1.0..1.0);
        }
        let total = summary.total();
        let est = fit(&gram, &summary, total, 0.05).unwrap();
        for i in 0..6 {
            assert_eq!(est.estimate_gap(i, i), 0.0);
            for j in 0..6 {
                assert_eq!(est.estimate_gap(i, j), -est.estimate_gap(j, i));
                let via_rewards = est.estimate_reward(i) - est.estimate_reward(j);
                assert_relative_eq!(est.estimate_gap(i, j), via_rewards, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_query_estimates_zero() {
        let arms = vec![arm(0, &[1.0, 0.0, 0.0]), arm(1, &[0.0, 1.0, 0.0])];
        let spec = linear_spec();
        let gram = spec.gram(&arms).unwrap();
        let mut summary = ObservationSummary::empty(2);
        summary.counts = vec![5, 5];
        summary.means = vec![1.0, 2.0];
        let est = fit(&gram, &summary, 10, 0.1).unwrap();
        let query = arm(2, &[0.0, 0.0, 1.0]);
        assert_eq!(est.estimate_reward_query(&spec, &arms, &query).unwrap(), 0.0);
    }

    #[test]
    fn refit_reproduces_solved_weights() {
        let arms = orthonormal_arms(4);
        let spec = linear_spec();
        let gram = spec.gram(&arms).unwrap();
        let mut summary = ObservationSummary::empty(4);
        summary.counts = vec![2, 3, 4, 5];
        summary.means = vec![0.1, 0.2, 0.3, 0.4];
        let est1 = fit(&gram, &summary, 14, 0.3).unwrap();
        let est2 = fit(&gram, &summary, 14, 0.3).unwrap();
        assert!((est1.solved_weights - est2.solved_weights).amax() < 1e-10);
    }

    #[test]
    fn small_xi_zero_noise_recovers_truth_on_span() {
        let arms = orthonormal_arms(4);
        let spec = linear_spec();
        let gram = spec.gram(&arms).unwrap();
        let theta = DVector::from_row_slice(&[0.1, 0.2, 0.3, 0.4]);
        let mut summary = ObservationSummary::empty(4);
        for i in 0..4 {
            summary.counts[i] = 10;
            summary.means[i] = arms[i].arm_feature.dot(&theta); // noiseless
        }
        let est = fit(&gram, &summary, 40, 1e-8).unwrap();
        for i in 0..4 {
            let truth = arms[i].arm_feature.dot(&theta);
            assert!((est.estimate_reward(i) - truth).abs() < 1e-4);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// Merge is associative and commutative up to roundoff.
        #[test]
        fn prop_merge_associative_commutative(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let len = 5;
            let mk = |rng: &mut ChaCha8Rng| {
                let mut s = ObservationSummary::empty(len);
                for i in 0..len {
                    s.counts[i] = rng.random_range(0..10);
                    s.means[i] = if s.counts[i] > 0 { rng.random_range(-2.0..2.0) } else { 0.0 };
                }
                s
            };
            let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let ab_c = a.merge(&b).unwrap().merge(&c).unwrap();
            let a_bc = a.merge(&b.merge(&c).unwrap()).unwrap();
            let ba = b.merge(&a).unwrap();
            let ab = a.merge(&b).unwrap();
            prop_assert_eq!(&ab_c.counts, &a_bc.counts);
            for i in 0..len {
                prop_assert!((ab_c.means[i] - a_bc.means[i]).abs() < 1e-12);
                prop_assert!((ab.means[i] - ba.means[i]).abs() < 1e-12);
            }
        }

        /// Fitting on merged per-agent summaries equals fitting on the pooled
        /// per-arm summary built from the same raw samples.
        #[test]
        fn prop_merge_then_fit_equals_fit_on_merged(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let arms = orthonormal_arms(3);
            let spec = linear_spec();
            let gram = spec.gram(&arms).unwrap();
            // raw samples per (agent, arm); each arm owned by one agent
            let mut pooled = ObservationSummary::empty(3);
            let mut per_agent = [ObservationSummary::empty(3), ObservationSummary::empty(3)];
            for (agent, summary) in per_agent.iter_mut().enumerate() {
                for arm_idx in 0..3 {
                    if arm_idx % 2 != agent { continue; }
                    for _ in 0..rng.random_range(0..8) {
                        let y: f64 = rng.random_range(-1.0..1.0);
                        summary.record(arm_idx, y);
                        pooled.record(arm_idx, y);
                    }
                }
            }
            let merged = per_agent[0].merge(&per_agent[1]).unwrap();
            let n = pooled.total();
            let est_merged = fit(&gram, &merged, n, 0.2).unwrap();
            let est_pooled = fit(&gram, &pooled, n, 0.2).unwrap();
            prop_assert!((est_merged.solved_weights - est_pooled.solved_weights).amax() < 1e-12);
        }
    }
}
