//! The `verify` verb: oracle-equivalence checks at small sizes, one named
//! invariant per line. Every check compares the kernelized code path against
//! an independent explicit-feature computation or a closed form.

use std::process::ExitCode;

use coopkb::design::{
    find_xi_fc, pairs_within, project_to_simplex, round_allocation, solve_min_max_pairs,
    Allocation, SolverOptions,
};
use coopkb::diagnostics::{max_information_gain, rank_decomposition};
use coopkb::estimation::{fit, ObservationSummary};
use coopkb::kernel::{
    build_weighted_gram, check_psd, regularized_pair_norm_sq, weighted_kernel_vector, ArmKernel,
    KernelSpec, PairNormContext, TaskKernel, TaskedArm,
};
use coopkb::oracle;
use coopkb::protocol::{agent_rng, generate_instance, sample, InstanceConfig, TaskRegime};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::VerifyArgs;

struct Suite {
    tol_scale: f64,
    failures: usize,
}

impl Suite {
    fn check(&mut self, name: &str, tolerance: f64, measured: f64, detail: &str) {
        let limit = tolerance * self.tol_scale;
        if measured <= limit {
            println!("PASS {name}: {detail} (measured {measured:.3e} <= {limit:.3e})");
        } else {
            println!("FAIL {name}: {detail} (measured {measured:.3e} > {limit:.3e})");
            self.failures += 1;
        }
    }

    fn check_bool(&mut self, name: &str, ok: bool, detail: &str) {
        if ok {
            println!("PASS {name}: {detail}");
        } else {
            println!("FAIL {name}: {detail}");
            self.failures += 1;
        }
    }
}

fn random_arms(rng: &mut ChaCha8Rng, m: usize, d: usize) -> (Vec<TaskedArm>, Vec<DVector<f64>>) {
    let arms: Vec<TaskedArm> = (0..m)
        .map(|i| {
            let f: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
            TaskedArm::new(i, 0, i, DVector::from_row_slice(&f), 0)
        })
        .collect();
    let feats = arms.iter().map(|a| a.arm_feature.clone()).collect();
    (arms, feats)
}

pub fn run(args: VerifyArgs) -> ExitCode {
    let mut suite = Suite {
        tol_scale: args.tol_scale,
        failures: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_808);

    // composite-product: K = K_Z * K_X pointwise
    {
        let task = TaskKernel::Table {
            gram: DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]),
        };
        let spec = KernelSpec::new(ArmKernel::Linear, task).unwrap();
        let a = TaskedArm::new(0, 0, 0, DVector::from_row_slice(&[1.0, 2.0]), 0);
        let b = TaskedArm::new(1, 1, 0, DVector::from_row_slice(&[3.0, -1.0]), 1);
        let err = (spec.eval(&a, &b).unwrap() - 0.4 * 1.0).abs();
        suite.check("composite-product", 1e-12, err, "K((x,z),(x',z')) = K_Z K_X");
    }

    // gram-symmetry-psd on a generated instance
    {
        let inst = generate_instance(&InstanceConfig::paper_grid(4, 5, 4, 0.3)).unwrap();
        let ok = check_psd(inst.gram(), "composite gram").is_ok();
        suite.check_bool("gram-symmetry-psd", ok, "composite Gram is symmetric PSD");
    }

    // table-validation: asymmetric tables are rejected
    {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.3, 1.0]);
        let rejected = KernelSpec::new(ArmKernel::Table { gram: bad }, TaskKernel::Ones).is_err();
        suite.check_bool("table-validation", rejected, "asymmetric kernel table rejected");
    }

    // pair-norm-oracle
    {
        let (arms, feats) = random_arms(&mut rng, 6, 3);
        let spec = KernelSpec::new(ArmKernel::Linear, TaskKernel::Ones).unwrap();
        let w = Allocation::uniform(6);
        let mut worst: f64 = 0.0;
        for i in 0..6 {
            for j in (i + 1)..6 {
                let got =
                    regularized_pair_norm_sq(&spec, &arms, w.probs(), 0.1, i, j).unwrap();
                let want = oracle::explicit_pair_norm_sq(&feats, w.probs(), 0.1, i, j);
                worst = worst.max((got - want).abs() / want.abs().max(1e-9));
            }
        }
        suite.check("pair-norm-oracle", 1e-8, worst, "kernelized vs explicit quadratic form");
    }

    // weighted-gram-oracle
    {
        let (arms, feats) = random_arms(&mut rng, 5, 3);
        let spec = KernelSpec::new(ArmKernel::Linear, TaskKernel::Ones).unwrap();
        let w = DVector::from_row_slice(&[0.5, 1.5, 0.0, 2.0, 3.0]);
        let got = build_weighted_gram(&spec, &arms, &w).unwrap().matrix;
        let want = oracle::weighted_gram(&feats, &w);
        suite.check(
            "weighted-gram-oracle",
            1e-10,
            (got - want).amax(),
            "sqrt(w_i w_j) K_ij vs Phi Phi'",
        );
    }

    // kernel-vector-oracle
    {
        let (arms, feats) = random_arms(&mut rng, 5, 3);
        let spec = KernelSpec::new(ArmKernel::Linear, TaskKernel::Ones).unwrap();
        let w = DVector::from_row_slice(&[0.1, 0.3, 0.2, 0.25, 0.15]);
        let got = weighted_kernel_vector(&spec, &arms, &w, &arms[2]).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..5 {
            let want = w[i].sqrt() * feats[2].dot(&feats[i]);
            worst = worst.max((got[i] - want).abs());
        }
        suite.check("kernel-vector-oracle", 1e-10, worst, "sqrt(w_i) K(q, x_i) vs Phi phi(q)");
    }

    // gradient-oracle and finite differences
    {
        let (arms, feats) = random_arms(&mut rng, 4, 3);
        let spec = KernelSpec::new(ArmKernel::Linear, TaskKernel::Ones).unwrap();
        let gram = spec.gram(&arms).unwrap();
        let lambda = Allocation::new(DVector::from_row_slice(&[0.4, 0.3, 0.2, 0.1])).unwrap();
        let xi = 0.3;
        let ctx = PairNormContext::new(&gram, lambda.probs(), xi).unwrap();
        let cross_got = ctx.pair_cross_row(0, 2);
        let cross_want = oracle::explicit_pair_cross(&feats, lambda.probs(), xi, 0, 2);
        suite.check(
            "gradient-oracle",
            1e-8,
            (cross_got.clone() - cross_want).amax(),
            "kernelized gradient factor vs explicit",
        );

        let h = 1e-6;
        let norm_at = |l: &DVector<f64>| {
            let c = PairNormContext::new(&gram, l, xi).unwrap();
            c.pair_norm_sq(0, 2)
        };
        let mut dir = DVector::zeros(4);
        dir[0] = 1.0;
        dir[3] = -1.0;
        let fd = (norm_at(&(lambda.probs() + h * &dir)) - norm_at(&(lambda.probs() - h * &dir)))
            / (2.0 * h);
        // d/d lambda_x ||phi_0 - phi_2||^2 = -cross_x^2
        let analytic = cross_got.map(|c| -c * c).dot(&dir);
        suite.check(
            "gradient-finite-difference",
            1e-4,
            (fd - analytic).abs() / analytic.abs().max(1e-9),
            "directional derivative vs analytic gradient",
        );
    }

    // simplex-projection-oracle
    {
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let v = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0f64));
            let got = project_to_simplex(&v);
            let want = oracle::simplex_projection_enumeration(&v);
            worst = worst.max((got.probs() - &want).norm());
        }
        suite.check("simplex-projection-oracle", 1e-9, worst, "sort-based vs active-set enumeration");
    }

    // design-solver-grid: orthonormal pair with a known optimum
    {
        let arms = vec![
            TaskedArm::new(0, 0, 0, DVector::from_row_slice(&[1.0, 0.0]), 0),
            TaskedArm::new(1, 0, 1, DVector::from_row_slice(&[0.0, 1.0]), 0),
        ];
        let spec = KernelSpec::new(ArmKernel::Linear, TaskKernel::Ones).unwrap();
        let gram = spec.gram(&arms).unwrap();
        let pairs = pairs_within(&[vec![0, 1]]);
        let xi = 0.1;
        let res = solve_min_max_pairs(&gram, &pairs, xi, None, &SolverOptions::default()).unwrap();
        let expected = 2.0 / (xi + 0.5);
        suite.check(
            "design-solver-grid",
            0.01,
            (res.value - expected).abs() / expected,
            "min-max value vs closed form 2/(xi + 1/2)",
        );
    }

    // xi-search: returned value satisfies the condition, doubling violates it
    {
        let (arms, _) = random_arms(&mut rng, 5, 3);
        let spec = KernelSpec::new(ArmKernel::Linear, TaskKernel::Ones).unwrap();
        let gram = spec.gram(&arms).unwrap();
        let pairs = pairs_within(&[vec![0, 1, 2, 3, 4]]);
        let res = find_xi_fc(&gram, &pairs, 2, 1.0, 0.1).unwrap();
        let rhs = 1.0 / (1.1 * 8.0);
        suite.check_bool(
            "xi-search-feasible",
            !res.floored && res.lhs <= rhs,
            "largest grid regularizer satisfies the bias condition",
        );
    }

    // estimator-oracle
    {
        let (arms, feats) = random_arms(&mut rng, 5, 3);
        let spec = KernelSpec::new(ArmKernel::Linear, TaskKernel::Ones).unwrap();
        let gram = spec.gram(&arms).unwrap();
        let mut summary = ObservationSummary::empty(5);
        for i in 0..5 {
            summary.counts[i] = rng.random_range(0..10);
            summary.means[i] = if summary.counts[i] > 0 { rng.random_range(-1.0..1.0) } else { 0.0 };
        }
        let n = summary.total();
        let est = fit(&gram, &summary, n, 0.2).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..5 {
            let want = oracle::explicit_ridge_predict(
                &feats,
                &summary.counts,
                &summary.means,
                n.max(1) as f64 * 0.2,
                &feats[i],
            );
            worst = worst.max((est.estimate_reward(i) - want).abs() / want.abs().max(1.0));
        }
        suite.check("estimator-oracle", 1e-8, worst, "kernelized ridge vs explicit ridge");
    }

    // estimator-merge: merged summaries fit identically to pooled samples
    {
        let (arms, _) = random_arms(&mut rng, 4, 3);
        let spec = KernelSpec::new(ArmKernel::Linear, TaskKernel::Ones).unwrap();
        let gram = spec.gram(&arms).unwrap();
        let mut pooled = ObservationSummary::empty(4);
        let mut parts = [ObservationSummary::empty(4), ObservationSummary::empty(4)];
        for (owner, part) in parts.iter_mut().enumerate() {
            for arm_idx in (owner..4).step_by(2) {
                for _ in 0..rng.random_range(1..6) {
                    let y: f64 = rng.random_range(-1.0..1.0);
                    part.record(arm_idx, y);
                    pooled.record(arm_idx, y);
                }
            }
        }
        let merged = parts[0].merge(&parts[1]).unwrap();
        let n = pooled.total();
        let a = fit(&gram, &merged, n, 0.3).unwrap();
        let b = fit(&gram, &pooled, n, 0.3).unwrap();
        suite.check(
            "estimator-merge",
            1e-12,
            (a.solved_weights - b.solved_weights).amax(),
            "merge-then-fit equals fit-on-pooled",
        );
    }

    // noise-monte-carlo
    {
        let inst = generate_instance(&InstanceConfig::paper_grid(3, 4, 4, 0.3)).unwrap();
        let mut stream = agent_rng(3, 1);
        let n = 100_000;
        let arm_idx = 5;
        let mean: f64 =
            (0..n).map(|_| sample(&inst, arm_idx, &mut stream)).sum::<f64>() / n as f64;
        let bound = 3.0 * inst.noise_std / (n as f64).sqrt();
        suite.check(
            "noise-monte-carlo",
            bound,
            (mean - inst.reward_mean(arm_idx)).abs(),
            "empirical mean within 3 sigma / sqrt(n)",
        );
    }

    // rounding-verification
    {
        let (arms, _) = random_arms(&mut rng, 4, 3);
        let spec = KernelSpec::new(ArmKernel::Linear, TaskKernel::Ones).unwrap();
        let gram = spec.gram(&arms).unwrap();
        let pairs = pairs_within(&[vec![0, 1, 2, 3]]);
        let lambda = Allocation::new(DVector::from_row_slice(&[0.4, 0.3, 0.2, 0.1])).unwrap();
        let counts = round_allocation(&gram, &pairs, &lambda, 57, 0.2, 0.1);
        let ok = counts
            .as_ref()
            .map(|c| c.counts.iter().sum::<u64>() == 57)
            .unwrap_or(false);
        suite.check_bool(
            "rounding-verification",
            ok,
            "counts sum exactly and pass the (1+eps) check",
        );
    }

    // rank-decomposition
    {
        let inst = generate_instance(
            &InstanceConfig::paper_grid(4, 5, 4, 0.3).with_regime(TaskRegime::Block),
        )
        .unwrap();
        let ranks = rank_decomposition(&inst).unwrap();
        suite.check_bool(
            "rank-decomposition",
            ranks.rank_composite <= ranks.rank_task * ranks.rank_arm,
            "rank(K) <= rank(K_Z) rank(K_X)",
        );
    }

    // information-gain closed form
    {
        let d = 3;
        let arms: Vec<TaskedArm> = (0..d)
            .map(|i| {
                let mut f = vec![0.0; d];
                f[i] = 1.0;
                TaskedArm::new(i, 0, i, DVector::from_row_slice(&f), 0)
            })
            .collect();
        let spec = KernelSpec::new(ArmKernel::Linear, TaskKernel::Ones).unwrap();
        let gram = spec.gram(&arms).unwrap();
        let xi = 0.2;
        let gain = max_information_gain(&gram, xi, &SolverOptions::default()).unwrap();
        let expected = d as f64 * (1.0 + 1.0 / (d as f64 * xi)).ln();
        suite.check(
            "information-gain-closed-form",
            1e-3,
            (gain.value - expected).abs() / expected,
            "log-det ascent vs orthonormal closed form",
        );
    }

    println!(
        "{} checks failed{}",
        suite.failures,
        if suite.failures == 0 { "; all invariants hold" } else { "" }
    );
    if suite.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
