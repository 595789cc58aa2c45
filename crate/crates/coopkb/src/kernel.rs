//! Composite kernel evaluation and kernel-trick quantities.
//!
//! Everything downstream works on scalar kernel values `K(x̃, x̃')`, the
//! weighted Gram matrix `[sqrt(w_i w_j) K(x̃_i, x̃_j)]`, and weighted kernel
//! vectors `[sqrt(w_i) K(q, x̃_i)]`. Regularized pair norms in the implicit
//! feature space reduce to finite solves through the identity
//!
//! ```text
//! ||phi_i - phi_j||^2_{(c I + Phi_w' Phi_w)^-1}
//!   = (1/c) [ (K_ii + K_jj - 2 K_ij)
//!             - ||k_w(i) - k_w(j)||^2_{(c I + K_w)^-1} ]
//! ```
//!
//! which holds for any nonnegative weights `w` and regularizer `c > 0`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One tasked arm: an (arm feature, task key) pair with its global index.
///
/// Global indices flatten the per-agent numbering: `global_index = agent * n
/// + local_index`, with `n` the per-agent arm count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskedArm {
    pub global_index: usize,
    pub agent: usize,
    pub local_index: usize,
    pub arm_feature: DVector<f64>,
    /// Opaque task key; the task kernel is evaluated on key pairs. Defaults
    /// to the agent id in generated instances.
    pub task_key: usize,
}

impl TaskedArm {
    pub fn new(
        global_index: usize,
        agent: usize,
        local_index: usize,
        arm_feature: DVector<f64>,
        task_key: usize,
    ) -> Self {
        Self {
            global_index,
            agent,
            local_index,
            arm_feature,
            task_key,
        }
    }
}

/// Checks the `global_index = agent * n + local_index` flattening and uniform
/// feature dimension over a full arm list.
pub fn validate_arms(arms: &[TaskedArm], n_per_agent: usize) -> Result<()> {
    let Some(first) = arms.first() else {
        return Err(Error::Config("arm list is empty".into()));
    };
    let dim = first.arm_feature.len();
    for (pos, arm) in arms.iter().enumerate() {
        if arm.arm_feature.len() != dim {
            return Err(Error::Config(format!(
                "arm {} has feature dimension {}, expected {}",
                arm.global_index,
                arm.arm_feature.len(),
                dim
            )));
        }
        if arm.global_index != pos || arm.global_index != arm.agent * n_per_agent + arm.local_index
        {
            return Err(Error::Config(format!(
                "arm at position {pos} has inconsistent indices (global {}, agent {}, local {})",
                arm.global_index, arm.agent, arm.local_index
            )));
        }
    }
    Ok(())
}

/// Arm-feature kernel `K_X`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ArmKernel {
    /// Dot product of the arm features.
    Linear,
    /// `exp(-||x - x'||^2 / (2 bandwidth^2))`.
    Rbf { bandwidth: f64 },
    /// Explicit Gram matrix indexed by global arm index.
    Table { gram: DMatrix<f64> },
}

/// Task-key kernel `K_Z`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TaskKernel {
    /// Constant 1: fully collaborative, `K = K_X`.
    Ones,
    /// Kronecker delta on task keys: fully distinct tasks.
    Identity,
    /// Explicit Gram matrix indexed by task key.
    Table { gram: DMatrix<f64> },
}

/// A product composite kernel with an optional explicit feature map.
///
/// The explicit map, when present, gives `phi(x̃_i)` per global index and must
/// reproduce the composite kernel: `K(x̃_i, x̃_j) = phi_i' phi_j`. It exists
/// for oracle testing and for instances (like the experiment family) where a
/// finite feature map is known.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpec {
    pub arm_kernel: ArmKernel,
    pub task_kernel: TaskKernel,
    pub explicit_features: Option<Vec<DVector<f64>>>,
}

impl KernelSpec {
    pub fn new(arm_kernel: ArmKernel, task_kernel: TaskKernel) -> Result<Self> {
        if let ArmKernel::Rbf { bandwidth } = &arm_kernel {
            if !(*bandwidth > 0.0) || !bandwidth.is_finite() {
                return Err(Error::Config(format!("rbf bandwidth must be positive, got {bandwidth}")));
            }
        }
        if let ArmKernel::Table { gram } = &arm_kernel {
            check_table_symmetric(gram, "arm kernel table")?;
        }
        if let TaskKernel::Table { gram } = &task_kernel {
            check_table_symmetric(gram, "task kernel table")?;
        }
        Ok(Self {
            arm_kernel,
            task_kernel,
            explicit_features: None,
        })
    }

    pub fn with_explicit_features(mut self, features: Vec<DVector<f64>>) -> Self {
        self.explicit_features = Some(features);
        self
    }

    fn arm_value(&self, a: &TaskedArm, b: &TaskedArm) -> Result<f64> {
        match &self.arm_kernel {
            ArmKernel::Linear => Ok(a.arm_feature.dot(&b.arm_feature)),
            ArmKernel::Rbf { bandwidth } => {
                let d2 = (&a.arm_feature - &b.arm_feature).norm_squared();
                Ok((-d2 / (2.0 * bandwidth * bandwidth)).exp())
            }
            ArmKernel::Table { gram } => {
                let (i, j) = (a.global_index, b.global_index);
                if i >= gram.nrows() || j >= gram.ncols() {
                    return Err(Error::Config(format!(
                        "arm kernel table is {}x{} but was queried at ({i}, {j})",
                        gram.nrows(),
                        gram.ncols()
                    )));
                }
                Ok(gram[(i, j)])
            }
        }
    }

    fn task_value(&self, a: usize, b: usize) -> Result<f64> {
        match &self.task_kernel {
            TaskKernel::Ones => Ok(1.0),
            TaskKernel::Identity => Ok(if a == b { 1.0 } else { 0.0 }),
            TaskKernel::Table { gram } => {
                if a >= gram.nrows() || b >= gram.ncols() {
                    return Err(Error::Config(format!(
                        "task kernel table is {}x{} but was queried at ({a}, {b})",
                        gram.nrows(),
                        gram.ncols()
                    )));
                }
                Ok(gram[(a, b)])
            }
        }
    }

    /// Composite kernel value `K_Z(z_a, z_b) * K_X(x_a, x_b)`.
    pub fn eval(&self, a: &TaskedArm, b: &TaskedArm) -> Result<f64> {
        if a.arm_feature.len() != b.arm_feature.len() {
            return Err(Error::Config(format!(
                "arm feature dimensions differ: {} vs {}",
                a.arm_feature.len(),
                b.arm_feature.len()
            )));
        }
        Ok(self.task_value(a.task_key, b.task_key)? * self.arm_value(a, b)?)
    }

    /// Plain (unweighted) Gram matrix over an arm list.
    pub fn gram(&self, arms: &[TaskedArm]) -> Result<DMatrix<f64>> {
        let m = arms.len();
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.eval(&arms[i], &arms[j])?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// Gram over the arm-feature kernel alone (task factor ignored).
    pub fn arm_gram(&self, arms: &[TaskedArm]) -> Result<DMatrix<f64>> {
        let m = arms.len();
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.arm_value(&arms[i], &arms[j])?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// Gram over the task kernel alone, indexed by distinct task keys `0..v`.
    pub fn task_gram(&self, num_tasks: usize) -> Result<DMatrix<f64>> {
        let mut g = DMatrix::zeros(num_tasks, num_tasks);
        for a in 0..num_tasks {
            for b in a..num_tasks {
                let v = self.task_value(a, b)?;
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        Ok(g)
    }
}

fn check_table_symmetric(gram: &DMatrix<f64>, what: &str) -> Result<()> {
    if gram.nrows() != gram.ncols() {
        return Err(Error::Config(format!(
            "{what} must be square, got {}x{}",
            gram.nrows(),
            gram.ncols()
        )));
    }
    let scale = gram.amax().max(1.0);
    for i in 0..gram.nrows() {
        for j in (i + 1)..gram.ncols() {
            if (gram[(i, j)] - gram[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::Config(format!(
                    "{what} is not symmetric at ({i}, {j}): {} vs {}",
                    gram[(i, j)],
                    gram[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Checks a symmetric matrix for positive semidefiniteness up to the standard
/// slack: smallest eigenvalue at least `-1e-9 * max(trace, 1)`.
pub fn check_psd(matrix: &DMatrix<f64>, what: &str) -> Result<()> {
    let sym = nalgebra::SymmetricEigen::new(matrix.clone());
    let min_eig = sym.eigenvalues.min();
    let slack = 1e-9 * matrix.trace().abs().max(1.0);
    if min_eig < -slack {
        return Err(Error::Config(format!(
            "{what} is not PSD: minimum eigenvalue {min_eig:.3e} below slack {slack:.3e}"
        )));
    }
    Ok(())
}

/// A Gram matrix with entries `sqrt(w_i w_j) K(x̃_i, x̃_j)`.
///
/// Weights are counts or allocation probabilities; zero-weight rows and
/// columns stay in place as exact zeros so indices never shift.
#[derive(Debug, Clone)]
pub struct WeightedGram {
    pub weights: DVector<f64>,
    pub matrix: DMatrix<f64>,
}

/// Scales a plain Gram into the weighted form `D K D`, `D = diag(sqrt(w))`.
pub fn scale_gram(gram: &DMatrix<f64>, weights: &DVector<f64>) -> Result<DMatrix<f64>> {
    let m = gram.nrows();
    if weights.len() != m {
        return Err(Error::Precondition(format!(
            "weight vector has length {}, expected {m}",
            weights.len()
        )));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::Precondition("weights must be nonnegative and finite".into()));
    }
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        if sqrt_w[i] == 0.0 {
            continue;
        }
        for j in 0..m {
            out[(i, j)] = sqrt_w[i] * sqrt_w[j] * gram[(i, j)];
        }
    }
    Ok(out)
}

/// `[sqrt(w_i w_j) K(x̃_i, x̃_j)]` over a full arm list.
pub fn build_weighted_gram(
    spec: &KernelSpec,
    arms: &[TaskedArm],
    weights: &DVector<f64>,
) -> Result<WeightedGram> {
    let gram = spec.gram(arms)?;
    let matrix = scale_gram(&gram, weights)?;
    Ok(WeightedGram {
        weights: weights.clone(),
        matrix,
    })
}

/// `[sqrt(w_i) K(query, x̃_i)]_i`.
pub fn weighted_kernel_vector(
    spec: &KernelSpec,
    arms: &[TaskedArm],
    weights: &DVector<f64>,
    query: &TaskedArm,
) -> Result<DVector<f64>> {
    if weights.len() != arms.len() {
        return Err(Error::Precondition(format!(
            "weight vector has length {}, expected {}",
            weights.len(),
            arms.len()
        )));
    }
    let mut out = DVector::zeros(arms.len());
    for (i, arm) in arms.iter().enumerate() {
        out[i] = weights[i].sqrt() * spec.eval(query, arm)?;
    }
    Ok(out)
}

/// SPD solve wrapper: factors once, retries once with a fixed jitter of
/// `1e-12 * trace / m` on the diagonal, then errors. Explicit inverses are
/// never formed.
pub struct SpdSolver {
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl SpdSolver {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let m = matrix.nrows();
        match Cholesky::new(matrix.clone()) {
            Some(chol) => Ok(Self::from_chol(chol)),
            None => {
                let jitter = 1e-12 * matrix.trace().abs().max(1.0) / m.max(1) as f64;
                let mut jittered = matrix;
                for i in 0..m {
                    jittered[(i, i)] += jitter;
                }
                match Cholesky::new(jittered) {
                    Some(chol) => Ok(Self::from_chol(chol)),
                    None => Err(Error::Numerical(
                        "Cholesky factorization failed even after jitter".into(),
                    )),
                }
            }
        }
    }

    fn from_chol(chol: Cholesky<f64, Dyn>) -> Self {
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Self { chol, log_det }
    }

    pub fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn solve_mat(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    /// log det of the factored matrix.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }
}

/// Regularized squared pair norm in the implicit feature space,
/// `||phi_i - phi_j||^2` under `(reg I + sum_m w_m phi_m phi_m')^{-1}`,
/// computed purely through kernel calls.
///
/// Valid for any nonnegative weights (probabilities or counts) and `reg > 0`.
pub fn regularized_pair_norm_sq(
    spec: &KernelSpec,
    arms: &[TaskedArm],
    weights: &DVector<f64>,
    reg: f64,
    i: usize,
    j: usize,
) -> Result<f64> {
    let gram = spec.gram(arms)?;
    let ctx = PairNormContext::new(&gram, weights, reg)?;
    Ok(ctx.pair_norm_sq(i, j))
}

/// Shared context for pair norms, objective gradients, and log-determinants
/// at a fixed weighting.
///
/// Holds `S = K D (reg I + D K D)^{-1} D K` so that every pair norm and every
/// gradient entry is a constant-time lookup afterwards:
///
/// ```text
/// ||phi_i - phi_j||^2_{A^{-1}} = (1/reg) [(K_ii + K_jj - 2 K_ij) - (S_ii + S_jj - 2 S_ij)]
/// (phi_i - phi_j)' A^{-1} phi_x = (1/reg) [K_ix - K_jx - S_ix + S_jx]
/// ```
pub struct PairNormContext<'a> {
    gram: &'a DMatrix<f64>,
    cross: DMatrix<f64>,
    reg: f64,
    log_det_reg_plus_kw: f64,
    m: usize,
}

impl<'a> PairNormContext<'a> {
    pub fn new(gram: &'a DMatrix<f64>, weights: &DVector<f64>, reg: f64) -> Result<Self> {
        if !(reg > 0.0) || !reg.is_finite() {
            return Err(Error::Precondition(format!("regularizer must be positive, got {reg}")));
        }
        let m = gram.nrows();
        let kw = scale_gram(gram, weights)?;
        let mut reg_kw = kw;
        for i in 0..m {
            reg_kw[(i, i)] += reg;
        }
        let solver = SpdSolver::new(reg_kw)?;
        // C = D K (rows of the plain Gram scaled by sqrt(w))
        let mut c = DMatrix::zeros(m, m);
        for i in 0..m {
            let s = weights[i].sqrt();
            if s == 0.0 {
                continue;
            }
            for j in 0..m {
                c[(i, j)] = s * gram[(i, j)];
            }
        }
        let x = solver.solve_mat(&c);
        let cross = c.transpose() * x;
        Ok(Self {
            gram,
            cross,
            reg,
            log_det_reg_plus_kw: solver.log_det(),
            m,
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn pair_norm_sq(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let k = self.gram[(i, i)] + self.gram[(j, j)] - 2.0 * self.gram[(i, j)];
        let s = self.cross[(i, i)] + self.cross[(j, j)] - 2.0 * self.cross[(i, j)];
        ((k - s) / self.reg).max(0.0)
    }

    /// `||phi_i||^2` under the same inverse; the diagonal case of the identity.
    pub fn point_norm_sq(&self, i: usize) -> f64 {
        ((self.gram[(i, i)] - self.cross[(i, i)]) / self.reg).max(0.0)
    }

    /// `(phi_i - phi_j)' A^{-1} phi_x` for every x, as one vector.
    pub fn pair_cross_row(&self, i: usize, j: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for x in 0..self.m {
            out[x] = (self.gram[(i, x)] - self.gram[(j, x)] - self.cross[(i, x)]
                + self.cross[(j, x)])
                / self.reg;
        }
        out
    }

    /// `log det(I + reg^{-1} K_w)`.
    pub fn log_det_information(&self) -> f64 {
        self.log_det_reg_plus_kw - self.m as f64 * self.reg.ln()
    }
}
