//! Explicit-feature reference implementations.
//!
//! Every quantity the kernelized code computes through Gram-matrix solves is
//! recomputed here directly in feature space with dense factorizations. These
//! functions are deliberately independent of [`crate::kernel`] and
//! [`crate::design`]; the verification suite and the test oracles compare the
//! two routes against each other.

use nalgebra::{DMatrix, DVector};

/// `reg I + sum_m w_m phi_m phi_m'` in feature space.
pub fn design_matrix(features: &[DVector<f64>], weights: &DVector<f64>, reg: f64) -> DMatrix<f64> {
    let d = features[0].len();
    let mut a = DMatrix::from_diagonal_element(d, d, reg);
    for (m, phi) in features.iter().enumerate() {
        if weights[m] == 0.0 {
            continue;
        }
        a += weights[m] * phi * phi.transpose();
    }
    a
}

/// `(phi_i - phi_j)' (reg I + sum w phi phi')^{-1} (phi_i - phi_j)` via a
/// dense LU solve.
pub fn explicit_pair_norm_sq(
    features: &[DVector<f64>],
    weights: &DVector<f64>,
    reg: f64,
    i: usize,
    j: usize,
) -> f64 {
    let a = design_matrix(features, weights, reg);
    let diff = &features[i] - &features[j];
    let solved = a.lu().solve(&diff).expect("dense solve in oracle");
    diff.dot(&solved)
}

/// `(phi_i - phi_j)' A^{-1} phi_x` for each arm x; the feature-space gradient
/// factor of the min-max objective.
pub fn explicit_pair_cross(
    features: &[DVector<f64>],
    weights: &DVector<f64>,
    reg: f64,
    i: usize,
    j: usize,
) -> DVector<f64> {
    let a = design_matrix(features, weights, reg);
    let diff = &features[i] - &features[j];
    let solved = a.lu().solve(&diff).expect("dense solve in oracle");
    DVector::from_iterator(features.len(), features.iter().map(|phi| solved.dot(phi)))
}

/// `[sqrt(w_i w_j) phi_i' phi_j]`, the Phi Phi' route to the weighted Gram.
pub fn weighted_gram(features: &[DVector<f64>], weights: &DVector<f64>) -> DMatrix<f64> {
    let m = features.len();
    DMatrix::from_fn(m, m, |i, j| {
        (weights[i] * weights[j]).sqrt() * features[i].dot(&features[j])
    })
}

/// Explicit ridge-regression prediction at a query feature:
/// `phi_q' (reg I + sum_m N_m phi_m phi_m')^{-1} (sum_m N_m phi_m ybar_m)`.
pub fn explicit_ridge_predict(
    features: &[DVector<f64>],
    counts: &[u64],
    means: &[f64],
    reg: f64,
    query: &DVector<f64>,
) -> f64 {
    let d = features[0].len();
    let mut a = DMatrix::from_diagonal_element(d, d, reg);
    let mut b = DVector::zeros(d);
    for (m, phi) in features.iter().enumerate() {
        let n = counts[m] as f64;
        if n == 0.0 {
            continue;
        }
        a += n * phi * phi.transpose();
        b += n * means[m] * phi;
    }
    let theta = a.lu().solve(&b).expect("dense solve in oracle");
    query.dot(&theta)
}

/// Euclidean projection onto the probability simplex by brute-force
/// enumeration of active sets: for every support subset, solve the equality-
/// constrained projection in closed form and keep the feasible candidate
/// closest to the input.
pub fn simplex_projection_enumeration(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    assert!(n <= 20, "active-set enumeration is exponential; keep n small");
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let s: f64 = support.iter().map(|&i| v[i]).sum();
        let tau = (s - 1.0) / support.len() as f64;
        let mut x = DVector::zeros(n);
        let mut feasible = true;
        for &i in &support {
            let xi = v[i] - tau;
            if xi < -1e-12 {
                feasible = false;
                break;
            }
            x[i] = xi.max(0.0);
        }
        if !feasible {
            continue;
        }
        let dist = (&x - v).norm_squared();
        if best.as_ref().is_none_or(|(d, _)| dist < *d - 1e-15) {
            best = Some((dist, x));
        }
    }
    best.expect("at least the full support is feasible").1
}

/// Min-max pair norm over designs supported on two arms, on a weight grid of
/// the given resolution. Valid as an optimum oracle only when the true design
/// has (close to) two-point support; callers verify that post hoc.
pub fn two_support_grid_min_max(
    features: &[DVector<f64>],
    pairs: &[(usize, usize)],
    reg: f64,
    resolution: usize,
) -> f64 {
    let m = features.len();
    let mut best = f64::INFINITY;
    for a in 0..m {
        for b in (a + 1)..m {
            for step in 0..=resolution {
                let wa = step as f64 / resolution as f64;
                let mut w = DVector::zeros(m);
                w[a] = wa;
                w[b] = 1.0 - wa;
                let val = pairs
                    .iter()
                    .map(|&(i, j)| explicit_pair_norm_sq(features, &w, reg, i, j))
                    .fold(f64::NEG_INFINITY, f64::max);
                if val < best {
                    best = val;
                }
            }
        }
    }
    best
}

/// Min-max pair norm over the full simplex on a compositional grid: all
/// weight vectors with entries `k_i / resolution`, `sum k_i = resolution`.
/// Exponential in the arm count; for small instances only.
pub fn full_grid_min_max(
    features: &[DVector<f64>],
    pairs: &[(usize, usize)],
    weighted_pairs: Option<&[f64]>,
    reg: f64,
    resolution: usize,
) -> f64 {
    let m = features.len();
    let mut composition = vec![0usize; m];
    let mut best = f64::INFINITY;
    fn recurse(
        idx: usize,
        remaining: usize,
        composition: &mut Vec<usize>,
        features: &[DVector<f64>],
        pairs: &[(usize, usize)],
        coeffs: Option<&[f64]>,
        reg: f64,
        resolution: usize,
        best: &mut f64,
    ) {
        if idx + 1 == composition.len() {
            composition[idx] = remaining;
            let w = DVector::from_iterator(
                composition.len(),
                composition.iter().map(|&k| k as f64 / resolution as f64),
            );
            let val = pairs
                .iter()
                .enumerate()
                .map(|(p, &(i, j))| {
                    let c = coeffs.map_or(1.0, |cs| cs[p]);
                    c * explicit_pair_norm_sq(features, &w, reg, i, j)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if val < *best {
                *best = val;
            }
            return;
        }
        for k in 0..=remaining {
            composition[idx] = k;
            recurse(
                idx + 1,
                remaining - k,
                composition,
                features,
                pairs,
                coeffs,
                reg,
                resolution,
                best,
            );
        }
    }
    recurse(
        0,
        resolution,
        &mut composition,
        features,
        pairs,
        weighted_pairs,
        reg,
        resolution,
        &mut best,
    );
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn projection_enumeration_on_known_cases() {
        let p = simplex_projection_enumeration(&DVector::from_row_slice(&[2.0, 0.0]));
        assert_relative_eq!(p, DVector::from_row_slice(&[1.0, 0.0]), epsilon = 1e-12);
        let already = DVector::from_row_slice(&[0.25, 0.25, 0.5]);
        let p = simplex_projection_enumeration(&already);
        assert_relative_eq!(p, already, epsilon = 1e-12);
    }

    #[test]
    fn two_orthonormal_arms_closed_form() {
        // min over w of 1/(xi+w) + 1/(xi+1-w) is at w = 1/2: value 2/(xi+1/2)
        let feats = vec![
            DVector::from_row_slice(&[1.0, 0.0]),
            DVector::from_row_slice(&[0.0, 1.0]),
        ];
        let xi = 0.1;
        let got = two_support_grid_min_max(&feats, &[(0, 1)], xi, 200);
        assert_relative_eq!(got, 2.0 / (xi + 0.5), max_relative = 1e-4);
    }
}
