//! Lasso on Gram statistics: minimizes `½‖y − Dθ‖² + λ‖θ‖₁` given
//! `DᵀD`, `Dᵀy` and `yᵀy`.
//!
//! Coordinate descent keeps the gradient `g = Dᵀy − DᵀDθ` up to date, so a
//! coordinate update costs one Gram column. Sweeps alternate between the
//! full coordinate set and the current active set, and stop once the KKT
//! conditions hold to the requested tolerance.

use nalgebra::DVector;

use crate::panel::QuadraticProblem;

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub lambda: f64,
    pub theta: DVector<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub max_kkt_violation: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LassoOptions {
    /// Absolute KKT tolerance on gradient coordinates.
    pub kkt_tol: f64,
    pub max_sweeps: usize,
}

impl LassoOptions {
    /// Tolerance scaled to the problem: `rel · max(λ_max, tiny)`.
    pub fn scaled(q: &QuadraticProblem, rel: f64, max_sweeps: usize) -> Self {
        LassoOptions { kkt_tol: rel * lambda_max(q).max(f64::MIN_POSITIVE), max_sweeps }
    }
}

/// Smallest penalty with an all-zero solution: `max_j |(Dᵀy)_j|`.
pub fn lambda_max(q: &QuadraticProblem) -> f64 {
    q.xty.amax()
}

/// `n` log-spaced values from `top` down to `ratio · top`.
pub fn log_grid(top: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![top];
    }
    let (hi, lo) = (top.ln(), (top * ratio).ln());
    (0..n).map(|k| (hi + (lo - hi) * k as f64 / (n - 1) as f64).exp()).collect()
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Largest violation of the optimality conditions at `theta`.
pub fn kkt_violation(q: &QuadraticProblem, theta: &DVector<f64>, lambda: f64) -> f64 {
    let g = &q.xty - &q.gram * theta;
    kkt_from_gradient(&g, theta, lambda)
}

fn kkt_from_gradient(g: &DVector<f64>, theta: &DVector<f64>, lambda: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (gj, tj) in g.iter().zip(theta.iter()) {
        let v = if *tj == 0.0 { (gj.abs() - lambda).max(0.0) } else { (gj - lambda * tj.signum()).abs() };
        worst = worst.max(v);
    }
    worst
}

pub fn solve(q: &QuadraticProblem, lambda: f64, warm: Option<&DVector<f64>>, opts: LassoOptions) -> LassoSolution {
    solve_with_null(q, lambda, warm, opts, &[])
}

/// `argmin_c Σ_j |θ_j + c·v_j|`, a weighted median of `−θ_j / v_j`.
///
/// Ties between two middle points resolve to the lower one, which zeroes a
/// coordinate.
fn penalty_shift(theta: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let mut pts: Vec<(f64, f64)> =
        theta.iter().zip(v.iter()).filter(|(_, vj)| **vj != 0.0).map(|(t, vj)| (-t / vj, vj.abs())).collect();
    if pts.is_empty() {
        return 0.0;
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let half = 0.5 * pts.iter().map(|p| p.1).sum::<f64>();
    let mut acc = 0.0;
    for (c, w) in &pts {
        acc += w;
        if acc >= half {
            return *c;
        }
    }
    pts[pts.len() - 1].0
}

/// Coordinate descent that also knows exact null directions of the design.
///
/// Moving along a direction `v` with `DᵀD v = 0` and `vᵀDᵀy = 0` changes
/// only the penalty, yet single-coordinate updates can only creep along it
/// because every coordinate of `v` is coupled to the others through the
/// Gram matrix. After each full sweep the iterate is moved to the exact
/// penalty minimizer along each `v`.
pub fn solve_with_null(
    q: &QuadraticProblem,
    lambda: f64,
    warm: Option<&DVector<f64>>,
    opts: LassoOptions,
    null: &[DVector<f64>],
) -> LassoSolution {
    let n = q.dim();
    let mut theta = warm.cloned().unwrap_or_else(|| DVector::zeros(n));
    let mut g = &q.xty - &q.gram * &theta;
    let diag: Vec<f64> = (0..n).map(|j| q.gram[(j, j)]).collect();

    let update = |j: usize, theta: &mut DVector<f64>, g: &mut DVector<f64>| -> f64 {
        let h = diag[j];
        let old = theta[j];
        let new = if h > 0.0 { soft_threshold(g[j] + h * old, lambda) / h } else { 0.0 };
        let delta = new - old;
        if delta != 0.0 {
            theta[j] = new;
            g.axpy(-delta, &q.gram.column(j), 1.0);
        }
        // change measured in gradient units
        delta.abs() * h
    };

    let mut sweeps = 0;
    let mut violation = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        for j in 0..n {
            update(j, &mut theta, &mut g);
        }
        sweeps += 1;
        if lambda > 0.0 {
            for v in null {
                let c = penalty_shift(&theta, v);
                if c != 0.0 {
                    theta.axpy(c, v, 1.0);
                    // exact zeros where the median landed
                    for (t, vj) in theta.iter_mut().zip(v.iter()) {
                        if *vj != 0.0 && t.abs() <= 1e-15 * c.abs() {
                            *t = 0.0;
                        }
                    }
                }
            }
        }
        g = &q.xty - &q.gram * &theta;
        violation = kkt_from_gradient(&g, &theta, lambda);
        if violation <= opts.kkt_tol {
            break;
        }
        let active: Vec<usize> = (0..n).filter(|&j| theta[j] != 0.0).collect();
        while sweeps < opts.max_sweeps {
            let mut change: f64 = 0.0;
            for &j in &active {
                change = change.max(update(j, &mut theta, &mut g));
            }
            sweeps += 1;
            if change <= 0.1 * opts.kkt_tol {
                break;
            }
        }
    }
    LassoSolution { lambda, theta, sweeps, converged: violation <= opts.kkt_tol, max_kkt_violation: violation }
}

/// Solutions along a decreasing penalty sequence with warm starts.
pub fn path(q: &QuadraticProblem, lambdas: &[f64], opts: LassoOptions) -> Vec<LassoSolution> {
    path_with_null(q, lambdas, opts, &[])
}

pub fn path_with_null(q: &QuadraticProblem, lambdas: &[f64], opts: LassoOptions, null: &[DVector<f64>]) -> Vec<LassoSolution> {
    let mut out: Vec<LassoSolution> = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let warm = out.last().map(|s| s.theta.clone());
        out.push(solve_with_null(q, lam, warm.as_ref(), opts, null));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standard_normal_matrix;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn problem(rows: usize, cols: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>, QuadraticProblem) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let d = standard_normal_matrix(&mut rng, rows, cols);
        let y = DVector::from_column_slice(standard_normal_matrix(&mut rng, rows, 1).as_slice());
        let q = QuadraticProblem::from_design(&d, &y);
        (d, y, q)
    }

    #[test]
    fn above_lambda_max_is_zero() {
        let (_, _, q) = problem(30, 8, 1);
        let lm = lambda_max(&q);
        let sol = solve(&q, lm, None, LassoOptions::scaled(&q, 1e-10, 1000));
        assert!(sol.theta.iter().all(|v| *v == 0.0));
        let sol = solve(&q, 2.0 * lm, None, LassoOptions::scaled(&q, 1e-10, 1000));
        assert!(sol.theta.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_penalty_is_least_squares() {
        let (d, y, q) = problem(40, 6, 2);
        let sol = solve(&q, 0.0, None, LassoOptions::scaled(&q, 1e-12, 100_000));
        let ls = (d.transpose() * &d).try_inverse().unwrap() * d.transpose() * &y;
        assert!((sol.theta - ls).amax() < 1e-8);
    }

    #[test]
    fn orthogonal_design_soft_thresholds() {
        let d = DMatrix::<f64>::identity(4, 4) * 2.0;
        let y = DVector::from_vec(vec![3.0, -1.0, 0.5, -4.0]);
        let q = QuadraticProblem::from_design(&d, &y);
        let lam = 3.0;
        let sol = solve(&q, lam, None, LassoOptions::scaled(&q, 1e-12, 100));
        // per coordinate: minimize ½(y − 2θ)² + λ|θ| → θ = S(2y, λ)/4
        for j in 0..4 {
            let expected = soft_threshold(2.0 * y[j], lam) / 4.0;
            assert!((sol.theta[j] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn path_satisfies_kkt() {
        let (_, _, q) = problem(50, 12, 3);
        let grid = log_grid(lambda_max(&q), 20, 1e-3);
        for sol in path(&q, &grid, LassoOptions::scaled(&q, 1e-10, 10_000)) {
            assert!(sol.converged);
            assert!(kkt_violation(&q, &sol.theta, sol.lambda) < 1e-6);
        }
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(10.0, 50, 1e-4);
        assert_eq!(g.len(), 50);
        assert!((g[0] - 10.0).abs() < 1e-12);
        assert!((g[49] - 1e-3).abs() < 1e-15);
    }
}
