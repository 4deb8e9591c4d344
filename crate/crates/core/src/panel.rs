//! Aligned regression panels: the (X_t, Z_t, Y_t) triples an estimator sees.

use nalgebra::{DMatrix, DVector};

use crate::error::{BlinError, Result};
use crate::linalg::pinv_symmetric;
use crate::model::{bilinear_mean, blin_mean, InfluencePair};
use crate::series::{LagSpec, TensorSeries};

/// Lagged regressors and responses for a set of usable time points.
///
/// `xs[k]` feeds `A` (sum of the last `p_a` slices), `zs[k]` feeds `B`
/// (sum of the last `p_b` slices) and `ys[k]` is the response at
/// `times[k]`.
#[derive(Debug, Clone)]
pub struct Panel {
    pub s: usize,
    pub l: usize,
    pub xs: Vec<DMatrix<f64>>,
    pub zs: Vec<DMatrix<f64>>,
    pub ys: Vec<DMatrix<f64>>,
    pub times: Vec<usize>,
    /// Whether `xs[k] == zs[k]` for every `k` by construction.
    pub shared_regressors: bool,
}

impl Panel {
    pub fn from_series(series: &TensorSeries, lags: &LagSpec) -> Result<Self> {
        Panel::from_series_starting(series, lags, lags.max())
    }

    /// Panel whose first response is at `start` (at least the maximum lag).
    /// Used to align panels with different lag depths on the same rows.
    pub fn from_series_starting(series: &TensorSeries, lags: &LagSpec, start: usize) -> Result<Self> {
        let (s, l) = series.require_two_mode()?;
        if lags.per_mode().len() != 2 {
            return Err(BlinError::InvalidConfig(format!(
                "bipartite model needs two lags, got {lags}"
            )));
        }
        let horizon = series.horizon();
        if horizon <= lags.max() {
            return Err(BlinError::InsufficientData { horizon, required: lags.max() });
        }
        if start < lags.max() || start >= horizon {
            return Err(BlinError::IndexOutOfRange { t: start, earliest: lags.max() });
        }
        let shared = lags.shared_regressor();
        let mut panel = Panel {
            s,
            l,
            xs: Vec::with_capacity(horizon - start),
            zs: Vec::with_capacity(horizon - start),
            ys: Vec::with_capacity(horizon - start),
            times: Vec::with_capacity(horizon - start),
            shared_regressors: shared,
        };
        for t in start..horizon {
            let x = series.lag_sum(lags.p_a(), t)?;
            let z = if shared { x.clone() } else { series.lag_sum(lags.p_b(), t)? };
            panel.xs.push(x);
            panel.zs.push(z);
            panel.ys.push(series.matrix(t));
            panel.times.push(t);
        }
        Ok(panel)
    }

    /// Panel from explicit regressors, e.g. i.i.d. designs that do not come
    /// from a series' own history.
    pub fn from_parts(xs: Vec<DMatrix<f64>>, zs: Vec<DMatrix<f64>>, ys: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = ys.first().ok_or(BlinError::InsufficientData { horizon: 0, required: 0 })?;
        let (s, l) = first.shape();
        if xs.len() != ys.len() || zs.len() != ys.len() {
            return Err(BlinError::Shape("regressor and response counts differ".into()));
        }
        if xs.iter().chain(&zs).chain(&ys).any(|m| m.shape() != (s, l)) {
            return Err(BlinError::Shape("inconsistent slice shapes".into()));
        }
        let shared = xs.iter().zip(&zs).all(|(x, z)| x == z);
        let times = (0..ys.len()).collect();
        Ok(Panel { s, l, xs, zs, ys, times, shared_regressors: shared })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// Rows at the given positions (not time indices).
    pub fn subset(&self, positions: &[usize]) -> Panel {
        Panel {
            s: self.s,
            l: self.l,
            xs: positions.iter().map(|&k| self.xs[k].clone()).collect(),
            zs: positions.iter().map(|&k| self.zs[k].clone()).collect(),
            ys: positions.iter().map(|&k| self.ys[k].clone()).collect(),
            times: positions.iter().map(|&k| self.times[k]).collect(),
            shared_regressors: self.shared_regressors,
        }
    }

    pub fn yty(&self) -> f64 {
        self.ys.iter().map(|y| y.norm_squared()).sum()
    }

    pub fn n_params(&self) -> usize {
        self.s * self.s + self.l * self.l
    }

    /// The diagonal shift `(+I, −I)` in `[vec(Aᵀ); vec(B)]` when the two
    /// networks share a regressor; it leaves every fitted value unchanged.
    pub fn null_directions(&self) -> Vec<DVector<f64>> {
        if !self.shared_regressors {
            return Vec::new();
        }
        let (s, l) = (self.s, self.l);
        let mut v = DVector::zeros(self.n_params());
        for i in 0..s {
            v[i * s + i] = 1.0;
        }
        for j in 0..l {
            v[s * s + j * l + j] = -1.0;
        }
        vec![v]
    }

    /// Dense stacked design and response; refuses designs above `budget`
    /// entries.
    pub fn design(&self, budget: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let (s, l) = (self.s, self.l);
        let rows = s * l * self.len();
        let cols = self.n_params();
        let elements = rows.saturating_mul(cols);
        if elements > budget {
            return Err(BlinError::BudgetExceeded { elements, budget });
        }
        let mut d = DMatrix::zeros(rows, cols);
        let mut y = DVector::zeros(rows);
        for (k, ((x, z), yt)) in self.xs.iter().zip(&self.zs).zip(&self.ys).enumerate() {
            let base = k * s * l;
            for j in 0..l {
                for i in 0..s {
                    let r = base + i + s * j;
                    y[r] = yt[(i, j)];
                    // (Xᵀ ⊗ I_S) vec(Aᵀ): column i + S·m carries X[m, j]
                    for m in 0..s {
                        d[(r, i + s * m)] = x[(m, j)];
                    }
                    // (I_L ⊗ Z) vec(B): column S² + m + L·j carries Z[i, m]
                    for m in 0..l {
                        d[(r, s * s + m + l * j)] = z[(i, m)];
                    }
                }
            }
        }
        Ok((d, y))
    }

    /// Normal-equation statistics of the stacked linear model, built from
    /// moment matrices without forming the design.
    pub fn quadratic(&self) -> QuadraticProblem {
        let (s, l) = (self.s, self.l);
        let mut xxt = DMatrix::zeros(s, s);
        let mut ztz = DMatrix::zeros(l, l);
        let mut cross = DMatrix::zeros(s * s, l * l);
        let mut yxt = DMatrix::zeros(s, s);
        let mut zty = DMatrix::zeros(l, l);
        let mut yty = 0.0;
        for k in 0..self.len() {
            let (x, z, y) = (&self.xs[k], &self.zs[k], &self.ys[k]);
            xxt.gemm(1.0, x, &x.transpose(), 1.0);
            ztz.gemm(1.0, &z.transpose(), z, 1.0);
            cross += x.kronecker(z);
            yxt.gemm(1.0, y, &x.transpose(), 1.0);
            zty.gemm(1.0, &z.transpose(), y, 1.0);
            yty += y.norm_squared();
        }
        let mut q = assemble(s, l, &xxt, &ztz, &cross, &yxt, &zty, yty);
        q.rows = self.len() * s * l;
        q
    }

    /// Contribution of the single row block at position `k`.
    pub fn quadratic_at(&self, k: usize) -> QuadraticProblem {
        let (s, l) = (self.s, self.l);
        let (x, z, y) = (&self.xs[k], &self.zs[k], &self.ys[k]);
        assemble(
            s,
            l,
            &(x * x.transpose()),
            &(z.transpose() * z),
            &x.kronecker(z),
            &(y * x.transpose()),
            &(z.transpose() * y),
            y.norm_squared(),
        )
    }

    pub fn fitted_blin(&self, pair: &InfluencePair) -> Result<Vec<DMatrix<f64>>> {
        self.xs.iter().zip(&self.zs).map(|(x, z)| blin_mean(pair, x, z)).collect()
    }

    pub fn fitted_bilinear(&self, pair: &InfluencePair) -> Result<Vec<DMatrix<f64>>> {
        self.xs.iter().map(|x| bilinear_mean(pair, x)).collect()
    }

    pub fn rss(&self, fitted: &[DMatrix<f64>]) -> f64 {
        self.ys.iter().zip(fitted).map(|(y, f)| (y - f).norm_squared()).sum()
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    s: usize,
    l: usize,
    xxt: &DMatrix<f64>,
    ztz: &DMatrix<f64>,
    cross: &DMatrix<f64>,
    yxt: &DMatrix<f64>,
    zty: &DMatrix<f64>,
    yty: f64,
) -> QuadraticProblem {
    let n = s * s + l * l;
    let mut gram = DMatrix::zeros(n, n);
    for a in 0..s {
        for b in 0..s {
            let v = xxt[(a, b)];
            for i in 0..s {
                gram[(i + s * a, i + s * b)] = v;
            }
        }
    }
    for a in 0..l {
        for b in 0..l {
            let v = ztz[(a, b)];
            for j in 0..l {
                gram[(s * s + a + l * j, s * s + b + l * j)] = v;
            }
        }
    }
    gram.view_mut((0, s * s), (s * s, l * l)).copy_from(cross);
    gram.view_mut((s * s, 0), (l * l, s * s)).copy_from(&cross.transpose());
    let xty = DVector::from_iterator(n, yxt.iter().chain(zty.iter()).cloned());
    QuadraticProblem { gram, xty, yty, rows: s * l }
}


/// `½`-free least-squares statistics: `‖y − Dθ‖² = yty − 2θᵀxty + θᵀ gram θ`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
    /// Number of scalar observations summarized.
    pub rows: usize,
}

impl QuadraticProblem {
    pub fn zeros(n: usize) -> Self {
        QuadraticProblem { gram: DMatrix::zeros(n, n), xty: DVector::zeros(n), yty: 0.0, rows: 0 }
    }

    pub fn from_design(d: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        QuadraticProblem { gram: d.tr_mul(d), xty: d.tr_mul(y), yty: y.norm_squared(), rows: d.nrows() }
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }

    pub fn add_assign(&mut self, other: &QuadraticProblem) {
        self.gram += &other.gram;
        self.xty += &other.xty;
        self.yty += other.yty;
        self.rows += other.rows;
    }

    pub fn sub(&self, other: &QuadraticProblem) -> QuadraticProblem {
        QuadraticProblem {
            gram: &self.gram - &other.gram,
            xty: &self.xty - &other.xty,
            yty: self.yty - other.yty,
            rows: self.rows - other.rows,
        }
    }

    /// Residual sum of squares at `theta`.
    pub fn rss(&self, theta: &DVector<f64>) -> f64 {
        self.yty - 2.0 * theta.dot(&self.xty) + theta.dot(&(&self.gram * theta))
    }

    /// Minimum-norm least-squares solution and the retained rank.
    pub fn min_norm_solution(&self, rel_tol: f64) -> (DVector<f64>, usize) {
        let (inv, rank) = pinv_symmetric(&self.gram, rel_tol);
        (inv * &self.xty, rank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standard_normal_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_series(s: usize, l: usize, t: usize, seed: u64) -> TensorSeries {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let slices: Vec<_> = (0..t).map(|_| standard_normal_matrix(&mut rng, s, l)).collect();
        TensorSeries::from_matrices(&slices).unwrap()
    }

    #[test]
    fn scalar_design() {
        let y = TensorSeries::new(vec![1, 1], 2, vec![0.7, 1.3]).unwrap();
        let p = Panel::from_series(&y, &LagSpec::new(1, 1).unwrap()).unwrap();
        let (d, v) = p.design(100).unwrap();
        assert_eq!(d.shape(), (1, 2));
        assert_eq!(d.row(0).iter().cloned().collect::<Vec<_>>(), vec![0.7, 0.7]);
        assert_eq!(v[0], 1.3);
    }

    #[test]
    fn design_reproduces_mean() {
        let y = random_series(2, 2, 3, 1);
        let lags = LagSpec::new(1, 1).unwrap();
        let p = Panel::from_series(&y, &lags).unwrap();
        let (d, _) = p.design(1000).unwrap();
        assert_eq!(d.ncols(), 8);
        assert_eq!(d.nrows(), 2 * 2 * 2);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let pair = InfluencePair::new(standard_normal_matrix(&mut rng, 2, 2), standard_normal_matrix(&mut rng, 2, 2))
            .unwrap();
        let pred = &d * pair.to_theta();
        let fitted = p.fitted_blin(&pair).unwrap();
        for (k, f) in fitted.iter().enumerate() {
            for (r, v) in f.iter().enumerate() {
                assert!((pred[k * 4 + r] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn design_with_unequal_lags_reproduces_mean() {
        let y = random_series(3, 2, 7, 5);
        let lags = LagSpec::new(1, 3).unwrap();
        let p = Panel::from_series(&y, &lags).unwrap();
        assert_eq!(p.len(), 4);
        let (d, _) = p.design(10_000).unwrap();
        let pair = InfluencePair::new(DMatrix::from_fn(3, 3, |i, j| (i + 2 * j) as f64), DMatrix::from_fn(2, 2, |i, j| i as f64 - j as f64))
            .unwrap();
        let pred = &d * pair.to_theta();
        let fitted: Vec<f64> = p.fitted_blin(&pair).unwrap().iter().flat_map(|m| m.iter().cloned().collect::<Vec<_>>()).collect();
        for (a, b) in pred.iter().zip(&fitted) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn moment_gram_matches_dense() {
        let y = random_series(3, 4, 6, 3);
        let p = Panel::from_series(&y, &LagSpec::new(2, 1).unwrap()).unwrap();
        let (d, v) = p.design(1_000_000).unwrap();
        let dense = QuadraticProblem::from_design(&d, &v);
        let fast = p.quadratic();
        assert!((dense.gram - fast.gram).amax() < 1e-12);
        assert!((dense.xty - fast.xty).amax() < 1e-12);
        assert!((dense.yty - fast.yty).abs() < 1e-12);
    }

    #[test]
    fn budget_guard() {
        let y = random_series(3, 3, 5, 4);
        let p = Panel::from_series(&y, &LagSpec::new(1, 1).unwrap()).unwrap();
        assert!(matches!(p.design(10), Err(BlinError::BudgetExceeded { .. })));
    }

    #[test]
    fn insufficient_horizon() {
        let y = random_series(2, 2, 2, 4);
        assert!(matches!(
            Panel::from_series(&y, &LagSpec::new(2, 1).unwrap()),
            Err(BlinError::InsufficientData { .. })
        ));
    }
}
