use nalgebra::{DMatrix, DVector};

use crate::error::{BlinError, Result};
use crate::estimators::{EstimatorConfig, Method, SparsePath};
use crate::linalg::solve_psd;
use crate::panel::QuadraticProblem;
use crate::series::{LagSpec, TensorSeries};

use super::tensor::{mode_matricize, mode_product_into, split_dims};

/// Lagged regressors and responses for a K-mode series.
///
/// `regressors[k][r]` is the sum of the last `p_k` slices before the
/// response `ys[r]`; modes with equal lags hold identical regressors.
#[derive(Debug, Clone)]
pub struct MultiPanel {
    pub dims: Vec<usize>,
    pub lags: LagSpec,
    pub regressors: Vec<Vec<Vec<f64>>>,
    pub ys: Vec<Vec<f64>>,
    pub times: Vec<usize>,
}

impl MultiPanel {
    pub fn from_series(series: &TensorSeries, lags: &LagSpec) -> Result<Self> {
        MultiPanel::from_series_starting(series, lags, lags.max())
    }

    pub fn from_series_starting(series: &TensorSeries, lags: &LagSpec, start: usize) -> Result<Self> {
        let dims = series.dims().to_vec();
        if dims.len() < 2 {
            return Err(BlinError::Shape("multiway model needs at least two modes".into()));
        }
        if lags.per_mode().len() != dims.len() {
            return Err(BlinError::InvalidConfig(format!(
                "{} modes need {} lags, got {lags}",
                dims.len(),
                dims.len()
            )));
        }
        let horizon = series.horizon();
        if horizon <= lags.max() {
            return Err(BlinError::InsufficientData { horizon, required: lags.max() });
        }
        if start < lags.max() || start >= horizon {
            return Err(BlinError::IndexOutOfRange { t: start, earliest: lags.max() });
        }
        let mut regressors = vec![Vec::new(); dims.len()];
        for (k, &p) in lags.per_mode().iter().enumerate() {
            if let Some(prev) = lags.per_mode()[..k].iter().position(|&q| q == p) {
                regressors[k] = regressors[prev].clone();
                continue;
            }
            for t in start..horizon {
                regressors[k].push(series.lag_sum_flat(p, t)?);
            }
        }
        Ok(MultiPanel {
            dims,
            lags: lags.clone(),
            regressors,
            ys: (start..horizon).map(|t| series.slice(t).to_vec()).collect(),
            times: (start..horizon).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.dims.len()
    }

    pub fn cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn n_params(&self) -> usize {
        self.dims.iter().map(|m| m * m).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.modes());
        let mut acc = 0;
        for m in &self.dims {
            off.push(acc);
            acc += m * m;
        }
        off
    }

    pub fn subset(&self, positions: &[usize]) -> MultiPanel {
        MultiPanel {
            dims: self.dims.clone(),
            lags: self.lags.clone(),
            regressors: self
                .regressors
                .iter()
                .map(|r| positions.iter().map(|&k| r[k].clone()).collect())
                .collect(),
            ys: positions.iter().map(|&k| self.ys[k].clone()).collect(),
            times: positions.iter().map(|&k| self.times[k]).collect(),
        }
    }

    pub fn yty(&self) -> f64 {
        self.ys.iter().flat_map(|y| y.iter()).map(|v| v * v).sum()
    }

    /// `Σ_k X⁽ᵏ⁾ ×_k B_kᵀ` for every row.
    pub fn fitted(&self, networks: &[DMatrix<f64>]) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|r| {
                let mut out = vec![0.0; self.cells()];
                for (k, b) in networks.iter().enumerate() {
                    mode_product_into(
                        &self.regressors[k][r],
                        split_dims(&self.dims, k),
                        &b.transpose(),
                        &mut out,
                        1.0,
                    );
                }
                out
            })
            .collect()
    }

    pub fn rss(&self, fitted: &[Vec<f64>]) -> f64 {
        self.ys
            .iter()
            .zip(fitted)
            .flat_map(|(y, f)| y.iter().zip(f))
            .map(|(a, b)| (a - b).powi(2))
            .sum()
    }

    /// Dense stacked design over all rows; parameter `B_k[j, i]` sits at
    /// column `offset_k + i + m_k·j`, i.e. the blocks are `vec(B_kᵀ)`.
    pub fn design(&self, budget: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n = self.cells();
        let rows = n * self.len();
        let cols = self.n_params();
        let elements = rows.saturating_mul(cols);
        if elements > budget {
            return Err(BlinError::BudgetExceeded { elements, budget });
        }
        let off = self.offsets();
        let mut d = DMatrix::zeros(rows, cols);
        let mut y = DVector::zeros(rows);
        for r in 0..self.len() {
            for idx in 0..n {
                y[r * n + idx] = self.ys[r][idx];
            }
            for k in 0..self.modes() {
                let (inner, m, _) = split_dims(&self.dims, k);
                let x = &self.regressors[k][r];
                for idx in 0..n {
                    let a = idx % inner;
                    let i = (idx / inner) % m;
                    let c = idx / (inner * m);
                    for j in 0..m {
                        d[(r * n + idx, off[k] + i + m * j)] = x[a + inner * (j + m * c)];
                    }
                }
            }
        }
        Ok((d, y))
    }

    /// Gram statistics of row block `r`, assembled from mode-wise
    /// contractions instead of the dense design.
    pub fn quadratic_at(&self, r: usize) -> QuadraticProblem {
        let k_modes = self.modes();
        let n = self.cells();
        let off = self.offsets();
        let p = self.n_params();
        let mut gram = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        let strides: Vec<usize> = (0..k_modes).map(|k| self.dims[..k].iter().product()).collect();
        let y = &self.ys[r];
        for k in 0..k_modes {
            let m = self.dims[k];
            let xk = mode_matricize(&self.regressors[k][r], &self.dims, k).expect("consistent dims");
            let yk = mode_matricize(y, &self.dims, k).expect("consistent dims");
            let g = &xk * xk.transpose();
            let c = &yk * xk.transpose();
            for j in 0..m {
                for jp in 0..m {
                    for i in 0..m {
                        gram[(off[k] + i + m * j, off[k] + i + m * jp)] = g[(j, jp)];
                    }
                }
                for i in 0..m {
                    xty[off[k] + i + m * j] = c[(i, j)];
                }
            }
        }
        for k in 0..k_modes {
            for kp in k + 1..k_modes {
                let (m, mp) = (self.dims[k], self.dims[kp]);
                let (sk, skp) = (strides[k], strides[kp]);
                let xk = &self.regressors[k][r];
                let xkp = &self.regressors[kp][r];
                let bases = (0..n).filter(|idx| (idx / sk) % m == 0 && (idx / skp) % mp == 0);
                for base in bases {
                    for j in 0..m {
                        for ip in 0..mp {
                            let pv = xk[base + j * sk + ip * skp];
                            if pv == 0.0 {
                                continue;
                            }
                            let col0 = off[kp] + ip;
                            for i in 0..m {
                                let row = off[k] + i + m * j;
                                for jp in 0..mp {
                                    gram[(row, col0 + mp * jp)] += pv * xkp[base + i * sk + jp * skp];
                                }
                            }
                        }
                    }
                }
                let block = gram.view((off[k], off[kp]), (m * m, mp * mp)).transpose();
                gram.view_mut((off[kp], off[k]), (mp * mp, m * m)).copy_from(&block);
            }
        }
        QuadraticProblem { gram, xty, yty: y.iter().map(|v| v * v).sum(), rows: n }
    }

    pub fn quadratic(&self) -> QuadraticProblem {
        let mut acc = QuadraticProblem::zeros(self.n_params());
        for r in 0..self.len() {
            acc.add_assign(&self.quadratic_at(r));
        }
        acc
    }

    /// Directions in parameter space that leave every fitted value
    /// unchanged: `+I` on one network and `−I` on another with the same lag.
    /// One per extra mode in each equal-lag group.
    pub fn null_directions(&self) -> Vec<DVector<f64>> {
        let per = self.lags.per_mode();
        let off = self.offsets();
        let mut out = Vec::new();
        for k in 1..per.len() {
            if let Some(first) = (0..k).find(|&j| per[j] == per[k]) {
                let mut v = DVector::zeros(self.n_params());
                for (mode, sign) in [(first, 1.0), (k, -1.0)] {
                    let m = self.dims[mode];
                    for i in 0..m {
                        v[off[mode] + i * m + i] = sign;
                    }
                }
                out.push(v);
            }
        }
        out
    }

    pub fn networks_from_theta(&self, theta: &[f64]) -> Vec<DMatrix<f64>> {
        self.offsets()
            .iter()
            .zip(&self.dims)
            .map(|(&o, &m)| DMatrix::from_column_slice(m, m, &theta[o..o + m * m]).transpose())
            .collect()
    }
}

/// Fitted K-mode influence networks.
#[derive(Debug, Clone)]
pub struct MultiFit {
    /// `B_k`, one `m_k × m_k` network per mode.
    pub networks: Vec<DMatrix<f64>>,
    pub lags: LagSpec,
    pub dims: Vec<usize>,
    pub method: Method,
    pub iterations: usize,
    pub initial_criterion: f64,
    pub criterion_trace: Vec<f64>,
    pub converged: bool,
    pub r2_in: f64,
    pub lambda: Option<f64>,
    pub warnings: Vec<String>,
}

impl MultiFit {
    /// Array over `dims` with entries `Σ_k B_k[i_k, i_k]`.
    pub fn diag_effect(&self) -> Vec<f64> {
        let n: usize = self.dims.iter().product();
        (0..n)
            .map(|mut idx| {
                let mut acc = 0.0;
                for (b, &m) in self.networks.iter().zip(&self.dims) {
                    let i = idx % m;
                    idx /= m;
                    acc += b[(i, i)];
                }
                acc
            })
            .collect()
    }

    pub fn criterion(&self) -> f64 {
        *self.criterion_trace.last().unwrap_or(&self.initial_criterion)
    }

    pub fn nonzeros(&self) -> usize {
        self.networks.iter().flat_map(|b| b.iter()).filter(|v| **v != 0.0).count()
    }

    pub fn predict(&self, panel: &MultiPanel) -> Vec<Vec<f64>> {
        panel.fitted(&self.networks)
    }
}

/// Equalize mean diagonals within each group of modes sharing a lag; the
/// shifts in a group sum to zero, so fitted values are unchanged.
pub fn canonicalize_multi(networks: &mut [DMatrix<f64>], lags: &LagSpec) {
    let per = lags.per_mode();
    let mut seen = Vec::new();
    for &p in per {
        if seen.contains(&p) {
            continue;
        }
        seen.push(p);
        let group: Vec<usize> = (0..per.len()).filter(|&k| per[k] == p).collect();
        if group.len() < 2 {
            continue;
        }
        let means: Vec<f64> = group.iter().map(|&k| networks[k].diagonal().mean()).collect();
        let target = means.iter().sum::<f64>() / means.len() as f64;
        for (&k, mean) in group.iter().zip(&means) {
            let c = target - mean;
            for i in 0..networks[k].nrows() {
                networks[k][(i, i)] += c;
            }
        }
    }
}

pub fn fit_multiblin(series: &TensorSeries, lags: &LagSpec, cfg: &EstimatorConfig) -> Result<MultiFit> {
    let panel = MultiPanel::from_series(series, lags)?;
    fit_multiblin_panel(&panel, cfg)
}

/// Block coordinate descent over modes, last mode first, each update the
/// closed-form least squares for `B_k` with the other networks fixed.
pub fn fit_multiblin_panel(panel: &MultiPanel, cfg: &EstimatorConfig) -> Result<MultiFit> {
    cfg.validate()?;
    let k_modes = panel.modes();
    let rows = panel.len();
    let xmats: Vec<Vec<DMatrix<f64>>> = (0..k_modes)
        .map(|k| {
            panel.regressors[k]
                .iter()
                .map(|x| mode_matricize(x, &panel.dims, k).expect("consistent dims"))
                .collect()
        })
        .collect();
    let grams: Vec<DMatrix<f64>> = (0..k_modes)
        .map(|k| {
            let m = panel.dims[k];
            xmats[k].iter().fold(DMatrix::zeros(m, m), |acc, x| acc + x * x.transpose())
        })
        .collect();

    let mut networks: Vec<DMatrix<f64>> = panel.dims.iter().map(|&m| DMatrix::identity(m, m)).collect();
    let contribution = |k: usize, r: usize, b: &DMatrix<f64>| -> Vec<f64> {
        let mut out = vec![0.0; panel.cells()];
        mode_product_into(&panel.regressors[k][r], split_dims(&panel.dims, k), &b.transpose(), &mut out, 1.0);
        out
    };
    let mut contrib: Vec<Vec<Vec<f64>>> =
        (0..k_modes).map(|k| (0..rows).map(|r| contribution(k, r, &networks[k])).collect()).collect();

    let q0 = panel.yty();
    let eta = cfg.eta.threshold(q0);
    let mut trace = Vec::new();
    let mut prev = q0;
    let mut converged = false;
    let mut fallback = false;
    for _ in 0..cfg.max_iter {
        for i in (0..k_modes).rev() {
            let m = panel.dims[i];
            let mut rhs = DMatrix::zeros(m, m);
            for r in 0..rows {
                let mut resid = panel.ys[r].clone();
                for (k, c) in contrib.iter().enumerate() {
                    if k != i {
                        for (v, w) in resid.iter_mut().zip(&c[r]) {
                            *v -= w;
                        }
                    }
                }
                let rm = mode_matricize(&resid, &panel.dims, i).expect("consistent dims");
                rhs += &xmats[i][r] * rm.transpose();
            }
            let (b, fb) = solve_psd(&grams[i], &rhs);
            fallback |= fb;
            networks[i] = b;
            contrib[i] = (0..rows).map(|r| contribution(i, r, &networks[i])).collect();
        }
        let q: f64 = (0..rows)
            .map(|r| {
                let mut e = panel.ys[r].clone();
                for c in &contrib {
                    for (v, w) in e.iter_mut().zip(&c[r]) {
                        *v -= w;
                    }
                }
                e.iter().map(|v| v * v).sum::<f64>()
            })
            .sum();
        trace.push(q);
        if (q - prev).abs() <= eta {
            converged = true;
            break;
        }
        prev = q;
    }
    canonicalize_multi(&mut networks, &panel.lags);
    let rss = *trace.last().unwrap();
    let mut warnings = Vec::new();
    if fallback {
        warnings.push("singular mode Gram matrix; used pseudo-inverse".to_string());
    }
    Ok(MultiFit {
        networks,
        lags: panel.lags.clone(),
        dims: panel.dims.clone(),
        method: Method::Bcd,
        iterations: trace.len(),
        initial_criterion: q0,
        criterion_trace: trace,
        converged,
        r2_in: if q0 > 0.0 { 1.0 - rss / q0 } else { f64::NAN },
        lambda: None,
        warnings,
    })
}

pub fn fit_multiblin_sparse(
    series: &TensorSeries,
    lags: &LagSpec,
    cfg: &EstimatorConfig,
) -> Result<(MultiFit, SparsePath)> {
    let panel = MultiPanel::from_series(series, lags)?;
    fit_multiblin_sparse_panel(&panel, cfg)
}

/// ℓ₁-penalized fit of all K networks jointly on the stacked linear model.
pub fn fit_multiblin_sparse_panel(panel: &MultiPanel, cfg: &EstimatorConfig) -> Result<(MultiFit, SparsePath)> {
    cfg.validate()?;
    let p = panel.n_params();
    if p * p > cfg.element_budget {
        return Err(BlinError::BudgetExceeded { elements: p * p, budget: cfg.element_budget });
    }
    let rows: Vec<QuadraticProblem> = (0..panel.len()).map(|r| panel.quadratic_at(r)).collect();
    let (sol, path) = crate::estimators::sparse::sparse_from_rows(&rows, cfg, &panel.null_directions())?;
    let networks = panel.networks_from_theta(sol.theta.as_slice());
    let rss = panel.rss(&panel.fitted(&networks));
    let q0 = panel.yty();
    let mut warnings = Vec::new();
    if !sol.converged {
        warnings.push(format!("coordinate descent stopped with KKT violation {:.3e}", sol.max_kkt_violation));
    }
    Ok((
        MultiFit {
            networks,
            lags: panel.lags.clone(),
            dims: panel.dims.clone(),
            method: Method::Sparse,
            iterations: sol.sweeps,
            initial_criterion: q0,
            criterion_trace: vec![rss],
            converged: sol.converged,
            r2_in: if q0 > 0.0 { 1.0 - rss / q0 } else { f64::NAN },
            lambda: Some(sol.lambda),
            warnings,
        },
        path,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_blin_bcd, Tolerance};
    use crate::linalg::{pinv, standard_normal_matrix};
    use crate::panel::Panel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn gaussian(dims: &[usize], t: usize, seed: u64) -> TensorSeries {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let n: usize = dims.iter().product();
        let data = standard_normal_matrix(&mut rng, n * t, 1).as_slice().to_vec();
        TensorSeries::new(dims.to_vec(), t, data).unwrap()
    }

    #[test]
    fn structured_gram_matches_dense() {
        let y = gaussian(&[3, 2, 2], 6, 1);
        let lags = LagSpec::multi(vec![2, 1, 1]).unwrap();
        let panel = MultiPanel::from_series(&y, &lags).unwrap();
        let (d, v) = panel.design(1_000_000).unwrap();
        let dense = QuadraticProblem::from_design(&d, &v);
        let fast = panel.quadratic();
        assert!((dense.gram - fast.gram).amax() < 1e-12);
        assert!((dense.xty - fast.xty).amax() < 1e-12);
    }

    #[test]
    fn dense_design_reproduces_fitted() {
        let y = gaussian(&[2, 3, 2], 5, 2);
        let lags = LagSpec::multi(vec![1, 2, 1]).unwrap();
        let panel = MultiPanel::from_series(&y, &lags).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let nets: Vec<_> = panel.dims.iter().map(|&m| standard_normal_matrix(&mut rng, m, m)).collect();
        let theta: Vec<f64> = nets.iter().flat_map(|b| b.transpose().as_slice().to_vec()).collect();
        let (d, _) = panel.design(1_000_000).unwrap();
        let pred = d * DVector::from_vec(theta.clone());
        let fitted: Vec<f64> = panel.fitted(&nets).into_iter().flatten().collect();
        for (a, b) in pred.iter().zip(&fitted) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(panel.networks_from_theta(&theta), nets);
    }

    #[test]
    fn two_modes_reduce_to_bipartite_bcd() {
        let y = gaussian(&[4, 3], 10, 4);
        let lags = LagSpec::new(1, 1).unwrap();
        let cfg = EstimatorConfig::default();
        let multi = fit_multiblin(&y, &lags, &cfg).unwrap();
        let bi = fit_blin_bcd(&y, &lags, &cfg).unwrap();
        assert!((&multi.networks[0] - &bi.pair.a).amax() < 1e-8);
        assert!((&multi.networks[1] - &bi.pair.b).amax() < 1e-8);
        let panel = Panel::from_series(&y, &lags).unwrap();
        let mp = MultiPanel::from_series(&y, &lags).unwrap();
        let fm: Vec<f64> = multi.predict(&mp).into_iter().flatten().collect();
        let fb: Vec<f64> = bi.predict(&panel).unwrap().iter().flat_map(|m| m.as_slice().to_vec()).collect();
        for (a, b) in fm.iter().zip(&fb) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn three_modes_match_min_norm_least_squares() {
        let y = gaussian(&[3, 3, 2], 6, 5);
        let lags = LagSpec::multi(vec![1, 1, 1]).unwrap();
        let panel = MultiPanel::from_series(&y, &lags).unwrap();
        let fit = fit_multiblin_panel(&panel, &EstimatorConfig { eta: Tolerance::Relative(1e-14), max_iter: 100_000, ..Default::default() }).unwrap();
        let (d, v) = panel.design(1_000_000).unwrap();
        let theta = pinv(&d, 1e-10) * &v;
        let dense = &d * theta;
        let ours: Vec<f64> = fit.predict(&panel).into_iter().flatten().collect();
        let err: f64 = dense.iter().zip(&ours).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err / dense.norm() < 1e-5, "relative error {err}");
        for w in fit.criterion_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn pairwise_shifts_leave_fit_unchanged() {
        let y = gaussian(&[2, 3, 2], 8, 6);
        let lags = LagSpec::multi(vec![1, 1, 1]).unwrap();
        let panel = MultiPanel::from_series(&y, &lags).unwrap();
        let fit = fit_multiblin_panel(&panel, &EstimatorConfig::default()).unwrap();
        let base: Vec<f64> = fit.predict(&panel).into_iter().flatten().collect();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let mut nets = fit.networks.clone();
            for d in 0..nets[i].nrows() {
                nets[i][(d, d)] += 0.7;
            }
            for d in 0..nets[j].nrows() {
                nets[j][(d, d)] -= 0.7;
            }
            let shifted: Vec<f64> = panel.fitted(&nets).into_iter().flatten().collect();
            for (a, b) in base.iter().zip(&shifted) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
