use crate::error::{BlinError, Result};
use crate::linalg::GRAM_EIG_RTOL;
use crate::model::InfluencePair;
use crate::panel::Panel;
use crate::series::{LagSpec, TensorSeries};

use super::{in_sample_r2, maybe_canonicalize, InfluenceFit, Method, ModelKind};

/// Minimum-norm least squares from the block normal equations.
///
/// The Gram matrix is assembled from moment sums, so memory scales with
/// `(S²+L²)²` rather than with the number of observations.
pub fn fit_blin_exact(series: &TensorSeries, lags: &LagSpec) -> Result<InfluenceFit> {
    let panel = Panel::from_series(series, lags)?;
    fit_blin_exact_panel(&panel, lags, crate::model::DEFAULT_ELEMENT_BUDGET)
}

pub fn fit_blin_exact_panel(panel: &Panel, lags: &LagSpec, budget: usize) -> Result<InfluenceFit> {
    let n = panel.n_params();
    if n * n > budget {
        return Err(BlinError::BudgetExceeded { elements: n * n, budget });
    }
    let q = panel.quadratic();
    let (theta, rank) = q.min_norm_solution(GRAM_EIG_RTOL);
    let raw = InfluencePair::from_theta(theta.as_slice(), panel.s, panel.l)?;
    let pair = maybe_canonicalize(raw, panel);
    let rss = panel.rss(&panel.fitted_blin(&pair)?);
    let yty = q.yty;
    Ok(InfluenceFit {
        pair,
        kind: ModelKind::Blin,
        method: Method::Exact,
        lags: lags.clone(),
        iterations: 1,
        initial_criterion: yty,
        criterion_trace: vec![rss],
        converged: true,
        r2_in: in_sample_r2(rss, yty),
        factors: None,
        design_rank: Some(rank),
        lambda: None,
        restart_criteria: Vec::new(),
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standard_normal_matrix;
    use crate::model::blin_mean;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    /// Noiseless series from a known pair, started from a random slice.
    fn noiseless(s: usize, l: usize, t: usize, seed: u64) -> (TensorSeries, InfluencePair) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pair = InfluencePair::new(
            standard_normal_matrix(&mut rng, s, s) * 0.3,
            standard_normal_matrix(&mut rng, l, l) * 0.3,
        )
        .unwrap();
        let mut slices = vec![standard_normal_matrix(&mut rng, s, l)];
        for k in 1..t {
            let prev = &slices[k - 1];
            let next = blin_mean(&pair, prev, prev).unwrap();
            slices.push(next);
        }
        (TensorSeries::from_matrices(&slices).unwrap(), pair)
    }

    #[test]
    fn noiseless_fit_interpolates() {
        let (y, truth) = noiseless(3, 3, 10, 1);
        let lags = LagSpec::new(1, 1).unwrap();
        let fit = fit_blin_exact(&y, &lags).unwrap();
        let panel = Panel::from_series(&y, &lags).unwrap();
        let fitted = fit.predict(&panel).unwrap();
        let num: f64 = panel.rss(&fitted);
        assert!(num.sqrt() / panel.yty().sqrt() < 1e-8);
        assert!((fit.diag_effect() - truth.diag_effect()).amax() < 1e-6);
        let off = |m: &DMatrix<f64>| {
            let mut m = m.clone();
            m.fill_diagonal(0.0);
            m
        };
        assert!((off(&fit.pair.a) - off(&truth.a)).amax() < 1e-6);
        assert!((off(&fit.pair.b) - off(&truth.b)).amax() < 1e-6);
    }

    #[test]
    fn canonical_diagonals_balanced() {
        let (y, _) = noiseless(3, 2, 12, 2);
        let fit = fit_blin_exact(&y, &LagSpec::new(1, 1).unwrap()).unwrap();
        let ma = fit.pair.a.diagonal().mean();
        let mb = fit.pair.b.diagonal().mean();
        assert!((ma - mb).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_pseudoinverse() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let slices: Vec<_> = (0..6).map(|_| standard_normal_matrix(&mut rng, 3, 2)).collect();
        let y = TensorSeries::from_matrices(&slices).unwrap();
        let lags = LagSpec::new(2, 1).unwrap();
        let panel = Panel::from_series(&y, &lags).unwrap();
        let (d, v) = panel.design(1_000_000).unwrap();
        let theta = crate::linalg::pinv(&d, 1e-10) * &v;
        let fit = fit_blin_exact(&y, &lags).unwrap();
        let pred_dense = &d * theta;
        let pred = &d * fit.pair.to_theta();
        assert!((pred_dense - pred).norm() / v.norm() < 1e-8);
    }
}
