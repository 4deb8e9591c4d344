use nalgebra::DVector;

use crate::error::{BlinError, Result};
use crate::evaluate::cv::fold_assignment;
use crate::model::InfluencePair;
use crate::panel::{Panel, QuadraticProblem};
use crate::series::{LagSpec, TensorSeries};

use super::lasso::{self, LassoOptions};
use super::{in_sample_r2, EstimatorConfig, InfluenceFit, LambdaChoice, Method, ModelKind};

const GRID_POINTS: usize = 50;
const GRID_RATIO: f64 = 1e-4;
const KKT_REL_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 200_000;

/// Lasso solutions over the penalty grid used for a sparse fit.
#[derive(Debug, Clone)]
pub struct SparsePath {
    /// Decreasing penalties.
    pub lambdas: Vec<f64>,
    pub thetas: Vec<DVector<f64>>,
    pub nonzeros: Vec<usize>,
    /// Summed held-out squared error per penalty when chosen by CV.
    pub cv_error: Option<Vec<f64>>,
    pub selected: usize,
    pub lambda_max: f64,
}

/// Sparse fit of `[vec(Aᵀ); vec(B)]` with an ℓ₁ penalty on every entry,
/// diagonals included. The objective is `½‖y − Dθ‖² + λ‖θ‖₁`.
pub fn fit_blin_sparse(
    series: &TensorSeries,
    lags: &LagSpec,
    cfg: &EstimatorConfig,
) -> Result<(InfluenceFit, SparsePath)> {
    let panel = Panel::from_series(series, lags)?;
    fit_blin_sparse_panel(&panel, lags, cfg)
}

pub fn fit_blin_sparse_panel(
    panel: &Panel,
    lags: &LagSpec,
    cfg: &EstimatorConfig,
) -> Result<(InfluenceFit, SparsePath)> {
    cfg.validate()?;
    let n = panel.n_params();
    if n * n > cfg.element_budget {
        return Err(BlinError::BudgetExceeded { elements: n * n, budget: cfg.element_budget });
    }
    let rows: Vec<QuadraticProblem> = (0..panel.len()).map(|k| panel.quadratic_at(k)).collect();
    let (fit, path) = sparse_from_rows(&rows, cfg, &panel.null_directions())?;
    let pair = InfluencePair::from_theta(fit.theta.as_slice(), panel.s, panel.l)?;
    let rss = panel.rss(&panel.fitted_blin(&pair)?);
    let yty = panel.yty();
    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push(format!(
            "coordinate descent stopped with KKT violation {:.3e}",
            fit.max_kkt_violation
        ));
    }
    Ok((
        InfluenceFit {
            pair,
            kind: ModelKind::Blin,
            method: Method::Sparse,
            lags: lags.clone(),
            iterations: fit.sweeps,
            initial_criterion: yty,
            criterion_trace: vec![rss],
            converged: fit.converged,
            r2_in: in_sample_r2(rss, yty),
            factors: None,
            design_rank: None,
            lambda: Some(fit.lambda),
            restart_criteria: Vec::new(),
            warnings,
        },
        path,
    ))
}

/// Lasso with penalty selection over per-row-block Gram statistics.
///
/// Shared by the bipartite and multiway sparse estimators; `rows[k]` holds
/// the contribution of time point `k`, which is the unit held out in
/// cross-validation. `null` lists exact null directions of every row block.
pub(crate) fn sparse_from_rows(
    rows: &[QuadraticProblem],
    cfg: &EstimatorConfig,
    null: &[DVector<f64>],
) -> Result<(lasso::LassoSolution, SparsePath)> {
    let dim = rows.first().map(|r| r.dim()).ok_or(BlinError::InsufficientData { horizon: 0, required: 1 })?;
    let mut total = QuadraticProblem::zeros(dim);
    for r in rows {
        total.add_assign(r);
    }
    let lmax = lasso::lambda_max(&total);
    let opts = LassoOptions::scaled(&total, KKT_REL_TOL, MAX_SWEEPS);

    let (lambdas, folds) = match &cfg.lambda {
        LambdaChoice::Fixed(lam) => {
            let mut grid: Vec<f64> =
                lasso::log_grid(lmax, GRID_POINTS, GRID_RATIO).into_iter().filter(|g| g > lam).collect();
            grid.push(*lam);
            (grid, None)
        }
        LambdaChoice::CrossValidated { folds } => (lasso::log_grid(lmax, GRID_POINTS, GRID_RATIO), Some(*folds)),
        LambdaChoice::Grid { values, folds } => {
            let mut v = values.clone();
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            v.dedup();
            let folds = if v.len() > 1 { Some(*folds) } else { None };
            (v, folds)
        }
    };

    let full = lasso::path_with_null(&total, &lambdas, opts, null);
    let (selected, cv_error) = match folds {
        None => (lambdas.len() - 1, None),
        Some(k) => {
            if rows.len() < k {
                return Err(BlinError::InsufficientData { horizon: rows.len(), required: k - 1 });
            }
            let assign = fold_assignment(rows.len(), k, cfg.seed);
            let mut err = vec![0.0; lambdas.len()];
            for f in 0..k {
                let mut held = QuadraticProblem::zeros(dim);
                for (r, _) in rows.iter().zip(&assign).filter(|(_, a)| **a == f) {
                    held.add_assign(r);
                }
                let train = total.sub(&held);
                for (e, sol) in err.iter_mut().zip(lasso::path_with_null(&train, &lambdas, opts, null)) {
                    *e += held.rss(&sol.theta);
                }
            }
            // first minimum: ties resolve toward the larger penalty
            let best = err
                .iter()
                .enumerate()
                .fold(0, |best, (i, e)| if *e < err[best] { i } else { best });
            (best, Some(err))
        }
    };
    let path = SparsePath {
        lambdas: lambdas.clone(),
        thetas: full.iter().map(|s| s.theta.clone()).collect(),
        nonzeros: full.iter().map(|s| s.theta.iter().filter(|v| **v != 0.0).count()).collect(),
        cv_error,
        selected,
        lambda_max: lmax,
    };
    Ok((full[selected].clone(), path))
}
