//! Lag selection by an information criterion on sparse fits.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{BlinError, Result};
use crate::estimators::{fit_blin_sparse_panel, EstimatorConfig};
use crate::multiway::{fit_multiblin_sparse_panel, MultiPanel};
use crate::panel::Panel;
use crate::series::{LagSpec, TensorSeries};

#[derive(Debug, Clone, Serialize)]
pub struct AicCell {
    pub lags: LagSpec,
    pub aic: f64,
    pub r2: f64,
    pub nonzeros: usize,
    pub rss: f64,
    /// Scalar observations entering the likelihood term.
    pub n_obs: usize,
    pub lambda: Option<f64>,
    /// Set when the residual sum of squares is zero and the log term is
    /// undefined; flagged cells sort last.
    pub flagged: bool,
}

/// `2·nonzeros + N·ln(RSS)`.
pub fn aic_hat(nonzeros: usize, n_obs: usize, rss: f64) -> f64 {
    2.0 * nonzeros as f64 + n_obs as f64 * rss.ln()
}

/// Fit a sparse model per lag cell and rank cells by ascending criterion.
///
/// Every cell is estimated on the same response rows, those after the
/// largest lag in the grid, so the likelihood terms are comparable.
pub fn aic_select(series: &TensorSeries, lag_grid: &[LagSpec], cfg: &EstimatorConfig) -> Result<Vec<AicCell>> {
    if lag_grid.is_empty() {
        return Err(BlinError::InvalidConfig("lag grid is empty".into()));
    }
    let start = lag_grid.iter().map(|l| l.max()).max().unwrap();
    let mut cells = lag_grid
        .par_iter()
        .map(|lags| -> Result<AicCell> {
            let (nonzeros, rss, yty, n_obs, lambda) = if series.modes() == 2 {
                let panel = Panel::from_series_starting(series, lags, start)?;
                let (fit, _) = fit_blin_sparse_panel(&panel, lags, cfg)?;
                let rss = panel.rss(&fit.predict(&panel)?);
                (fit.nonzeros(), rss, panel.yty(), panel.len() * panel.s * panel.l, fit.lambda)
            } else {
                let panel = MultiPanel::from_series_starting(series, lags, start)?;
                let (fit, _) = fit_multiblin_sparse_panel(&panel, cfg)?;
                let rss = panel.rss(&fit.predict(&panel));
                (fit.nonzeros(), rss, panel.yty(), panel.len() * panel.cells(), fit.lambda)
            };
            let flagged = !(rss > 0.0);
            Ok(AicCell {
                lags: lags.clone(),
                aic: if flagged { f64::NAN } else { aic_hat(nonzeros, n_obs, rss) },
                r2: if yty > 0.0 { 1.0 - rss / yty } else { f64::NAN },
                nonzeros,
                rss,
                n_obs,
                lambda,
                flagged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    cells.sort_by(|a, b| a.flagged.cmp(&b.flagged).then(a.aic.partial_cmp(&b.aic).unwrap_or(std::cmp::Ordering::Equal)));
    Ok(cells)
}
