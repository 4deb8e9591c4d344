//! K-fold cross-validation over time points.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{BlinError, Result};
use crate::estimators::{fit_panel, EstimatorConfig};
use crate::panel::Panel;
use crate::series::{LagSpec, TensorSeries};

use super::metrics::r_squared_slices;

/// Fold label for each of `n` usable time points.
///
/// Positions are shuffled with a seeded ChaCha20 stream and dealt round
/// robin, so fold sizes differ by at most one and the assignment depends
/// only on `(n, folds, seed)`.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut out = vec![0; n];
    for (rank, pos) in order.into_iter().enumerate() {
        out[pos] = rank % folds.max(1);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodCv {
    pub label: String,
    #[serde(skip)]
    pub config: EstimatorConfig,
    pub r2_out: f64,
    /// In-sample R² of a fit to all usable rows, when requested.
    pub r2_in: Option<f64>,
    /// Held-out predictions, aligned with the panel rows.
    #[serde(skip)]
    pub predictions: Vec<DMatrix<f64>>,
    pub nonconverged_folds: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvReport {
    /// Time indices of the usable responses.
    pub times: Vec<usize>,
    /// Fold label per usable response.
    pub assignment: Vec<usize>,
    pub folds: usize,
    pub methods: Vec<MethodCv>,
}

impl CvReport {
    /// Time indices held out in fold `f`.
    pub fn fold_times(&self, f: usize) -> Vec<usize> {
        self.times.iter().zip(&self.assignment).filter(|(_, a)| **a == f).map(|(t, _)| *t).collect()
    }
}

pub fn kfold_cv(
    series: &TensorSeries,
    lags: &LagSpec,
    configs: &[EstimatorConfig],
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    let panel = Panel::from_series(series, lags)?;
    kfold_cv_panel(&panel, lags, configs, folds, seed, true)
}

/// Cross-validate every configuration on the same partition. Held-out rows
/// are dropped from estimation and predicted from their observed lagged
/// regressors.
pub fn kfold_cv_panel(
    panel: &Panel,
    lags: &LagSpec,
    configs: &[EstimatorConfig],
    folds: usize,
    seed: u64,
    with_in_sample: bool,
) -> Result<CvReport> {
    if folds < 2 {
        return Err(BlinError::InvalidConfig("cross-validation needs at least 2 folds".into()));
    }
    if panel.len() < folds {
        return Err(BlinError::InsufficientData { horizon: panel.len(), required: folds - 1 });
    }
    let assignment = fold_assignment(panel.len(), folds, seed);
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let (held, train): (Vec<usize>, Vec<usize>) = (0..panel.len()).partition(|&k| assignment[k] == f);
            (train, held)
        })
        .collect();

    let methods = configs
        .par_iter()
        .enumerate()
        .map(|(ci, cfg)| -> Result<MethodCv> {
            let per_fold: Vec<Result<(Vec<usize>, Vec<DMatrix<f64>>, bool)>> = splits
                .par_iter()
                .map(|(train, held)| {
                    let fit = fit_panel(&panel.subset(train), lags, cfg)?;
                    let pred = fit.predict(&panel.subset(held))?;
                    Ok((held.clone(), pred, fit.converged))
                })
                .collect();
            let mut predictions = vec![DMatrix::zeros(panel.s, panel.l); panel.len()];
            let mut nonconverged = 0;
            for r in per_fold {
                let (held, pred, ok) = r?;
                for (k, p) in held.into_iter().zip(pred) {
                    predictions[k] = p;
                }
                if !ok {
                    nonconverged += 1;
                }
            }
            let r2_out = r_squared_slices(&panel.ys, &predictions)?;
            let r2_in = if with_in_sample { Some(fit_panel(panel, lags, cfg)?.r2_in) } else { None };
            Ok(MethodCv {
                label: format!("{}#{ci}", cfg.method.name()),
                config: cfg.clone(),
                r2_out,
                r2_in,
                predictions,
                nonconverged_folds: nonconverged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport { times: panel.times.clone(), assignment, folds, methods })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_is_balanced_partition() {
        let a = fold_assignment(23, 10, 7);
        let mut counts = [0; 10];
        for f in &a {
            counts[*f] += 1;
        }
        assert!(counts.iter().all(|c| *c == 2 || *c == 3));
        assert_eq!(counts.iter().sum::<usize>(), 23);
        assert_eq!(a, fold_assignment(23, 10, 7));
        assert_ne!(a, fold_assignment(23, 10, 8));
    }
}
