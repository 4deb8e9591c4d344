//! Convergence rates of the two estimators under both generators.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BlinError, Result};
use crate::estimators::{fit_bilinear_panel, fit_blin_exact_panel, EstimatorConfig, Method, ModelKind};
use crate::linalg::standard_normal_matrix;
use crate::model::{InfluencePair, DEFAULT_ELEMENT_BUDGET};
use crate::series::LagSpec;
use crate::simulate::{iid_regressor_panel, replication_rng, Generator};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub s: usize,
    pub l: usize,
    pub t_grid: Vec<usize>,
    pub reps: usize,
    pub generators: Vec<Generator>,
    pub methods: Vec<ModelKind>,
    pub seed: u64,
    /// ALS restarts for the bilinear fits.
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            s: 10,
            l: 9,
            t_grid: vec![100, 316, 1000, 3162],
            reps: 50,
            generators: vec![Generator::Blin, Generator::Bilinear],
            methods: vec![ModelKind::Blin, ModelKind::Bilinear],
            seed: 0,
            restarts: 3,
            max_iter: 500,
        }
    }
}

/// One replication of one `(generator, method, T)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub generator: Generator,
    pub method: ModelKind,
    pub horizon: usize,
    pub rep: usize,
    pub offdiag_a: f64,
    pub offdiag_b: f64,
    pub diag: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMetric {
    OffdiagA,
    OffdiagB,
    Diag,
}

impl StudyMetric {
    fn of(&self, row: &StudyRow) -> f64 {
        match self {
            StudyMetric::OffdiagA => row.offdiag_a,
            StudyMetric::OffdiagB => row.offdiag_b,
            StudyMetric::Diag => row.diag,
        }
    }
}

/// Least-squares slope of `log10 MSE` on `log10 T`.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeEstimate {
    pub generator: Generator,
    pub method: ModelKind,
    pub metric: StudyMetric,
    pub slope: f64,
    pub se: f64,
    pub points: usize,
    /// Replications dropped because the fit did not converge.
    pub excluded: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
    pub slopes: Vec<SlopeEstimate>,
}

impl StudyResult {
    pub fn slope(&self, generator: Generator, method: ModelKind, metric: StudyMetric) -> Option<&SlopeEstimate> {
        self.slopes.iter().find(|e| e.generator == generator && e.method == method && e.metric == metric)
    }

    pub fn write_rows_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Off-diagonals divided by their sum; invariant to positive and negative
/// rescaling of the whole network.
pub fn normalized_offdiag(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let off: Vec<f64> = (0..n).flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (i, j))).map(|ij| m[ij]).collect();
    let total: f64 = off.iter().sum();
    off.into_iter().map(|v| v / total).collect()
}

pub fn offdiag_mse(est: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    let (e, t) = (normalized_offdiag(est), normalized_offdiag(truth));
    e.iter().zip(&t).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / e.len() as f64
}

/// Diagonal effect of a pair under the given model: `a_ii + b_jj` for
/// BLIN, `a_ii · b_jj` for the bilinear model.
pub fn model_diag_effect(pair: &InfluencePair, kind: ModelKind) -> DMatrix<f64> {
    match kind {
        ModelKind::Blin => pair.diag_effect(),
        ModelKind::Bilinear => DMatrix::from_fn(pair.s(), pair.l(), |i, j| pair.a[(i, i)] * pair.b[(j, j)]),
    }
}

pub fn diag_mse(est: &InfluencePair, est_kind: ModelKind, truth: &InfluencePair, truth_kind: ModelKind) -> f64 {
    let d = model_diag_effect(est, est_kind) - model_diag_effect(truth, truth_kind);
    d.norm_squared() / d.len() as f64
}

/// Fixed truth with `Aᵀ = U Vᵀ` and `B = R Sᵀ` for square standard-normal
/// factors.
pub fn study_truth(s: usize, l: usize, seed: u64) -> InfluencePair {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (u, v) = (standard_normal_matrix(&mut rng, s, s), standard_normal_matrix(&mut rng, s, s));
    let (r, sf) = (standard_normal_matrix(&mut rng, l, l), standard_normal_matrix(&mut rng, l, l));
    InfluencePair { a: (u * v.transpose()).transpose(), b: r * sf.transpose(), canonical_shift: 0.0 }
}

fn generator_kind(g: Generator) -> ModelKind {
    match g {
        Generator::Blin => ModelKind::Blin,
        Generator::Bilinear => ModelKind::Bilinear,
    }
}

/// Simple regression slope and its standard error.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let se = if n > 2.0 { (resid / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, se)
}

pub fn convergence_study(cfg: &StudyConfig) -> Result<StudyResult> {
    if cfg.t_grid.len() < 2 || cfg.reps == 0 {
        return Err(BlinError::InvalidConfig("the study needs at least two horizons and one replication".into()));
    }
    if cfg.t_grid.iter().any(|&t| t == 0) || cfg.s < 2 || cfg.l < 2 {
        return Err(BlinError::InvalidConfig("horizons must be positive and dimensions at least 2".into()));
    }
    let truth = study_truth(cfg.s, cfg.l, cfg.seed);
    let nt = cfg.t_grid.len();
    let tasks: Vec<(usize, usize, usize)> = (0..cfg.generators.len())
        .flat_map(|g| (0..nt).flat_map(move |ti| (0..cfg.reps).map(move |r| (g, ti, r))))
        .collect();
    let lags = LagSpec::new(1, 1)?;
    let bilinear_cfg = EstimatorConfig {
        method: Method::Bilinear,
        restarts: cfg.restarts,
        max_iter: cfg.max_iter,
        seed: cfg.seed,
        ..Default::default()
    };

    let chunks = tasks
        .par_iter()
        .map(|&(g, ti, rep)| -> Result<Vec<StudyRow>> {
            let generator = cfg.generators[g];
            let horizon = cfg.t_grid[ti];
            let stream = 1 + ((g * nt + ti) * cfg.reps + rep) as u64;
            let mut rng = replication_rng(cfg.seed, stream);
            let panel = iid_regressor_panel(&mut rng, generator, &truth, horizon)?;
            let truth_kind = generator_kind(generator);
            cfg.methods
                .iter()
                .map(|&method| {
                    let fit = match method {
                        ModelKind::Blin => fit_blin_exact_panel(&panel, &lags, DEFAULT_ELEMENT_BUDGET)?,
                        ModelKind::Bilinear => fit_bilinear_panel(&panel, &lags, &bilinear_cfg)?,
                    };
                    Ok(StudyRow {
                        generator,
                        method,
                        horizon,
                        rep,
                        offdiag_a: offdiag_mse(&fit.pair.a, &truth.a),
                        offdiag_b: offdiag_mse(&fit.pair.b, &truth.b),
                        diag: diag_mse(&fit.pair, method, &truth, truth_kind),
                        converged: fit.converged,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<StudyRow> = chunks.into_iter().flatten().collect();

    let mut slopes = Vec::new();
    for &generator in &cfg.generators {
        for &method in &cfg.methods {
            for metric in [StudyMetric::OffdiagA, StudyMetric::OffdiagB, StudyMetric::Diag] {
                let cell: Vec<&StudyRow> =
                    rows.iter().filter(|r| r.generator == generator && r.method == method).collect();
                let kept: Vec<&&StudyRow> = cell.iter().filter(|r| r.converged && metric.of(r) > 0.0).collect();
                let x: Vec<f64> = kept.iter().map(|r| (r.horizon as f64).log10()).collect();
                let y: Vec<f64> = kept.iter().map(|r| metric.of(r).log10()).collect();
                let (slope, se) = if x.len() >= 2 { ols_slope(&x, &y) } else { (f64::NAN, f64::NAN) };
                slopes.push(SlopeEstimate {
                    generator,
                    method,
                    metric,
                    slope,
                    se,
                    points: kept.len(),
                    excluded: cell.len() - kept.len(),
                });
            }
        }
    }
    Ok(StudyResult { config: cfg.clone(), rows, slopes })
}
