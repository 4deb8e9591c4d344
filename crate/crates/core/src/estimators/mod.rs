//! Estimators for the bipartite model and the bilinear baseline.

mod bcd;
mod bilinear;
mod exact;
pub mod lasso;
mod rank;
mod reduced_rank;
pub(crate) mod sparse;

pub use bcd::{fit_blin_bcd, fit_blin_bcd_panel};
pub use bilinear::{fit_bilinear, fit_bilinear_panel, BilinearMoments};
pub use exact::{fit_blin_exact, fit_blin_exact_panel};
pub use rank::{design_rank_check, design_rank_check_panel, RankCheck};
pub use reduced_rank::{fit_blin_reduced_rank, fit_blin_reduced_rank_from, fit_blin_reduced_rank_panel};
pub use sparse::{fit_blin_sparse, fit_blin_sparse_panel, SparsePath};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{BlinError, Result};
use crate::model::{canonicalize, InfluencePair, DEFAULT_ELEMENT_BUDGET};
use crate::panel::Panel;
use crate::series::{LagSpec, TensorSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Bcd,
    Sparse,
    ReducedRank,
    Bilinear,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Bcd => "bcd",
            Method::Sparse => "sparse",
            Method::ReducedRank => "reduced_rank",
            Method::Bilinear => "bilinear",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = BlinError;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "exact" => Ok(Method::Exact),
            "bcd" => Ok(Method::Bcd),
            "sparse" => Ok(Method::Sparse),
            "reduced_rank" => Ok(Method::ReducedRank),
            "bilinear" => Ok(Method::Bilinear),
            other => Err(BlinError::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = BlinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blin" => Ok(ModelKind::Blin),
            "bilinear" => Ok(ModelKind::Bilinear),
            other => Err(BlinError::InvalidConfig(format!("unknown model '{other}'"))),
        }
    }
}

/// Which model family a fit belongs to; decides how predictions are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Blin,
    Bilinear,
}

/// Stopping rule on successive criterion values `|Q_ν − Q_{ν−1}| ≤ η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    /// `η = factor · Q₀` with `Q₀ = Σ‖Y_t‖²`.
    Relative(f64),
    Absolute(f64),
}

impl Tolerance {
    pub fn threshold(&self, q0: f64) -> f64 {
        match *self {
            Tolerance::Relative(r) => r * q0,
            Tolerance::Absolute(a) => a,
        }
    }
}

/// Penalty choice for the sparse estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaChoice {
    Fixed(f64),
    /// Pick from the default log grid by K-fold cross-validation.
    CrossValidated { folds: usize },
    /// Pick from an explicit grid by K-fold cross-validation.
    Grid { values: Vec<f64>, folds: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    pub eta: Tolerance,
    pub max_iter: usize,
    pub lambda: LambdaChoice,
    pub rank_a: usize,
    pub rank_b: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Cap on dense matrix entries for paths that materialize a design.
    pub element_budget: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            method: Method::Bcd,
            eta: Tolerance::Relative(1e-8),
            max_iter: 500,
            lambda: LambdaChoice::CrossValidated { folds: 10 },
            rank_a: 1,
            rank_b: 1,
            restarts: 10,
            seed: 0,
            element_budget: DEFAULT_ELEMENT_BUDGET,
        }
    }
}

impl EstimatorConfig {
    pub fn with_method(method: Method) -> Self {
        EstimatorConfig { method, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let eta_ok = match self.eta {
            Tolerance::Relative(v) | Tolerance::Absolute(v) => v > 0.0 && v.is_finite(),
        };
        if !eta_ok {
            return Err(BlinError::InvalidConfig("eta must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(BlinError::InvalidConfig("max_iter must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(BlinError::InvalidConfig("restarts must be positive".into()));
        }
        match &self.lambda {
            LambdaChoice::Fixed(l) if !(*l >= 0.0) => {
                return Err(BlinError::InvalidConfig("lambda must be nonnegative".into()))
            }
            LambdaChoice::Grid { values, .. } if values.is_empty() || values.iter().any(|l| !(*l >= 0.0)) => {
                return Err(BlinError::InvalidConfig("lambda grid must be nonempty and nonnegative".into()))
            }
            LambdaChoice::CrossValidated { folds } | LambdaChoice::Grid { folds, .. } if *folds < 2 => {
                return Err(BlinError::InvalidConfig("cross-validation needs at least 2 folds".into()))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Low-rank factors with `Aᵀ = U Vᵀ` and `B = Rf Sfᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub rf: DMatrix<f64>,
    pub sf: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct InfluenceFit {
    pub pair: InfluencePair,
    pub kind: ModelKind,
    pub method: Method,
    pub lags: LagSpec,
    pub iterations: usize,
    /// `Q₀ = Σ‖Y_t‖²`, the starting value of the stopping rule.
    pub initial_criterion: f64,
    /// `Q_1, …, Q_ν` for iterative methods; a single entry otherwise.
    pub criterion_trace: Vec<f64>,
    pub converged: bool,
    pub r2_in: f64,
    pub factors: Option<Factors>,
    pub design_rank: Option<usize>,
    pub lambda: Option<f64>,
    pub restart_criteria: Vec<f64>,
    pub warnings: Vec<String>,
}

impl InfluenceFit {
    pub fn diag_effect(&self) -> DMatrix<f64> {
        self.pair.diag_effect()
    }

    pub fn criterion(&self) -> f64 {
        *self.criterion_trace.last().unwrap_or(&self.initial_criterion)
    }

    pub fn nonzeros(&self) -> usize {
        self.pair.a.iter().chain(self.pair.b.iter()).filter(|v| **v != 0.0).count()
    }

    pub fn predict(&self, panel: &Panel) -> Result<Vec<DMatrix<f64>>> {
        match self.kind {
            ModelKind::Blin => panel.fitted_blin(&self.pair),
            ModelKind::Bilinear => panel.fitted_bilinear(&self.pair),
        }
    }
}

/// Fit the configured method to a series.
pub fn fit(series: &TensorSeries, lags: &LagSpec, cfg: &EstimatorConfig) -> Result<InfluenceFit> {
    let panel = Panel::from_series(series, lags)?;
    fit_panel(&panel, lags, cfg)
}

/// Fit the configured method to a prepared panel.
pub fn fit_panel(panel: &Panel, lags: &LagSpec, cfg: &EstimatorConfig) -> Result<InfluenceFit> {
    cfg.validate()?;
    match cfg.method {
        Method::Exact => fit_blin_exact_panel(panel, lags, cfg.element_budget),
        Method::Bcd => fit_blin_bcd_panel(panel, lags, cfg),
        Method::Sparse => fit_blin_sparse_panel(panel, lags, cfg).map(|(f, _)| f),
        Method::ReducedRank => fit_blin_reduced_rank_panel(panel, lags, cfg),
        Method::Bilinear => fit_bilinear_panel(panel, lags, cfg),
    }
}

pub(crate) fn in_sample_r2(rss: f64, yty: f64) -> f64 {
    if yty > 0.0 {
        1.0 - rss / yty
    } else {
        f64::NAN
    }
}

/// Canonicalize only when the diagonal shift is a true symmetry.
pub(crate) fn maybe_canonicalize(pair: InfluencePair, panel: &Panel) -> InfluencePair {
    if panel.shared_regressors {
        canonicalize(&pair)
    } else {
        pair
    }
}
