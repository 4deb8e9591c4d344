use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{BlinError, Result};
use crate::linalg::{solve_psd, standard_normal_matrix};
use crate::model::InfluencePair;
use crate::panel::Panel;
use crate::series::{LagSpec, TensorSeries};

use super::{in_sample_r2, EstimatorConfig, InfluenceFit, Method, ModelKind};

/// Second moments of `vec(X_t)` and `vec(Y_t)` summed over time.
///
/// Every alternating update and the criterion are contractions of these
/// two SL×SL matrices, so an iteration costs `O(S²L²)` regardless of the
/// number of time points.
#[derive(Debug, Clone)]
pub struct BilinearMoments {
    pub s: usize,
    pub l: usize,
    /// `Σ vec(X) vec(X)ᵀ`, indexed by `(s + S·l, s' + S·l')`.
    pub cxx: DMatrix<f64>,
    /// `Σ vec(X) vec(Y)ᵀ`, indexed by `(s + S·l, i + S·j)`.
    pub cxy: DMatrix<f64>,
    pub yty: f64,
}

impl BilinearMoments {
    pub fn from_panel(panel: &Panel) -> Self {
        let n = panel.s * panel.l;
        let mut cxx = DMatrix::zeros(n, n);
        let mut cxy = DMatrix::zeros(n, n);
        for (x, y) in panel.xs.iter().zip(&panel.ys) {
            let vx = DVector::from_column_slice(x.as_slice());
            let vy = DVector::from_column_slice(y.as_slice());
            cxx.ger(1.0, &vx, &vx, 1.0);
            cxy.ger(1.0, &vx, &vy, 1.0);
        }
        BilinearMoments { s: panel.s, l: panel.l, cxx, cxy, yty: panel.yty() }
    }

    /// `(Σ XᵀAAᵀX, Σ XᵀA Y)`, the normal equations for `B` given `A`.
    fn b_system(&self, a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (s, l) = (self.s, self.l);
        let aat = a * a.transpose();
        let mut g = DMatrix::zeros(l, l);
        let mut r = DMatrix::zeros(l, l);
        for lp in 0..l {
            for lq in 0..l {
                g[(lp, lq)] = aat.dot(&self.cxx.view((s * lp, s * lq), (s, s)));
                r[(lp, lq)] = a.dot(&self.cxy.view((s * lp, s * lq), (s, s)));
            }
        }
        (g, r)
    }

    /// `(Σ XBBᵀXᵀ, Σ YBᵀXᵀ)`, the normal equations for `Aᵀ` given `B`.
    fn a_system(&self, b: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let (s, l) = (self.s, self.l);
        let bbt = b * b.transpose();
        let mut g = DMatrix::zeros(s, s);
        let mut n = DMatrix::zeros(s, s);
        for lq in 0..l {
            for lp in 0..l {
                let (wg, wn) = (bbt[(lp, lq)], b[(lp, lq)]);
                for c in 0..s {
                    for r in 0..s {
                        g[(r, c)] += wg * self.cxx[(s * lp + r, s * lq + c)];
                        n[(r, c)] += wn * self.cxy[(s * lp + r, s * lq + c)];
                    }
                }
            }
        }
        (g, n.transpose())
    }

    /// `Σ‖Y − AᵀXB‖²` evaluated from the moments.
    pub fn criterion(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let (g, m) = self.a_system(b);
        self.yty - 2.0 * a.transpose().dot(&m) + (a * a.transpose()).dot(&g)
    }
}

#[derive(Debug, Clone)]
struct RestartResult {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    trace: Vec<f64>,
    converged: bool,
    fallback: bool,
}

fn run_restart(mom: &BilinearMoments, a0: DMatrix<f64>, eta: f64, max_iter: usize) -> RestartResult {
    let mut a = a0;
    let mut b = DMatrix::zeros(mom.l, mom.l);
    let mut trace = Vec::new();
    let mut prev = mom.yty;
    let mut converged = false;
    let mut fallback = false;
    for _ in 0..max_iter {
        let (gb, rb) = mom.b_system(&a);
        let (nb, f1) = solve_psd(&gb, &rb);
        b = nb;
        let (ga, ma) = mom.a_system(&b);
        let (na, f2) = solve_psd(&ga, &ma.transpose());
        a = na;
        fallback |= f1 || f2;
        let q = mom.yty - 2.0 * a.transpose().dot(&ma) + (&a * a.transpose()).dot(&ga);
        trace.push(q);
        if (q - prev).abs() <= eta {
            converged = true;
            break;
        }
        prev = q;
    }
    RestartResult { a, b, trace, converged, fallback }
}

/// Scale so that `‖A‖_F = ‖B‖_F` and flip signs so that `tr(A) ≥ 0`.
/// Both moves leave `AᵀXB` unchanged.
pub(crate) fn gauge(mut a: DMatrix<f64>, mut b: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (na, nb) = (a.norm(), b.norm());
    if na > 0.0 && nb > 0.0 {
        let c = (nb / na).sqrt();
        a *= c;
        b /= c;
    }
    if a.trace() < 0.0 {
        a = -a;
        b = -b;
    }
    (a, b)
}

/// Alternating least squares for `Y_t = Aᵀ X_t B + E_t` with restarts.
///
/// Restart 0 starts from `A = I`; the others from standard-normal `A`.
/// Each iteration updates `B` given `A`, then `A` given `B`. The restart
/// with the smallest final criterion is returned, ties going to the lower
/// restart index.
pub fn fit_bilinear(series: &TensorSeries, lags: &LagSpec, cfg: &EstimatorConfig) -> Result<InfluenceFit> {
    if !lags.shared_regressor() {
        return Err(BlinError::InvalidConfig(format!(
            "the bilinear model needs equal lags, got {lags}"
        )));
    }
    let panel = Panel::from_series(series, lags)?;
    fit_bilinear_panel(&panel, lags, cfg)
}

pub fn fit_bilinear_panel(panel: &Panel, lags: &LagSpec, cfg: &EstimatorConfig) -> Result<InfluenceFit> {
    cfg.validate()?;
    if !panel.shared_regressors {
        return Err(BlinError::InvalidConfig(
            "the bilinear model needs one shared regressor (equal lags)".into(),
        ));
    }
    let mom = BilinearMoments::from_panel(panel);
    let eta = cfg.eta.threshold(mom.yty);
    let s = panel.s;
    let starts: Vec<DMatrix<f64>> = (0..cfg.restarts)
        .map(|r| {
            if r == 0 {
                DMatrix::identity(s, s)
            } else {
                let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
                rng.set_stream(r as u64);
                standard_normal_matrix(&mut rng, s, s)
            }
        })
        .collect();
    let results: Vec<RestartResult> =
        starts.into_par_iter().map(|a0| run_restart(&mom, a0, eta, cfg.max_iter)).collect();

    let final_q = |r: &RestartResult| *r.trace.last().unwrap_or(&f64::INFINITY);
    let restart_criteria: Vec<f64> = results.iter().map(final_q).collect();
    let best_idx = (0..results.len())
        .fold(0, |best, i| if restart_criteria[i] < restart_criteria[best] { i } else { best });
    let best = &results[best_idx];
    let mut warnings = Vec::new();
    if results.iter().all(|r| !r.converged) {
        warnings.push("no restart converged; returning the best-effort fit".to_string());
    }
    if best.fallback {
        warnings.push("singular moment matrix; used pseudo-inverse".to_string());
    }
    let (a, b) = gauge(best.a.clone(), best.b.clone());
    let pair = InfluencePair::new(a, b)?;
    let rss = panel.rss(&panel.fitted_bilinear(&pair)?);
    Ok(InfluenceFit {
        pair,
        kind: ModelKind::Bilinear,
        method: Method::Bilinear,
        lags: lags.clone(),
        iterations: best.trace.len(),
        initial_criterion: mom.yty,
        criterion_trace: best.trace.clone(),
        converged: best.converged,
        r2_in: in_sample_r2(rss, mom.yty),
        factors: None,
        design_rank: None,
        lambda: None,
        restart_criteria,
        warnings,
    })
}
