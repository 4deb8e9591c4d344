use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg::solve_psd;
use crate::model::InfluencePair;
use crate::panel::Panel;
use crate::series::{LagSpec, TensorSeries};

use super::{in_sample_r2, maybe_canonicalize, EstimatorConfig, InfluenceFit, Method, ModelKind};

/// Block coordinate descent: alternate the closed-form `B` and `A`
/// updates from `Â = I`, `B̂ = I` until the criterion stalls.
pub fn fit_blin_bcd(series: &TensorSeries, lags: &LagSpec, cfg: &EstimatorConfig) -> Result<InfluenceFit> {
    let panel = Panel::from_series(series, lags)?;
    fit_blin_bcd_panel(&panel, lags, cfg)
}

pub fn fit_blin_bcd_panel(panel: &Panel, lags: &LagSpec, cfg: &EstimatorConfig) -> Result<InfluenceFit> {
    cfg.validate()?;
    let (s, l) = (panel.s, panel.l);
    let mut sxx = DMatrix::zeros(s, s);
    let mut szz = DMatrix::zeros(l, l);
    for (x, z) in panel.xs.iter().zip(&panel.zs) {
        sxx += x * x.transpose();
        szz += z.tr_mul(z);
    }
    let q0 = panel.yty();
    let eta = cfg.eta.threshold(q0);

    let mut a = DMatrix::<f64>::identity(s, s);
    let mut b = DMatrix::<f64>::identity(l, l);
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut prev = q0;
    let mut converged = false;

    for _ in 0..cfg.max_iter {
        // B given A: (ΣZᵀZ)⁻¹ ΣZᵀ(Y − ÂᵀX)
        let mut rhs_b = DMatrix::zeros(l, l);
        for ((x, z), y) in panel.xs.iter().zip(&panel.zs).zip(&panel.ys) {
            rhs_b += z.tr_mul(&(y - a.tr_mul(x)));
        }
        let (nb, fb) = solve_psd(&szz, &rhs_b);
        b = nb;
        // A given B: Âᵀ = Σ(Y − ZB̂)Xᵀ (ΣXXᵀ)⁻¹
        let mut m = DMatrix::zeros(s, s);
        for ((x, z), y) in panel.xs.iter().zip(&panel.zs).zip(&panel.ys) {
            m += (y - z * &b) * x.transpose();
        }
        let (na, fa) = solve_psd(&sxx, &m.transpose());
        a = na;
        if (fa || fb) && warnings.is_empty() {
            warnings.push("singular moment matrix; used pseudo-inverse".to_string());
        }
        let q: f64 = panel
            .xs
            .iter()
            .zip(&panel.zs)
            .zip(&panel.ys)
            .map(|((x, z), y)| (y - a.tr_mul(x) - z * &b).norm_squared())
            .sum();
        trace.push(q);
        if (q - prev).abs() <= eta {
            converged = true;
            break;
        }
        prev = q;
    }

    let pair = maybe_canonicalize(InfluencePair::new(a, b)?, panel);
    let rss = *trace.last().unwrap();
    Ok(InfluenceFit {
        pair,
        kind: ModelKind::Blin,
        method: Method::Bcd,
        lags: lags.clone(),
        iterations: trace.len(),
        initial_criterion: q0,
        criterion_trace: trace,
        converged,
        r2_in: in_sample_r2(rss, q0),
        factors: None,
        design_rank: None,
        lambda: None,
        restart_criteria: Vec::new(),
        warnings,
    })
}
