//! R² along the straight line between true and fitted coefficients.

use serde::Serialize;

use crate::error::Result;
use crate::estimators::ModelKind;
use crate::model::InfluencePair;
use crate::panel::Panel;

use super::metrics::r_squared_slices;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanPoint {
    pub xi: f64,
    pub r2_in: f64,
    pub r2_out: f64,
}

/// `(1 − ξ)·θ_true + ξ·θ̂`, entrywise on both networks.
pub fn mix(truth: &InfluencePair, fitted: &InfluencePair, xi: f64) -> InfluencePair {
    InfluencePair {
        a: &truth.a * (1.0 - xi) + &fitted.a * xi,
        b: &truth.b * (1.0 - xi) + &fitted.b * xi,
        canonical_shift: 0.0,
    }
}

pub fn likelihood_line_scan(
    train: &Panel,
    test: &Panel,
    truth: &InfluencePair,
    fitted: &InfluencePair,
    grid: &[f64],
    kind: ModelKind,
) -> Result<Vec<ScanPoint>> {
    grid.iter()
        .map(|&xi| {
            let pair = mix(truth, fitted, xi);
            let predict = |p: &Panel| match kind {
                ModelKind::Blin => p.fitted_blin(&pair),
                ModelKind::Bilinear => p.fitted_bilinear(&pair),
            };
            Ok(ScanPoint {
                xi,
                r2_in: r_squared_slices(&train.ys, &predict(train)?)?,
                r2_out: r_squared_slices(&test.ys, &predict(test)?)?,
            })
        })
        .collect()
}

/// Rescale a bilinear fit `(cÂ, B̂/c)` with the `c` that brings it closest
/// to `truth` in summed squared Frobenius distance. The bilinear mean is
/// unchanged by this move.
pub fn align_scale(truth: &InfluencePair, fitted: &InfluencePair) -> InfluencePair {
    let dist = |c: f64| {
        (&fitted.a * c - &truth.a).norm_squared() + (&fitted.b / c - &truth.b).norm_squared()
    };
    let mut best = (1.0, dist(1.0));
    for sign in [1.0, -1.0] {
        // coarse log grid, then golden-section refinement in log |c|
        let mut lo_best = 0.0;
        let mut val_best = f64::INFINITY;
        for k in -120..=120 {
            let lc = k as f64 * 0.05;
            let v = dist(sign * lc.exp());
            if v < val_best {
                val_best = v;
                lo_best = lc;
            }
        }
        let (mut lo, mut hi) = (lo_best - 0.05, lo_best + 0.05);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if dist(sign * m1.exp()) < dist(sign * m2.exp()) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let c = sign * (0.5 * (lo + hi)).exp();
        let v = dist(c);
        if v < best.1 {
            best = (c, v);
        }
    }
    InfluencePair { a: &fitted.a * best.0, b: &fitted.b / best.0, canonical_shift: 0.0 }
}
