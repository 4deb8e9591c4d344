//! The bipartite influence model: parameters, mean function, VAR companion
//! form and the identifiability convention.

use nalgebra::{DMatrix, DVector};

use crate::error::{BlinError, Result};
use crate::linalg::spectral_radius;
use crate::series::{LagSpec, TensorSeries};

/// Default cap on the number of entries of a dense stacked design.
pub const DEFAULT_ELEMENT_BUDGET: usize = 200_000_000;

/// Row influence network `a` (S×S) and column influence network `b` (L×L).
#[derive(Debug, Clone, PartialEq)]
pub struct InfluencePair {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Shift `c` that was added to `a`'s diagonal (and removed from `b`'s)
    /// by [`canonicalize`]; zero for pairs that were never canonicalized.
    pub canonical_shift: f64,
}

impl InfluencePair {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || !b.is_square() {
            return Err(BlinError::Shape(format!(
                "influence matrices must be square, got {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(BlinError::Degenerate("non-finite influence entry".into()));
        }
        Ok(InfluencePair { a, b, canonical_shift: 0.0 })
    }

    pub fn zeros(s: usize, l: usize) -> Self {
        InfluencePair { a: DMatrix::zeros(s, s), b: DMatrix::zeros(l, l), canonical_shift: 0.0 }
    }

    pub fn s(&self) -> usize {
        self.a.nrows()
    }

    pub fn l(&self) -> usize {
        self.b.nrows()
    }

    /// S×L matrix with entries `a_ii + b_jj`, the identifiable part of the
    /// diagonals.
    pub fn diag_effect(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.s(), self.l(), |i, j| self.a[(i, i)] + self.b[(j, j)])
    }

    /// Shift `c` moving diagonal mass from `b` to `a`: `(A + cI, B − cI)`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for i in 0..out.s() {
            out.a[(i, i)] += c;
        }
        for j in 0..out.l() {
            out.b[(j, j)] -= c;
        }
        out.canonical_shift += c;
        out
    }

    /// Parameter vector `[vec(Aᵀ); vec(B)]` matching [`build_design`] columns.
    pub fn to_theta(&self) -> DVector<f64> {
        let at = self.a.transpose();
        DVector::from_iterator(
            at.len() + self.b.len(),
            at.iter().chain(self.b.iter()).cloned(),
        )
    }

    pub fn from_theta(theta: &[f64], s: usize, l: usize) -> Result<Self> {
        if theta.len() != s * s + l * l {
            return Err(BlinError::Shape(format!(
                "theta has {} entries, expected {}",
                theta.len(),
                s * s + l * l
            )));
        }
        let at = DMatrix::from_column_slice(s, s, &theta[..s * s]);
        let b = DMatrix::from_column_slice(l, l, &theta[s * s..]);
        InfluencePair::new(at.transpose(), b)
    }
}

fn mean_diag(m: &DMatrix<f64>) -> f64 {
    m.diagonal().sum() / m.nrows() as f64
}

/// Equalize the mean diagonals of `a` and `b` via the shift
/// `c = (mean diag b − mean diag a) / 2`.
pub fn canonicalize(pair: &InfluencePair) -> InfluencePair {
    let c = (mean_diag(&pair.b) - mean_diag(&pair.a)) / 2.0;
    if c == 0.0 {
        return pair.clone();
    }
    pair.shifted(c)
}

/// `AᵀX + ZB`.
pub fn blin_mean(pair: &InfluencePair, x: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (s, l) = (pair.s(), pair.l());
    if x.shape() != (s, l) || z.shape() != (s, l) {
        return Err(BlinError::Shape(format!(
            "regressors {:?}/{:?} do not conform to A {s}×{s}, B {l}×{l}",
            x.shape(),
            z.shape()
        )));
    }
    Ok(pair.a.tr_mul(x) + z * &pair.b)
}

/// `AᵀXB`.
pub fn bilinear_mean(pair: &InfluencePair, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (s, l) = (pair.s(), pair.l());
    if x.shape() != (s, l) {
        return Err(BlinError::Shape(format!(
            "regressor {:?} does not conform to A {s}×{s}, B {l}×{l}",
            x.shape()
        )));
    }
    Ok(pair.a.tr_mul(x) * &pair.b)
}

/// VAR representation of a fitted or generating pair.
#[derive(Debug, Clone)]
pub struct CompanionSystem {
    pub theta1: DMatrix<f64>,
    pub theta2: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub spectral_radius: f64,
}

/// `I_L ⊗ Aᵀ + Bᵀ ⊗ I_S`, the one-step operator on `vec(Y)`.
pub fn blin_theta(pair: &InfluencePair) -> DMatrix<f64> {
    let (s, l) = (pair.s(), pair.l());
    DMatrix::<f64>::identity(l, l).kronecker(&pair.a.transpose())
        + pair.b.transpose().kronecker(&DMatrix::<f64>::identity(s, s))
}

/// `Bᵀ ⊗ Aᵀ`, the one-step operator of the bilinear model.
pub fn bilinear_theta(pair: &InfluencePair) -> DMatrix<f64> {
    pair.b.transpose().kronecker(&pair.a.transpose())
}

pub fn companion(pair: &InfluencePair, lags: &LagSpec) -> CompanionSystem {
    let (s, l) = (pair.s(), pair.l());
    let n = s * l;
    let (pa, pb) = (lags.p_a(), lags.p_b());
    let p = pa.max(pb);
    let q = pa.min(pb);
    let theta1 = blin_theta(pair);
    let theta2 = if pa > pb {
        DMatrix::<f64>::identity(l, l).kronecker(&pair.a.transpose())
    } else if pb > pa {
        pair.b.transpose().kronecker(&DMatrix::<f64>::identity(s, s))
    } else {
        DMatrix::zeros(n, n)
    };
    let mut f = DMatrix::zeros(n * p, n * p);
    for k in 0..p {
        let block = if k < q { &theta1 } else { &theta2 };
        f.view_mut((0, k * n), (n, n)).copy_from(block);
    }
    for k in 1..p {
        f.view_mut((k * n, (k - 1) * n), (n, n)).fill_with_identity();
    }
    let spectral_radius = spectral_radius(&f);
    CompanionSystem { theta1, theta2, f, spectral_radius }
}

/// Spectral radius of the companion matrix of the bilinear model with
/// regressor `Y_{t-1} + ... + Y_{t-p}`.
pub fn bilinear_companion_radius(pair: &InfluencePair, p: usize) -> f64 {
    let theta = bilinear_theta(pair);
    let n = theta.nrows();
    let mut f = DMatrix::zeros(n * p, n * p);
    for k in 0..p {
        f.view_mut((0, k * n), (n, n)).copy_from(&theta);
    }
    for k in 1..p {
        f.view_mut((k * n, (k - 1) * n), (n, n)).fill_with_identity();
    }
    spectral_radius(&f)
}

pub fn is_stationary(sys: &CompanionSystem, margin: f64) -> bool {
    sys.spectral_radius < 1.0 - margin
}

/// Dense stacked design `[X_tᵀ ⊗ I_S, I_L ⊗ Z_t]` over usable `t` and the
/// matching response `vec(Y_t)`.
pub fn build_design(series: &TensorSeries, lags: &LagSpec) -> Result<(DMatrix<f64>, DVector<f64>)> {
    build_design_with_budget(series, lags, DEFAULT_ELEMENT_BUDGET)
}

pub fn build_design_with_budget(
    series: &TensorSeries,
    lags: &LagSpec,
    budget: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let panel = crate::panel::Panel::from_series(series, lags)?;
    panel.design(budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standard_normal_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_pair(s: usize, l: usize, seed: u64) -> InfluencePair {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        InfluencePair::new(standard_normal_matrix(&mut rng, s, s), standard_normal_matrix(&mut rng, l, l))
            .unwrap()
    }

    #[test]
    fn mean_of_zero_pair_is_zero() {
        let x = DMatrix::from_element(2, 3, 1.5);
        let m = blin_mean(&InfluencePair::zeros(2, 3), &x, &x).unwrap();
        assert_eq!(m, DMatrix::zeros(2, 3));
    }

    #[test]
    fn identity_a_passes_x_through() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let x = standard_normal_matrix(&mut rng, 3, 4);
        let z = standard_normal_matrix(&mut rng, 3, 4);
        let pair = InfluencePair::new(DMatrix::identity(3, 3), DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(blin_mean(&pair, &x, &z).unwrap(), x);
    }

    #[test]
    fn mean_matches_vectorized_form() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (s, l) = (3, 4);
        let pair = random_pair(s, l, 4);
        let x = standard_normal_matrix(&mut rng, s, l);
        let z = standard_normal_matrix(&mut rng, s, l);
        let xa = x.transpose().kronecker(&DMatrix::<f64>::identity(s, s));
        let zb = DMatrix::<f64>::identity(l, l).kronecker(&z);
        let vec_at = DVector::from_column_slice(pair.a.transpose().as_slice());
        let vec_b = DVector::from_column_slice(pair.b.as_slice());
        let v = xa * vec_at + zb * vec_b;
        let m = blin_mean(&pair, &x, &z).unwrap();
        assert!((DVector::from_column_slice(m.as_slice()) - v).amax() < 1e-12);
    }

    #[test]
    fn mean_rejects_bad_shapes() {
        let x = DMatrix::zeros(2, 2);
        assert!(blin_mean(&InfluencePair::zeros(2, 3), &x, &x).is_err());
    }

    #[test]
    fn companion_of_zero_is_zero() {
        let sys = companion(&InfluencePair::zeros(2, 2), &LagSpec::new(1, 1).unwrap());
        assert_eq!(sys.spectral_radius, 0.0);
        assert!(is_stationary(&sys, 0.0));
    }

    #[test]
    fn lag_one_companion_is_theta1() {
        let pair = random_pair(2, 3, 5);
        let sys = companion(&pair, &LagSpec::new(1, 1).unwrap());
        assert_eq!(sys.f, sys.theta1);
    }

    #[test]
    fn companion_radius_of_scaled_identities() {
        let pair = InfluencePair::new(DMatrix::identity(2, 2) * 0.3, DMatrix::identity(2, 2) * 0.2).unwrap();
        let sys = companion(&pair, &LagSpec::new(1, 1).unwrap());
        assert!((sys.spectral_radius - 0.5).abs() < 1e-12);
        assert!(is_stationary(&sys, 0.0));
        let big = InfluencePair::new(pair.a * 2.2, pair.b * 2.2).unwrap();
        let sys = companion(&big, &LagSpec::new(1, 1).unwrap());
        assert!((sys.spectral_radius - 1.1).abs() < 1e-12);
        assert!(!is_stationary(&sys, 0.0));
    }

    #[test]
    fn companion_layout_with_unequal_lags() {
        let pair = random_pair(2, 2, 6);
        let sys = companion(&pair, &LagSpec::new(3, 1).unwrap());
        let n = 4;
        assert_eq!(sys.f.shape(), (12, 12));
        assert_eq!(sys.f.view((0, 0), (n, n)), sys.theta1);
        assert_eq!(sys.f.view((0, n), (n, n)), sys.theta2);
        assert_eq!(sys.f.view((0, 2 * n), (n, n)), sys.theta2);
        assert_eq!(sys.f.view((n, 0), (2 * n, 2 * n)), DMatrix::<f64>::identity(8, 8));
        let expected_t2 = DMatrix::<f64>::identity(2, 2).kronecker(&pair.a.transpose());
        assert_eq!(sys.theta2, expected_t2);
    }

    #[test]
    fn canonicalize_identity_and_zero() {
        let pair = InfluencePair::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 2)).unwrap();
        let c = canonicalize(&pair);
        assert!((c.canonical_shift + 0.5).abs() < 1e-15);
        assert_eq!(c.a.diagonal().as_slice(), &[0.5, 0.5]);
        assert_eq!(c.b.diagonal().as_slice(), &[0.5, 0.5]);
        assert_eq!(canonicalize(&c), c);
    }

    #[test]
    fn canonicalize_preserves_diag_effect() {
        let pair = random_pair(4, 3, 8);
        let c = canonicalize(&pair);
        assert!((c.diag_effect() - pair.diag_effect()).amax() < 1e-12);
        assert!((mean_diag(&c.a) - mean_diag(&c.b)).abs() < 1e-12);
    }

    #[test]
    fn theta_round_trip() {
        let pair = random_pair(3, 2, 9);
        let back = InfluencePair::from_theta(pair.to_theta().as_slice(), 3, 2).unwrap();
        assert_eq!(back, pair);
    }
}
