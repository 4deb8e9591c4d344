//! Data generators: sparse rank-one influence pairs, stationary covariance,
//! signal-to-noise calibration, VAR simulation with burn-in, i.i.d.
//! regressor designs and K-mode generators.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BlinError, Result};
use crate::linalg::{spectral_radius, standard_normal_matrix};
use crate::model::{bilinear_mean, bilinear_theta, blin_mean, blin_theta, InfluencePair};
use crate::multiway::{mode_product, MultiPanel};
use crate::panel::Panel;
use crate::series::{LagSpec, TensorSeries};

/// Above this state dimension the Lyapunov equation is solved by doubling
/// instead of the dense `(I − Θ⊗Θ)` system.
const DIRECT_LYAPUNOV_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Blin,
    Bilinear,
}

impl std::str::FromStr for Generator {
    type Err = BlinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blin" => Ok(Generator::Blin),
            "bilinear" => Ok(Generator::Bilinear),
            other => Err(BlinError::InvalidConfig(format!("unknown generator '{other}'"))),
        }
    }
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::Blin => "blin",
            Generator::Bilinear => "bilinear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSpec {
    pub generator: Generator,
    pub s: usize,
    pub l: usize,
    pub q_sparsity: f64,
    pub target_r2: f64,
    pub horizon: usize,
    /// Steps discarded before the kept window; `max(100 − T, 50)` if unset.
    pub burn_in: Option<usize>,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            generator: Generator::Blin,
            s: 10,
            l: 10,
            q_sparsity: 0.9,
            target_r2: 0.75,
            horizon: 50,
            burn_in: None,
            seed: 0,
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.s < 2 || self.l < 2 {
            return Err(BlinError::InvalidConfig("dimensions must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.q_sparsity) {
            return Err(BlinError::InvalidConfig("q_sparsity must lie in [0, 1)".into()));
        }
        if !(self.target_r2 > 0.0 && self.target_r2 < 1.0) {
            return Err(BlinError::InvalidConfig("target_r2 must lie in (0, 1)".into()));
        }
        if self.horizon == 0 {
            return Err(BlinError::InvalidConfig("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn effective_burn_in(&self) -> usize {
        self.burn_in.unwrap_or_else(|| 100usize.saturating_sub(self.horizon).max(50))
    }

    /// Draw the base pair from `seed`, calibrate and scale it.
    pub fn scenario(&self) -> Result<Scenario> {
        self.validate()?;
        let base = make_influence_pair(self.s, self.l, self.q_sparsity, self.seed);
        let cal = calibrate_snr(self, &base)?;
        let pair = apply_scale(self.generator, &base, cal.scale);
        Ok(Scenario { base, pair, calibration: cal })
    }
}

/// A calibrated generating model.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub base: InfluencePair,
    pub pair: InfluencePair,
    pub calibration: Calibration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    /// Multiplier applied to both `A` and `B`.
    pub scale: f64,
    /// `g / (g + SL)` at the chosen scale.
    pub achieved_r2: f64,
    pub spectral_radius: f64,
}

fn zero_smallest_offdiag(m: &mut DMatrix<f64>, q: f64) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = 0.0;
    }
    let mut off: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();
    let drop = (q * off.len() as f64).floor() as usize;
    off.sort_by(|x, y| m[*x].abs().partial_cmp(&m[*y].abs()).unwrap());
    for &idx in off.iter().take(drop) {
        m[idx] = 0.0;
    }
}

/// Random sparse rank-one pair: `A₀ = uvᵀ`, `B₀ = rsᵀ` with standard-normal
/// vectors, zero diagonals, and the smallest-magnitude fraction `q` of the
/// off-diagonals set to zero.
pub fn make_influence_pair(s: usize, l: usize, q: f64, seed: u64) -> InfluencePair {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    make_influence_pair_with(&mut rng, s, l, q)
}

pub fn make_influence_pair_with<R: Rng + ?Sized>(rng: &mut R, s: usize, l: usize, q: f64) -> InfluencePair {
    let u = standard_normal_matrix(rng, s, 1);
    let v = standard_normal_matrix(rng, s, 1);
    let r = standard_normal_matrix(rng, l, 1);
    let w = standard_normal_matrix(rng, l, 1);
    let mut a = &u * v.transpose();
    let mut b = &r * w.transpose();
    zero_smallest_offdiag(&mut a, q);
    zero_smallest_offdiag(&mut b, q);
    InfluencePair { a, b, canonical_shift: 0.0 }
}

/// One-step operator on `vec(Y)` for the chosen generator.
pub fn generator_theta(generator: Generator, pair: &InfluencePair) -> DMatrix<f64> {
    match generator {
        Generator::Blin => blin_theta(pair),
        Generator::Bilinear => bilinear_theta(pair),
    }
}

/// Scale `A` and `B` by `k`; the BLIN operator scales by `k`, the bilinear
/// one by `k²`.
pub fn apply_scale(_generator: Generator, pair: &InfluencePair, k: f64) -> InfluencePair {
    InfluencePair { a: &pair.a * k, b: &pair.b * k, canonical_shift: 0.0 }
}

/// `E[y yᵀ]` of `y_t = Θ y_{t−1} + e_t` with unit-variance white noise,
/// i.e. the solution of `Σ = Θ Σ Θᵀ + I`.
pub fn stationary_covariance(theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !theta.is_square() {
        return Err(BlinError::Shape("operator must be square".into()));
    }
    let radius = spectral_radius(theta);
    if radius >= 1.0 {
        return Err(BlinError::NonStationary { radius });
    }
    if theta.nrows() <= DIRECT_LYAPUNOV_LIMIT {
        stationary_covariance_direct(theta)
    } else {
        Ok(stationary_covariance_doubling(theta))
    }
}

/// `vec Σ = (I − Θ⊗Θ)⁻¹ vec I`.
pub fn stationary_covariance_direct(theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = theta.nrows();
    let system = DMatrix::<f64>::identity(n * n, n * n) - theta.kronecker(theta);
    let rhs = DVector::from_column_slice(DMatrix::<f64>::identity(n, n).as_slice());
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| BlinError::Degenerate("singular Lyapunov system".into()))?;
    let sigma = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// Doubling iteration `Σ ← Σ + M Σ Mᵀ`, `M ← M²` summing `Σ_k Θᵏ Θᵏᵀ`.
pub fn stationary_covariance_doubling(theta: &DMatrix<f64>) -> DMatrix<f64> {
    let n = theta.nrows();
    let mut sigma = DMatrix::<f64>::identity(n, n);
    let mut m = theta.clone();
    for _ in 0..200 {
        let add = &m * &sigma * m.transpose();
        sigma += &add;
        m = &m * &m;
        if add.amax() <= 1e-17 * sigma.amax() || m.amax() == 0.0 {
            break;
        }
    }
    (&sigma + sigma.transpose()) * 0.5
}

/// Large-sample R² of the true model: `g / (g + SL)` with
/// `g = tr(Θ Σ Θᵀ)`, the stationary variance explained per step.
pub fn large_sample_r2(theta: &DMatrix<f64>) -> Result<f64> {
    let sigma = stationary_covariance(theta)?;
    let g = (theta * sigma * theta.transpose()).trace();
    Ok(g / (g + theta.nrows() as f64))
}

/// Find the scale `k` with large-sample R² within 0.005 of the target.
///
/// R² increases monotonically in `k` up to the stationarity boundary
/// `k* = 1/ρ(Θ₁)` (BLIN) or `1/√ρ(Θ₁)` (bilinear), so bisection on `(0, k*)`
/// brackets the target; the search stops at scale resolution 1e−4 once
/// the tolerance is met.
pub fn calibrate_snr(spec: &SimulationSpec, pair0: &InfluencePair) -> Result<Calibration> {
    if !(spec.target_r2 > 0.0 && spec.target_r2 < 1.0) {
        return Err(BlinError::InvalidConfig("target_r2 must lie in (0, 1)".into()));
    }
    let gen = spec.generator;
    let r2_at = |k: f64| large_sample_r2(&generator_theta(gen, &apply_scale(gen, pair0, k)));
    let rho = spectral_radius(&generator_theta(gen, pair0));
    let mut upper = if rho > 0.0 {
        let k_stat = match gen {
            Generator::Blin => 1.0 / rho,
            Generator::Bilinear => 1.0 / rho.sqrt(),
        };
        k_stat * (1.0 - 1e-9)
    } else {
        // nilpotent operator: every scale is stationary, grow until we pass the target
        let mut hi = 1.0;
        for _ in 0..200 {
            if r2_at(hi)? >= spec.target_r2 {
                break;
            }
            hi *= 2.0;
        }
        hi
    };
    // defective operators (heavily sparsified networks) carry eigenvalue
    // error well above machine precision, so back off from the boundary
    // until the scaled operator is numerically stationary
    let mut backoffs = 0;
    let max_r2 = loop {
        match r2_at(upper) {
            Err(BlinError::NonStationary { .. }) if backoffs < 12 => {
                upper *= 0.9999;
                backoffs += 1;
            }
            other => break other?,
        }
    };
    let (mut lo, mut hi) = (0.0, upper);
    let mut best = (upper, max_r2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r2 = r2_at(mid)?;
        if (r2 - spec.target_r2).abs() < (best.1 - spec.target_r2).abs() {
            best = (mid, r2);
        }
        if r2 < spec.target_r2 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-4 && (best.1 - spec.target_r2).abs() <= 0.005 {
            break;
        }
    }
    let radius = spectral_radius(&generator_theta(gen, &apply_scale(gen, pair0, best.0)));
    Ok(Calibration { scale: best.0, achieved_r2: best.1, spectral_radius: radius })
}

fn noise<R: Rng + ?Sized>(rng: &mut R, s: usize, l: usize) -> DMatrix<f64> {
    DMatrix::from_fn(s, l, |_, _| rng.sample(StandardNormal))
}

/// Random stream for replication `rep` of a seeded experiment.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Simulate `y_t = Θ y_{t−1} + e_t` in matrix form from `y = 0`, discard
/// the burn-in and keep the final `horizon` slices.
pub fn generate(spec: &SimulationSpec, pair: &InfluencePair, replication: u64) -> Result<TensorSeries> {
    let mut rng = replication_rng(spec.seed, replication);
    generate_with(&mut rng, spec.generator, pair, spec.horizon, spec.effective_burn_in())
}

pub fn generate_with<R: Rng + ?Sized>(
    rng: &mut R,
    generator: Generator,
    pair: &InfluencePair,
    horizon: usize,
    burn_in: usize,
) -> Result<TensorSeries> {
    let radius = spectral_radius(&generator_theta(generator, pair));
    if radius >= 1.0 {
        return Err(BlinError::NonStationary { radius });
    }
    let (s, l) = (pair.s(), pair.l());
    let mut y = DMatrix::zeros(s, l);
    let mut kept = Vec::with_capacity(horizon);
    for step in 0..burn_in + horizon {
        let mean = match generator {
            Generator::Blin => blin_mean(pair, &y, &y)?,
            Generator::Bilinear => bilinear_mean(pair, &y)?,
        };
        y = mean + noise(rng, s, l);
        if step >= burn_in {
            kept.push(y.clone());
        }
    }
    TensorSeries::from_matrices(&kept)
}

/// Regression design with i.i.d. standard-normal regressors `X_t = Z_t`
/// and responses `Y_t = μ(X_t) + E_t`, the setting in which the cross-model
/// limits have closed forms.
pub fn iid_regressor_panel<R: Rng + ?Sized>(
    rng: &mut R,
    generator: Generator,
    pair: &InfluencePair,
    horizon: usize,
) -> Result<Panel> {
    let (s, l) = (pair.s(), pair.l());
    let mut xs = Vec::with_capacity(horizon);
    let mut ys = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let x = noise(rng, s, l);
        let mean = match generator {
            Generator::Blin => blin_mean(pair, &x, &x)?,
            Generator::Bilinear => bilinear_mean(pair, &x)?,
        };
        ys.push(mean + noise(rng, s, l));
        xs.push(x);
    }
    Panel::from_parts(xs.clone(), xs, ys)
}

/// Which constants [`pseudo_true_offdiag_constant`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossDirection {
    /// Data from the bilinear model `(A, B)` fitted by BLIN:
    /// `(tr(ΩB)/tr(Ω), tr(ΨA)/tr(Ψ))`.
    BilinearToBlin,
    /// Data from BLIN fitted by the bilinear model with pseudo-true
    /// `(Ā, B̄)`: `(tr(ΩB̄)/tr(ΩB̄B̄ᵀ), tr(ΨĀ)/tr(ΨĀĀᵀ))`.
    BlinToBilinear,
}

/// Multiplicative constants linking cross-model off-diagonal limits to the
/// generating off-diagonals, for regressor column covariance `omega`
/// (L×L) and row covariance `psi` (S×S).
pub fn pseudo_true_offdiag_constant(
    pair: &InfluencePair,
    omega: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    direction: CrossDirection,
) -> Result<(f64, f64)> {
    let (s, l) = (pair.s(), pair.l());
    if omega.shape() != (l, l) || psi.shape() != (s, s) {
        return Err(BlinError::Shape("covariances must be L×L and S×S".into()));
    }
    let ratio = |num: f64, den: f64| -> Result<f64> {
        if den == 0.0 {
            Err(BlinError::Degenerate("zero trace in pseudo-true constant".into()))
        } else {
            Ok(num / den)
        }
    };
    match direction {
        CrossDirection::BilinearToBlin => Ok((
            ratio((omega * &pair.b).trace(), omega.trace())?,
            ratio((psi * &pair.a).trace(), psi.trace())?,
        )),
        CrossDirection::BlinToBilinear => Ok((
            ratio((omega * &pair.b).trace(), (omega * &pair.b * pair.b.transpose()).trace())?,
            ratio((psi * &pair.a).trace(), (psi * &pair.a * pair.a.transpose()).trace())?,
        )),
    }
}

/// Random square network with zero diagonal and a fraction `q` of the
/// smallest off-diagonals zeroed, entries standard normal.
pub fn random_sparse_network<R: Rng + ?Sized>(rng: &mut R, m: usize, q: f64) -> DMatrix<f64> {
    let mut b = standard_normal_matrix(rng, m, m);
    zero_smallest_offdiag(&mut b, q);
    b
}

/// Companion spectral radius of the K-mode model with per-mode lags.
pub fn multiway_spectral_radius(dims: &[usize], lags: &LagSpec, networks: &[DMatrix<f64>]) -> Result<f64> {
    let n: usize = dims.iter().product();
    let p = lags.max();
    let mut f = DMatrix::zeros(n * p, n * p);
    for (k, b) in networks.iter().enumerate() {
        // operator of X ×_k Bᵀ on vec(X)
        let mut op = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let img = mode_product(&e, dims, k, &b.transpose())?;
            op.column_mut(col).copy_from_slice(&img);
        }
        for lag in 0..lags.per_mode()[k] {
            let mut block = f.view_mut((0, lag * n), (n, n));
            block += &op;
        }
    }
    for k in 1..p {
        f.view_mut((k * n, (k - 1) * n), (n, n)).fill_with_identity();
    }
    Ok(spectral_radius(&f))
}

/// Simulate the K-mode model from zero with unit white noise.
pub fn generate_multiway<R: Rng + ?Sized>(
    rng: &mut R,
    dims: &[usize],
    lags: &LagSpec,
    networks: &[DMatrix<f64>],
    horizon: usize,
    burn_in: usize,
) -> Result<TensorSeries> {
    let radius = multiway_spectral_radius(dims, lags, networks)?;
    if radius >= 1.0 {
        return Err(BlinError::NonStationary { radius });
    }
    let n: usize = dims.iter().product();
    let p = lags.max();
    let total = burn_in + horizon;
    let mut history = TensorSeries::zeros(dims.to_vec(), p + total)?;
    for t in p..p + total {
        let mut next: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for (k, b) in networks.iter().enumerate() {
            let x = history.lag_sum_flat(lags.per_mode()[k], t)?;
            let c = mode_product(&x, dims, k, &b.transpose())?;
            for (v, w) in next.iter_mut().zip(c) {
                *v += w;
            }
        }
        history.data_mut()[t * n..(t + 1) * n].copy_from_slice(&next);
    }
    history.window(p + burn_in, p + total)
}

/// Scale networks by a common factor so the companion radius equals
/// `target_radius`.
pub fn scale_to_radius(dims: &[usize], lags: &LagSpec, networks: &[DMatrix<f64>], target_radius: f64) -> Result<Vec<DMatrix<f64>>> {
    let rho = multiway_spectral_radius(dims, lags, networks)?;
    if rho == 0.0 {
        return Ok(networks.to_vec());
    }
    // the radius is not linear in the scale for p > 1, so bisect
    let (mut lo, mut hi) = (0.0, 1.0 / rho);
    while multiway_spectral_radius(dims, lags, &scaled(networks, hi))? < target_radius {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if multiway_spectral_radius(dims, lags, &scaled(networks, mid))? < target_radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(scaled(networks, lo))
}

fn scaled(networks: &[DMatrix<f64>], k: f64) -> Vec<DMatrix<f64>> {
    networks.iter().map(|b| b * k).collect()
}

/// Convenience: the multiway panel of a generated K-mode series.
pub fn multiway_panel(series: &TensorSeries, lags: &LagSpec) -> Result<MultiPanel> {
    MultiPanel::from_series(series, lags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matrix_rank, SVD_RTOL};

    #[test]
    fn sparsity_counts() {
        let p = make_influence_pair(10, 10, 0.0, 1);
        let nz = p.a.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nz, 90);
        assert!(p.a.diagonal().iter().all(|v| *v == 0.0));
        let p = make_influence_pair(10, 10, 0.9, 1);
        assert_eq!(p.a.iter().filter(|v| **v != 0.0).count(), 9);
        assert_eq!(p.b.iter().filter(|v| **v != 0.0).count(), 9);
    }

    #[test]
    fn base_pair_is_rank_one_off_the_diagonal() {
        // zeroing the diagonal of uvᵀ is a full-rank perturbation; putting
        // the products u_i v_i back restores rank one
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let u = standard_normal_matrix(&mut rng, 6, 1);
        let v = standard_normal_matrix(&mut rng, 6, 1);
        let p = make_influence_pair(6, 5, 0.0, 2);
        let mut a = p.a.clone();
        for i in 0..6 {
            a[(i, i)] = u[i] * v[i];
        }
        assert_eq!(matrix_rank(&a, SVD_RTOL), 1);
        assert!(matrix_rank(&p.a, SVD_RTOL) > 2);
    }

    #[test]
    fn covariance_reference_values() {
        let zero = DMatrix::zeros(3, 3);
        assert_eq!(stationary_covariance(&zero).unwrap(), DMatrix::identity(3, 3));
        let scalar = DMatrix::from_element(1, 1, 0.5);
        assert!((stationary_covariance(&scalar).unwrap()[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
        let half = DMatrix::<f64>::identity(4, 4) * 0.5;
        assert!((stationary_covariance(&half).unwrap() - DMatrix::identity(4, 4) * (4.0 / 3.0)).amax() < 1e-13);
        assert!(stationary_covariance(&(DMatrix::<f64>::identity(2, 2) * 1.1)).is_err());
    }

    #[test]
    fn doubling_matches_direct() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut theta = standard_normal_matrix(&mut rng, 9, 9);
        let rho = spectral_radius(&theta);
        theta /= rho / 0.9;
        let a = stationary_covariance_direct(&theta).unwrap();
        let b = stationary_covariance_doubling(&theta);
        assert!((a - b).amax() < 1e-9);
    }

    #[test]
    fn scalar_calibration_closed_form() {
        // S = L = 1 with A = B = 1/2: θ = k, R² = θ²  ⇒  θ = √0.75
        let pair = InfluencePair::new(DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 0.5)).unwrap();
        let spec = SimulationSpec { s: 1, l: 1, ..Default::default() };
        let cal = calibrate_snr(&spec, &pair).unwrap();
        assert!((cal.achieved_r2 - 0.75).abs() <= 0.005);
        assert!((cal.scale - 0.75f64.sqrt()).abs() < 5e-3);
    }

    #[test]
    fn tiny_target_gives_tiny_scale() {
        let pair = make_influence_pair(3, 3, 0.0, 4);
        let spec = SimulationSpec { s: 3, l: 3, target_r2: 1e-4, ..Default::default() };
        let cal = calibrate_snr(&spec, &pair).unwrap();
        let hi = calibrate_snr(&SimulationSpec { target_r2: 0.5, ..spec.clone() }, &pair).unwrap();
        assert!(cal.scale < 0.05 * hi.scale);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SimulationSpec { s: 3, l: 2, horizon: 20, seed: 9, ..Default::default() };
        let sc = spec.scenario().unwrap();
        let a = generate(&spec, &sc.pair, 0).unwrap();
        let b = generate(&spec, &sc.pair, 0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(&spec, &sc.pair, 1).unwrap());
    }

    #[test]
    fn zero_operator_gives_white_noise() {
        let spec = SimulationSpec { s: 4, l: 5, horizon: 2000, seed: 1, ..Default::default() };
        let y = generate(&spec, &InfluencePair::zeros(4, 5), 0).unwrap();
        let var = y.data().iter().map(|v| v * v).sum::<f64>() / y.data().len() as f64;
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn pseudo_true_constants() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let pair = InfluencePair::new(standard_normal_matrix(&mut rng, 3, 3), standard_normal_matrix(&mut rng, 4, 4))
            .unwrap();
        let (ca, _) = pseudo_true_offdiag_constant(&pair, &DMatrix::identity(4, 4), &DMatrix::identity(3, 3), CrossDirection::BilinearToBlin)
            .unwrap();
        assert!((ca - pair.b.trace() / 4.0).abs() < 1e-14);
        let g = standard_normal_matrix(&mut rng, 4, 4);
        let omega = &g * g.transpose();
        let eye = InfluencePair::new(pair.a.clone(), DMatrix::identity(4, 4)).unwrap();
        let (c1, _) = pseudo_true_offdiag_constant(&eye, &omega, &DMatrix::identity(3, 3), CrossDirection::BilinearToBlin).unwrap();
        assert!((c1 - 1.0).abs() < 1e-14);
        let (c, _) = pseudo_true_offdiag_constant(&pair, &omega, &DMatrix::identity(3, 3), CrossDirection::BilinearToBlin).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..4 {
            den += omega[(i, i)];
            for j in 0..4 {
                num += omega[(i, j)] * pair.b[(j, i)];
            }
        }
        assert!((c - num / den).abs() < 1e-12);
    }

    #[test]
    fn multiway_radius_matches_bipartite_companion() {
        let pair = make_influence_pair(3, 2, 0.0, 6);
        let lags = LagSpec::new(2, 1).unwrap();
        let r_multi = multiway_spectral_radius(&[3, 2], &lags, &[pair.a.clone(), pair.b.clone()]).unwrap();
        let r_bi = crate::model::companion(&pair, &lags).spectral_radius;
        assert!((r_multi - r_bi).abs() < 1e-10);
    }
}
