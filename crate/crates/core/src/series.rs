//! Time-indexed sequences of equally shaped real arrays.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{BlinError, Result};

/// An ordered sequence of `horizon` arrays sharing the shape `dims`.
///
/// Each slice is stored column-major (first mode fastest), slices are
/// contiguous and time-ordered. For the bipartite case `dims == [S, L]`
/// and a slice is the S×L matrix `Y_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSeries {
    dims: Vec<usize>,
    horizon: usize,
    data: Vec<f64>,
    labels: Option<Vec<Vec<String>>>,
}

impl TensorSeries {
    pub fn new(dims: Vec<usize>, horizon: usize, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(BlinError::Shape(format!("invalid dims {dims:?}")));
        }
        if horizon == 0 {
            return Err(BlinError::InsufficientData { horizon, required: 0 });
        }
        let len: usize = dims.iter().product();
        if data.len() != len * horizon {
            return Err(BlinError::Shape(format!(
                "expected {} values for dims {dims:?} over {horizon} steps, got {}",
                len * horizon,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(BlinError::Degenerate(format!(
                "non-finite value at slice {}",
                pos / len
            )));
        }
        Ok(TensorSeries { dims, horizon, data, labels: None })
    }

    pub fn from_matrices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or(BlinError::InsufficientData { horizon: 0, required: 0 })?;
        let (s, l) = first.shape();
        let mut data = Vec::with_capacity(s * l * slices.len());
        for (t, m) in slices.iter().enumerate() {
            if m.shape() != (s, l) {
                return Err(BlinError::Shape(format!(
                    "slice {t} is {:?}, expected {:?}",
                    m.shape(),
                    (s, l)
                )));
            }
            data.extend_from_slice(m.as_slice());
        }
        TensorSeries::new(vec![s, l], slices.len(), data)
    }

    pub fn zeros(dims: Vec<usize>, horizon: usize) -> Result<Self> {
        let len: usize = dims.iter().product();
        TensorSeries::new(dims, horizon, vec![0.0; len * horizon])
    }

    pub fn with_labels(mut self, labels: Vec<Vec<String>>) -> Result<Self> {
        if labels.len() != self.dims.len()
            || labels.iter().zip(&self.dims).any(|(l, &d)| l.len() != d)
        {
            return Err(BlinError::Shape("label lists do not match dims".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn modes(&self) -> usize {
        self.dims.len()
    }

    pub fn slice_len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn labels(&self) -> Option<&[Vec<String>]> {
        self.labels.as_deref()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn slice(&self, t: usize) -> &[f64] {
        let n = self.slice_len();
        &self.data[t * n..(t + 1) * n]
    }

    /// The slice at `t` as an S×L matrix; only valid for two-mode series.
    pub fn matrix(&self, t: usize) -> DMatrix<f64> {
        assert_eq!(self.dims.len(), 2, "matrix view needs a two-mode series");
        DMatrix::from_column_slice(self.dims[0], self.dims[1], self.slice(t))
    }

    pub fn matrices(&self) -> Vec<DMatrix<f64>> {
        (0..self.horizon).map(|t| self.matrix(t)).collect()
    }

    pub fn require_two_mode(&self) -> Result<(usize, usize)> {
        match self.dims.as_slice() {
            [s, l] => Ok((*s, *l)),
            d => Err(BlinError::Shape(format!("expected a two-mode series, got dims {d:?}"))),
        }
    }

    /// Elementwise sum of the `p` slices preceding `t`, as a flat slice.
    pub fn lag_sum_flat(&self, p: usize, t: usize) -> Result<Vec<f64>> {
        if p == 0 {
            return Err(BlinError::InvalidConfig("lag depth must be at least 1".into()));
        }
        if t < p || t >= self.horizon {
            return Err(BlinError::IndexOutOfRange { t, earliest: p });
        }
        let mut out = self.slice(t - 1).to_vec();
        for k in 2..=p {
            for (o, v) in out.iter_mut().zip(self.slice(t - k)) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// `X_t = Y_{t-1} + ... + Y_{t-p}` for a two-mode series.
    pub fn lag_sum(&self, p: usize, t: usize) -> Result<DMatrix<f64>> {
        let (s, l) = self.require_two_mode()?;
        Ok(DMatrix::from_vec(s, l, self.lag_sum_flat(p, t)?))
    }

    /// Restrict to slices `start..end`.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.horizon {
            return Err(BlinError::Shape(format!(
                "window {start}..{end} outside horizon {}",
                self.horizon
            )));
        }
        let n = self.slice_len();
        let mut out = TensorSeries::new(
            self.dims.clone(),
            end - start,
            self.data[start * n..end * n].to_vec(),
        )?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// First differences `y_t - y_{t-1}`, one slice shorter.
    pub fn difference(&self) -> Result<Self> {
        if self.horizon < 2 {
            return Err(BlinError::InsufficientData { horizon: self.horizon, required: 1 });
        }
        let n = self.slice_len();
        let data: Vec<f64> = (n..self.data.len()).map(|i| self.data[i] - self.data[i - n]).collect();
        let mut out = TensorSeries::new(self.dims.clone(), self.horizon - 1, data)?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Subtract each cell's time mean.
    pub fn center(&self) -> Self {
        let mut out = self.clone();
        let n = self.slice_len();
        for c in 0..n {
            let mean = (0..self.horizon).map(|t| self.data[t * n + c]).sum::<f64>() / self.horizon as f64;
            for t in 0..self.horizon {
                out.data[t * n + c] -= mean;
            }
        }
        out
    }

    /// Center each cell and divide by its sample standard deviation (n−1).
    /// Cells that are constant over time become identically zero.
    pub fn standardize(&self) -> Self {
        let mut out = self.center();
        let n = self.slice_len();
        if self.horizon < 2 {
            return out;
        }
        for c in 0..n {
            let ss: f64 = (0..self.horizon).map(|t| out.data[t * n + c].powi(2)).sum();
            let sd = (ss / (self.horizon - 1) as f64).sqrt();
            if sd > 0.0 {
                for t in 0..self.horizon {
                    out.data[t * n + c] /= sd;
                }
            }
        }
        out
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Lag depth for each mode's influence network.
///
/// For the bipartite model `per_mode == [p_a, p_b]`: `A` acts on the sum of
/// the last `p_a` slices and `B` on the sum of the last `p_b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LagSpec {
    per_mode: Vec<usize>,
}

impl LagSpec {
    pub fn new(p_a: usize, p_b: usize) -> Result<Self> {
        LagSpec::multi(vec![p_a, p_b])
    }

    pub fn multi(per_mode: Vec<usize>) -> Result<Self> {
        if per_mode.is_empty() || per_mode.iter().any(|&p| p == 0) {
            return Err(BlinError::InvalidConfig(format!(
                "all lags must be at least 1, got {per_mode:?}"
            )));
        }
        Ok(LagSpec { per_mode })
    }

    pub fn per_mode(&self) -> &[usize] {
        &self.per_mode
    }

    pub fn p_a(&self) -> usize {
        self.per_mode[0]
    }

    pub fn p_b(&self) -> usize {
        self.per_mode.get(1).copied().unwrap_or(self.per_mode[0])
    }

    pub fn p_c(&self) -> Option<usize> {
        self.per_mode.get(2).copied()
    }

    /// Largest lag over all modes.
    pub fn max(&self) -> usize {
        *self.per_mode.iter().max().unwrap()
    }

    /// Smallest lag over all modes.
    pub fn min(&self) -> usize {
        *self.per_mode.iter().min().unwrap()
    }

    /// True when `A` and `B` see the same regressor, which makes the
    /// diagonal shift `(A + cI, B - cI)` a symmetry of the model.
    pub fn shared_regressor(&self) -> bool {
        self.p_a() == self.p_b()
    }
}

impl std::fmt::Display for LagSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.per_mode.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Parses `2,1` or `(2,1,1)`.
impl std::str::FromStr for LagSpec {
    type Err = BlinError;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let per_mode = inner
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| BlinError::InvalidConfig(format!("lag {p:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        LagSpec::multi(per_mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standard_normal_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_series(s: usize, l: usize, t: usize, seed: u64) -> TensorSeries {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let slices: Vec<_> = (0..t).map(|_| standard_normal_matrix(&mut rng, s, l)).collect();
        TensorSeries::from_matrices(&slices).unwrap()
    }

    #[test]
    fn lag_one_is_previous_slice() {
        let y = random_series(3, 2, 5, 1);
        for t in 1..5 {
            assert_eq!(y.lag_sum(1, t).unwrap(), y.matrix(t - 1));
        }
    }

    #[test]
    fn lag_two_of_identities() {
        let eye = DMatrix::<f64>::identity(3, 3);
        let y = TensorSeries::from_matrices(&[eye.clone(), eye.clone(), eye.clone()]).unwrap();
        assert_eq!(y.lag_sum(2, 2).unwrap(), eye * 2.0);
    }

    #[test]
    fn lag_three_matches_loop_sum() {
        let y = random_series(4, 3, 9, 7);
        for t in 3..9 {
            let got = y.lag_sum(3, t).unwrap();
            for i in 0..4 {
                for j in 0..3 {
                    let mut acc = 0.0;
                    for k in 1..=3 {
                        acc += y.matrix(t - k)[(i, j)];
                    }
                    assert_eq!(got[(i, j)], acc);
                }
            }
        }
    }

    #[test]
    fn lag_sum_rejects_early_index() {
        let y = random_series(2, 2, 4, 3);
        match y.lag_sum(2, 1) {
            Err(BlinError::IndexOutOfRange { t: 1, earliest: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn difference_of_linear_series() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        let slices: Vec<_> = (0..5).map(|t| &m * t as f64).collect();
        let d = TensorSeries::from_matrices(&slices).unwrap().difference().unwrap();
        assert_eq!(d.horizon(), 4);
        for t in 0..4 {
            assert!((d.matrix(t) - &m).norm() < 1e-15);
        }
    }

    #[test]
    fn difference_then_cumsum_telescopes() {
        let y = random_series(3, 3, 6, 11);
        let d = y.difference().unwrap();
        let mut acc = DMatrix::zeros(3, 3);
        for t in 0..d.horizon() {
            acc += d.matrix(t);
            let target = y.matrix(t + 1) - y.matrix(0);
            assert!((&acc - target).amax() < 1e-13);
        }
    }

    #[test]
    fn standardize_gives_unit_sd() {
        let y = random_series(2, 3, 12, 5).standardize();
        let n = y.slice_len();
        for c in 0..n {
            let vals: Vec<f64> = (0..y.horizon()).map(|t| y.slice(t)[c]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            assert!(mean.abs() < 1e-12);
            assert!((var.sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lagspec_validation() {
        assert!(LagSpec::new(0, 1).is_err());
        let l = LagSpec::new(2, 3).unwrap();
        assert_eq!((l.max(), l.min()), (3, 2));
        assert!(!l.shared_regressor());
    }
}
