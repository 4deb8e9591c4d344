use serde::Serialize;

use crate::error::{BlinError, Result};
use crate::linalg::{numerical_rank, singular_values, SVD_RTOL};
use crate::model::DEFAULT_ELEMENT_BUDGET;
use crate::panel::Panel;
use crate::series::{LagSpec, TensorSeries};

/// Numerical rank of the stacked design.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RankCheck {
    Checked {
        rank: usize,
        /// Largest rank the design can have: `min(rows, S² + L² − d)`
        /// where `d = 1` when both networks share a regressor (the
        /// diagonal shift is then an exact null direction) and 0 otherwise.
        max_rank: usize,
        /// Rank predicted for generic data.
        expected: usize,
        /// Whether the fitted values pin down the parameters up to the
        /// model's symmetries.
        unique: bool,
        /// `σ_r / σ_{r+1}` when the rank is within one of the boundary.
        gap: Option<f64>,
    },
    /// Design too large to decompose densely.
    Unchecked { elements: usize, budget: usize },
}

impl RankCheck {
    pub fn rank(&self) -> Option<usize> {
        match self {
            RankCheck::Checked { rank, .. } => Some(*rank),
            RankCheck::Unchecked { .. } => None,
        }
    }

    pub fn is_unique(&self) -> Option<bool> {
        match self {
            RankCheck::Checked { unique, .. } => Some(*unique),
            RankCheck::Unchecked { .. } => None,
        }
    }
}

pub fn design_rank_check(series: &TensorSeries, lags: &LagSpec) -> Result<RankCheck> {
    let panel = Panel::from_series(series, lags)?;
    design_rank_check_panel(&panel, DEFAULT_ELEMENT_BUDGET)
}

pub fn design_rank_check_panel(panel: &Panel, budget: usize) -> Result<RankCheck> {
    let d = match panel.design(budget) {
        Ok((d, _)) => d,
        Err(BlinError::BudgetExceeded { elements, budget }) => {
            return Ok(RankCheck::Unchecked { elements, budget })
        }
        Err(e) => return Err(e),
    };
    let sv = singular_values(&d);
    let rank = numerical_rank(&sv, SVD_RTOL);
    let params = panel.n_params();
    let free = if panel.shared_regressors { params - 1 } else { params };
    let expected = d.nrows().min(free);
    let gap = if rank + 1 >= free && free + 1 >= rank && rank >= 1 && rank < sv.len() {
        Some(sv[rank - 1] / sv[rank])
    } else {
        None
    };
    Ok(RankCheck::Checked { rank, max_rank: free, expected, unique: rank == free, gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standard_normal_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn gaussian(s: usize, l: usize, t: usize, seed: u64) -> TensorSeries {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let slices: Vec<_> = (0..t).map(|_| standard_normal_matrix(&mut rng, s, l)).collect();
        TensorSeries::from_matrices(&slices).unwrap()
    }

    #[test]
    fn short_wide_design_has_row_rank() {
        let y = gaussian(2, 10, 2, 1);
        let rc = design_rank_check(&y, &LagSpec::new(1, 1).unwrap()).unwrap();
        assert_eq!(rc.rank(), Some(20));
        assert_eq!(rc.is_unique(), Some(false));
    }

    #[test]
    fn tall_design_reaches_full_rank_minus_shift() {
        let y = gaussian(3, 4, 6, 2);
        match design_rank_check(&y, &LagSpec::new(1, 1).unwrap()).unwrap() {
            RankCheck::Checked { rank, unique, .. } => {
                assert_eq!(rank, 9 + 16 - 1);
                assert!(unique);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_series_is_deficient() {
        let m = standard_normal_matrix(&mut ChaCha20Rng::seed_from_u64(3), 3, 3);
        let slices = vec![m; 8];
        let y = TensorSeries::from_matrices(&slices).unwrap();
        let rc = design_rank_check(&y, &LagSpec::new(1, 1).unwrap()).unwrap();
        assert!(rc.rank().unwrap() < 17);
        assert_eq!(rc.is_unique(), Some(false));
    }

    #[test]
    fn budget_gives_unchecked() {
        let y = gaussian(3, 3, 6, 4);
        let panel = Panel::from_series(&y, &LagSpec::new(1, 1).unwrap()).unwrap();
        let rc = design_rank_check_panel(&panel, 10).unwrap();
        assert!(matches!(rc, RankCheck::Unchecked { .. }));
    }
}
