//! K-mode influence networks: one square network per array mode.

mod fit;
mod tensor;

pub use fit::{
    canonicalize_multi, fit_multiblin, fit_multiblin_panel, fit_multiblin_sparse, fit_multiblin_sparse_panel,
    MultiFit, MultiPanel,
};
pub use tensor::{fold, mode_matricize, mode_product};

use crate::error::Result;
use crate::series::TensorSeries;

/// First differences of a series of any number of modes.
pub fn difference(series: &TensorSeries) -> Result<TensorSeries> {
    series.difference()
}
