//! Bipartite longitudinal influence networks.
//!
//! Models a sequence of S×L relational matrices as
//! `Y_t = Aᵀ X_t + Z_t B + E_t`, where `X_t` and `Z_t` are sums of recent
//! slices and `A`, `B` are influence networks among row and column actors.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod evaluate;
pub mod io;
pub mod linalg;
pub mod model;
pub mod multiway;
pub mod panel;
pub mod series;
pub mod simulate;

pub use error::{BlinError, Result};
pub use model::{blin_mean, build_design, canonicalize, companion, is_stationary, CompanionSystem, InfluencePair};
pub use panel::{Panel, QuadraticProblem};
pub use series::{LagSpec, TensorSeries};
