//! Metrics and experiment drivers.

pub mod aic;
pub mod cv;
pub mod metrics;
pub mod scan;
pub mod study;

pub use aic::{aic_hat, aic_select, AicCell};
pub use cv::{fold_assignment, kfold_cv, kfold_cv_panel, CvReport, MethodCv};
pub use metrics::{r_squared, r_squared_slices};
pub use scan::{align_scale, likelihood_line_scan, ScanPoint};
pub use study::{convergence_study, SlopeEstimate, StudyConfig, StudyMetric, StudyResult, StudyRow};
