//! Out-of-sample R² from 10-fold cross-validation over time points, for
//! several estimators sharing one fold partition.

use blin::estimators::{EstimatorConfig, Method};
use blin::evaluate::kfold_cv;
use blin::simulate::{generate, SimulationSpec};
use blin::LagSpec;

fn main() -> blin::Result<()> {
    let spec = SimulationSpec { s: 6, l: 6, q_sparsity: 0.9, horizon: 60, seed: 2, ..Default::default() };
    let scenario = spec.scenario()?;
    let series = generate(&spec, &scenario.pair, 0)?;
    let lags = LagSpec::new(1, 1)?;
    let configs: Vec<_> = [Method::Exact, Method::Sparse, Method::Bilinear].into_iter().map(EstimatorConfig::with_method).collect();

    let report = kfold_cv(&series, &lags, &configs, 10, 0)?;
    println!("fold sizes: {:?}", (0..report.folds).map(|f| report.fold_times(f).len()).collect::<Vec<_>>());
    for m in &report.methods {
        println!("{:<12} in-sample {:.3}  out-of-sample {:.3}", m.label, m.r2_in.unwrap_or(f64::NAN), m.r2_out);
    }
    Ok(())
}
