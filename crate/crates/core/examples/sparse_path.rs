//! Lasso path for a sparse BLIN fit with the penalty picked by 10-fold
//! cross-validation over time points.

use blin::estimators::{fit_blin_sparse, EstimatorConfig, Method};
use blin::simulate::{generate, SimulationSpec};
use blin::LagSpec;

fn main() -> blin::Result<()> {
    let spec = SimulationSpec { s: 6, l: 6, q_sparsity: 0.9, horizon: 80, seed: 4, ..Default::default() };
    let scenario = spec.scenario()?;
    let series = generate(&spec, &scenario.pair, 0)?;
    let lags = LagSpec::new(1, 1)?;

    let (fitted, path) = fit_blin_sparse(&series, &lags, &EstimatorConfig::with_method(Method::Sparse))?;
    let cv = path.cv_error.as_ref().expect("cross-validated penalty");
    println!("{:>12} {:>8} {:>12}", "lambda", "nonzero", "cv error");
    for (k, lam) in path.lambdas.iter().enumerate().step_by(5) {
        let mark = if k == path.selected { " <" } else { "" };
        println!("{lam:>12.4e} {:>8} {:>12.3}{mark}", path.nonzeros[k], cv[k]);
    }
    println!(
        "selected lambda {:.4e}: {} nonzeros of {}, in-sample R² {:.3}",
        fitted.lambda.unwrap(),
        fitted.nonzeros(),
        fitted.pair.a.len() + fitted.pair.b.len(),
        fitted.r2_in
    );
    let true_nz = scenario.pair.a.iter().chain(scenario.pair.b.iter()).filter(|v| **v != 0.0).count();
    println!("true networks have {true_nz} nonzeros");
    Ok(())
}
