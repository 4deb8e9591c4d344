//! In- and out-of-sample R² along the segment from the true parameters
//! (ξ = 0) to a fitted bilinear model (ξ = 1). A short training run gives a
//! fit that beats the truth in sample while losing out of sample.

use blin::estimators::{fit_panel, EstimatorConfig, Method, ModelKind};
use blin::evaluate::{align_scale, likelihood_line_scan};
use blin::simulate::{generate, Generator, SimulationSpec};
use blin::{LagSpec, Panel};

fn main() -> blin::Result<()> {
    let spec = SimulationSpec { generator: Generator::Bilinear, s: 6, l: 6, q_sparsity: 0.5, horizon: 12, seed: 8, ..Default::default() };
    let scenario = spec.scenario()?;
    let lags = LagSpec::new(1, 1)?;
    let train = Panel::from_series(&generate(&spec, &scenario.pair, 0)?, &lags)?;
    let test_spec = SimulationSpec { horizon: 2000, ..spec.clone() };
    let test = Panel::from_series(&generate(&test_spec, &scenario.pair, 1)?, &lags)?;

    let fitted = fit_panel(&train, &lags, &EstimatorConfig::with_method(Method::Bilinear))?;
    let aligned = align_scale(&scenario.pair, &fitted.pair);
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    println!("{:>5} {:>8} {:>8}", "xi", "R² in", "R² out");
    for p in likelihood_line_scan(&train, &test, &scenario.pair, &aligned, &grid, ModelKind::Bilinear)? {
        println!("{:>5.1} {:>8.3} {:>8.3}", p.xi, p.r2_in, p.r2_out);
    }
    Ok(())
}
