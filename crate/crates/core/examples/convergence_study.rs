//! Log-log convergence slopes of BLIN and bilinear estimates under both
//! generators. Pass a replication count as the first argument to shrink
//! or grow the run (default 50).

use blin::evaluate::{convergence_study, StudyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reps = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(50);
    let cfg = StudyConfig { reps, ..Default::default() };
    let started = std::time::Instant::now();
    let result = convergence_study(&cfg)?;
    println!("{:<10} {:<10} {:<10} {:>8} {:>7} {:>5}", "data", "fit", "metric", "slope", "se", "drop");
    for e in &result.slopes {
        println!(
            "{:<10} {:<10} {:<10} {:>8.3} {:>7.3} {:>5}",
            format!("{:?}", e.generator),
            format!("{:?}", e.method),
            format!("{:?}", e.metric),
            e.slope,
            e.se,
            e.excluded
        );
    }
    println!("{} fits in {:.1?}", result.rows.len(), started.elapsed());
    Ok(())
}
