//! Runs the C-shape contact analysis and prints the gap and corner
//! displacement as the mouth of the C closes.

use tmcopt::scenario::{build_cshape, CShapeParams};
use tmcopt::solver::incremental_solve;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let scenario = build_cshape(&CShapeParams::default())?;
    let t0 = std::time::Instant::now();
    let history = incremental_solve(&scenario.model, &scenario.gammas, &scenario.settings, |r| {
        if r.increment % 10 == 0 {
            println!(
                "Λ = {:.3}  gap = {:8.4} mm  |u(x_c)| = {:8.4} mm  iterations = {}",
                r.load_fraction,
                scenario.gap(&r.u),
                scenario.corner_displacement(&r.u),
                r.iterations
            );
        }
    });
    println!("{} increments in {:.1?}", history.records.len(), t0.elapsed());
    if let Some(e) = history.failure {
        return Err(e.into());
    }
    Ok(())
}
