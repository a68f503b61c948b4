//! Filters a single solid element with the PDE filter and projects the
//! result at increasing sharpness, printing a column through the spike.

use tmcopt::design::{build_filter, project};
use tmcopt::mesh::build_grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = build_grid(21, 21, 21.0, 21.0)?;
    let filter = build_filter(&mesh, 4.0)?;
    let mut rho = vec![0.0; mesh.n_elem()];
    let center = mesh.element_at(10, 10);
    rho[center] = 1.0;
    let smooth = filter.apply(&rho)?;
    println!("mass before {:.6}, after {:.6}", rho.iter().sum::<f64>(), smooth.iter().sum::<f64>());
    let row: Vec<f64> = (0..21).map(|ex| smooth[mesh.element_at(ex, 10)]).collect();
    let peak = row.iter().copied().fold(0.0, f64::max);
    let scaled: Vec<f64> = row.iter().map(|v| v / peak).collect();
    for beta in [1.0, 4.0, 15.0] {
        let p = project(&scaled, beta, 0.5);
        let cells: Vec<String> = p.iter().map(|v| format!("{v:.2}")).collect();
        println!("β = {beta:4.1}: {}", cells.join(" "));
    }
    Ok(())
}
