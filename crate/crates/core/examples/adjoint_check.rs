//! Checks the adjoint end-compliance sensitivity of a loaded cantilever
//! against central differences with full nonlinear re-solves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmcopt::material::HyperelasticMaterial;
use tmcopt::mesh::{build_grid, select_nodes, GridMesh};
use tmcopt::optimizer::{adjoint_sensitivity, end_compliance};
use tmcopt::scenario::top_edge_traction;
use tmcopt::solver::{incremental_solve, SolverSettings, StructuralModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = build_grid(8, 4, 80.0, 40.0)?;
    let mat = HyperelasticMaterial::new(100.0, 0.3, 1e-6, 1e-6, 80.0)?.with_ramp(4.0, 1e-6)?;
    let fixed: Vec<usize> = select_nodes(&mesh, |x, _| x == 0.0)
        .into_iter()
        .flat_map(GridMesh::node_dofs)
        .collect();
    let f0 = top_edge_traction(&mesh, 70.0, 80.0, 5.0)?;
    let model = StructuralModel::new(mesh, mat, &fixed, f0, 2)?;
    let settings = SolverSettings {
        n_incr: 10,
        tol_rel_res: 1e-11,
        lambda_max: 1.0,
        ..SolverSettings::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x_hat: Vec<f64> = (0..model.mesh.n_elem()).map(|_| rng.gen_range(0.4..1.0)).collect();
    let solve = |x: &[f64]| -> Result<(f64, Vec<f64>), tmcopt::error::Error> {
        let gammas: Vec<f64> = x.iter().map(|&r| model.material.ramp(r)).collect();
        let h = incremental_solve(&model, &gammas, &settings, |_| {}).into_result()?;
        let u = h.final_u().unwrap_or_default().to_vec();
        Ok((end_compliance(&u, &model.f0, 1.0), u))
    };
    let (c, u) = solve(&x_hat)?;
    let dc = adjoint_sensitivity(&model, &x_hat, &u, 1.0)?;
    println!("c = {c:.6e}");
    println!("elem      adjoint            fd        rel err");
    for e in (0..x_hat.len()).step_by(5) {
        let h = 1e-5;
        let mut xp = x_hat.clone();
        let mut xm = x_hat.clone();
        xp[e] += h;
        xm[e] -= h;
        let fd = (solve(&xp)?.0 - solve(&xm)?.0) / (2.0 * h);
        println!("{e:4}  {:+.6e}  {fd:+.6e}  {:.1e}", dc[e], ((fd - dc[e]) / dc[e]).abs());
    }
    Ok(())
}
