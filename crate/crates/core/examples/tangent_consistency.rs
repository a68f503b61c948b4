//! Compares the assembled tangent with central differences of the internal
//! force on a small patch, with and without the HuHu term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmcopt::assembly::Assembler;
use tmcopt::element::build_operators;
use tmcopt::material::HyperelasticMaterial;
use tmcopt::mesh::build_grid;
use tmcopt::sparse::norm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = build_grid(3, 2, 30.0, 20.0)?;
    let ops = build_operators(mesh.elem_width(), mesh.elem_height(), 2)?;
    let asm = Assembler::full(&mesh)?;
    let gammas = [1.0, 1e-6, 1.0, 1e-6, 1.0, 1e-6];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u: Vec<f64> = (0..mesh.n_dof).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let du: Vec<f64> = (0..mesh.n_dof).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for kr in [0.0, 1.5, 50.0] {
        let mat = HyperelasticMaterial::new(100.0, 0.3, 1e-6, 1e-6, 105.0)?.with_kr(kr);
        let sys = asm.assemble(&mesh, &ops, &mat, &u, &gammas)?;
        let kdu = sys.k.mul_vec(&du);
        print!("kr = {kr:5.1}  asymmetry = {:.1e}  rel err:", sys.k.max_asymmetry() / sys.k.max_abs());
        for eps in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7] {
            let at = |s: f64| -> Vec<f64> { u.iter().zip(&du).map(|(a, b)| a + s * b).collect() };
            let fp = asm.internal_force(&mesh, &ops, &mat, &at(eps), &gammas)?;
            let fm = asm.internal_force(&mesh, &ops, &mat, &at(-eps), &gammas)?;
            let diff: Vec<f64> = fp
                .iter()
                .zip(&fm)
                .zip(&kdu)
                .map(|((p, m), k)| (p - m) / (2.0 * eps) - k)
                .collect();
            print!("  {:.1e}", norm(&diff) / norm(&kdu));
        }
        println!();
    }
    Ok(())
}
