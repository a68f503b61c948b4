//! Element tangent and internal force, and their global assembly.
//!
//! Per quadrature point the element uses the total-Lagrangian forms
//!
//! * internal force `γ Bγᵀ Ŝ + k_r e^{-5J} Hᵀ H u`,
//! * tangent `γ (Bγᵀ C Bγ + Gᵀ T(S) G) + k_r e^{-5J} (Hᵀ H − 5 (Hᵀ H u) ⊗ ∂J/∂u)`,
//!
//! with `Bγ = B₀ + A(u) G` and `∂J/∂u = Gᵀ vec(cof F)`. The exponential factor
//! is not part of any energy, which makes the tangent nonsymmetric wherever
//! the element carries a skew mode.

use std::sync::Arc;

use nalgebra::{Matrix2, SMatrix, SVector};
use rayon::prelude::*;

use crate::element::{Mat8, QuadOperators, Vec8};
use crate::error::{Error, Result};
use crate::material::{piola2_grad, strain_energy_grad, tangent_moduli, HyperelasticMaterial};
use crate::mesh::GridMesh;
use crate::sparse::{CscMatrix, CscPattern};

/// Nodal displacements and RAMP scale of one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementState {
    pub u_e: Vec8,
    pub gamma_e: f64,
}

impl ElementState {
    pub fn new(u_e: [f64; 8], gamma_e: f64) -> Self {
        Self {
            u_e: Vec8::from_column_slice(&u_e),
            gamma_e,
        }
    }
}

type Mat3x4 = SMatrix<f64, 3, 4>;
type Mat4 = SMatrix<f64, 4, 4>;

fn displacement_gradient(theta: &SVector<f64, 4>) -> Matrix2<f64> {
    Matrix2::new(theta[0], theta[1], theta[2], theta[3])
}

fn deformation_gradient(theta: &SVector<f64, 4>) -> Matrix2<f64> {
    Matrix2::identity() + displacement_gradient(theta)
}

/// Green–Lagrange coupling `A(θ)` with `δE = (B₀ + A G) δu`.
fn coupling(theta: &SVector<f64, 4>) -> Mat3x4 {
    Mat3x4::new(
        theta[0], 0.0, theta[2], 0.0,
        0.0, theta[1], 0.0, theta[3],
        theta[1], theta[0], theta[3], theta[2],
    )
}

fn stress_expansion(s: &Matrix2<f64>) -> Mat4 {
    let mut t = Mat4::zeros();
    for blk in [0, 2] {
        t[(blk, blk)] = s[(0, 0)];
        t[(blk, blk + 1)] = s[(0, 1)];
        t[(blk + 1, blk)] = s[(1, 0)];
        t[(blk + 1, blk + 1)] = s[(1, 1)];
    }
    t
}

#[derive(Clone, Copy, PartialEq)]
enum Parts {
    All,
    MaterialOnly,
}

fn element_kernel(
    state: &ElementState,
    ops: &QuadOperators,
    mat: &HyperelasticMaterial,
    want_tangent: bool,
    parts: Parts,
) -> Result<(Option<Mat8>, Vec8)> {
    let u = &state.u_e;
    let gamma = state.gamma_e;
    let mut k = want_tangent.then(Mat8::zeros);
    let mut f = Vec8::zeros();
    for (q, p) in ops.points.iter().enumerate() {
        let dv = ops.dv(q);
        let theta = p.g * u;
        let fdef = deformation_gradient(&theta);
        let det_f = fdef.determinant();
        let s = piola2_grad(&displacement_gradient(&theta), mat.lambda0, mat.mu0)?;
        let s_voigt = SVector::<f64, 3>::new(s[(0, 0)], s[(1, 1)], s[(0, 1)]);
        let bg = p.b0 + coupling(&theta) * p.g;
        f += bg.transpose() * s_voigt * (gamma * dv);
        if let Some(k) = k.as_mut() {
            let d = tangent_moduli(&fdef, mat.lambda0, mat.mu0)?;
            let km = bg.transpose() * d * bg;
            let kg = p.g.transpose() * stress_expansion(&s) * p.g;
            *k += (km + kg) * (gamma * dv);
        }
        if parts == Parts::All && mat.kr != 0.0 {
            let scale = mat.kr * (-5.0 * det_f).exp();
            let hthu = p.hth * u;
            f += hthu * (scale * dv);
            if let Some(k) = k.as_mut() {
                let cof = SVector::<f64, 4>::new(fdef[(1, 1)], -fdef[(1, 0)], -fdef[(0, 1)], fdef[(0, 0)]);
                let dj_du = p.g.transpose() * cof;
                *k += (p.hth - hthu * dj_du.transpose() * 5.0) * (scale * dv);
            }
        }
    }
    Ok((k, f))
}

/// Element tangent `k_T` and internal force `f_e`.
pub fn element_tangent_force(
    state: &ElementState,
    ops: &QuadOperators,
    mat: &HyperelasticMaterial,
) -> Result<(Mat8, Vec8)> {
    let (k, f) = element_kernel(state, ops, mat, true, Parts::All)?;
    Ok((k.expect("tangent requested"), f))
}

/// Element internal force only.
pub fn element_internal_force(
    state: &ElementState,
    ops: &QuadOperators,
    mat: &HyperelasticMaterial,
) -> Result<Vec8> {
    Ok(element_kernel(state, ops, mat, false, Parts::All)?.1)
}

/// `∂f_e/∂γ`: the unscaled material internal force (no HuHu part).
pub fn element_material_force(u_e: &Vec8, ops: &QuadOperators, mat: &HyperelasticMaterial) -> Result<Vec8> {
    let state = ElementState { u_e: *u_e, gamma_e: 1.0 };
    Ok(element_kernel(&state, ops, mat, false, Parts::MaterialOnly)?.1)
}

/// Volume-averaged interpolated strain energy density `γ W`.
pub fn element_sed(state: &ElementState, ops: &QuadOperators, mat: &HyperelasticMaterial) -> Result<f64> {
    let mut w = 0.0;
    for (q, p) in ops.points.iter().enumerate() {
        let h = displacement_gradient(&(p.g * state.u_e));
        w += strain_energy_grad(&h, mat.lambda0, mat.mu0)? * ops.dv(q);
    }
    Ok(state.gamma_e * w / ops.area())
}

/// Smallest `det F` over the element's quadrature points.
pub fn element_min_det_f(u_e: &Vec8, ops: &QuadOperators) -> f64 {
    ops.points
        .iter()
        .map(|p| deformation_gradient(&(p.g * u_e)).determinant())
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `det F` over all elements and quadrature points.
pub fn min_det_f(mesh: &GridMesh, ops: &QuadOperators, u: &[f64]) -> f64 {
    (0..mesh.n_elem())
        .into_par_iter()
        .map(|e| element_min_det_f(&Vec8::from_column_slice(&mesh.gather(e, u)), ops))
        .reduce(|| f64::INFINITY, f64::min)
}

fn tag_element(err: Error, element: usize) -> Error {
    match err {
        Error::InvertedElement { det_f, .. } => Error::InvertedElement { element, det_f },
        other => other,
    }
}

/// Reduced tangent (over the given free DOFs) and full internal force.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub k: CscMatrix,
    pub f_int: Vec<f64>,
}

const NONE: u32 = u32::MAX;

/// Precomputed scatter from element blocks into a reduced sparse pattern.
#[derive(Debug, Clone)]
pub struct Assembler {
    pattern: Arc<CscPattern>,
    scatter: Vec<u32>,
    free: Vec<usize>,
    n_dof: usize,
}

impl Assembler {
    /// Pattern restricted to `free_dofs` (any order; duplicates ignored).
    pub fn new(mesh: &GridMesh, free_dofs: &[usize]) -> Result<Self> {
        let mut free = free_dofs.to_vec();
        free.sort_unstable();
        free.dedup();
        if free.last().is_some_and(|&d| d >= mesh.n_dof) {
            return Err(Error::invalid("free DOF index out of range"));
        }
        let mut reduced = vec![usize::MAX; mesh.n_dof];
        for (i, &d) in free.iter().enumerate() {
            reduced[d] = i;
        }
        let mut entries = Vec::with_capacity(mesh.n_elem() * 64);
        for dofs in &mesh.elem_dof_map {
            for &r in dofs {
                for &c in dofs {
                    if reduced[r] != usize::MAX && reduced[c] != usize::MAX {
                        entries.push((reduced[r], reduced[c]));
                    }
                }
            }
        }
        let n = free.len();
        let pattern = Arc::new(CscPattern::from_entries(n, n, entries));
        let mut scatter = Vec::with_capacity(mesh.n_elem() * 64);
        for dofs in &mesh.elem_dof_map {
            // column-major over the local block
            for &c in dofs {
                for &r in dofs {
                    let pos = match (reduced[r], reduced[c]) {
                        (usize::MAX, _) | (_, usize::MAX) => NONE,
                        (rr, cc) => pattern.position(rr, cc).expect("entry in pattern") as u32,
                    };
                    scatter.push(pos);
                }
            }
        }
        Ok(Self {
            pattern,
            scatter,
            free,
            n_dof: mesh.n_dof,
        })
    }

    /// Every DOF free.
    pub fn full(mesh: &GridMesh) -> Result<Self> {
        let all: Vec<usize> = (0..mesh.n_dof).collect();
        Self::new(mesh, &all)
    }

    pub fn pattern(&self) -> &Arc<CscPattern> {
        &self.pattern
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Adds a reduced vector into the free entries of `full`.
    pub fn expand_add(&self, reduced: &[f64], full: &mut [f64]) {
        for (&d, &v) in self.free.iter().zip(reduced) {
            full[d] += v;
        }
    }

    pub fn assemble(
        &self,
        mesh: &GridMesh,
        ops: &QuadOperators,
        mat: &HyperelasticMaterial,
        u: &[f64],
        gammas: &[f64],
    ) -> Result<SparseSystem> {
        self.check_sizes(mesh, u, gammas)?;
        let blocks: Vec<Result<(Option<Mat8>, Vec8)>> = (0..mesh.n_elem())
            .into_par_iter()
            .map(|e| {
                let state = ElementState {
                    u_e: Vec8::from_column_slice(&mesh.gather(e, u)),
                    gamma_e: gammas[e],
                };
                element_kernel(&state, ops, mat, true, Parts::All)
            })
            .collect();
        // sequential scatter in element order keeps sums independent of the worker count
        let mut k = CscMatrix::zeros(self.pattern.clone());
        let mut f_int = vec![0.0; self.n_dof];
        for (e, res) in blocks.into_iter().enumerate() {
            let (ke, fe) = res.map_err(|err| tag_element(err, e))?;
            let ke = ke.expect("tangent requested");
            let dofs = &mesh.elem_dof_map[e];
            for (a, &d) in dofs.iter().enumerate() {
                f_int[d] += fe[a];
            }
            let map = &self.scatter[e * 64..(e + 1) * 64];
            for (slot, (&pos, &v)) in map.iter().zip(ke.as_slice()).enumerate() {
                let _ = slot;
                if pos != NONE {
                    k.values[pos as usize] += v;
                }
            }
        }
        Ok(SparseSystem { k, f_int })
    }

    /// Internal force only.
    pub fn internal_force(
        &self,
        mesh: &GridMesh,
        ops: &QuadOperators,
        mat: &HyperelasticMaterial,
        u: &[f64],
        gammas: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_sizes(mesh, u, gammas)?;
        internal_force(mesh, ops, mat, u, gammas)
    }

    fn check_sizes(&self, mesh: &GridMesh, u: &[f64], gammas: &[f64]) -> Result<()> {
        if u.len() != mesh.n_dof || mesh.n_dof != self.n_dof {
            return Err(Error::invalid(format!(
                "displacement has length {}, expected {}",
                u.len(),
                self.n_dof
            )));
        }
        if gammas.len() != mesh.n_elem() {
            return Err(Error::invalid(format!(
                "{} element scales given for {} elements",
                gammas.len(),
                mesh.n_elem()
            )));
        }
        Ok(())
    }
}

/// Full (unreduced) tangent and internal force.
pub fn assemble_global(
    u: &[f64],
    gammas: &[f64],
    mesh: &GridMesh,
    ops: &QuadOperators,
    mat: &HyperelasticMaterial,
) -> Result<SparseSystem> {
    Assembler::full(mesh)?.assemble(mesh, ops, mat, u, gammas)
}

pub fn internal_force(
    mesh: &GridMesh,
    ops: &QuadOperators,
    mat: &HyperelasticMaterial,
    u: &[f64],
    gammas: &[f64],
) -> Result<Vec<f64>> {
    let forces: Vec<Result<Vec8>> = (0..mesh.n_elem())
        .into_par_iter()
        .map(|e| {
            let state = ElementState {
                u_e: Vec8::from_column_slice(&mesh.gather(e, u)),
                gamma_e: gammas[e],
            };
            element_internal_force(&state, ops, mat)
        })
        .collect();
    let mut f = vec![0.0; mesh.n_dof];
    for (e, fe) in forces.into_iter().enumerate() {
        let fe = fe.map_err(|err| tag_element(err, e))?;
        for (a, &d) in mesh.elem_dof_map[e].iter().enumerate() {
            f[d] += fe[a];
        }
    }
    Ok(f)
}

/// `∂f_e/∂γ_e` for every element at displacement `u`.
pub fn material_forces(
    mesh: &GridMesh,
    ops: &QuadOperators,
    mat: &HyperelasticMaterial,
    u: &[f64],
) -> Result<Vec<Vec8>> {
    let forces: Vec<Result<Vec8>> = (0..mesh.n_elem())
        .into_par_iter()
        .map(|e| element_material_force(&Vec8::from_column_slice(&mesh.gather(e, u)), ops, mat))
        .collect();
    forces
        .into_iter()
        .enumerate()
        .map(|(e, r)| r.map_err(|err| tag_element(err, e)))
        .collect()
}

/// Volume-averaged `γ W` per element.
pub fn sed_field(
    mesh: &GridMesh,
    ops: &QuadOperators,
    mat: &HyperelasticMaterial,
    u: &[f64],
    gammas: &[f64],
) -> Result<Vec<f64>> {
    (0..mesh.n_elem())
        .map(|e| {
            let state = ElementState {
                u_e: Vec8::from_column_slice(&mesh.gather(e, u)),
                gamma_e: gammas[e],
            };
            element_sed(&state, ops, mat).map_err(|err| tag_element(err, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::build_operators;
    use crate::mesh::build_grid;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn material() -> HyperelasticMaterial {
        HyperelasticMaterial::new(100.0, 0.3, 1e-6, 1e-6, 105.0).unwrap()
    }

    /// Plane-strain linear stiffness integrated independently with a 2×2 rule.
    fn linear_stiffness(ops: &QuadOperators, lambda: f64, mu: f64) -> Mat8 {
        let d = nalgebra::Matrix3::new(
            lambda + 2.0 * mu, lambda, 0.0,
            lambda, lambda + 2.0 * mu, 0.0,
            0.0, 0.0, mu,
        );
        let mut k = Mat8::zeros();
        for (q, p) in ops.points.iter().enumerate() {
            k += p.b0.transpose() * d * p.b0 * ops.dv(q);
        }
        k
    }

    #[test]
    fn reference_configuration() {
        let ops = build_operators(1.7, 1.6, 2).unwrap();
        let mat = material();
        let (k, f) = element_tangent_force(&ElementState::new([0.0; 8], 1.0), &ops, &mat).unwrap();
        assert_eq!(f, Vec8::zeros());
        let mut expected = linear_stiffness(&ops, mat.lambda0, mat.mu0);
        for (q, p) in ops.points.iter().enumerate() {
            expected += p.hth * (mat.kr * (-5.0f64).exp() * ops.dv(q));
        }
        assert_relative_eq!(k, expected, epsilon = 1e-10);
    }

    #[test]
    fn translation_invariance() {
        let ops = build_operators(1.0, 1.0, 2).unwrap();
        let mat = material();
        let (k0, _) = element_tangent_force(&ElementState::new([0.0; 8], 0.3), &ops, &mat).unwrap();
        let t = [0.4, -1.1, 0.4, -1.1, 0.4, -1.1, 0.4, -1.1];
        let (k, f) = element_tangent_force(&ElementState::new(t, 0.3), &ops, &mat).unwrap();
        assert!(f.norm() < 1e-12);
        assert_relative_eq!(k, k0, epsilon = 1e-10);
    }

    #[test]
    fn directional_derivative_matches_tangent() {
        let ops = build_operators(1.69, 1.67, 2).unwrap();
        // strong regularization so the skew term matters
        let mat = material().with_kr(50.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let u: [f64; 8] = std::array::from_fn(|_| rng.gen_range(-0.3..0.3));
            let d: [f64; 8] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let gamma = if trial % 2 == 0 { 1.0 } else { 1e-6 };
            let state = ElementState::new(u, gamma);
            let (k, _) = element_tangent_force(&state, &ops, &mat).unwrap();
            let dv = Vec8::from_column_slice(&d);
            let kd = k * dv;
            for eps in [1e-4, 1e-5, 1e-6, 1e-7] {
                let plus = ElementState { u_e: state.u_e + dv * eps, gamma_e: gamma };
                let minus = ElementState { u_e: state.u_e - dv * eps, gamma_e: gamma };
                let fd = (element_internal_force(&plus, &ops, &mat).unwrap()
                    - element_internal_force(&minus, &ops, &mat).unwrap())
                    / (2.0 * eps);
                let rel = (fd - kd).norm() / kd.norm();
                assert!(rel < 1e-5, "trial {trial} eps {eps}: {rel:e}");
            }
        }
    }

    #[test]
    fn gamma_scales_material_part_only() {
        let ops = build_operators(1.0, 1.0, 2).unwrap();
        let mat = material().with_kr(10.0);
        let u = [0.01, -0.02, 0.05, 0.0, -0.03, 0.04, 0.02, -0.01];
        let s1 = ElementState::new(u, 0.4);
        let s2 = ElementState::new(u, 0.8);
        let f1 = element_internal_force(&s1, &ops, &mat).unwrap();
        let f2 = element_internal_force(&s2, &ops, &mat).unwrap();
        let fm = element_material_force(&s1.u_e, &ops, &mat).unwrap();
        assert_relative_eq!(f2 - f1, fm * 0.4, epsilon = 1e-12);
        let e1 = element_sed(&s1, &ops, &mat).unwrap();
        let e2 = element_sed(&s2, &ops, &mat).unwrap();
        assert_relative_eq!(e2, 2.0 * e1, epsilon = 1e-14);
    }

    #[test]
    fn single_element_assembly() {
        let mesh = build_grid(1, 1, 1.0, 1.0).unwrap();
        let ops = build_operators(1.0, 1.0, 2).unwrap();
        let mat = material();
        let sys = assemble_global(&[0.0; 8], &[1.0], &mesh, &ops, &mat).unwrap();
        let (ke, _) = element_tangent_force(&ElementState::new([0.0; 8], 1.0), &ops, &mat).unwrap();
        let dofs = mesh.elem_dof_map[0];
        for a in 0..8 {
            for b in 0..8 {
                assert_eq!(sys.k.get(dofs[a], dofs[b]), ke[(a, b)]);
            }
        }
    }

    #[test]
    fn shared_edge_sums_blocks() {
        let mesh = build_grid(2, 1, 2.0, 1.0).unwrap();
        let ops = build_operators(1.0, 1.0, 2).unwrap();
        let mat = material();
        let sys = assemble_global(&vec![0.0; mesh.n_dof], &[1.0, 0.5], &mesh, &ops, &mat).unwrap();
        let (k0, _) = element_tangent_force(&ElementState::new([0.0; 8], 1.0), &ops, &mat).unwrap();
        let (k1, _) = element_tangent_force(&ElementState::new([0.0; 8], 0.5), &ops, &mat).unwrap();
        // element 0 local LR (slot 1) is element 1 local LL (slot 0)
        let shared = mesh.elem_dof_map[0][2];
        assert_eq!(shared, mesh.elem_dof_map[1][0]);
        assert_relative_eq!(sys.k.get(shared, shared), k0[(2, 2)] + k1[(0, 0)], epsilon = 1e-12);
    }

    #[test]
    fn reduced_pattern_drops_fixed_dofs() {
        let mesh = build_grid(2, 2, 2.0, 2.0).unwrap();
        let free: Vec<usize> = (4..mesh.n_dof).collect();
        let asm = Assembler::new(&mesh, &free).unwrap();
        assert_eq!(asm.pattern().nrows, mesh.n_dof - 4);
        let ops = build_operators(1.0, 1.0, 2).unwrap();
        let gam = vec![1.0; 4];
        let red = asm.assemble(&mesh, &ops, &material(), &vec![0.0; mesh.n_dof], &gam).unwrap();
        let full = assemble_global(&vec![0.0; mesh.n_dof], &gam, &mesh, &ops, &material()).unwrap();
        for (i, &r) in free.iter().enumerate() {
            for (j, &c) in free.iter().enumerate() {
                assert_eq!(red.k.get(i, j), full.k.get(r, c));
            }
        }
    }

    #[test]
    fn inversion_reports_element() {
        let mesh = build_grid(2, 1, 2.0, 1.0).unwrap();
        let ops = build_operators(1.0, 1.0, 2).unwrap();
        let mut u = vec![0.0; mesh.n_dof];
        // collapse element 1 by pushing its right nodes past the left ones
        for n in mesh.element_nodes(1).into_iter().filter(|&n| mesh.node_coords[n][0] == 2.0) {
            u[2 * n] = -1.5;
        }
        let err = assemble_global(&u, &[1.0, 1.0], &mesh, &ops, &material()).unwrap_err();
        assert!(matches!(err, Error::InvertedElement { element: 1, .. }), "{err}");
    }
}
