//! Density filter, threshold projection and sensitivity chain rule.
//!
//! The filter solves `(−l²∇² + 1) ρ̃ = ρ` on the element grid with a
//! 5-point stencil and zero-flux boundaries, `l = r_min / (2√3)`. Its
//! matrix is symmetric with unit row sums, so it preserves constants and
//! total mass. Passive elements are clamped in `ρ` before filtering and
//! reset in the projected fields afterwards.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::GridMesh;
use crate::sparse::{CscMatrix, LuSolver};

/// Factorized PDE filter on an `nelx × nely` element grid.
pub struct PdeFilter {
    pub nelx: usize,
    pub nely: usize,
    pub length: f64,
    matrix: CscMatrix,
    lu: LuSolver,
}

impl std::fmt::Debug for PdeFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PdeFilter")
            .field("nelx", &self.nelx)
            .field("nely", &self.nely)
            .field("length", &self.length)
            .finish()
    }
}

/// PDE length equivalent to a convolution radius.
pub fn filter_length(rmin: f64) -> f64 {
    rmin / (2.0 * 3f64.sqrt())
}

/// Builds and factorizes the filter for radius `rmin`.
pub fn build_filter(mesh: &GridMesh, rmin: f64) -> Result<PdeFilter> {
    if !(rmin >= 0.0) || !rmin.is_finite() {
        return Err(Error::invalid(format!("filter radius must be non-negative (got {rmin})")));
    }
    let (dx, dy) = (mesh.elem_width(), mesh.elem_height());
    if rmin < dx.min(dy) {
        log::warn!("filter radius {rmin} is below the element size; filtering is nearly the identity");
    }
    let length = filter_length(rmin);
    let (cx, cy) = ((length / dx).powi(2), (length / dy).powi(2));
    let (nelx, nely) = (mesh.nelx, mesh.nely);
    let n = nelx * nely;
    let mut trip = Vec::with_capacity(5 * n);
    for ex in 0..nelx {
        for ey in 0..nely {
            let e = ex * nely + ey;
            let mut diag = 1.0;
            let mut link = |o: usize, c: f64| {
                trip.push((e, o, -c));
                diag += c;
            };
            if ex > 0 {
                link(e - nely, cx);
            }
            if ex + 1 < nelx {
                link(e + nely, cx);
            }
            if ey > 0 {
                link(e - 1, cy);
            }
            if ey + 1 < nely {
                link(e + 1, cy);
            }
            trip.push((e, e, diag));
        }
    }
    let matrix = CscMatrix::from_triplets(n, n, &trip);
    let mut lu = LuSolver::analyze(Arc::clone(&matrix.pattern))?;
    lu.factorize(&matrix)?;
    Ok(PdeFilter {
        nelx,
        nely,
        length,
        matrix,
        lu,
    })
}

impl PdeFilter {
    pub fn len(&self) -> usize {
        self.nelx * self.nely
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `ρ̃ = A⁻¹ ρ`.
    pub fn apply(&self, rho: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(rho)
    }

    /// `A⁻ᵀ v`, which equals `apply` for this symmetric operator.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve_transpose(v)
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.matrix
    }
}

/// Smoothed Heaviside `(tanh βη + tanh β(x − η)) / (tanh βη + tanh β(1 − η))`.
pub fn project(x_tilde: &[f64], beta: f64, eta: f64) -> Vec<f64> {
    let den = (beta * eta).tanh() + (beta * (1.0 - eta)).tanh();
    let a = (beta * eta).tanh();
    x_tilde
        .iter()
        .map(|&x| ((a + (beta * (x - eta)).tanh()) / den).clamp(0.0, 1.0))
        .collect()
}

pub fn project_derivative(x_tilde: &[f64], beta: f64, eta: f64) -> Vec<f64> {
    let den = (beta * eta).tanh() + (beta * (1.0 - eta)).tanh();
    x_tilde
        .iter()
        .map(|&x| {
            let t = (beta * (x - eta)).tanh();
            beta * (1.0 - t * t) / den
        })
        .collect()
}

/// Design variables and their derived fields.
#[derive(Debug, Clone)]
pub struct DesignState {
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub x_hat_dilated: Vec<f64>,
    pub pas_s: Vec<usize>,
    pub pas_v: Vec<usize>,
    pub beta: f64,
    pub eta_b: f64,
    pub eta_d: f64,
}

impl DesignState {
    /// Uniform initial design `x0` with passive sets applied; call
    /// [`DesignState::update`] before reading the derived fields.
    pub fn new(
        n_elem: usize,
        x0: f64,
        pas_s: Vec<usize>,
        pas_v: Vec<usize>,
        eta_b: f64,
        eta_d: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&x0) {
            return Err(Error::invalid(format!("initial density {x0} outside [0, 1]")));
        }
        if pas_s.iter().chain(&pas_v).any(|&e| e >= n_elem) {
            return Err(Error::invalid("passive element index out of range"));
        }
        if !(eta_d <= eta_b) {
            return Err(Error::invalid(format!(
                "dilated threshold {eta_d} must not exceed the blueprint threshold {eta_b}"
            )));
        }
        let mut s = Self {
            x: vec![x0; n_elem],
            x_tilde: vec![x0; n_elem],
            x_hat: vec![x0; n_elem],
            x_hat_dilated: vec![x0; n_elem],
            pas_s,
            pas_v,
            beta: 1.0,
            eta_b,
            eta_d,
        };
        s.clamp_passive();
        Ok(s)
    }

    pub fn n_elem(&self) -> usize {
        self.x.len()
    }

    pub fn clamp_passive(&mut self) {
        for &e in &self.pas_v {
            self.x[e] = 0.0;
        }
        for &e in &self.pas_s {
            self.x[e] = 1.0;
        }
    }

    /// Per-element flag, `true` for design (non-passive) elements.
    pub fn active_mask(&self) -> Vec<bool> {
        let mut m = vec![true; self.n_elem()];
        for &e in self.pas_s.iter().chain(&self.pas_v) {
            m[e] = false;
        }
        m
    }

    /// Clamp, filter and project both thresholds.
    pub fn update(&mut self, filter: &PdeFilter) -> Result<()> {
        if filter.len() != self.n_elem() {
            return Err(Error::invalid("filter size does not match the design"));
        }
        self.clamp_passive();
        self.x_tilde = filter.apply(&self.x)?;
        self.x_hat = project(&self.x_tilde, self.beta, self.eta_b);
        self.x_hat_dilated = project(&self.x_tilde, self.beta, self.eta_d);
        for &e in &self.pas_v {
            self.x_hat[e] = 0.0;
            self.x_hat_dilated[e] = 0.0;
        }
        for &e in &self.pas_s {
            self.x_hat[e] = 1.0;
            self.x_hat_dilated[e] = 1.0;
        }
        Ok(())
    }

    /// Maps `∂f/∂ρ̂` (at threshold `eta`) back to `∂f/∂ρ`.
    pub fn chain_rule(&self, filter: &PdeFilter, df_dxhat: &[f64], eta: f64) -> Result<Vec<f64>> {
        if df_dxhat.len() != self.n_elem() {
            return Err(Error::invalid("sensitivity size does not match the design"));
        }
        let dproj = project_derivative(&self.x_tilde, self.beta, eta);
        let active = self.active_mask();
        let v: Vec<f64> = df_dxhat
            .iter()
            .zip(&dproj)
            .zip(&active)
            .map(|((&d, &p), &a)| if a { d * p } else { 0.0 })
            .collect();
        let mut out = filter.apply_transpose(&v)?;
        for (o, &a) in out.iter_mut().zip(&active) {
            if !a {
                *o = 0.0;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_grid;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_field_is_preserved() {
        let mesh = build_grid(10, 7, 10.0, 7.0).unwrap();
        let f = build_filter(&mesh, 3.0).unwrap();
        for v in f.apply(&vec![0.37; 70]).unwrap() {
            assert_relative_eq!(v, 0.37, epsilon = 1e-14);
        }
    }

    #[test]
    fn spike_decays_and_conserves_mass() {
        let mesh = build_grid(41, 41, 41.0, 41.0).unwrap();
        let f = build_filter(&mesh, 4.0).unwrap();
        let mut x = vec![0.0; 41 * 41];
        let c = mesh.element_at(20, 20);
        x[c] = 1.0;
        let y = f.apply(&x).unwrap();
        let mass: f64 = y.iter().sum();
        assert!((mass - 1.0).abs() < 1e-10);
        assert!(y[c] < 1.0);
        assert!(y[mesh.element_at(21, 20)] < y[c]);
        assert!(y[mesh.element_at(22, 20)] < y[mesh.element_at(21, 20)]);
        assert!(y.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn length_conversion() {
        assert_relative_eq!(filter_length(100.0 / 24.0), 1.2028, epsilon = 1e-4);
    }

    #[test]
    fn filter_is_self_adjoint() {
        let mesh = build_grid(9, 6, 9.0, 4.0).unwrap();
        let f = build_filter(&mesh, 2.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..54).map(|_| rng.gen()).collect();
        let b: Vec<f64> = (0..54).map(|_| rng.gen()).collect();
        let fa = f.apply(&a).unwrap();
        let fb = f.apply(&b).unwrap();
        let l: f64 = fa.iter().zip(&b).map(|(x, y)| x * y).sum();
        let r: f64 = a.iter().zip(&fb).map(|(x, y)| x * y).sum();
        assert!((l - r).abs() / l.abs() < 1e-12);
    }

    #[test]
    fn projection_properties() {
        assert_relative_eq!(project(&[0.5], 8.0, 0.5)[0], 0.5, epsilon = 1e-15);
        let sweep: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let p = project(&sweep, 1.0, 0.5);
        assert_relative_eq!(p[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(p[100], 1.0, epsilon = 1e-15);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        let sharp = project(&[0.7], 15.0, 0.5)[0];
        let expected = (7.5f64.tanh() + 3f64.tanh()) / (2.0 * 7.5f64.tanh());
        assert_relative_eq!(sharp, expected, epsilon = 1e-15);
        assert!((sharp - 0.99753).abs() < 1e-5);
        for beta in [1.0, 4.0, 16.0, 64.0] {
            for eta in [0.3, 0.45, 0.5, 0.7] {
                let pb = project(&sweep, beta, eta);
                assert!(pb.iter().all(|v| (0.0..=1.0).contains(v)));
            }
            let blue = project(&sweep, beta, 0.5);
            let dil = project(&sweep, beta, 0.45);
            assert!(blue.iter().zip(&dil).all(|(b, d)| d >= b));
        }
    }

    #[test]
    fn projection_derivative_matches_difference() {
        let xs = [0.1, 0.44, 0.5, 0.63, 0.9];
        let d = project_derivative(&xs, 6.0, 0.45);
        for (i, &x) in xs.iter().enumerate() {
            let h = 1e-6;
            let fd = (project(&[x + h], 6.0, 0.45)[0] - project(&[x - h], 6.0, 0.45)[0]) / (2.0 * h);
            assert_relative_eq!(d[i], fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn chain_rule_matches_finite_difference() {
        let mesh = build_grid(6, 6, 6.0, 6.0).unwrap();
        let f = build_filter(&mesh, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = DesignState::new(36, 0.5, vec![0], vec![35], 0.5, 0.45).unwrap();
        s.x = (0..36).map(|_| rng.gen_range(0.2..0.8)).collect();
        s.beta = 4.0;
        let w: Vec<f64> = (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // smooth functional of the projected field
        let functional = |st: &DesignState| -> f64 {
            st.x_hat.iter().zip(&w).map(|(x, w)| w * x * x + x.sin()).sum()
        };
        s.update(&f).unwrap();
        let df: Vec<f64> = s.x_hat.iter().zip(&w).map(|(x, w)| 2.0 * w * x + x.cos()).collect();
        let g = s.chain_rule(&f, &df, s.eta_b).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[35], 0.0);
        for e in 1..35 {
            let h = 1e-6;
            let mut p = s.clone();
            p.x[e] += h;
            p.update(&f).unwrap();
            let mut m = s.clone();
            m.x[e] -= h;
            m.update(&f).unwrap();
            let fd = (functional(&p) - functional(&m)) / (2.0 * h);
            assert!((fd - g[e]).abs() <= 1e-6 * g[e].abs().max(1e-3), "element {e}: {fd} vs {}", g[e]);
        }
    }

    #[test]
    fn passive_sets_are_frozen() {
        let mesh = build_grid(4, 4, 4.0, 4.0).unwrap();
        let f = build_filter(&mesh, 1.5).unwrap();
        let mut s = DesignState::new(16, 0.5, vec![3], vec![5, 6], 0.5, 0.45).unwrap();
        s.x[5] = 0.9;
        s.update(&f).unwrap();
        assert_eq!(s.x[5], 0.0);
        assert_eq!(s.x_hat[5], 0.0);
        assert_eq!(s.x_hat_dilated[6], 0.0);
        assert_eq!(s.x_hat[3], 1.0);
    }
}
