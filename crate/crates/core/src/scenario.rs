//! The two reference problems: the C-shape contact analysis and the
//! support-contact end-compliance design.
//!
//! C-shape: a solid "C" of thickness `t` (left column plus top and bottom
//! beams of length `L`) embedded in a `(L + t/2) × L/2` box whose remainder
//! is third medium. The left edge is clamped and a downward traction acts on
//! the last `t` of the top beam, closing the mouth of the C.
//!
//! Design problem: an `L × L` square clamped on the left edge, loaded on the
//! rightmost `t` of the top edge, with an L-shaped passive void (bottom strip
//! of height `t` and left strip of width `t` below the top `t`). The applied
//! resultant is the nominal load times `load_scale`.

use crate::error::{Error, Result};
use crate::material::HyperelasticMaterial;
use crate::mesh::{build_grid, select_nodes, GridMesh};
use crate::optimizer::{BetaSchedule, OptSettings, TopOptProblem};
use crate::solver::{SolverSettings, StructuralModel};

/// Gauss points per direction used by both scenarios.
pub const GAUSS_1D: usize = 2;

/// Slack for coordinate comparisons on grid nodes (relative to the element size).
const COORD_TOL: f64 = 1e-9;

/// Consistent nodal loads for a uniform downward traction on the top edge
/// segments whose midpoints lie in `[x0, x1]`, scaled to `total` (N).
///
/// Each segment gives half its length to each end node; the result is
/// normalized so the loads sum to `-total` exactly up to rounding.
pub fn top_edge_traction(mesh: &GridMesh, x0: f64, x1: f64, total: f64) -> Result<Vec<f64>> {
    let dx = mesh.elem_width();
    let mut f = vec![0.0; mesh.n_dof];
    let mut weights = vec![0.0; mesh.nelx + 1];
    let mut length = 0.0;
    for c in 0..mesh.nelx {
        let mid = (c as f64 + 0.5) * dx;
        if mid >= x0 - COORD_TOL * dx && mid <= x1 + COORD_TOL * dx {
            weights[c] += 0.5 * dx;
            weights[c + 1] += 0.5 * dx;
            length += dx;
        }
    }
    if length == 0.0 {
        return Err(Error::config(None, format!("no top edge segment lies in [{x0}, {x1}]")));
    }
    for (c, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            let node = mesh.node_at(c, 0);
            f[2 * node + 1] = -total * w / length;
        }
    }
    Ok(f)
}

fn clamp_dofs(nodes: &[usize]) -> Vec<usize> {
    nodes.iter().flat_map(|&n| GridMesh::node_dofs(n)).collect()
}

/// Inputs of the C-shape analysis (mm, MPa, N).
#[derive(Debug, Clone, PartialEq)]
pub struct CShapeParams {
    /// Beam length `L`; the meshed width is `L + t/2`.
    pub lx: f64,
    /// Box height (`L/2`).
    pub ly: f64,
    pub thk: f64,
    pub e0: f64,
    pub nu: f64,
    pub kv: f64,
    pub alpha: f64,
    pub nelx: usize,
    pub nely: usize,
    /// End load multiplier; the reference load on `Γ_t` has unit resultant (N).
    pub lambda_max: f64,
    pub n_incr: usize,
    pub tol_rel_res: f64,
    pub max_iter: usize,
}

impl Default for CShapeParams {
    fn default() -> Self {
        Self {
            lx: 100.0,
            ly: 50.0,
            thk: 10.0,
            e0: 100.0,
            nu: 0.3,
            kv: 1e-6,
            alpha: 1e-6,
            nelx: 62,
            nely: 30,
            lambda_max: 3.0,
            n_incr: 200,
            tol_rel_res: 1e-6,
            max_iter: 50,
        }
    }
}

/// Probe nodes of the C-shape run.
#[derive(Debug, Clone, PartialEq)]
pub struct Probes {
    /// Bottom-right solid corner whose displacement tracks force transfer.
    pub x_c: usize,
    /// Inner corner of the top beam approaching the bottom beam.
    pub x_g: usize,
    /// Nodes on the inner surface of the bottom beam.
    pub x_i: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CShapeScenario {
    pub params: CShapeParams,
    pub model: StructuralModel,
    pub gammas: Vec<f64>,
    pub solid: Vec<usize>,
    pub probes: Probes,
    pub settings: SolverSettings,
}

impl CShapeScenario {
    pub fn gap(&self, u: &[f64]) -> f64 {
        probe_gap(&self.model.mesh, u, &self.probes)
    }

    pub fn corner_displacement(&self, u: &[f64]) -> f64 {
        probe_point_displacement(u, self.probes.x_c)
    }
}

pub fn build_cshape(p: &CShapeParams) -> Result<CShapeScenario> {
    for (name, v) in [("Lx", p.lx), ("Ly", p.ly), ("thk", p.thk), ("E0", p.e0)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::config(None, format!("{name} must be positive (got {v})")));
        }
    }
    if 2.0 * p.thk >= p.ly || p.thk >= p.lx {
        return Err(Error::config(None, "solid thickness leaves no gap inside the C"));
    }
    let width = p.lx + 0.5 * p.thk;
    let mesh = build_grid(p.nelx, p.nely, width, p.ly)?;
    let (dx, dy) = (mesh.elem_width(), mesh.elem_height());
    let (l, t, h) = (p.lx, p.thk, p.ly);
    let solid = mesh.select_elements(|x, y| x <= l && (x <= t || y <= t || y >= h - t));
    if solid.is_empty() || solid.len() == mesh.n_elem() {
        return Err(Error::config(None, "mesh too coarse to resolve the solid and void regions"));
    }
    let material = HyperelasticMaterial::new(p.e0, p.nu, p.kv, p.alpha, width.max(p.ly))?;
    let mut gammas = vec![p.kv; mesh.n_elem()];
    for &e in &solid {
        gammas[e] = 1.0;
    }
    let fixed = clamp_dofs(&select_nodes(&mesh, |x, _| x <= COORD_TOL * dx));
    let f0 = top_edge_traction(&mesh, l - t, l, 1.0)?;
    let x_c = mesh.nearest_node([l, 0.0]);
    let x_g = mesh.nearest_node([l, h - t]);
    let x_i = select_nodes(&mesh, |x, y| {
        (y - t).abs() <= 0.5 * dy && x >= t - COORD_TOL * dx && x <= l + COORD_TOL * dx
    });
    if x_i.is_empty() {
        return Err(Error::config(None, "no mesh node on the inner surface of the bottom beam"));
    }
    let settings = SolverSettings {
        n_incr: p.n_incr,
        max_iter: p.max_iter,
        tol_rel_res: p.tol_rel_res,
        lambda_max: p.lambda_max,
        max_cuts: 0,
    };
    settings.validate().map_err(|e| Error::config(None, e.to_string()))?;
    let model = StructuralModel::new(mesh, material, &fixed, f0, GAUSS_1D)?;
    Ok(CShapeScenario {
        params: p.clone(),
        model,
        gammas,
        solid,
        probes: Probes { x_c, x_g, x_i },
        settings,
    })
}

/// Deformed distance from `x_g` to the nearest of `x_i`.
pub fn probe_gap(mesh: &GridMesh, u: &[f64], probes: &Probes) -> f64 {
    let pos = |n: usize| {
        let c = mesh.node_coords[n];
        [c[0] + u[2 * n], c[1] + u[2 * n + 1]]
    };
    let g = pos(probes.x_g);
    probes
        .x_i
        .iter()
        .map(|&n| {
            let q = pos(n);
            (g[0] - q[0]).hypot(g[1] - q[1])
        })
        .fold(f64::INFINITY, f64::min)
}

/// `|u|` at `node`.
pub fn probe_point_displacement(u: &[f64], node: usize) -> f64 {
    u[2 * node].hypot(u[2 * node + 1])
}

/// Modelling assumption of the design problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Tiny end load on the full clamp, mimicking linear elasticity.
    Linear,
    /// Finite load with the clamp kept only next to the design domain.
    Nonlinear,
    /// Finite load with the full clamp, so the void can transfer contact.
    Contact,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Linear, Variant::Nonlinear, Variant::Contact];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Linear => "linear",
            Variant::Nonlinear => "nonlinear",
            Variant::Contact => "contact",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Variant::Linear),
            "nonlinear" => Ok(Variant::Nonlinear),
            "contact" => Ok(Variant::Contact),
            other => Err(Error::config(
                None,
                format!("unknown variant `{other}` (expected linear, nonlinear or contact)"),
            )),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Inputs of the design problem (mm, MPa, N).
#[derive(Debug, Clone, PartialEq)]
pub struct TopOptParams {
    pub l: f64,
    pub thk: f64,
    pub e0: f64,
    pub nu: f64,
    pub kv: f64,
    pub alpha: f64,
    /// Nominal total end load (N).
    pub load: f64,
    /// Factor turning the nominal load into the applied resultant
    /// `load · load_scale`.
    pub load_scale: f64,
    pub nelx: usize,
    pub nely: usize,
    pub volfrac: f64,
    pub rmin: f64,
    pub eta_b: f64,
    pub eta_d: f64,
    pub q_ramp: f64,
    pub beta: BetaSchedule,
    /// `Λ_end` of the nonlinear and contact variants.
    pub lambda_end: f64,
    /// `Λ_end` of the linear-mimicking variant.
    pub lambda_end_linear: f64,
    pub n_incr: usize,
    pub tol_rel_res: f64,
    pub max_iter: usize,
    /// Step halvings allowed per increment in the forward solves.
    pub max_cuts: usize,
    pub max_outer_iters: usize,
    pub move_limit: f64,
    pub change_tol: f64,
}

impl Default for TopOptParams {
    fn default() -> Self {
        Self {
            l: 100.0,
            thk: 10.0,
            e0: 100.0,
            nu: 0.3,
            kv: 1e-6,
            alpha: 1e-6,
            load: 40.0,
            load_scale: 0.1,
            nelx: 160,
            nely: 160,
            volfrac: 0.25,
            rmin: 100.0 / 24.0,
            eta_b: 0.5,
            eta_d: 0.45,
            q_ramp: 4.0,
            beta: BetaSchedule::default(),
            lambda_end: 1.0,
            lambda_end_linear: 0.01,
            n_incr: 20,
            tol_rel_res: 1e-6,
            max_iter: 50,
            max_cuts: 10,
            max_outer_iters: 300,
            move_limit: 0.2,
            change_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TopOptScenario {
    pub variant: Variant,
    pub params: TopOptParams,
    pub problem: TopOptProblem,
    pub settings: OptSettings,
}

pub fn build_topopt(p: &TopOptParams, variant: Variant) -> Result<TopOptScenario> {
    for (name, v) in [("L", p.l), ("thk", p.thk), ("E0", p.e0), ("load", p.load), ("loadScale", p.load_scale)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::config(None, format!("{name} must be positive (got {v})")));
        }
    }
    if 2.0 * p.thk >= p.l {
        return Err(Error::config(None, "void thickness too large for the domain"));
    }
    let mesh = build_grid(p.nelx, p.nely, p.l, p.l)?;
    let (l, t) = (p.l, p.thk);
    let material = HyperelasticMaterial::new(p.e0, p.nu, p.kv, p.alpha, l)?.with_ramp(p.q_ramp, p.kv)?;
    let pas_v = mesh.select_elements(|x, y| y < t || (x < t && y < l - t));
    let dy = mesh.elem_height();
    let left = |x: f64| x <= COORD_TOL * mesh.elem_width();
    let clamped = match variant {
        Variant::Linear | Variant::Contact => select_nodes(&mesh, |x, _| left(x)),
        Variant::Nonlinear => select_nodes(&mesh, |x, y| left(x) && y >= l - t - COORD_TOL * dy),
    };
    let f0 = top_edge_traction(&mesh, l - t, l, p.load * p.load_scale)?;
    let lambda_end = match variant {
        Variant::Linear => p.lambda_end_linear,
        _ => p.lambda_end,
    };
    let settings = OptSettings {
        volfrac: p.volfrac,
        max_outer_iters: p.max_outer_iters,
        move_limit: p.move_limit,
        change_tol: p.change_tol,
        beta: p.beta,
        rmin: p.rmin,
        eta_b: p.eta_b,
        eta_d: p.eta_d,
        solver: SolverSettings {
            n_incr: p.n_incr,
            max_iter: p.max_iter,
            tol_rel_res: p.tol_rel_res,
            lambda_max: lambda_end,
            max_cuts: p.max_cuts,
        },
    };
    settings.validate().map_err(|e| Error::config(None, e.to_string()))?;
    let model = StructuralModel::new(mesh, material, &clamp_dofs(&clamped), f0, GAUSS_1D)?;
    Ok(TopOptScenario {
        variant,
        params: p.clone(),
        problem: TopOptProblem {
            model,
            pas_s: Vec::new(),
            pas_v,
        },
        settings,
    })
}
