//! Load-controlled incremental Newton–Raphson solver.
//!
//! The load program is `Λᵢ = i·Λ_end/n` for `i = 1..=n`. Each increment
//! warm-starts from the previous converged state and iterates
//! `K_T(u) Δu = Λᵢ f₀ − f_int(u)` on the free DOFs until
//! `‖Λᵢ f₀ − f_int‖ / ‖Λᵢ f₀‖ ≤ τ`. A correction that would invert an
//! element is halved until it does not; otherwise no line search is applied.

use crate::assembly::{min_det_f, Assembler};
use crate::element::{build_operators, QuadOperators};
use crate::error::{Error, Result};
use crate::material::HyperelasticMaterial;
use crate::mesh::GridMesh;
use crate::sparse::{norm, LuSolver};

/// Halvings of a Newton correction tried to keep every `det F` positive.
const MAX_DAMPING: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub n_incr: usize,
    pub max_iter: usize,
    pub tol_rel_res: f64,
    /// End load multiplier `Λ_end`.
    pub lambda_max: f64,
    /// How many times a failed increment may be halved before giving up
    /// (0 keeps the fixed load ladder).
    pub max_cuts: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            n_incr: 200,
            max_iter: 50,
            tol_rel_res: 1e-6,
            lambda_max: 3.0,
            max_cuts: 0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_incr == 0 {
            return Err(Error::invalid("n_incr must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.tol_rel_res > 0.0) {
            return Err(Error::invalid("tol_rel_res must be positive"));
        }
        if !self.lambda_max.is_finite() {
            return Err(Error::invalid("lambda_max must be finite"));
        }
        Ok(())
    }

    pub fn load_factor(&self, increment: usize) -> f64 {
        increment as f64 * self.lambda_max / self.n_incr as f64
    }
}

/// Homogeneous Dirichlet conditions split into fixed and free DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    pub fixed: Vec<usize>,
    pub free: Vec<usize>,
}

impl Dirichlet {
    pub fn new(n_dof: usize, fixed: &[usize]) -> Result<Self> {
        let mut is_fixed = vec![false; n_dof];
        for &d in fixed {
            if d >= n_dof {
                return Err(Error::invalid(format!("fixed DOF {d} out of range")));
            }
            is_fixed[d] = true;
        }
        let fixed = (0..n_dof).filter(|&d| is_fixed[d]).collect();
        let free = (0..n_dof).filter(|&d| !is_fixed[d]).collect();
        Ok(Self { fixed, free })
    }
}

/// Everything the forward solve needs apart from the element scales.
#[derive(Debug, Clone)]
pub struct StructuralModel {
    pub mesh: GridMesh,
    pub ops: QuadOperators,
    pub material: HyperelasticMaterial,
    pub bcs: Dirichlet,
    /// Reference load vector (zero on fixed DOFs).
    pub f0: Vec<f64>,
    assembler: Assembler,
}

impl StructuralModel {
    pub fn new(
        mesh: GridMesh,
        material: HyperelasticMaterial,
        fixed_dofs: &[usize],
        f0: Vec<f64>,
        n_gauss_1d: usize,
    ) -> Result<Self> {
        if f0.len() != mesh.n_dof {
            return Err(Error::invalid(format!(
                "load vector has length {}, expected {}",
                f0.len(),
                mesh.n_dof
            )));
        }
        let ops = build_operators(mesh.elem_width(), mesh.elem_height(), n_gauss_1d)?;
        let bcs = Dirichlet::new(mesh.n_dof, fixed_dofs)?;
        if bcs.fixed.iter().any(|&d| f0[d] != 0.0) {
            return Err(Error::invalid("reference load acts on a fixed DOF"));
        }
        let assembler = Assembler::new(&mesh, &bcs.free)?;
        Ok(Self {
            mesh,
            ops,
            material,
            bcs,
            f0,
            assembler,
        })
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    pub fn new_lu(&self) -> Result<LuSolver> {
        LuSolver::analyze(self.assembler.pattern().clone())
    }

    /// Free-DOF residual `Λ f₀ − f_int(u)`.
    pub fn residual(&self, u: &[f64], gammas: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let f_int = self.assembler.internal_force(&self.mesh, &self.ops, &self.material, u, gammas)?;
        Ok(self
            .bcs
            .free
            .iter()
            .map(|&d| lambda * self.f0[d] - f_int[d])
            .collect())
    }
}

/// Outcome of one Newton correction.
#[derive(Debug, Clone, Copy)]
pub struct NewtonStep {
    /// Relative residual before the correction.
    pub residual: f64,
    pub converged: bool,
}

/// Evaluates the residual at `u`; if it is above tolerance, applies one
/// Newton correction in place.
pub fn newton_step(
    model: &StructuralModel,
    lu: &mut LuSolver,
    u: &mut [f64],
    gammas: &[f64],
    lambda: f64,
    tol: f64,
) -> Result<NewtonStep> {
    let sys = model
        .assembler
        .assemble(&model.mesh, &model.ops, &model.material, u, gammas)?;
    let free = &model.bcs.free;
    let r: Vec<f64> = free.iter().map(|&d| lambda * model.f0[d] - sys.f_int[d]).collect();
    let ref_norm = lambda.abs() * norm(&model.assembler.restrict(&model.f0));
    let rn = norm(&r);
    if !rn.is_finite() {
        return Err(Error::NonFinite("residual"));
    }
    let residual = if ref_norm > 0.0 { rn / ref_norm } else { rn };
    if residual <= tol {
        return Ok(NewtonStep { residual, converged: true });
    }
    lu.factorize(&sys.k)?;
    let mut du = lu.solve(&r)?;
    // halve the correction while it would invert an element; a full step that
    // stays admissible is applied unchanged
    let mut trial = u.to_vec();
    for _ in 0..MAX_DAMPING {
        model.assembler.expand_add(&du, &mut trial);
        if min_det_f(&model.mesh, &model.ops, &trial) > 0.0 {
            break;
        }
        trial.copy_from_slice(u);
        du.iter_mut().for_each(|v| *v *= 0.5);
    }
    model.assembler.expand_add(&du, u);
    Ok(NewtonStep { residual, converged: false })
}

/// Converged state of one load increment.
#[derive(Debug, Clone)]
pub struct IncrementRecord {
    pub increment: usize,
    /// Load multiplier `Λᵢ`.
    pub lambda: f64,
    /// `i / n`, the load multiplier normalized to `[0, 1]`.
    pub load_fraction: f64,
    /// Linear solves needed to restore equilibrium.
    pub iterations: usize,
    /// Relative residual at every evaluation, ending with the accepted one.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub u: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct AnalysisHistory {
    pub records: Vec<IncrementRecord>,
    /// Set when the load program was aborted.
    pub failure: Option<Error>,
}

impl AnalysisHistory {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn final_u(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.u.as_slice())
    }

    pub fn total_iterations(&self) -> usize {
        self.records.iter().map(|r| r.iterations).sum()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Newton iterations on one load level, starting from `u`.
fn equilibrate(
    model: &StructuralModel,
    lu: &mut LuSolver,
    u: &mut [f64],
    gammas: &[f64],
    lambda: f64,
    settings: &SolverSettings,
    increment: usize,
    residuals: &mut Vec<f64>,
) -> Result<usize> {
    let mut iterations = 0;
    loop {
        let step = newton_step(model, lu, u, gammas, lambda, settings.tol_rel_res)?;
        residuals.push(step.residual);
        if step.converged {
            return Ok(iterations);
        }
        iterations += 1;
        if iterations > settings.max_iter {
            return Err(Error::NonConvergence {
                increment,
                iterations: settings.max_iter,
                residual: step.residual,
            });
        }
    }
}

/// Runs the full load program from `u = 0`.
///
/// `observer` sees every converged increment as soon as it is accepted.
/// On failure the history holds the converged increments, the failed one
/// (with `converged = false`) and the error. With `max_cuts > 0` a failed
/// increment is retried from the last converged state in halved sub-steps;
/// its record then sums the iterations of all accepted sub-steps.
pub fn incremental_solve(
    model: &StructuralModel,
    gammas: &[f64],
    settings: &SolverSettings,
    mut observer: impl FnMut(&IncrementRecord),
) -> AnalysisHistory {
    let mut history = AnalysisHistory::default();
    if let Err(e) = settings.validate() {
        history.failure = Some(e);
        return history;
    }
    let mut lu = match model.new_lu() {
        Ok(lu) => lu,
        Err(e) => {
            history.failure = Some(e);
            return history;
        }
    };
    let mut u = vec![0.0; model.mesh.n_dof];
    let mut lambda_done = 0.0;
    for i in 1..=settings.n_incr {
        let lambda = settings.load_factor(i);
        let mut record = IncrementRecord {
            increment: i,
            lambda,
            load_fraction: i as f64 / settings.n_incr as f64,
            iterations: 0,
            residuals: Vec::new(),
            converged: false,
            u: Vec::new(),
        };
        let mut failure = None;
        let mut step = lambda - lambda_done;
        let mut cuts = 0;
        while lambda_done < lambda {
            let target = if lambda_done + step >= lambda { lambda } else { lambda_done + step };
            let mut trial = u.clone();
            let mut residuals = Vec::new();
            match equilibrate(model, &mut lu, &mut trial, gammas, target, settings, i, &mut residuals) {
                Ok(it) => {
                    record.iterations += it;
                    record.residuals = residuals;
                    u = trial;
                    lambda_done = target;
                }
                Err(e) if cuts < settings.max_cuts => {
                    cuts += 1;
                    step *= 0.5;
                    log::debug!("increment {i}: cutting step to {step:.3e} after {e}");
                }
                Err(e) => {
                    record.residuals = residuals;
                    u = trial;
                    failure = Some(e);
                    break;
                }
            }
        }
        record.converged = failure.is_none();
        record.u = u.clone();
        if let Some(e) = failure {
            log::warn!("increment {i} (Λ = {lambda:.4e}) failed: {e}");
            history.records.push(record);
            history.failure = Some(e);
            return history;
        }
        log::debug!(
            "increment {i}: Λ = {lambda:.4e}, {} iterations, residual {:.3e}",
            record.iterations,
            record.residuals.last().copied().unwrap_or(0.0)
        );
        observer(&record);
        history.records.push(record);
    }
    history
}
