//! End-compliance minimization through the nonlinear equilibrium.
//!
//! Every outer iteration clamps the passive sets, filters and projects the
//! design, solves the full load program from rest, evaluates
//! `c = Λ_end f₀ᵀ u_end` with its adjoint sensitivity, and moves the design
//! with a single-constraint MMA-like step on the dilated volume.

use crate::assembly::material_forces;
use crate::design::{build_filter, DesignState, PdeFilter};
use crate::error::{Error, Result};
use crate::solver::{incremental_solve, SolverSettings, StructuralModel};
use crate::sparse::dot;

/// Projection sharpness continuation: `start` until `first_iter`, then
/// multiplied by `factor` every `every` iterations, capped at `cap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    pub start: f64,
    pub cap: f64,
    pub first_iter: usize,
    pub every: usize,
    pub factor: f64,
}

impl Default for BetaSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            cap: 15.0,
            first_iter: 60,
            every: 30,
            factor: 2.0,
        }
    }
}

impl BetaSchedule {
    /// `β` used at 1-based outer iteration `iter`.
    pub fn beta_at(&self, iter: usize) -> f64 {
        if iter < self.first_iter || self.every == 0 {
            return self.start.min(self.cap);
        }
        let steps = (iter - self.first_iter) / self.every + 1;
        (self.start * self.factor.powi(steps as i32)).min(self.cap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptSettings {
    pub volfrac: f64,
    pub max_outer_iters: usize,
    pub move_limit: f64,
    /// Max-norm design change below which the loop stops once `β` is capped.
    pub change_tol: f64,
    pub beta: BetaSchedule,
    pub rmin: f64,
    pub eta_b: f64,
    pub eta_d: f64,
    /// Forward-solve settings; `lambda_max` is `Λ_end`.
    pub solver: SolverSettings,
}

impl Default for OptSettings {
    fn default() -> Self {
        Self {
            volfrac: 0.25,
            max_outer_iters: 300,
            move_limit: 0.2,
            change_tol: 1e-3,
            beta: BetaSchedule::default(),
            rmin: 100.0 / 24.0,
            eta_b: 0.5,
            eta_d: 0.45,
            solver: SolverSettings {
                n_incr: 20,
                max_iter: 50,
                tol_rel_res: 1e-6,
                lambda_max: 1.0,
                max_cuts: 10,
            },
        }
    }
}

impl OptSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.volfrac > 0.0 && self.volfrac < 1.0) {
            return Err(Error::invalid(format!("volume fraction {} outside (0, 1)", self.volfrac)));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return Err(Error::invalid(format!("move limit {} outside (0, 1]", self.move_limit)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("at least one outer iteration is required"));
        }
        if !(self.eta_d <= self.eta_b) {
            return Err(Error::invalid("dilated threshold must not exceed the blueprint threshold"));
        }
        self.solver.validate()
    }
}

/// `c = Λ_end f₀ᵀ u_end`.
pub fn end_compliance(u_end: &[f64], f0: &[f64], lambda_end: f64) -> f64 {
    lambda_end * dot(f0, u_end)
}

/// `dc/dρ̂` per element from the transposed-tangent adjoint at `u_end`.
pub fn adjoint_sensitivity(
    model: &StructuralModel,
    x_hat: &[f64],
    u_end: &[f64],
    lambda_end: f64,
) -> Result<Vec<f64>> {
    let mat = &model.material;
    let gammas: Vec<f64> = x_hat.iter().map(|&r| mat.ramp(r)).collect();
    let asm = model.assembler();
    let sys = asm.assemble(&model.mesh, &model.ops, mat, u_end, &gammas)?;
    let mut lu = model.new_lu()?;
    lu.factorize(&sys.k)?;
    let rhs: Vec<f64> = asm.restrict(&model.f0).iter().map(|v| lambda_end * v).collect();
    let theta_free = lu
        .solve_transpose(&rhs)
        .map_err(|e| Error::LinearSolve(format!("adjoint system: {e}")))?;
    let mut theta = vec![0.0; model.mesh.n_dof];
    asm.expand_add(&theta_free, &mut theta);
    let fm = material_forces(&model.mesh, &model.ops, mat, u_end)?;
    Ok(fm
        .iter()
        .enumerate()
        .map(|(e, f)| {
            let th = model.mesh.gather(e, &theta);
            let v: f64 = th.iter().zip(f.iter()).map(|(a, b)| a * b).sum();
            -v * mat.ramp_derivative(x_hat[e])
        })
        .collect())
}

/// `g = mean(ρ̂_d over active elements) / v̄ − 1` and `∂g/∂ρ̂_d` (zero on passive elements).
pub fn volume_constraint(x_hat_dilated: &[f64], active: &[bool], volfrac: f64) -> (f64, Vec<f64>) {
    let n = active.iter().filter(|&&a| a).count().max(1) as f64;
    let sum: f64 = x_hat_dilated.iter().zip(active).filter(|(_, &a)| a).map(|(x, _)| x).sum();
    let g = sum / n / volfrac - 1.0;
    let dg = active.iter().map(|&a| if a { 1.0 / (n * volfrac) } else { 0.0 }).collect();
    (g, dg)
}

/// Result of a design update.
#[derive(Debug, Clone)]
pub struct UpdateResult {
    pub x: Vec<f64>,
    pub multiplier: f64,
}

/// Single-constraint MMA-like step.
///
/// Asymptotes sit at `x ∓ move/0.9` so that the usual `0.1` asymptote
/// offset reproduces the move limit. The Lagrange multiplier of the
/// linearized constraint is found by bisection.
pub fn mma_like_update(x: &[f64], dc: &[f64], dg: &[f64], g: f64, move_limit: f64) -> Result<UpdateResult> {
    let n = x.len();
    if dc.len() != n || dg.len() != n {
        return Err(Error::invalid("update vectors differ in length"));
    }
    if dc.iter().chain(dg).any(|v| !v.is_finite()) || !g.is_finite() {
        return Err(Error::NonFinite("design sensitivities"));
    }
    let s = move_limit / 0.9;
    let mut p0 = vec![0.0; n];
    let mut q0 = vec![0.0; n];
    let mut p1 = vec![0.0; n];
    let mut q1 = vec![0.0; n];
    let (lo, hi): (Vec<f64>, Vec<f64>) = x
        .iter()
        .map(|&xi| ((xi - move_limit).max(0.0), (xi + move_limit).min(1.0)))
        .unzip();
    for j in 0..n {
        p0[j] = s * s * dc[j].max(0.0);
        q0[j] = s * s * (-dc[j]).max(0.0);
        p1[j] = s * s * dg[j].max(0.0);
        q1[j] = s * s * (-dg[j]).max(0.0);
    }
    let candidate = |lambda: f64| -> Vec<f64> {
        (0..n)
            .map(|j| {
                let pp = p0[j] + lambda * p1[j];
                let qq = q0[j] + lambda * q1[j];
                if pp + qq == 0.0 {
                    return x[j];
                }
                let (sp, sq) = (pp.sqrt(), qq.sqrt());
                let xs = (sp * (x[j] - s) + sq * (x[j] + s)) / (sp + sq);
                xs.clamp(lo[j], hi[j])
            })
            .collect()
    };
    // linearized constraint in the same reciprocal variables
    let constraint = |xn: &[f64]| -> f64 {
        g + (0..n)
            .map(|j| p1[j] * (1.0 / (x[j] + s - xn[j]) - 1.0 / s) + q1[j] * (1.0 / (xn[j] - x[j] + s) - 1.0 / s))
            .sum::<f64>()
    };
    let x0 = candidate(0.0);
    if constraint(&x0) <= 0.0 {
        return Ok(UpdateResult { x: x0, multiplier: 0.0 });
    }
    let mut l1 = 0.0;
    let mut l2 = 1.0;
    let mut expansions = 0;
    while constraint(&candidate(l2)) > 0.0 {
        l1 = l2;
        l2 *= 10.0;
        expansions += 1;
        if expansions > 400 {
            // infeasible within move limits: take the most volume-reducing step
            return Ok(UpdateResult { x: candidate(l2), multiplier: l2 });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (l1 + l2);
        if mid <= l1 || mid >= l2 {
            break;
        }
        if constraint(&candidate(mid)) > 0.0 {
            l1 = mid;
        } else {
            l2 = mid;
        }
        if (l2 - l1) <= 1e-14 * l2 {
            break;
        }
    }
    let lambda = 0.5 * (l1 + l2);
    Ok(UpdateResult { x: candidate(lambda), multiplier: lambda })
}

/// One row of the optimization history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub compliance: f64,
    pub constraint: f64,
    pub beta: f64,
    pub change: f64,
    /// Mean blueprint density over the active elements.
    pub volume: f64,
    pub newton_iterations: usize,
}

/// A model with its passive element sets.
#[derive(Debug, Clone)]
pub struct TopOptProblem {
    pub model: StructuralModel,
    pub pas_s: Vec<usize>,
    pub pas_v: Vec<usize>,
}

#[derive(Debug)]
pub struct OptimizationResult {
    pub design: DesignState,
    pub trace: Vec<IterationRecord>,
    /// Final displacement of the last successful forward solve.
    pub u_end: Vec<f64>,
    /// Set when a forward or adjoint analysis aborted the loop; `design`
    /// then holds the design that failed.
    pub failure: Option<Error>,
}

impl OptimizationResult {
    pub fn final_compliance(&self) -> Option<f64> {
        self.trace.last().map(|r| r.compliance)
    }
}

/// Runs the redesign loop from a uniform design at the volume fraction.
pub fn optimize(
    problem: &TopOptProblem,
    settings: &OptSettings,
    mut observer: impl FnMut(&IterationRecord),
) -> Result<OptimizationResult> {
    settings.validate()?;
    let model = &problem.model;
    let filter = build_filter(&model.mesh, settings.rmin)?;
    let mut design = DesignState::new(
        model.mesh.n_elem(),
        settings.volfrac,
        problem.pas_s.clone(),
        problem.pas_v.clone(),
        settings.eta_b,
        settings.eta_d,
    )?;
    let mut result = OptimizationResult {
        design: design.clone(),
        trace: Vec::new(),
        u_end: vec![0.0; model.mesh.n_dof],
        failure: None,
    };
    let active = design.active_mask();
    for iter in 1..=settings.max_outer_iters {
        design.beta = settings.beta.beta_at(iter);
        match outer_step(model, &filter, &mut design, &active, settings, iter) {
            Ok((record, u_end)) => {
                log::info!(
                    "iter {:4}: c = {:.6e}, g = {:+.3e}, beta = {:.1}, change = {:.3e}",
                    record.iter,
                    record.compliance,
                    record.constraint,
                    record.beta,
                    record.change
                );
                observer(&record);
                let stop = record.change < settings.change_tol && design.beta >= settings.beta.cap;
                result.trace.push(record);
                result.u_end = u_end;
                if stop {
                    break;
                }
            }
            Err(e) => {
                log::warn!("outer iteration {iter} aborted: {e}");
                result.failure = Some(e);
                break;
            }
        }
    }
    design.update(&filter)?;
    result.design = design;
    Ok(result)
}

fn outer_step(
    model: &StructuralModel,
    filter: &PdeFilter,
    design: &mut DesignState,
    active: &[bool],
    settings: &OptSettings,
    iter: usize,
) -> Result<(IterationRecord, Vec<f64>)> {
    design.update(filter)?;
    let gammas: Vec<f64> = design.x_hat.iter().map(|&r| model.material.ramp(r)).collect();
    let history = incremental_solve(model, &gammas, &settings.solver, |_| {}).into_result()?;
    let newton_iterations = history.total_iterations();
    let u_end = history
        .records
        .last()
        .map(|r| r.u.clone())
        .ok_or_else(|| Error::invalid("empty load program"))?;
    let lambda_end = settings.solver.lambda_max;
    let c = end_compliance(&u_end, &model.f0, lambda_end);
    let dc_hat = adjoint_sensitivity(model, &design.x_hat, &u_end, lambda_end)?;
    let dc = design.chain_rule(filter, &dc_hat, design.eta_b)?;
    let (g, dg_hat) = volume_constraint(&design.x_hat_dilated, active, settings.volfrac);
    let dg = design.chain_rule(filter, &dg_hat, design.eta_d)?;
    let upd = mma_like_update(&design.x, &dc, &dg, g, settings.move_limit)?;
    let change = design
        .x
        .iter()
        .zip(&upd.x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let n_active = active.iter().filter(|&&a| a).count().max(1) as f64;
    let volume = design.x_hat.iter().zip(active).filter(|(_, &a)| a).map(|(x, _)| x).sum::<f64>() / n_active;
    design.x = upd.x;
    design.clamp_passive();
    Ok((
        IterationRecord {
            iter,
            compliance: c,
            constraint: g,
            beta: design.beta,
            change,
            volume,
            newton_iterations,
        },
        u_end,
    ))
}
