//! End-to-end drivers that run a scenario and write its artifacts.

use std::path::PathBuf;

use crate::assembly::sed_field;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::export::{export_vtk, log_relative_field, relative_field, write_csv, HistoryRow, TraceRow};
use crate::optimizer::optimize;
use crate::scenario::{build_cshape, build_topopt, CShapeParams, TopOptParams, Variant};
use crate::solver::incremental_solve;

/// Artifacts of a C-shape run.
#[derive(Debug)]
pub struct CShapeOutcome {
    pub history: Vec<HistoryRow>,
    pub history_file: PathBuf,
    pub snapshot_files: Vec<PathBuf>,
    /// Solver error that ended the run early; artifacts are partial.
    pub failure: Option<Error>,
}

/// Artifacts of a design run.
#[derive(Debug)]
pub struct TopOptOutcome {
    pub trace: Vec<TraceRow>,
    pub trace_file: PathBuf,
    pub field_file: PathBuf,
    pub final_compliance: Option<f64>,
    pub failure: Option<Error>,
}

impl Error {
    /// True for numerical failures of the analysis, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::InvertedElement { .. }
                | Error::LinearSolve(_)
                | Error::SingularJacobian { .. }
                | Error::NonFinite(_)
        )
    }
}

/// Runs `f` on a dedicated pool of `workers` threads, or inline.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(None, format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// File name of the snapshot at load fraction `lambda`.
pub fn snapshot_name(lambda: f64) -> String {
    format!("cshape_L{lambda:.3}.vtk")
}

/// Solves the C-shape, writes `cshape_history.csv` and one VTK file per
/// requested snapshot.
pub fn run_cshape(params: &CShapeParams, run: &RunConfig) -> Result<CShapeOutcome> {
    let scenario = build_cshape(params)?;
    run.prepare_out_dir()?;
    let analysis = incremental_solve(&scenario.model, &scenario.gammas, &scenario.settings, |r| {
        log::info!(
            "increment {:4}  Λ = {:.4}  iterations = {}",
            r.increment,
            r.load_fraction,
            r.iterations
        );
    });
    let history: Vec<HistoryRow> = analysis
        .records
        .iter()
        .map(|r| HistoryRow {
            increment: r.increment,
            lambda: r.load_fraction,
            gap: scenario.gap(&r.u),
            u_c: scenario.corner_displacement(&r.u),
            iterations: r.iterations,
        })
        .collect();
    let history_file = run.out_dir.join("cshape_history.csv");
    write_csv(&history_file, &history)?;

    let zero = vec![0.0; scenario.model.mesh.n_dof];
    let n_incr = scenario.settings.n_incr;
    let mut snapshot_files = Vec::new();
    for &lam in &run.snapshots {
        let k = (lam * n_incr as f64).round() as usize;
        let u = if k == 0 {
            &zero
        } else if let Some(r) = analysis.records.get(k - 1) {
            &r.u
        } else {
            log::warn!("snapshot Λ = {lam} not reached");
            continue;
        };
        let m = &scenario.model;
        let sed = sed_field(&m.mesh, &m.ops, &m.material, u, &scenario.gammas)?;
        let path = run.out_dir.join(snapshot_name(lam));
        export_vtk(
            &path,
            &m.mesh,
            u,
            &[
                ("density", &scenario.gammas),
                ("sed", &sed),
                ("sed_rel", &relative_field(&sed)),
                ("sed_log_rel", &log_relative_field(&sed)),
            ],
        )?;
        snapshot_files.push(path);
    }
    Ok(CShapeOutcome {
        history,
        history_file,
        snapshot_files,
        failure: analysis.failure,
    })
}

/// Optimizes one variant, writes `top_<variant>_trace.csv` and the final
/// blueprint, dilated and SED fields to `top_<variant>_final.vtk`.
pub fn run_topopt(params: &TopOptParams, variant: Variant, run: &RunConfig) -> Result<TopOptOutcome> {
    let scenario = build_topopt(params, variant)?;
    run.prepare_out_dir()?;
    let result = optimize(&scenario.problem, &scenario.settings, |r| {
        log::info!(
            "{variant} it {:4}  c = {:.6e}  g = {:+.3e}  β = {:4.1}  change = {:.3e}",
            r.iter,
            r.compliance,
            r.constraint,
            r.beta,
            r.change
        );
    })?;
    let trace: Vec<TraceRow> = result
        .trace
        .iter()
        .map(|r| TraceRow {
            iter: r.iter,
            c: r.compliance,
            g: r.constraint,
            beta: r.beta,
            change: r.change,
            volume: r.volume,
            newton_iterations: r.newton_iterations,
        })
        .collect();
    let trace_file = run.out_dir.join(format!("top_{variant}_trace.csv"));
    write_csv(&trace_file, &trace)?;

    let m = &scenario.problem.model;
    let design = &result.design;
    let gammas: Vec<f64> = design.x_hat.iter().map(|&r| m.material.ramp(r)).collect();
    let sed = sed_field(&m.mesh, &m.ops, &m.material, &result.u_end, &gammas)?;
    let field_file = run.out_dir.join(format!("top_{variant}_final.vtk"));
    export_vtk(
        &field_file,
        &m.mesh,
        &result.u_end,
        &[
            ("density", &design.x_hat),
            ("density_dilated", &design.x_hat_dilated),
            ("sed", &sed),
            ("sed_rel", &relative_field(&sed)),
            ("sed_log_rel", &log_relative_field(&sed)),
        ],
    )?;
    Ok(TopOptOutcome {
        final_compliance: result.final_compliance(),
        trace,
        trace_file,
        field_file,
        failure: result.failure,
    })
}
