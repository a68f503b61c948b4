//! Designs the support-contact block for one variant on a coarse grid and
//! writes the trace and final fields.
//!
//! Usage: `topology_contact [linear|nonlinear|contact] [nel] [iterations]`

use tmcopt::config::RunConfig;
use tmcopt::run::run_topopt;
use tmcopt::scenario::{TopOptParams, Variant};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let variant: Variant = args.next().as_deref().unwrap_or("contact").parse()?;
    let nel: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(40);
    let iters: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(60);
    let params = TopOptParams {
        nelx: nel,
        nely: nel,
        max_outer_iters: iters,
        ..TopOptParams::default()
    };
    let run = RunConfig::new(std::env::temp_dir().join("tmcopt_topology"), vec![], None)?;
    let out = run_topopt(&params, variant, &run)?;
    println!("{} iterations, final c = {:?}", out.trace.len(), out.final_compliance);
    println!("trace: {}\nfields: {}", out.trace_file.display(), out.field_file.display());
    if let Some(e) = out.failure {
        return Err(e.into());
    }
    Ok(())
}
