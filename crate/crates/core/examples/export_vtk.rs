//! Writes C-shape snapshots at three load levels as legacy VTK files and
//! reads one back.

use tmcopt::config::RunConfig;
use tmcopt::export::parse_vtk;
use tmcopt::run::run_cshape;
use tmcopt::scenario::CShapeParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tmcopt_vtk"));
    let run = RunConfig::new(&dir, vec![0.2, 0.5, 1.0], None)?;
    let out = run_cshape(&CShapeParams::default(), &run)?;
    for f in &out.snapshot_files {
        let data = parse_vtk(&std::fs::read_to_string(f)?)?;
        let sed = data.cell_scalar("sed").unwrap_or_default();
        let max = sed.iter().copied().fold(0.0, f64::max);
        println!("{}: {} points, {} cells, max SED {max:.4e}", f.display(), data.points.len(), data.cells.len());
    }
    println!("history: {}", out.history_file.display());
    Ok(())
}
