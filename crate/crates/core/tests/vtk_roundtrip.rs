//! Writes displacement and cell fields through the VTK exporter and reads
//! them back with the in-crate parser.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmcopt::export::{export_vtk, log_relative_field, parse_vtk};
use tmcopt::mesh::build_grid;

fn nine_digits(v: f64) -> f64 {
    format!("{v:.8e}").parse().unwrap()
}

#[test]
fn fields_survive_a_round_trip() {
    let mesh = build_grid(7, 5, 14.0, 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u: Vec<f64> = (0..mesh.n_dof).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let density: Vec<f64> = (0..mesh.n_elem()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let sed: Vec<f64> = (0..mesh.n_elem()).map(|_| rng.gen_range(0.0..1e3)).collect();
    let log_rel = log_relative_field(&sed);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fields.vtk");
    export_vtk(
        &path,
        &mesh,
        &u,
        &[("density", &density), ("sed", &sed), ("sed_log_rel", &log_rel)],
    )
    .unwrap();
    let d = parse_vtk(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(d.title, "fields");
    assert_eq!(d.points.len(), mesh.n_node());
    assert_eq!(d.cells.len(), mesh.n_elem());
    assert!(d.cell_types.iter().all(|&t| t == 9));
    for e in 0..mesh.n_elem() {
        assert_eq!(d.cells[e], mesh.element_nodes(e).to_vec());
    }
    let disp = d.point_vector("displacement").unwrap();
    for k in 0..mesh.n_node() {
        let x = mesh.node_coords[k];
        assert_eq!(d.points[k][0], nine_digits(x[0] + u[2 * k]));
        assert_eq!(d.points[k][1], nine_digits(x[1] + u[2 * k + 1]));
        assert_eq!(d.points[k][2], 0.0);
        assert_eq!(disp[k][0], nine_digits(u[2 * k]));
        assert_eq!(disp[k][1], nine_digits(u[2 * k + 1]));
    }
    for (name, field) in [("density", &density), ("sed", &sed), ("sed_log_rel", &log_rel)] {
        let back = d.cell_scalar(name).unwrap();
        for (a, b) in field.iter().zip(back) {
            assert_eq!(nine_digits(*a), *b, "{name}");
            assert!((a - b).abs() <= 5e-9 * a.abs().max(1e-300));
        }
    }
}

#[test]
fn malformed_files_rejected() {
    assert!(parse_vtk("not a vtk file").is_err());
    assert!(parse_vtk("# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 2 double\n0 0 0\n").is_err());
}
