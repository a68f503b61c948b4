//! CSV traces and legacy ASCII VTK field dumps.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::GridMesh;

/// Floor of the log-relative SED field.
pub const SED_LOG_FLOOR: f64 = 1e-12;

/// One load step of the C-shape run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub increment: usize,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub gap: f64,
    pub u_c: f64,
    pub iterations: usize,
}

/// One redesign step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub c: f64,
    pub g: f64,
    pub beta: f64,
    pub change: f64,
    pub volume: f64,
    pub newton_iterations: usize,
}

/// Writes serializable rows as CSV with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let wrap = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `v / max(v)`, all zero for a field without positive values.
pub fn relative_field(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        v.iter().map(|x| x / max).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// `log10(max(v / max(v), 1e-12))`.
pub fn log_relative_field(v: &[f64]) -> Vec<f64> {
    relative_field(v)
        .into_iter()
        .map(|r| r.max(SED_LOG_FLOOR).log10())
        .collect()
}

fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.8e}");
}

/// Renders the deformed mesh `x0 + u` with a `displacement` point vector
/// and the given cell scalars.
pub fn render_vtk(mesh: &GridMesh, u: &[f64], cell_fields: &[(&str, &[f64])], title: &str) -> Result<String> {
    if u.len() != mesh.n_dof {
        return Err(Error::invalid(format!("displacement has {} entries, mesh has {} DOFs", u.len(), mesh.n_dof)));
    }
    for (name, f) in cell_fields {
        if f.len() != mesh.n_elem() {
            return Err(Error::invalid(format!(
                "cell field `{name}` has {} entries, mesh has {} elements",
                f.len(),
                mesh.n_elem()
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("invalid field name `{name}`")));
        }
    }
    let n = mesh.n_node();
    let m = mesh.n_elem();
    let mut s = String::with_capacity(64 * (n + m * (1 + cell_fields.len())));
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(title.lines().next().unwrap_or(""));
    s.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for (i, p) in mesh.deformed_coords(u).iter().enumerate() {
        debug_assert!(i < n);
        num(&mut s, p[0]);
        s.push(' ');
        num(&mut s, p[1]);
        s.push_str(" 0\n");
    }
    let _ = writeln!(s, "CELLS {m} {}", 5 * m);
    for e in 0..m {
        let [a, b, c, d] = mesh.element_nodes(e);
        let _ = writeln!(s, "4 {a} {b} {c} {d}");
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    for _ in 0..m {
        s.push_str("9\n");
    }
    let _ = writeln!(s, "POINT_DATA {n}\nVECTORS displacement double");
    for k in 0..n {
        num(&mut s, u[2 * k]);
        s.push(' ');
        num(&mut s, u[2 * k + 1]);
        s.push_str(" 0\n");
    }
    if !cell_fields.is_empty() {
        let _ = writeln!(s, "CELL_DATA {m}");
        for (name, f) in cell_fields {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for &v in f.iter() {
                num(&mut s, v);
                s.push('\n');
            }
        }
    }
    Ok(s)
}

/// Writes [`render_vtk`] output to `path`.
pub fn export_vtk(path: &Path, mesh: &GridMesh, u: &[f64], cell_fields: &[(&str, &[f64])]) -> Result<()> {
    let title = path.file_stem().and_then(|s| s.to_str()).unwrap_or("tmcopt");
    let text = render_vtk(mesh, u, cell_fields, title)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Contents of a legacy VTK unstructured grid of quads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkData {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub point_vectors: Vec<(String, Vec<[f64; 3]>)>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
}

impl VtkData {
    pub fn cell_scalar(&self, name: &str) -> Option<&[f64]> {
        self.cell_scalars.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn point_vector(&self, name: &str) -> Option<&[[f64; 3]]> {
        self.point_vectors.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

struct Tokens<'a> {
    it: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.it.next().ok_or_else(|| Error::Vtk("unexpected end of file".into()))
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let t = self.next()?;
        if t.eq_ignore_ascii_case(word) {
            Ok(())
        } else {
            Err(Error::Vtk(format!("expected `{word}`, found `{t}`")))
        }
    }

    fn parse<T: std::str::FromStr>(&mut self) -> Result<T> {
        let t = self.next()?;
        t.parse().map_err(|_| Error::Vtk(format!("cannot parse `{t}`")))
    }

    fn triple(&mut self) -> Result<[f64; 3]> {
        Ok([self.parse()?, self.parse()?, self.parse()?])
    }
}

/// Minimal reader for the subset written by [`render_vtk`].
pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let mut lines = text.splitn(3, '\n');
    let header = lines.next().unwrap_or("");
    if !header.starts_with("# vtk DataFile") {
        return Err(Error::Vtk("missing header".into()));
    }
    let title = lines.next().unwrap_or("").to_string();
    let mut tk = Tokens {
        it: lines.next().unwrap_or("").split_whitespace(),
    };
    tk.expect("ASCII")?;
    tk.expect("DATASET")?;
    tk.expect("UNSTRUCTURED_GRID")?;
    let mut data = VtkData {
        title,
        ..Default::default()
    };
    let mut section_len = 0usize;
    while let Some(word) = tk.it.next() {
        match word {
            "POINTS" => {
                let n: usize = tk.parse()?;
                tk.next()?;
                data.points = (0..n).map(|_| tk.triple()).collect::<Result<_>>()?;
            }
            "CELLS" => {
                let m: usize = tk.parse()?;
                let _size: usize = tk.parse()?;
                data.cells = (0..m)
                    .map(|_| {
                        let k: usize = tk.parse()?;
                        (0..k).map(|_| tk.parse()).collect::<Result<Vec<usize>>>()
                    })
                    .collect::<Result<_>>()?;
            }
            "CELL_TYPES" => {
                let m: usize = tk.parse()?;
                data.cell_types = (0..m).map(|_| tk.parse()).collect::<Result<_>>()?;
            }
            "POINT_DATA" | "CELL_DATA" => section_len = tk.parse()?,
            "VECTORS" => {
                let name = tk.next()?.to_string();
                tk.next()?;
                let v = (0..section_len).map(|_| tk.triple()).collect::<Result<_>>()?;
                data.point_vectors.push((name, v));
            }
            "SCALARS" => {
                let name = tk.next()?.to_string();
                tk.next()?;
                tk.expect("1")?;
                tk.expect("LOOKUP_TABLE")?;
                tk.next()?;
                let v = (0..section_len).map(|_| tk.parse()).collect::<Result<_>>()?;
                data.cell_scalars.push((name, v));
            }
            other => return Err(Error::Vtk(format!("unsupported keyword `{other}`"))),
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_grid;

    #[test]
    fn single_element_reference_mesh() {
        let mesh = build_grid(1, 1, 2.0, 3.0).unwrap();
        let text = render_vtk(&mesh, &[0.0; 8], &[("density", &[1.0])], "one").unwrap();
        let d = parse_vtk(&text).unwrap();
        assert_eq!(d.points.len(), 4);
        assert_eq!(d.cells, vec![mesh.element_nodes(0).to_vec()]);
        assert_eq!(d.cell_types, vec![9]);
        for (k, p) in d.points.iter().enumerate() {
            assert_eq!([p[0], p[1]], mesh.node_coords[k]);
        }
    }

    #[test]
    fn translation_shifts_all_points() {
        let mesh = build_grid(3, 2, 3.0, 2.0).unwrap();
        let u: Vec<f64> = (0..mesh.n_dof).map(|i| if i % 2 == 0 { 0.25 } else { -1.5 }).collect();
        let d = parse_vtk(&render_vtk(&mesh, &u, &[], "t").unwrap()).unwrap();
        for (k, p) in d.points.iter().enumerate() {
            let x = mesh.node_coords[k];
            assert!((p[0] - x[0] - 0.25).abs() < 1e-12 && (p[1] - x[1] + 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn nine_significant_digits() {
        let mesh = build_grid(1, 1, 1.0, 1.0).unwrap();
        let text = render_vtk(&mesh, &[0.0; 8], &[("sed", &[std::f64::consts::PI])], "p").unwrap();
        assert!(text.contains("3.14159265e0\n"), "{text}");
    }

    #[test]
    fn size_mismatch_rejected() {
        let mesh = build_grid(2, 2, 1.0, 1.0).unwrap();
        assert!(render_vtk(&mesh, &[0.0; 3], &[], "x").is_err());
        assert!(render_vtk(&mesh, &vec![0.0; mesh.n_dof], &[("sed", &[1.0])], "x").is_err());
    }

    #[test]
    fn log_relative_floor() {
        let v = log_relative_field(&[0.0, 1e-3, 2.0]);
        assert_eq!(v[0], -12.0);
        assert!((v[1] - (5e-4f64).log10()).abs() < 1e-14);
        assert_eq!(v[2], 0.0);
        assert_eq!(relative_field(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn csv_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let rows = [HistoryRow {
            increment: 1,
            lambda: 0.005,
            gap: 29.5,
            u_c: 1e-3,
            iterations: 3,
        }];
        write_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "increment,Lambda,gap,u_c,iterations\n1,0.005,29.5,0.001,3\n");
    }
}
