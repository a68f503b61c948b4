//! Structured bilinear-quad grid.
//!
//! Numbering follows the classic 88-line topology optimization code: nodes
//! are numbered column by column, top to bottom inside each column, with
//! columns running left to right. Elements follow the same column-major
//! order. The eight element DOFs run counterclockwise from the lower-left
//! node (`LL, LR, UR, UL`), each node contributing `(u_x, u_y)`; the
//! element itself is addressed through its upper-left node.

use crate::error::{Error, Result};

/// Uniform `nelx × nely` grid of rectangular bilinear elements.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMesh {
    pub nelx: usize,
    pub nely: usize,
    pub lx: f64,
    pub ly: f64,
    /// Reference coordinates `(x, y)` per node.
    pub node_coords: Vec<[f64; 2]>,
    /// Global DOF indices per element.
    pub elem_dof_map: Vec<[usize; 8]>,
    pub n_dof: usize,
}

impl GridMesh {
    pub fn n_elem(&self) -> usize {
        self.nelx * self.nely
    }

    pub fn n_node(&self) -> usize {
        (self.nelx + 1) * (self.nely + 1)
    }

    pub fn elem_width(&self) -> f64 {
        self.lx / self.nelx as f64
    }

    pub fn elem_height(&self) -> f64 {
        self.ly / self.nely as f64
    }

    pub fn element_area(&self) -> f64 {
        self.elem_width() * self.elem_height()
    }

    /// Node index at grid column `col` (from the left) and row `row` (from the top).
    pub fn node_at(&self, col: usize, row: usize) -> usize {
        col * (self.nely + 1) + row
    }

    /// Element index at column `ex` (from the left) and row `ey` (from the top).
    pub fn element_at(&self, ex: usize, ey: usize) -> usize {
        ex * self.nely + ey
    }

    /// `(column, row)` of an element.
    pub fn element_position(&self, e: usize) -> (usize, usize) {
        (e / self.nely, e % self.nely)
    }

    /// Element nodes in local order `LL, LR, UR, UL`.
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (ex, ey) = self.element_position(e);
        let ul = self.node_at(ex, ey);
        let ll = ul + 1;
        let lr = ll + self.nely + 1;
        let ur = ul + self.nely + 1;
        [ll, lr, ur, ul]
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 2] {
        let (ex, ey) = self.element_position(e);
        [
            (ex as f64 + 0.5) * self.elem_width(),
            self.ly - (ey as f64 + 0.5) * self.elem_height(),
        ]
    }

    pub fn node_dofs(node: usize) -> [usize; 2] {
        [2 * node, 2 * node + 1]
    }

    /// Index of the node closest to `p` (lowest index on ties).
    pub fn nearest_node(&self, p: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.node_coords.iter().enumerate() {
            let d = (c[0] - p[0]).hypot(c[1] - p[1]);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Gathers the element's nodal values out of a global DOF vector.
    pub fn gather(&self, e: usize, u: &[f64]) -> [f64; 8] {
        let dofs = &self.elem_dof_map[e];
        std::array::from_fn(|i| u[dofs[i]])
    }

    /// Deformed nodal coordinates `x0 + u`.
    pub fn deformed_coords(&self, u: &[f64]) -> Vec<[f64; 2]> {
        self.node_coords
            .iter()
            .enumerate()
            .map(|(n, c)| [c[0] + u[2 * n], c[1] + u[2 * n + 1]])
            .collect()
    }

    /// Elements whose centroid satisfies `predicate`, ascending.
    pub fn select_elements(&self, predicate: impl Fn(f64, f64) -> bool) -> Vec<usize> {
        (0..self.n_elem())
            .filter(|&e| {
                let [x, y] = self.element_centroid(e);
                predicate(x, y)
            })
            .collect()
    }
}

/// Builds the grid on `[0, lx] × [0, ly]`.
pub fn build_grid(nelx: usize, nely: usize, lx: f64, ly: f64) -> Result<GridMesh> {
    if nelx == 0 || nely == 0 {
        return Err(Error::invalid(format!(
            "element counts must be positive (got {nelx} × {nely})"
        )));
    }
    if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
        return Err(Error::invalid(format!(
            "domain extents must be positive (got {lx} × {ly})"
        )));
    }
    let dx = lx / nelx as f64;
    let dy = ly / nely as f64;
    let mut node_coords = Vec::with_capacity((nelx + 1) * (nely + 1));
    for col in 0..=nelx {
        for row in 0..=nely {
            node_coords.push([col as f64 * dx, ly - row as f64 * dy]);
        }
    }
    let mut mesh = GridMesh {
        nelx,
        nely,
        lx,
        ly,
        node_coords,
        elem_dof_map: Vec::with_capacity(nelx * nely),
        n_dof: 2 * (nelx + 1) * (nely + 1),
    };
    for e in 0..nelx * nely {
        let nodes = mesh.element_nodes(e);
        let mut dofs = [0; 8];
        for (a, &n) in nodes.iter().enumerate() {
            dofs[2 * a] = 2 * n;
            dofs[2 * a + 1] = 2 * n + 1;
        }
        mesh.elem_dof_map.push(dofs);
    }
    Ok(mesh)
}

/// All nodes whose reference coordinates satisfy `predicate`, ascending.
pub fn select_nodes(mesh: &GridMesh, predicate: impl Fn(f64, f64) -> bool) -> Vec<usize> {
    mesh.node_coords
        .iter()
        .enumerate()
        .filter(|(_, c)| predicate(c[0], c[1]))
        .map(|(i, _)| i)
        .collect()
}
