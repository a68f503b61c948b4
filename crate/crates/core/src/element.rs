//! Quadrature-point operators for the bilinear rectangle.
//!
//! Everything here depends only on the element size, so a single
//! [`QuadOperators`] is shared by all elements of a uniform grid.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};

pub type Mat3x8 = SMatrix<f64, 3, 8>;
pub type Mat4x8 = SMatrix<f64, 4, 8>;
pub type Mat6x8 = SMatrix<f64, 6, 8>;
pub type Mat8 = SMatrix<f64, 8, 8>;
pub type Vec8 = SVector<f64, 8>;

/// Logical corner coordinates in local node order `LL, LR, UR, UL`.
const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Shape functions and their logical derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeValues {
    pub n: [f64; 4],
    /// Rows `∂/∂ξ`, `∂/∂ζ`.
    pub dn: [[f64; 4]; 2],
    /// Rows `∂²/∂ξ²`, `∂²/∂ξ∂ζ`, `∂²/∂ζ²`.
    pub d2n: [[f64; 4]; 3],
}

pub fn shape_eval(xi: f64, zeta: f64) -> Result<ShapeValues> {
    let inside = |t: f64| (-1.0..=1.0).contains(&t);
    if !inside(xi) || !inside(zeta) {
        return Err(Error::invalid(format!(
            "logical coordinates ({xi}, {zeta}) outside [-1, 1]²"
        )));
    }
    let mut s = ShapeValues {
        n: [0.0; 4],
        dn: [[0.0; 4]; 2],
        d2n: [[0.0; 4]; 3],
    };
    for (a, &(xa, za)) in CORNERS.iter().enumerate() {
        s.n[a] = 0.25 * (1.0 + xa * xi) * (1.0 + za * zeta);
        s.dn[0][a] = 0.25 * xa * (1.0 + za * zeta);
        s.dn[1][a] = 0.25 * za * (1.0 + xa * xi);
        s.d2n[1][a] = 0.25 * xa * za;
    }
    Ok(s)
}

/// Gauss–Legendre points and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Result<Vec<(f64, f64)>> {
    let pts = match n {
        2 => {
            let p = 1.0 / 3f64.sqrt();
            vec![(-p, 1.0), (p, 1.0)]
        }
        3 => {
            let p = (0.6f64).sqrt();
            vec![(-p, 5.0 / 9.0), (0.0, 8.0 / 9.0), (p, 5.0 / 9.0)]
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
        _ => {
            return Err(Error::invalid(format!(
                "unsupported Gauss rule with {n} points per direction (use 2..=4)"
            )))
        }
    };
    Ok(pts)
}

/// One quadrature point of the element.
#[derive(Debug, Clone)]
pub struct QuadPoint {
    pub xi: f64,
    pub zeta: f64,
    pub weight: f64,
    /// Physical shape-function gradients, rows `∂/∂x`, `∂/∂y`.
    pub dn_dx: [[f64; 4]; 2],
    /// Linear strain-displacement matrix, Voigt rows `(xx, yy, xy)`.
    pub b0: Mat3x8,
    /// Displacement gradient rows `(∂u_x/∂x, ∂u_x/∂y, ∂u_y/∂x, ∂u_y/∂y)`.
    pub g: Mat4x8,
    /// Second derivatives `(xx, √2·xy, yy)` of `u_x`, then of `u_y`; the
    /// `√2` lets `Hᵀ H` reproduce the full Hessian contraction.
    pub h: Mat6x8,
    /// Cached `Hᵀ H`.
    pub hth: Mat8,
}

/// Precomputed operators at every quadrature point.
#[derive(Debug, Clone)]
pub struct QuadOperators {
    pub points: Vec<QuadPoint>,
    pub det_j: f64,
    pub elem_width: f64,
    pub elem_height: f64,
}

impl QuadOperators {
    /// `weight · detJ` of point `q`.
    pub fn dv(&self, q: usize) -> f64 {
        self.points[q].weight * self.det_j
    }

    pub fn area(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum::<f64>() * self.det_j
    }
}

pub fn build_operators(elem_width: f64, elem_height: f64, n_gauss_1d: usize) -> Result<QuadOperators> {
    if elem_width < 0.0 || elem_height < 0.0 || !elem_width.is_finite() || !elem_height.is_finite() {
        return Err(Error::invalid(format!(
            "element dimensions must be positive (got {elem_width} × {elem_height})"
        )));
    }
    // affine map x = ξ a/2, y = ζ b/2
    let jx = 0.5 * elem_width;
    let jy = 0.5 * elem_height;
    let det_j = jx * jy;
    if det_j <= 0.0 {
        return Err(Error::SingularJacobian { det_j });
    }
    let rule = gauss_legendre(n_gauss_1d)?;
    let mut points = Vec::with_capacity(rule.len() * rule.len());
    for &(zeta, wz) in &rule {
        for &(xi, wx) in &rule {
            let s = shape_eval(xi, zeta)?;
            let mut dn_dx = [[0.0; 4]; 2];
            let mut d2 = [[0.0; 4]; 3];
            for a in 0..4 {
                dn_dx[0][a] = s.dn[0][a] / jx;
                dn_dx[1][a] = s.dn[1][a] / jy;
                d2[0][a] = s.d2n[0][a] / (jx * jx);
                d2[1][a] = s.d2n[1][a] / (jx * jy);
                d2[2][a] = s.d2n[2][a] / (jy * jy);
            }
            let mut b0 = Mat3x8::zeros();
            let mut g = Mat4x8::zeros();
            let mut h = Mat6x8::zeros();
            for a in 0..4 {
                let (cx, cy) = (2 * a, 2 * a + 1);
                b0[(0, cx)] = dn_dx[0][a];
                b0[(1, cy)] = dn_dx[1][a];
                b0[(2, cx)] = dn_dx[1][a];
                b0[(2, cy)] = dn_dx[0][a];

                g[(0, cx)] = dn_dx[0][a];
                g[(1, cx)] = dn_dx[1][a];
                g[(2, cy)] = dn_dx[0][a];
                g[(3, cy)] = dn_dx[1][a];

                let hrow = [d2[0][a], std::f64::consts::SQRT_2 * d2[1][a], d2[2][a]];
                for r in 0..3 {
                    h[(r, cx)] = hrow[r];
                    h[(3 + r, cy)] = hrow[r];
                }
            }
            let hth = h.transpose() * h;
            points.push(QuadPoint {
                xi,
                zeta,
                weight: wx * wz,
                dn_dx,
                b0,
                g,
                h,
                hth,
            });
        }
    }
    Ok(QuadOperators {
        points,
        det_j,
        elem_width,
        elem_height,
    })
}
