//! Compressible neo-Hookean law in plane strain, RAMP interpolation and the
//! HuHu regularization stiffness.
//!
//! The plane-strain energy carries `tr(FᵀF) − 2` instead of the 3D `− 3`:
//! the unit out-of-plane stretch adds `1` to the trace and nothing to
//! `ln J`, so `W(I) = 0` still holds.

use nalgebra::{Matrix2, Matrix3};

use crate::error::{Error, Result};

/// Solid properties plus the third-medium and regularization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperelasticMaterial {
    pub e0: f64,
    pub nu: f64,
    pub lambda0: f64,
    pub mu0: f64,
    /// Third-medium contrast.
    pub kv: f64,
    /// HuHu coefficient.
    pub alpha: f64,
    /// Characteristic length entering `kr`.
    pub char_length: f64,
    /// Regularization stiffness `α L² (K + 4/3 G)`.
    pub kr: f64,
    pub ramp_p: f64,
    /// Void property scaling of the RAMP law.
    pub gamma0: f64,
}

impl HyperelasticMaterial {
    /// Material with `kr` built from the P-wave modulus, `ramp_p = 4` and
    /// `gamma0 = kv`.
    pub fn new(e0: f64, nu: f64, kv: f64, alpha: f64, char_length: f64) -> Result<Self> {
        let (lambda0, mu0) = lame_from_engineering(e0, nu)?;
        if !(kv > 0.0 && kv < 1.0) {
            return Err(Error::invalid(format!("kv must lie in (0, 1), got {kv}")));
        }
        if !(alpha >= 0.0) || !(char_length > 0.0) {
            return Err(Error::invalid(format!(
                "need alpha ≥ 0 and a positive characteristic length (got {alpha}, {char_length})"
            )));
        }
        let kr = alpha * char_length * char_length * p_wave_modulus(e0, nu);
        Ok(Self {
            e0,
            nu,
            lambda0,
            mu0,
            kv,
            alpha,
            char_length,
            kr,
            ramp_p: 4.0,
            gamma0: kv,
        })
    }

    pub fn with_ramp(mut self, p: f64, gamma0: f64) -> Result<Self> {
        if !(p >= 0.0) || !(gamma0 > 0.0 && gamma0 <= 1.0) {
            return Err(Error::invalid(format!(
                "RAMP needs p ≥ 0 and gamma0 in (0, 1] (got {p}, {gamma0})"
            )));
        }
        self.ramp_p = p;
        self.gamma0 = gamma0;
        Ok(self)
    }

    /// Overrides the regularization stiffness, e.g. `kr = 0` for symmetric checks.
    pub fn with_kr(mut self, kr: f64) -> Self {
        self.kr = kr;
        self
    }

    pub fn ramp(&self, rho_hat: f64) -> f64 {
        ramp(rho_hat, self.gamma0, self.ramp_p)
    }

    pub fn ramp_derivative(&self, rho_hat: f64) -> f64 {
        ramp_derivative(rho_hat, self.gamma0, self.ramp_p)
    }
}

pub fn lame_from_engineering(e: f64, nu: f64) -> Result<(f64, f64)> {
    if nu >= 0.5 {
        return Err(Error::Incompressible { nu });
    }
    if !(e > 0.0) || !(nu > -1.0) {
        return Err(Error::invalid(format!(
            "need E > 0 and -1 < nu < 0.5 (got E = {e}, nu = {nu})"
        )));
    }
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    Ok((lambda, mu))
}

pub fn bulk_modulus(e: f64, nu: f64) -> f64 {
    e / (3.0 * (1.0 - 2.0 * nu))
}

/// Longitudinal modulus `M = K + 4/3·G`.
pub fn p_wave_modulus(e: f64, nu: f64) -> f64 {
    bulk_modulus(e, nu) + 4.0 / 3.0 * e / (2.0 * (1.0 + nu))
}

fn checked_det(f: &Matrix2<f64>) -> Result<f64> {
    checked_det_value(f.determinant())
}

/// Inverse of the right Cauchy–Green tensor `(FᵀF)⁻¹ = F⁻¹F⁻ᵀ`.
fn c_inverse(f: &Matrix2<f64>, j: f64) -> Matrix2<f64> {
    let finv = Matrix2::new(f[(1, 1)], -f[(0, 1)], -f[(1, 0)], f[(0, 0)]) / j;
    finv * finv.transpose()
}

/// `J − 1` evaluated from the displacement gradient without forming `F`.
fn det_minus_one(h: &Matrix2<f64>) -> f64 {
    h[(0, 0)] + h[(1, 1)] + h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)]
}

fn checked_grad(h: &Matrix2<f64>) -> Result<(Matrix2<f64>, f64, f64)> {
    let f = Matrix2::identity() + h;
    let jm1 = det_minus_one(h);
    let j = checked_det_value(1.0 + jm1)?;
    Ok((f, j, jm1.ln_1p()))
}

fn checked_det_value(j: f64) -> Result<f64> {
    if j > 0.0 && j.is_finite() {
        Ok(j)
    } else {
        Err(Error::InvertedElement {
            element: usize::MAX,
            det_f: j,
        })
    }
}

pub fn strain_energy(f: &Matrix2<f64>, lambda: f64, mu: f64) -> Result<f64> {
    strain_energy_grad(&(f - Matrix2::identity()), lambda, mu)
}

/// Strain energy from the displacement gradient `∇u = F − I`.
pub fn strain_energy_grad(h: &Matrix2<f64>, lambda: f64, mu: f64) -> Result<f64> {
    let (_, _, lnj) = checked_grad(h)?;
    // tr C − 2 = 2 tr ∇u + |∇u|²
    let tr_c_minus_2 = 2.0 * h.trace() + h.norm_squared();
    Ok(0.5 * lambda * lnj * lnj + 0.5 * mu * tr_c_minus_2 - mu * lnj)
}

/// Second Piola–Kirchhoff stress `λ ln J C⁻¹ + μ (I − C⁻¹)`.
pub fn piola2(f: &Matrix2<f64>, lambda: f64, mu: f64) -> Result<Matrix2<f64>> {
    piola2_grad(&(f - Matrix2::identity()), lambda, mu)
}

/// Second Piola–Kirchhoff stress from `∇u`, using `I − C⁻¹ = 2 C⁻¹ E` to
/// keep full relative accuracy at small strain.
pub fn piola2_grad(h: &Matrix2<f64>, lambda: f64, mu: f64) -> Result<Matrix2<f64>> {
    let (f, j, lnj) = checked_grad(h)?;
    let ci = c_inverse(&f, j);
    let two_e = h + h.transpose() + h.transpose() * h;
    let m = ci * two_e;
    Ok(ci * (lambda * lnj) + (m + m.transpose()) * (0.5 * mu))
}

/// First Piola–Kirchhoff stress `λ ln J F⁻ᵀ + μ (F − F⁻ᵀ)`.
pub fn piola1(f: &Matrix2<f64>, lambda: f64, mu: f64) -> Result<Matrix2<f64>> {
    Ok(f * piola2(f, lambda, mu)?)
}

const VOIGT: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];

/// Material tangent `∂S/∂E` in Voigt order `(xx, yy, xy)` with engineering shear.
pub fn tangent_moduli(f: &Matrix2<f64>, lambda: f64, mu: f64) -> Result<Matrix3<f64>> {
    let j = checked_det(f)?;
    let ci = c_inverse(f, j);
    let coef = mu - lambda * j.ln();
    let mut d = Matrix3::zeros();
    for (a, &(i, jj)) in VOIGT.iter().enumerate() {
        for (b, &(k, l)) in VOIGT.iter().enumerate() {
            d[(a, b)] = lambda * ci[(i, jj)] * ci[(k, l)]
                + coef * (ci[(i, k)] * ci[(jj, l)] + ci[(i, l)] * ci[(jj, k)]);
        }
    }
    Ok(d)
}

/// RAMP interpolation `γ₀ + (1 − γ₀) ρ̂ / (1 + p (1 − ρ̂))`.
pub fn ramp(rho_hat: f64, gamma0: f64, p: f64) -> f64 {
    gamma0 + (1.0 - gamma0) * rho_hat / (1.0 + p * (1.0 - rho_hat))
}

pub fn ramp_derivative(rho_hat: f64, gamma0: f64, p: f64) -> f64 {
    let den = 1.0 + p * (1.0 - rho_hat);
    (1.0 - gamma0) * (1.0 + p) / (den * den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const LAMBDA: f64 = 57.692307692307686;
    const MU: f64 = 38.46153846153846;

    #[test]
    fn lame_conversion() {
        let (l, m) = lame_from_engineering(100.0, 0.3).unwrap();
        assert_relative_eq!(l, 57.692, epsilon = 1e-3);
        assert_relative_eq!(m, 38.462, epsilon = 1e-3);
        assert_eq!(lame_from_engineering(1.0, 0.0).unwrap(), (0.0, 0.5));
        assert!(matches!(
            lame_from_engineering(1.0, 0.5),
            Err(Error::Incompressible { .. })
        ));
        assert!(lame_from_engineering(-1.0, 0.2).is_err());
        assert_relative_eq!(bulk_modulus(100.0, 0.3), 83.333, epsilon = 1e-3);
        assert_relative_eq!(p_wave_modulus(100.0, 0.3), 134.615, epsilon = 1e-3);
    }

    #[test]
    fn kr_from_p_wave_modulus() {
        let m = HyperelasticMaterial::new(100.0, 0.3, 1e-6, 1e-6, 100.0).unwrap();
        assert_relative_eq!(m.kr, 1e-6 * 1e4 * 134.615_384_615_384_6, epsilon = 1e-12);
        assert!(HyperelasticMaterial::new(100.0, 0.3, 0.0, 1e-6, 100.0).is_err());
    }

    #[test]
    fn energy_values() {
        let i = Matrix2::identity();
        assert_eq!(strain_energy(&i, LAMBDA, MU).unwrap(), 0.0);
        let f = Matrix2::new(2.0, 0.0, 0.0, 1.0);
        let l2 = 2f64.ln();
        let expected = LAMBDA / 2.0 * l2 * l2 + MU / 2.0 * 3.0 - MU * l2;
        assert_relative_eq!(strain_energy(&f, LAMBDA, MU).unwrap(), expected, epsilon = 1e-12);
        let mut last = 0.0;
        for k in 1..8 {
            let s = 10f64.powi(-k);
            let f = Matrix2::new(1.0, 0.0, 0.0, s);
            let w = strain_energy(&f, LAMBDA, MU).unwrap();
            assert!(w > last);
            last = w;
        }
        let inverted = Matrix2::new(1.0, 0.0, 0.0, -0.1);
        assert!(matches!(
            strain_energy(&inverted, LAMBDA, MU),
            Err(Error::InvertedElement { .. })
        ));
        assert!(piola2(&inverted, LAMBDA, MU).is_err());
        assert!(tangent_moduli(&inverted, LAMBDA, MU).is_err());
    }

    #[test]
    fn reference_stress_and_tangent() {
        let i = Matrix2::identity();
        assert_eq!(piola2(&i, LAMBDA, MU).unwrap(), Matrix2::zeros());
        let d = tangent_moduli(&i, LAMBDA, MU).unwrap();
        let lin = Matrix3::new(
            LAMBDA + 2.0 * MU, LAMBDA, 0.0,
            LAMBDA, LAMBDA + 2.0 * MU, 0.0,
            0.0, 0.0, MU,
        );
        assert_relative_eq!(d, lin, epsilon = 1e-12);
    }

    #[test]
    fn stress_relations() {
        let f = Matrix2::new(1.2, 0.3, -0.1, 0.8);
        let s = piola2(&f, LAMBDA, MU).unwrap();
        assert_eq!(s[(0, 1)], s[(1, 0)]);
        let p = piola1(&f, LAMBDA, MU).unwrap();
        let j = f.determinant();
        let fit = f.try_inverse().unwrap().transpose();
        let expected = fit * (LAMBDA * j.ln()) + (f - fit) * MU;
        assert_relative_eq!(p, expected, epsilon = 1e-12);
    }

    #[test]
    fn tangent_scales_with_moduli() {
        let f = Matrix2::new(0.9, 0.2, 0.1, 1.3);
        let d1 = tangent_moduli(&f, LAMBDA, MU).unwrap();
        let d3 = tangent_moduli(&f, 3.0 * LAMBDA, 3.0 * MU).unwrap();
        assert_relative_eq!(d3, d1 * 3.0, epsilon = 1e-12);
        assert_relative_eq!(d1, d1.transpose(), epsilon = 1e-12);
    }

    #[test]
    fn ramp_values() {
        assert_eq!(ramp(1.0, 1e-6, 4.0), 1.0);
        assert_eq!(ramp(0.0, 1e-6, 4.0), 1e-6);
        assert_relative_eq!(ramp(0.5, 0.0, 4.0), 1.0 / 6.0, epsilon = 1e-15);
        for &r in &[0.0, 0.2, 0.5, 0.77, 1.0] {
            let h = 1e-6;
            let fd = (ramp(r + h, 1e-6, 4.0) - ramp(r - h, 1e-6, 4.0)) / (2.0 * h);
            let an = ramp_derivative(r, 1e-6, 4.0);
            assert!(((fd - an) / an).abs() < 1e-8, "rho {r}: {fd} vs {an}");
        }
        let mut last = -1.0;
        for k in 0..=100 {
            let g = ramp(k as f64 / 100.0, 1e-3, 3.0);
            assert!(g > last);
            last = g;
        }
    }
}
