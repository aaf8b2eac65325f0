//! Linear operators: covariant derivatives, the magnetic Laplacian, periodic
//! vector calculus, the constraint operator `M`, the linearization and the
//! pinned resolvent.

pub mod fd;
pub mod linearized;
pub mod magnetic;
pub mod mspec;
pub mod periodic;
pub mod resolvent;

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fields::{PerScalarField, PerVecField, QpField, SpectralGrid};
use crate::lattice::Vec2;



pub use linearized::LinearizedOp;
pub use mspec::{m_operator_spectrum, MSpectrum};
pub use periodic::{curl, curl_star, div, gradient, inverse_neg_laplacian, laplacian, project_divfree};
pub use resolvent::{pinned_resolvent, t_matrix, ResolventSolve};


/// `a = a^n + α` with `a^n(x) = (n/2)(-x2, x1)` and periodic `α`.
#[derive(Debug, Clone)]
pub struct GaugePotential {
    pub n: u32,
    pub alpha: PerVecField,
}

impl GaugePotential {
    pub fn base(grid: &Arc<SpectralGrid>) -> Self {
        GaugePotential { n: grid.lattice.n, alpha: PerVecField::zeros(grid) }
    }

    pub fn with_alpha(alpha: PerVecField) -> Self {
        GaugePotential { n: alpha.grid.lattice.n, alpha }
    }

    /// Symmetric-gauge part at a point.
    #[inline]
    pub fn base_at(&self, x: Vec2) -> Vec2 {
        let h = 0.5 * self.n as f64;
        [-h * x[1], h * x[0]]
    }

    /// `curl a = n + curl α` at the nodes.
    pub fn curl(&self) -> PerScalarField {
        let mut c = periodic::curl(&self.alpha);
        c.values.iter_mut().for_each(|v| *v += self.n as f64);
        c
    }
}

fn check(psi: &QpField, a: &GaugePotential) -> Result<()> {
    if !psi.grid.same_as(&a.alpha.grid) {
        return Err(invalid("field and potential live on different grids"));
    }
    if psi.flux != a.n {
        return Err(invalid(format!("field flux {} does not match potential flux {}", psi.flux, a.n)));
    }
    Ok(())
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `∇_a psi = ∇_{a^n} psi + i α psi`.
pub fn covariant_gradient(psi: &QpField, a: &GaugePotential) -> Result<[QpField; 2]> {
    check(psi, a)?;
    let [mut g1, mut g2] = magnetic::grad_base(psi)?;
    for k in 0..psi.values.len() {
        let p = psi.values[k];
        g1.values[k] += I * a.alpha.x[k] * p;
        g2.values[k] += I * a.alpha.y[k] * p;
    }
    Ok([g1, g2])
}

/// `∂_a = ½((∇_a)_1 - i (∇_a)_2)`.
pub fn apply_dbar(psi: &QpField, a: &GaugePotential) -> Result<QpField> {
    let [g1, g2] = covariant_gradient(psi, a)?;
    Ok(g1.with_values(g1.values.iter().zip(&g2.values).map(|(x, y)| 0.5 * (x - I * y)).collect()))
}

/// `∂*_a = -½((∇_a)_1 + i (∇_a)_2)`, the adjoint of [`apply_dbar`].
pub fn apply_dbar_star(psi: &QpField, a: &GaugePotential) -> Result<QpField> {
    let [g1, g2] = covariant_gradient(psi, a)?;
    Ok(g1.with_values(g1.values.iter().zip(&g2.values).map(|(x, y)| -0.5 * (x + I * y)).collect()))
}

/// `-Δ_a psi`, defined through `4 ∂*_a ∂_a + curl a`.
pub fn apply_magnetic_laplacian(psi: &QpField, a: &GaugePotential) -> Result<QpField> {
    let d = apply_dbar(psi, a)?;
    let mut out = apply_dbar_star(&d, a)?;
    let c = a.curl();
    for k in 0..out.values.len() {
        out.values[k] = 4.0 * out.values[k] + c.values[k] * psi.values[k];
    }
    Ok(out)
}

/// `-Δ_a psi` expanded around the base potential:
/// `-Δ_{a^n} psi - 2i α·∇_{a^n} psi - i (div α) psi + |α|² psi`.
pub fn magnetic_laplacian_direct(psi: &QpField, a: &GaugePotential) -> Result<QpField> {
    check(psi, a)?;
    let mut out = magnetic::neg_laplacian_base(psi)?;
    let [g1, g2] = magnetic::grad_base(psi)?;
    let dv = periodic::div(&a.alpha);
    for k in 0..out.values.len() {
        let (ax, ay) = (a.alpha.x[k], a.alpha.y[k]);
        out.values[k] += -2.0 * I * (ax * g1.values[k] + ay * g2.values[k])
            - I * dv.values[k] * psi.values[k]
            + (ax * ax + ay * ay) * psi.values[k];
    }
    Ok(out)
}

/// `[∂_a, ∂*_a] psi`.
pub fn commutator(psi: &QpField, a: &GaugePotential) -> Result<QpField> {
    let ds = apply_dbar(&apply_dbar_star(psi, a)?, a)?;
    let sd = apply_dbar_star(&apply_dbar(psi, a)?, a)?;
    Ok(ds.sub(&sd))
}

/// Current `J = Im(conj(psi) ∇_a psi)`.
pub fn current(psi: &QpField, a: &GaugePotential) -> Result<PerVecField> {
    let [g1, g2] = covariant_gradient(psi, a)?;
    let mut j = PerVecField::zeros(&psi.grid);
    for k in 0..psi.values.len() {
        let c = psi.values[k].conj();
        j.x[k] = (c * g1.values[k]).im;
        j.y[k] = (c * g2.values[k]).im;
    }
    Ok(j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifurcation::{random_periodic, GaugeState};
    use crate::fields::CellAverage;
    use crate::landau::{build_psi0_on, LadderBasis};
    use crate::lattice::make_lattice;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pair(seed: u64) -> (QpField, GaugePotential) {
        let l = make_lattice(Complex64::new(0.2, 1.05), 1).unwrap();
        let grid = SpectralGrid::new(&l, 48).unwrap();
        let basis = LadderBasis::new(&grid, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = GaugeState::random(&basis, 8, 1.0, &mut rng);
        let extra = curl_star(&random_periodic(&grid, 2, &mut rng));
        (u.psi, GaugePotential::with_alpha(u.alpha.add(&extra)))
    }

    #[test]
    fn weitzenbock_two_routes() {
        for seed in 0..3 {
            let (psi, a) = random_pair(seed);
            let lhs = apply_magnetic_laplacian(&psi, &a).unwrap();
            let rhs = magnetic_laplacian_direct(&psi, &a).unwrap();
            assert!(lhs.sub(&rhs).norm() <= 1e-9 * psi.norm());
        }
    }

    #[test]
    fn commutator_is_half_curl() {
        let (psi, a) = random_pair(4);
        let c = commutator(&psi, &a).unwrap();
        let expect = psi.mul_real(&a.curl().values.iter().map(|v| 0.5 * v).collect::<Vec<_>>());
        assert!(c.sub(&expect).norm() <= 1e-9 * psi.norm());
    }

    #[test]
    fn ground_state_current() {
        let l = make_lattice(Complex64::new(0.3, 1.1), 1).unwrap();
        let grid = SpectralGrid::new(&l, 64).unwrap();
        let psi0 = build_psi0_on(&grid).unwrap().field;
        let j = current(&psi0, &GaugePotential::base(&grid)).unwrap();
        let expect = curl_star(&psi0.modulus_sq()).scale(0.5);
        assert!(j.sub(&expect).norm() <= 1e-9);
        let m = j.cell_average();
        assert!(m[0].abs() < 1e-13 && m[1].abs() < 1e-13);
    }
}
