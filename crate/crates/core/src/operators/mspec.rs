//! Spectrum of the constraint operator `M(α, a0) = (curl* a0, curl α)`.
//!
//! `M` is assembled mode by mode from the grid operators: for each dual vector
//! `k` the images of `e^{ik·x}` in each of the three slots are transformed back
//! to coefficients, giving a Hermitian 3×3 block.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fields::{spectrum_of, PerScalarField, PerVecField, SpectralGrid};
use crate::lattice::{dot, LatticeParam};

use super::periodic::{curl, curl_star};

#[derive(Debug, Clone, Serialize)]
pub struct MSpectrum {
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Largest distance from an eigenvalue to its predicted value in `{0, ±|k|}`.
    pub max_mismatch: f64,
    /// Largest `‖M v - λ v‖` over the closed-form eigenvectors `(i k2, -i k1, ±|k|)`.
    pub eigvec_residual: f64,
    /// Zero modes on all of `(α, a0)`, gradients included.
    pub zero_multiplicity: usize,
    /// Zero modes with `α` divergence-free: the constants.
    pub zero_multiplicity_divfree: usize,
    /// Largest `|λ + λ'|` after pairing the spectrum with its negative.
    pub asymmetry: f64,
}

fn block(grid: &std::sync::Arc<SpectralGrid>, m1: i64, m2: i64) -> nalgebra::Matrix3<Complex64> {
    let k = grid.dual.vector(m1 as f64, m2 as f64);
    let cos = PerScalarField::from_fn(grid, |x| dot(k, x).cos());
    let sin = PerScalarField::from_fn(grid, |x| dot(k, x).sin());
    let n = grid.size() as i64;
    let slot = grid.idx(m1.rem_euclid(n) as usize, m2.rem_euclid(n) as usize);
    let coeff = |re: &[f64], im: &[f64]| spectrum_of(grid, re).coeffs[slot] + Complex64::new(0.0, 1.0) * spectrum_of(grid, im).coeffs[slot];
    let mut m = nalgebra::Matrix3::<Complex64>::zeros();
    for col in 0..2 {
        let pick = |f: &PerScalarField| {
            let z = PerScalarField::zeros(grid);
            if col == 0 {
                PerVecField { grid: grid.clone(), x: f.values.clone(), y: z.values }
            } else {
                PerVecField { grid: grid.clone(), x: z.values, y: f.values.clone() }
            }
        };
        let (cc, cs) = (curl(&pick(&cos)), curl(&pick(&sin)));
        m[(2, col)] = coeff(&cc.values, &cs.values);
    }
    let (vc, vs) = (curl_star(&cos), curl_star(&sin));
    m[(0, 2)] = coeff(&vc.x, &vs.x);
    m[(1, 2)] = coeff(&vc.y, &vs.y);
    m
}

pub fn m_operator_spectrum(l: &LatticeParam, kmax: usize) -> Result<MSpectrum> {
    if kmax < 1 {
        return Err(invalid("kmax must be at least 1"));
    }
    let grid = SpectralGrid::new(l, 2 * kmax + 4)?;
    let km = kmax as i64;
    let mut eig = Vec::new();
    let (mut mismatch, mut vres) = (0.0_f64, 0.0_f64);
    let (mut zeros, mut zeros_df) = (0usize, 0usize);
    let zero_tol = 1e-9;
    for m1 in -km..=km {
        for m2 in -km..=km {
            let k = grid.dual.vector(m1 as f64, m2 as f64);
            let kn = dot(k, k).sqrt();
            let b = block(&grid, m1, m2);
            let e = nalgebra::SymmetricEigen::new(b);
            let mut vals: Vec<f64> = e.eigenvalues.iter().copied().collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expect = [-kn, 0.0, kn];
            for (v, x) in vals.iter().zip(expect) {
                mismatch = mismatch.max((v - x).abs());
            }
            zeros += vals.iter().filter(|v| v.abs() < zero_tol).count();
            if kn == 0.0 {
                zeros_df += 3;
            } else {
                let i = Complex64::new(0.0, 1.0);
                for s in [1.0, -1.0] {
                    let v = nalgebra::Vector3::new(i * k[1], -i * k[0], Complex64::new(s * kn, 0.0));
                    let r = b * v - v * Complex64::new(s * kn, 0.0);
                    vres = vres.max(r.norm() / v.norm());
                }
                let div_free = nalgebra::Matrix3x2::new(
                    Complex64::new(k[1] / kn, 0.0), Complex64::new(0.0, 0.0),
                    Complex64::new(-k[0] / kn, 0.0), Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0),
                );
                let r = div_free.adjoint() * b * div_free;
                let e2 = nalgebra::SymmetricEigen::new(r);
                zeros_df += e2.eigenvalues.iter().filter(|v| v.abs() < zero_tol).count();
            }
            eig.extend(vals);
        }
    }
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let asymmetry = eig.iter().zip(eig.iter().rev()).fold(0.0_f64, |m, (a, b)| m.max((a + b).abs()));
    Ok(MSpectrum {
        eigenvalues: eig,
        max_mismatch: mismatch,
        eigvec_residual: vres,
        zero_multiplicity: zeros,
        zero_multiplicity_divfree: zeros_df,
        asymmetry,
    })
}
