//! `(-Δ_{a^n} - (n/b)χ)^{-1}` on the orthogonal complement of `psi_0`, and the
//! matrix `<T>` built from it.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fields::QpField;
use crate::landau::LadderBasis;

use super::fd::pcg;
use super::magnetic::neg_laplacian_base;
use super::{covariant_gradient, GaugePotential};

pub const RESONANCE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ResolventSolve {
    pub w: QpField,
    /// `|<psi_0, rhs>| / ‖rhs‖` that was projected out.
    pub removed_kernel: f64,
    /// Norm of the part of `rhs` beyond the ladder truncation; solved by CG when
    /// it exceeds `1e-12 ‖rhs‖`.
    pub tail: f64,
    /// `‖(-Δ - c) w - P rhs‖ / ‖rhs‖`.
    pub residual: f64,
}

fn shift(b: f64, chi: f64, n: u32) -> Result<f64> {
    if !(b > 0.0) || !(chi > 0.0) {
        return Err(invalid("b and chi must be positive"));
    }
    Ok(n as f64 * chi / b)
}

fn guard(c: f64, n: u32, levels: usize) -> Result<()> {
    for m in 1..=levels {
        let level = (2 * m) as f64 + n as f64;
        let gap = (c - level).abs();
        if gap < RESONANCE_GUARD {
            return Err(Error::NearResonance { value: c, level: m, gap });
        }
    }
    Ok(())
}

pub fn pinned_resolvent(rhs: &QpField, basis: &LadderBasis, b: f64, chi: f64) -> Result<ResolventSolve> {
    let n = rhs.flux;
    let c = shift(b, chi, n)?;
    let m_max = basis.m_max();
    guard(c, n, m_max + 1)?;
    let norm = rhs.norm();
    if norm == 0.0 {
        return Ok(ResolventSolve { w: rhs.clone(), removed_kernel: 0.0, tail: 0.0, residual: 0.0 });
    }
    let coeffs = basis.coefficients(rhs);
    let mut rest = rhs.clone();
    for (cm, s) in coeffs.iter().zip(&basis.states) {
        rest.axpy(-cm, s);
    }
    let removed = coeffs[0].norm() / norm;
    let mut orth = rhs.clone();
    orth.axpy(-coeffs[0], &basis.states[0]);
    if orth.norm() <= 1e-8 * norm {
        return Err(Error::InKernel);
    }
    let mut wc = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    for m in 1..coeffs.len() {
        wc[m] = coeffs[m] / ((2 * m) as f64 + n as f64 - c);
    }
    let mut w = basis.synthesize(&wc);
    let tail = rest.norm();
    if tail > 1e-12 * norm {
        if (2 * m_max + 2) as f64 + n as f64 - c <= 0.0 {
            return Err(invalid("ladder truncation too small for this shift"));
        }
        let op = |v: &[Complex64]| {
            let f = rest.with_values(v.to_vec());
            let lap = neg_laplacian_base(&f).expect("unit flux checked");
            lap.values.iter().zip(v).map(|(a, x)| a - x * c).collect::<Vec<_>>()
        };
        let zero = vec![Complex64::new(0.0, 0.0); rest.values.len()];
        let rtol = (1e-13 * norm / tail).min(1e-3);
        let wt = pcg(op, |r| r.to_vec(), &rest.values, zero, rtol, 20000)?;
        for (a, t) in w.values.iter_mut().zip(&wt) {
            *a += t;
        }
    }
    let lap = neg_laplacian_base(&w)?;
    let res = lap.values.iter().zip(&w.values).zip(&orth.values).map(|((l, x), r)| l - x * c - r).collect::<Vec<_>>();
    let residual = orth.with_values(res).norm() / norm;
    Ok(ResolventSolve { w, removed_kernel: removed, tail, residual })
}

/// `<T>_{ij} = 2 Re <∇_j psi_0, R ∇_i psi_0>` with `R` the pinned resolvent.
pub fn t_matrix(basis: &LadderBasis, b: f64, chi: f64) -> Result<[[f64; 2]; 2]> {
    let psi0 = &basis.states[0];
    let grads = covariant_gradient(psi0, &GaugePotential::base(&basis.grid))?;
    let r = [
        pinned_resolvent(&grads[0], basis, b, chi)?.w,
        pinned_resolvent(&grads[1], basis, b, chi)?.w,
    ];
    let mut t = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            t[i][j] = 2.0 * grads[j].inner(&r[i]).re;
        }
    }
    Ok(t)
}
