//! Covariant derivatives of quasi-periodic fields of unit flux.
//!
//! A grid field is mapped to the Landau gauge, chirped in `v`, and Fourier
//! transformed along `e1`. The `N` partial transforms are translates of one
//! function of the transverse coordinate `y = x2 - q k`, sampled on a line of
//! `N^2` points with spacing `q/N`. On that line `∇_{a^1}` acts as
//! `(-i y, d/dy)`, so every covariant derivative is a multiplication or a
//! one-dimensional spectral derivative. The map is unitary up to the factor
//! `N`, which keeps the discrete operators exactly (anti-)Hermitian.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fields::{QpField, SpectralGrid};

pub struct ZakTables {
    node_phase: Vec<Complex64>,
    line_chirp: Vec<Complex64>,
    pub(crate) y: Vec<f64>,
    kappa: Vec<f64>,
}

pub(crate) fn tables(grid: &SpectralGrid) -> &ZakTables {
    grid.zak.get_or_init(|| {
        let n = grid.size();
        let l = &grid.lattice;
        let q = l.e2[1];
        let t1 = l.tau.re;
        let mut node_phase = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let x = grid.node(i, j);
                let v = j as f64 / n as f64;
                node_phase.push(Complex64::from_polar(1.0, 0.5 * x[0] * x[1] - PI * t1 * v * v));
            }
        }
        let len = n * n;
        let off = (len / 2) as f64 - n as f64;
        let mut line_chirp = Vec::with_capacity(len);
        let mut y = Vec::with_capacity(len);
        for p in 0..len {
            let w = (p as f64 - off) / n as f64;
            line_chirp.push(Complex64::from_polar(1.0, PI * t1 * w * w));
            y.push(q * w);
        }
        let period = q * n as f64;
        let kappa = (0..len)
            .map(|p| {
                let m = if p < len / 2 { p as f64 } else if p == len / 2 { 0.0 } else { p as f64 - len as f64 };
                2.0 * PI * m / period
            })
            .collect();
        ZakTables { node_phase, line_chirp, y, kappa }
    })
}

#[inline]
fn line_index(n: usize, j: usize, slot: usize) -> usize {
    let k = if slot < n / 2 { slot as i64 } else { slot as i64 - n as i64 };
    (j as i64 - n as i64 * k + (n * n / 2) as i64 - n as i64) as usize
}

fn require_unit_flux(psi: &QpField) -> Result<()> {
    if psi.flux != 1 {
        return Err(invalid(format!(
            "covariant derivatives are implemented for unit flux, field has n = {}",
            psi.flux
        )));
    }
    Ok(())
}

/// Samples of the transverse profile of `psi`.
pub fn to_line(psi: &QpField) -> Result<Vec<Complex64>> {
    require_unit_flux(psi)?;
    let grid = &psi.grid;
    let t = tables(grid);
    let n = grid.size();
    let mut data: Vec<Complex64> = psi.values.iter().zip(&t.node_phase).map(|(a, b)| a * b).collect();
    grid.fft_first_axis(&mut data, false);
    let s = 1.0 / n as f64;
    let mut line = vec![Complex64::new(0.0, 0.0); n * n];
    for slot in 0..n {
        for j in 0..n {
            let p = line_index(n, j, slot);
            line[p] = data[grid.idx(slot, j)] * t.line_chirp[p] * s;
        }
    }
    Ok(line)
}

/// Inverse of [`to_line`].
pub fn from_line(grid: &std::sync::Arc<SpectralGrid>, line: &[Complex64]) -> QpField {
    let t = tables(grid);
    let n = grid.size();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for slot in 0..n {
        for j in 0..n {
            let p = line_index(n, j, slot);
            data[grid.idx(slot, j)] = line[p] * t.line_chirp[p].conj();
        }
    }
    grid.fft_first_axis(&mut data, true);
    for (d, ph) in data.iter_mut().zip(&t.node_phase) {
        *d *= ph.conj();
    }
    QpField { grid: grid.clone(), values: data, flux: 1 }
}

fn line_spectral(grid: &SpectralGrid, line: &[Complex64], sym: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    let t = tables(grid);
    let mut d = line.to_vec();
    grid.fft_line(&mut d, false);
    let s = 1.0 / d.len() as f64;
    for (c, &k) in d.iter_mut().zip(&t.kappa) {
        *c *= sym(k) * s;
    }
    grid.fft_line(&mut d, true);
    d
}

/// `∇_{a^1} psi` for the symmetric-gauge potential alone.
pub fn grad_base(psi: &QpField) -> Result<[QpField; 2]> {
    let line = to_line(psi)?;
    let t = tables(&psi.grid);
    let g1: Vec<Complex64> = line.iter().zip(&t.y).map(|(g, &y)| g * Complex64::new(0.0, -y)).collect();
    let g2 = line_spectral(&psi.grid, &line, |k| Complex64::new(0.0, k));
    Ok([from_line(&psi.grid, &g1), from_line(&psi.grid, &g2)])
}

/// `-Δ_{a^1} psi` as the oscillator `y^2 - d^2/dy^2` on the transverse line.
pub fn neg_laplacian_base(psi: &QpField) -> Result<QpField> {
    let line = to_line(psi)?;
    let t = tables(&psi.grid);
    let d2 = line_spectral(&psi.grid, &line, |k| Complex64::new(k * k, 0.0));
    let out: Vec<Complex64> = line.iter().zip(&t.y).zip(&d2).map(|((g, &y), d)| g * (y * y) + d).collect();
    Ok(from_line(&psi.grid, &out))
}
