//! Gauge-covariant finite-difference magnetic Laplacian on the node grid.
//!
//! `Δ = Σ_d w_d (s_d·∇)²` over the steps `e1/N`, `e2/N` and one diagonal, with
//! weights solving `Σ_d w_d s_d s_dᵀ = I`. Each directional second derivative
//! uses a central stencil of order 2, 4, 6 or 8 along straight lines, where the
//! parallel transport of `a^n` is exact: `T_h psi(x) = e^{i (n/2) x∧h} psi(x+h)`.
//! Neighbours outside the cell are reached through the shift phase.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};

use crate::error::{invalid, Error, Result};
use crate::fields::{rms_c, QpField, SpectralGrid};
use crate::lattice::{wedge, Cocycle, LatticeParam, Vec2};

fn stencil(order: usize) -> Result<Vec<f64>> {
    Ok(match order {
        2 => vec![-2.0, 1.0],
        4 => vec![-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0],
        6 => vec![-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0],
        8 => vec![-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0],
        _ => return Err(invalid(format!("unsupported stencil order {order}"))),
    })
}

/// Steps `(Δi, Δj)` and weights with `Σ w s sᵀ = I`, all weights nonnegative.
fn directions(l: &LatticeParam, n: usize) -> Result<Vec<((i64, i64), f64)>> {
    let step = |di: i64, dj: i64| -> Vec2 { l.point(di as f64 / n as f64, dj as f64 / n as f64) };
    for diag in [(1, -1), (1, 1)] {
        let dirs = [(1, 0), (0, 1), diag];
        let rows: Vec<[f64; 3]> = dirs
            .iter()
            .map(|&(a, b)| {
                let s = step(a, b);
                [s[0] * s[0], s[0] * s[1], s[1] * s[1]]
            })
            .collect();
        let m = nalgebra::Matrix3::from_fn(|r, c| rows[c][r]);
        let rhs = nalgebra::Vector3::new(1.0, 0.0, 1.0);
        if let Some(w) = m.lu().solve(&rhs) {
            let scale = w.amax();
            if w.iter().all(|&x| x >= -1e-12 * scale) {
                return Ok(dirs.iter().zip(w.iter()).map(|(&d, &x)| (d, x.max(0.0))).collect());
            }
        }
    }
    Err(invalid("no nonnegative three-direction stencil for this lattice"))
}

pub struct FdMagneticLaplacian {
    pub grid: Arc<SpectralGrid>,
    pub order: usize,
    pub flux: u32,
    width: usize,
    diag: f64,
    nbr: Vec<u32>,
    coef: Vec<Complex64>,
    precond: Vec<f64>,
}

impl FdMagneticLaplacian {
    pub fn new(grid: &Arc<SpectralGrid>, order: usize, flux: u32) -> Result<Self> {
        let c = stencil(order)?;
        let p_max = c.len() - 1;
        let n = grid.size();
        let l = LatticeParam { n: flux, ..grid.lattice };
        let dirs = directions(&l, n)?;
        let cocycle = Cocycle::standard(&l);
        let width = dirs.len() * 2 * p_max;
        let mut nbr = Vec::with_capacity(n * n * width);
        let mut coef = Vec::with_capacity(n * n * width);
        let diag = -c[0] * dirs.iter().map(|d| d.1).sum::<f64>();
        let nn = n as i64;
        for i in 0..n {
            for j in 0..n {
                let x = grid.node(i, j);
                for &((di, dj), w) in &dirs {
                    for p in 1..=p_max {
                        for sgn in [1i64, -1] {
                            let (a, b) = (i as i64 + sgn * p as i64 * di, j as i64 + sgn * p as i64 * dj);
                            let (m1, i0) = (a.div_euclid(nn), a.rem_euclid(nn));
                            let (m2, j0) = (b.div_euclid(nn), b.rem_euclid(nn));
                            let h = l.point((a - i as i64) as f64 / n as f64, (b - j as i64) as f64 / n as f64);
                            let x0 = grid.node(i0 as usize, j0 as usize);
                            let phase = 0.5 * flux as f64 * wedge(x, h) + cocycle.shift_phase(m1, m2, x0);
                            nbr.push(grid.idx(i0 as usize, j0 as usize) as u32);
                            coef.push(Complex64::from_polar(-w * c[p], phase));
                        }
                    }
                }
            }
        }
        let mut precond = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let (fa, fb) = (grid.freq(a) as f64, grid.freq(b) as f64);
                let mut s = 1.0 + diag;
                for &((di, dj), w) in &dirs {
                    let th = 2.0 * PI * (fa * di as f64 + fb * dj as f64) / n as f64;
                    for p in 1..=p_max {
                        s -= 2.0 * w * c[p] * (p as f64 * th).cos();
                    }
                }
                precond[grid.idx(a, b)] = s;
            }
        }
        Ok(FdMagneticLaplacian { grid: grid.clone(), order, flux, width, diag, nbr, coef, precond })
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = x[k] * self.diag;
            let base = k * self.width;
            for t in base..base + self.width {
                acc += self.coef[t] * x[self.nbr[t] as usize];
            }
            *o = acc;
        }
        out
    }

    pub fn apply_field(&self, psi: &QpField) -> QpField {
        psi.with_values(self.apply(&psi.values))
    }

    fn precondition(&self, r: &[Complex64]) -> Vec<Complex64> {
        let mut d = r.to_vec();
        self.grid.fft2(&mut d, false);
        let s = 1.0 / d.len() as f64;
        for (v, p) in d.iter_mut().zip(&self.precond) {
            *v *= s / p;
        }
        self.grid.fft2(&mut d, true);
        d
    }

    /// Lowest eigenpair by inverse iteration with preconditioned CG.
    pub fn ground_state(&self, tol: f64, seed: u64) -> Result<(f64, QpField)> {
        let len = self.grid.len();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<Complex64> = (0..len).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        normalize(&mut x);
        let mut lambda = rayleigh(&x, &self.apply(&x));
        for _ in 0..200 {
            let guess: Vec<Complex64> = x.iter().map(|v| v / lambda).collect();
            let mut y = pcg(|v| self.apply(v), |r| self.precondition(r), &x, guess, 1e-14, 5000)?;
            normalize(&mut y);
            x = y;
            let hx = self.apply(&x);
            lambda = rayleigh(&x, &hx);
            let res: Vec<Complex64> = hx.iter().zip(&x).map(|(h, v)| h - v * lambda).collect();
            if rms_c(&res) / rms_c(&x) < tol {
                let mut psi = QpField { grid: self.grid.clone(), values: x, flux: self.flux };
                let v0 = psi.values[0];
                if v0.norm() > 0.0 {
                    psi = psi.scale(v0.conj() / v0.norm());
                }
                return Ok((lambda, psi));
            }
        }
        Err(Error::SeriesNotConverged("finite-difference inverse iteration".into()))
    }
}

fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(x: &mut [Complex64]) {
    let s = (x.len() as f64).sqrt() / dotc(x, x).re.sqrt();
    x.iter_mut().for_each(|v| *v *= s);
}

fn rayleigh(x: &[Complex64], hx: &[Complex64]) -> f64 {
    dotc(x, hx).re / dotc(x, x).re
}

/// Preconditioned conjugate gradients for a Hermitian positive definite operator.
pub(crate) fn pcg(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    precond: impl Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    mut x: Vec<Complex64>,
    rtol: f64,
    max_iter: usize,
) -> Result<Vec<Complex64>> {
    let bn = dotc(b, b).re.sqrt();
    if bn == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); b.len()]);
    }
    let ax = apply(&x);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dotc(&r, &z).re;
    for _ in 0..max_iter {
        if dotc(&r, &r).re.sqrt() <= rtol * bn {
            return Ok(x);
        }
        let ap = apply(&p);
        let alpha = rz / dotc(&p, &ap).re;
        for k in 0..x.len() {
            x[k] += p[k] * alpha;
            r[k] -= ap[k] * alpha;
        }
        z = precond(&r);
        let rz_new = dotc(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..p.len() {
            p[k] = z[k] + p[k] * beta;
        }
    }
    if dotc(&r, &r).re.sqrt() <= 1e3 * rtol * bn {
        return Ok(x);
    }
    Err(Error::SeriesNotConverged("conjugate gradients".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_lattice;

    #[test]
    fn operator_is_hermitian() {
        let l = make_lattice(Complex64::new(0.3, 1.1), 1).unwrap();
        let g = SpectralGrid::new(&l, 16).unwrap();
        let h = FdMagneticLaplacian::new(&g, 6, 1).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut rv = || (0..g.len()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect::<Vec<_>>();
        let (x, y) = (rv(), rv());
        let lhs = dotc(&x, &h.apply(&y));
        let rhs = dotc(&h.apply(&x), &y);
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm());
    }
}
