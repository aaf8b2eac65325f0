//! Lowest Landau level state `psi_0`, the ladder basis `psi_m`, the Abrikosov
//! function `beta(tau)` and the supercurrent.
//!
//! For unit flux and the cocycle `c_{m e1 + m' e2} = pi m m'`,
//!
//! ```text
//! psi_m(x) = e^{iγ} i^m sqrt(q) e^{-i x1 x2 / 2} Σ_j e^{-i pi τ1 j²} e^{i q j x1} φ_m(x2 - q j)
//! ```
//!
//! with `q = 2π/r = r Im τ`, `φ_m` the normalized Hermite functions and `γ`
//! chosen so that `psi_0(0) > 0`. The sum is a theta series in `conj(z)`, and
//! `psi_m = (m!)^{-1/2} (√2 ∂*)^m psi_0`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fields::{CellAverage, QpField, SpectralGrid};
use crate::lattice::{make_lattice, reduce_tau, Cocycle, LatticeParam, Vec2};
use crate::operators::fd::FdMagneticLaplacian;
use crate::operators::{apply_dbar, GaugePotential};

pub use crate::operators::current;

/// Normalized Hermite functions `φ_0..φ_{len-1}` at `y`.
pub fn hermite_functions(y: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * y * y).exp();
    if out.len() > 1 {
        out[1] = 2f64.sqrt() * y * out[0];
    }
    for m in 1..out.len() - 1 {
        let mf = m as f64;
        out[m + 1] = (2.0 / (mf + 1.0)).sqrt() * y * out[m] - (mf / (mf + 1.0)).sqrt() * out[m - 1];
    }
}

/// Pointwise evaluator for `psi_0..psi_M`.
#[derive(Debug, Clone)]
pub struct LandauEvaluator {
    pub lattice: LatticeParam,
    pub m_max: usize,
    q: f64,
    pref: f64,
    gauge: Complex64,
    span: i64,
}

impl LandauEvaluator {
    pub fn new(lattice: &LatticeParam, m_max: usize) -> Result<Self> {
        if lattice.n != 1 {
            return Err(invalid(format!("Landau states are built for n = 1, got n = {}", lattice.n)));
        }
        let q = lattice.e2[1];
        let tr = reduce_tau(lattice.tau)?;
        let by_shape = (6.0 / tr.im.sqrt()).ceil() as i64 + 8;
        let by_level = (((2 * m_max + 1) as f64).sqrt() + 10.0) / q;
        let mut ev = LandauEvaluator {
            lattice: *lattice,
            m_max,
            q,
            pref: q.sqrt(),
            gauge: Complex64::new(1.0, 0.0),
            span: by_shape.max(by_level.ceil() as i64 + 1),
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); m_max + 1];
        ev.eval_into([0.0, 0.0], &mut buf)?;
        let z = buf[0];
        if z.norm() == 0.0 {
            return Err(Error::SeriesNotConverged("psi_0 vanishes at the reference node".into()));
        }
        ev.gauge = z.conj() / z.norm();
        Ok(ev)
    }

    /// All `psi_m(x)`, `m <= out.len() - 1 <= m_max`.
    pub fn eval_into(&self, x: Vec2, out: &mut [Complex64]) -> Result<()> {
        let len = out.len();
        let (x1, x2) = (x[0], x[1]);
        let t1 = self.lattice.tau.re;
        let jc = (x2 / self.q).round() as i64;
        let mut h = vec![0.0; len];
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        let mut converged = false;
        for pass in 0..5 {
            let span = self.span << pass;
            acc.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
            let (mut edge, mut total) = (0.0_f64, 0.0_f64);
            for j in jc - span..=jc + span {
                let jf = j as f64;
                hermite_functions(x2 - self.q * jf, &mut h);
                let ph = Complex64::from_polar(1.0, -PI * t1 * jf * jf + self.q * jf * x1);
                let mut mag = 0.0_f64;
                for m in 0..len {
                    acc[m] += ph * h[m];
                    mag = mag.max(h[m].abs());
                }
                total += mag;
                if (j - jc).abs() == span {
                    edge = edge.max(mag);
                }
            }
            if edge <= 1e-14 * total {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::SeriesNotConverged(format!("theta series at ({x1}, {x2})")));
        }
        let base = self.gauge * self.pref * Complex64::from_polar(1.0, -0.5 * x1 * x2);
        let mut im = Complex64::new(1.0, 0.0);
        for m in 0..len {
            out[m] = acc[m] * base * im;
            im *= Complex64::new(0.0, 1.0);
        }
        Ok(())
    }

    pub fn eval(&self, x: Vec2, m: usize) -> Result<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); m + 1];
        self.eval_into(x, &mut buf)?;
        Ok(buf[m])
    }

    /// Grid samples of `psi_0..psi_M`.
    pub fn sample(&self, grid: &Arc<SpectralGrid>, m_max: usize) -> Result<Vec<QpField>> {
        if m_max > self.m_max {
            return Err(invalid("requested level above the evaluator's m_max"));
        }
        let n = grid.size();
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![Complex64::new(0.0, 0.0); n * (m_max + 1)];
                let mut buf = vec![Complex64::new(0.0, 0.0); m_max + 1];
                for j in 0..n {
                    self.eval_into(grid.node(i, j), &mut buf)?;
                    for m in 0..=m_max {
                        row[m * n + j] = buf[m];
                    }
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(m_max + 1);
        for m in 0..=m_max {
            let mut values = Vec::with_capacity(n * n);
            for row in &rows {
                values.extend_from_slice(&row[m * n..(m + 1) * n]);
            }
            out.push(QpField { grid: grid.clone(), values, flux: 1 });
        }
        Ok(out)
    }
}

/// Normalized lowest Landau level state on a grid.
#[derive(Debug, Clone)]
pub struct Psi0 {
    pub field: QpField,
    pub evaluator: LandauEvaluator,
}

pub fn build_psi0(lattice: &LatticeParam, n_grid: usize) -> Result<Psi0> {
    let grid = SpectralGrid::new(lattice, n_grid)?;
    build_psi0_on(&grid)
}

pub fn build_psi0_on(grid: &Arc<SpectralGrid>) -> Result<Psi0> {
    let evaluator = LandauEvaluator::new(&grid.lattice, 0)?;
    let field = evaluator.sample(grid, 0)?.pop().unwrap();
    Ok(Psi0 { field, evaluator })
}

impl Psi0 {
    /// `‖∂_{a^n} psi_0‖ / ‖psi_0‖`.
    pub fn dbar_residual(&self) -> Result<f64> {
        let d = apply_dbar(&self.field, &GaugePotential::base(&self.field.grid))?;
        Ok(d.norm() / self.field.norm())
    }

    /// Largest mismatch, relative to `max |psi_0|`, between the closed form at
    /// `x + s` and the shift rule applied to the stored value at `x`, over the
    /// boundary strips and the shifts `±e1, ±e2, e1 + e2`.
    pub fn qp_residual(&self, cocycle: &Cocycle) -> Result<f64> {
        let g = &self.field.grid;
        let n = g.size();
        let l = &g.lattice;
        let max = self.field.max_abs();
        let mut worst = 0.0_f64;
        let strip = |k: usize| k == 0 || k == 1 || k == n - 1;
        for i in 0..n {
            for j in 0..n {
                if !(strip(i) || strip(j)) {
                    continue;
                }
                let x = g.node(i, j);
                let v = self.field.values[g.idx(i, j)];
                for (m1, m2) in [(1, 0), (0, 1), (1, 1), (-1, 0), (0, -1)] {
                    let s = l.point(m1 as f64, m2 as f64);
                    let shifted = self.evaluator.eval([x[0] + s[0], x[1] + s[1]], 0)?;
                    let rule = v * Complex64::from_polar(1.0, cocycle.shift_phase(m1, m2, x));
                    worst = worst.max((shifted - rule).norm() / max);
                }
            }
        }
        Ok(worst)
    }

    pub fn beta(&self) -> f64 {
        let rho = self.field.modulus_sq();
        let m2 = rho.cell_average();
        let m4 = rho.values.iter().map(|v| v * v).sum::<f64>() / rho.values.len() as f64;
        m4 / (m2 * m2)
    }
}

/// Ladder states `psi_0..psi_M` on a grid.
#[derive(Debug, Clone)]
pub struct LadderBasis {
    pub grid: Arc<SpectralGrid>,
    pub states: Vec<QpField>,
}

impl LadderBasis {
    pub fn new(grid: &Arc<SpectralGrid>, m_max: usize) -> Result<Self> {
        let ev = LandauEvaluator::new(&grid.lattice, m_max)?;
        Ok(LadderBasis { grid: grid.clone(), states: ev.sample(grid, m_max)? })
    }

    pub fn m_max(&self) -> usize {
        self.states.len() - 1
    }

    /// `<psi_m, f>` for every level.
    pub fn coefficients(&self, f: &QpField) -> Vec<Complex64> {
        self.states.iter().map(|s| s.inner(f)).collect()
    }

    pub fn synthesize(&self, coeffs: &[Complex64]) -> QpField {
        let mut out = QpField::zeros(&self.grid, 1);
        for (c, s) in coeffs.iter().zip(&self.states) {
            if *c != Complex64::new(0.0, 0.0) {
                out.axpy(*c, s);
            }
        }
        out
    }

    /// `‖(I - Π_M) f‖` using the first `m + 1` levels.
    pub fn tail(&self, f: &QpField, m: usize) -> f64 {
        let m = m.min(self.m_max());
        let mut r = f.clone();
        for s in &self.states[..=m] {
            let c = s.inner(f);
            r.axpy(-c, s);
        }
        r.norm()
    }

    /// `max |<psi_m, psi_m'> - δ|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (a, sa) in self.states.iter().enumerate() {
            for (b, sb) in self.states.iter().enumerate().skip(a) {
                let d = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((sa.inner(sb) - d).norm());
            }
        }
        worst
    }
}

pub const BETA_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaReport {
    pub beta: f64,
    /// `|beta_N - beta_{3N/2}|`.
    pub residual: f64,
    pub grid_n: usize,
}

pub fn beta_on_grid(tau: Complex64, n_grid: usize) -> Result<f64> {
    let l = make_lattice(tau, 1)?;
    Ok(build_psi0(&l, n_grid)?.beta())
}

pub fn beta_report(tau: Complex64, n_grid: usize) -> Result<BetaReport> {
    let b = beta_on_grid(tau, n_grid)?;
    let fine = beta_on_grid(tau, 3 * n_grid / 2 + (3 * n_grid / 2) % 2)?;
    let residual = (b - fine).abs();
    if residual > 1e-8 {
        return Err(Error::Refinement(residual));
    }
    Ok(BetaReport { beta: b, residual, grid_n: n_grid })
}

/// `beta(tau) = <|psi_0|^4> / <|psi_0|^2>^2` at the default resolution.
pub fn beta(tau: Complex64) -> Result<f64> {
    Ok(beta_report(tau, BETA_GRID)?.beta)
}

/// Comparison of the closed form with the lowest eigenvector of a
/// finite-difference magnetic Laplacian on the same grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOracle {
    pub ground_energy: f64,
    /// `|<psi_0, phi>| / (‖psi_0‖ ‖phi‖)`.
    pub overlap: f64,
    pub beta_fd: f64,
    pub beta_theta: f64,
}

pub fn fd_oracle(tau: Complex64, n_grid: usize) -> Result<FdOracle> {
    let l = make_lattice(tau, 1)?;
    let p = build_psi0(&l, n_grid)?;
    let h = FdMagneticLaplacian::new(&p.field.grid, 6, 1)?;
    let (ground_energy, g) = h.ground_state(1e-11, 7)?;
    let overlap = p.field.inner(&g).norm() / (p.field.norm() * g.norm());
    let rho = g.modulus_sq();
    let m2 = rho.cell_average();
    let beta_fd = rho.values.iter().map(|v| v * v).sum::<f64>() / rho.values.len() as f64 / (m2 * m2);
    Ok(FdOracle { ground_energy, overlap, beta_fd, beta_theta: p.beta() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularResiduals {
    pub shift: f64,
    pub inversion: f64,
}

pub fn beta_modular_check(tau: Complex64) -> Result<ModularResiduals> {
    let b = beta(tau)?;
    let t = beta(tau + 1.0)?;
    let s = beta(-1.0 / tau)?;
    Ok(ModularResiduals { shift: (b - t).abs(), inversion: (b - s).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::winding_number;
    use crate::operators::{apply_dbar_star, magnetic::neg_laplacian_base};

    fn hex() -> Complex64 {
        Complex64::from_polar(1.0, PI / 3.0)
    }

    #[test]
    fn psi0_contracts() {
        for tau in [Complex64::new(0.0, 1.0), hex(), Complex64::new(0.3, 1.1)] {
            let l = make_lattice(tau, 1).unwrap();
            let p = build_psi0(&l, 64).unwrap();
            let r = p.dbar_residual().unwrap();
            let qp = p.qp_residual(&l.cocycle()).unwrap();
            let m = p.field.modulus_sq().cell_average();
            let v0 = p.field.values[0];
            eprintln!("tau {tau}: dbar {r:.2e} qp {qp:.2e} mean {m} beta {}", p.beta());
            assert!(r < 1e-10 && qp < 1e-10 && (m - 1.0).abs() < 1e-10);
            assert!(v0.im.abs() < 1e-14 && v0.re > 0.0);
            assert_eq!(winding_number(&p.field).unwrap(), 1);
        }
    }

    #[test]
    fn ladder_relations() {
        let l = make_lattice(Complex64::new(0.3, 1.1), 1).unwrap();
        let g = SpectralGrid::new(&l, 64).unwrap();
        let b = LadderBasis::new(&g, 12).unwrap();
        let a = GaugePotential::base(&g);
        assert!(b.orthonormality_defect() < 1e-9, "{}", b.orthonormality_defect());
        for m in 0..12 {
            let up = apply_dbar_star(&b.states[m], &a).unwrap();
            let ex = b.states[m + 1].scale(Complex64::new(((m + 1) as f64 / 2.0).sqrt(), 0.0));
            let lap = neg_laplacian_base(&b.states[m]).unwrap();
            let lex = b.states[m].scale(Complex64::new((2 * m + 1) as f64, 0.0));
            assert!(up.sub(&ex).norm() < 1e-9, "m={m} {}", up.sub(&ex).norm());
            assert!(lap.sub(&lex).norm() < 1e-8, "m={m} {}", lap.sub(&lex).norm());
            if m > 0 {
                let dn = apply_dbar(&b.states[m], &a).unwrap();
                let ex = b.states[m - 1].scale(Complex64::new((m as f64 / 2.0).sqrt(), 0.0));
                assert!(dn.sub(&ex).norm() < 1e-9);
            }
        }
        assert_eq!(winding_number(&b.states[1]).unwrap(), 1);
    }
}

#[cfg(test)]
mod fd_oracle {
    use super::*;
    fn hex() -> Complex64 {
        Complex64::from_polar(1.0, PI / 3.0)
    }

    #[test]
    fn fd_ground_state_matches_theta() {
        for tau in [Complex64::new(0.0, 1.0), hex(), Complex64::new(0.3, 1.1)] {
            let o = fd_oracle(tau, 64).unwrap();
            assert!((o.ground_energy - 1.0).abs() < 1e-6);
            assert!(o.overlap >= 1.0 - 1e-6);
            assert!((o.beta_fd - o.beta_theta).abs() <= 1e-6);
        }
    }
}
