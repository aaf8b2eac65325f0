//! Normalized Bravais lattices `r(Z + tau Z)` of area `2 pi`, their duals, the
//! quasi-periodicity cocycle and modular reduction of the shape parameter.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Vec2 = [f64; 2];

/// `s ∧ t = s1 t2 - s2 t1`.
#[inline]
pub fn wedge(s: Vec2, t: Vec2) -> f64 {
    s[0] * t[1] - s[1] * t[0]
}

#[inline]
pub fn dot(s: Vec2, t: Vec2) -> f64 {
    s[0] * t[0] + s[1] * t[1]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParam {
    pub tau: Complex64,
    pub r: f64,
    pub n: u32,
    pub e1: Vec2,
    pub e2: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSummary {
    pub tau_re: f64,
    pub tau_im: f64,
    pub r: f64,
    pub n: u32,
    pub area: f64,
}

pub fn make_lattice(tau: Complex64, n: u32) -> Result<LatticeParam> {
    if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
        return Err(invalid(format!("Im tau must be positive, got {tau}")));
    }
    if n == 0 {
        return Err(invalid("flux n must be at least 1"));
    }
    let r = (2.0 * PI / tau.im).sqrt();
    Ok(LatticeParam {
        tau,
        r,
        n,
        e1: [r, 0.0],
        e2: [r * tau.re, r * tau.im],
    })
}

impl LatticeParam {
    pub fn area(&self) -> f64 {
        wedge(self.e1, self.e2).abs()
    }

    /// Cartesian point `u e1 + v e2`.
    #[inline]
    pub fn point(&self, u: f64, v: f64) -> Vec2 {
        [u * self.e1[0] + v * self.e2[0], u * self.e1[1] + v * self.e2[1]]
    }

    /// Lattice coordinates `(u, v)` of a Cartesian point.
    #[inline]
    pub fn coords(&self, x: Vec2) -> (f64, f64) {
        let d = wedge(self.e1, self.e2);
        (wedge(x, self.e2) / d, wedge(self.e1, x) / d)
    }

    pub fn dual(&self) -> DualLattice {
        dual_basis(self)
    }

    pub fn cocycle(&self) -> Cocycle {
        Cocycle::standard(self)
    }

    pub fn summary(&self) -> LatticeSummary {
        LatticeSummary {
            tau_re: self.tau.re,
            tau_im: self.tau.im,
            r: self.r,
            n: self.n,
            area: self.area(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualLattice {
    pub k1: Vec2,
    pub k2: Vec2,
}

impl DualLattice {
    #[inline]
    pub fn vector(&self, m1: f64, m2: f64) -> Vec2 {
        [m1 * self.k1[0] + m2 * self.k2[0], m1 * self.k1[1] + m2 * self.k2[1]]
    }
}

pub fn dual_basis(l: &LatticeParam) -> DualLattice {
    let d = wedge(l.e1, l.e2);
    let s = 2.0 * PI / d;
    DualLattice {
        k1: [s * l.e2[1], -s * l.e2[0]],
        k2: [-s * l.e1[1], s * l.e1[0]],
    }
}

/// Classical S/T reduction into `|Re tau| <= 1/2`, `|tau| >= 1`, with the
/// boundary representative taken on the `Re tau >= 0` side.
pub fn reduce_tau(tau: Complex64) -> Result<Complex64> {
    if !(tau.im > 0.0) {
        return Err(invalid(format!("Im tau must be positive, got {tau}")));
    }
    const EPS: f64 = 1e-12;
    let mut t = tau;
    for _ in 0..100 {
        let mut re = t.re - t.re.round();
        if (re + 0.5).abs() < EPS {
            re = 0.5;
        }
        t = Complex64::new(re, t.im);
        let m2 = t.norm_sqr();
        if m2 < 1.0 - EPS {
            t = -1.0 / t;
            continue;
        }
        if m2 <= 1.0 + EPS && t.re < 0.0 {
            t = Complex64::new(-t.re, t.im);
        }
        return Ok(t);
    }
    Err(invalid(format!("modular reduction of {tau} did not terminate in 100 steps")))
}

/// Phases `c_s` on lattice vectors `s = m e1 + m' e2`, extended by
/// `c_s = c1 m + c2 m' + twist m m'`. The standard choice is `c1 = c2 = 0`,
/// `twist = n pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cocycle {
    pub c1: f64,
    pub c2: f64,
    pub twist: f64,
    pub n: u32,
    lattice: LatticeParam,
}

impl Cocycle {
    pub fn standard(l: &LatticeParam) -> Self {
        Cocycle {
            c1: 0.0,
            c2: 0.0,
            twist: l.n as f64 * PI,
            n: l.n,
            lattice: *l,
        }
    }

    pub fn with_twist(mut self, twist: f64) -> Self {
        self.twist = twist;
        self
    }

    /// Unreduced value on integer coordinates.
    #[inline]
    pub fn raw(&self, m1: i64, m2: i64) -> f64 {
        self.c1 * m1 as f64 + self.c2 * m2 as f64 + self.twist * (m1 * m2) as f64
    }

    /// Phase of `psi(x + s) / psi(x)`, i.e. `-(n/2) s ∧ x + c_s`.
    #[inline]
    pub fn shift_phase(&self, m1: i64, m2: i64, x: Vec2) -> f64 {
        let l = &self.lattice;
        let s = l.point(m1 as f64, m2 as f64);
        -0.5 * self.n as f64 * wedge(s, x) + self.raw(m1, m2)
    }

    /// Integer coordinates of a lattice vector.
    pub fn lattice_coords(&self, s: Vec2) -> Result<(i64, i64)> {
        let (u, v) = self.lattice.coords(s);
        let (m1, m2) = (u.round(), v.round());
        let tol = 1e-9 * (1.0 + u.abs() + v.abs());
        if (u - m1).abs() > tol || (v - m2).abs() > tol {
            return Err(invalid(format!("({}, {}) is not a lattice vector", s[0], s[1])));
        }
        Ok((m1 as i64, m2 as i64))
    }

    /// Defect `c_{s+t} - c_s - c_t + (n/2) s ∧ t` reduced to `(-pi, pi]`.
    pub fn defect(&self, s: (i64, i64), t: (i64, i64)) -> f64 {
        let l = &self.lattice;
        let sv = l.point(s.0 as f64, s.1 as f64);
        let tv = l.point(t.0 as f64, t.1 as f64);
        let d = self.raw(s.0 + t.0, s.1 + t.1) - self.raw(s.0, s.1) - self.raw(t.0, t.1)
            + 0.5 * self.n as f64 * wedge(sv, tv);
        wrap_angle(d)
    }

    /// Largest cocycle defect over `|m|, |m'| <= range` for both arguments.
    pub fn max_defect(&self, range: i64) -> f64 {
        let mut worst = 0.0_f64;
        for a in -range..=range {
            for b in -range..=range {
                for c in -range..=range {
                    for d in -range..=range {
                        worst = worst.max(self.defect((a, b), (c, d)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// `c_s` reduced to `[0, 2 pi)`.
pub fn cocycle_value(c: &Cocycle, s: Vec2) -> Result<f64> {
    let (m1, m2) = c.lattice_coords(s)?;
    Ok(c.raw(m1, m2).rem_euclid(2.0 * PI))
}

/// Representative of `x` modulo `2 pi` in `(-pi, pi]`.
#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn radii() {
        assert!((make_lattice(c(0.0, 1.0), 1).unwrap().r - 2.5066).abs() < 1e-4);
        let hex = Complex64::from_polar(1.0, PI / 3.0);
        let r = make_lattice(hex, 1).unwrap().r;
        assert!((r * r * (PI / 3.0).sin() - 2.0 * PI).abs() < 1e-12);
        assert!((r - 2.6937).abs() < 5e-4);
        assert!((make_lattice(c(0.0, 2.0), 1).unwrap().r - 1.7725).abs() < 1e-4);
        assert!(make_lattice(c(0.3, 0.0), 1).is_err());
        assert!(make_lattice(c(0.3, 1.0), 0).is_err());
    }

    #[test]
    fn dual_is_biorthogonal() {
        let l = make_lattice(c(0.3, 1.1), 1).unwrap();
        let k = l.dual();
        assert!((dot(k.k1, l.e1) - 2.0 * PI).abs() < 1e-12);
        assert!((dot(k.k2, l.e2) - 2.0 * PI).abs() < 1e-12);
        assert!(dot(k.k1, l.e2).abs() < 1e-12);
        assert!(dot(k.k2, l.e1).abs() < 1e-12);

        let sq = make_lattice(c(0.0, 1.0), 1).unwrap().dual();
        let q = 2.0 * PI / (2.0 * PI).sqrt();
        assert!((sq.k1[0] - q).abs() < 1e-12 && sq.k1[1].abs() < 1e-12);
        assert!(sq.k2[0].abs() < 1e-12 && (sq.k2[1] - q).abs() < 1e-12);

        let hex = make_lattice(Complex64::from_polar(1.0, PI / 3.0), 1).unwrap().dual();
        assert!((dot(hex.k1, hex.k1).sqrt() - dot(hex.k2, hex.k2).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(reduce_tau(c(0.0, 1.0)).unwrap(), c(0.0, 1.0));
        let t = reduce_tau(c(1.0, 1.0)).unwrap();
        assert!((t - c(0.0, 1.0)).norm() < 1e-14);
        let t = reduce_tau(c(-0.5, 2.0)).unwrap();
        assert_eq!(t.re, 0.5);
        let t = reduce_tau(c(-0.3, 0.9539392014169456)).unwrap();
        assert!(t.re >= 0.0);
        assert!(reduce_tau(c(0.0, -1.0)).is_err());
    }

    #[test]
    fn cocycle_basics() {
        let l = make_lattice(c(0.2, 1.3), 1).unwrap();
        let cc = l.cocycle();
        assert_eq!(cocycle_value(&cc, [0.0, 0.0]).unwrap(), 0.0);
        assert!(cc.defect((1, 0), (0, 1)).abs() < 1e-12);
        assert!(cc.max_defect(5) < 1e-10);
        assert!(cocycle_value(&cc, [0.3, 0.1]).is_err());
        let bad = cc.with_twist(PI + 0.3);
        assert!(bad.max_defect(1) > 0.1);
    }
}
