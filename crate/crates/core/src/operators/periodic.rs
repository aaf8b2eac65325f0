//! Spectral calculus for periodic scalar and vector fields.
//!
//! First-derivative symbols vanish on the Nyquist row and column so that real
//! fields stay real.

use num_complex::Complex64;

use crate::fields::{spectrum_of, synthesize, PerScalarField, PerVecField, Spectrum};
use crate::lattice::Vec2;

fn map_modes(spec: &mut Spectrum, f: impl Fn(Vec2, bool) -> Complex64) {
    let g = spec.grid.clone();
    let n = g.size();
    for a in 0..n {
        for b in 0..n {
            let k = g.wave_vector(a, b);
            let nyq = g.is_nyquist(a) || g.is_nyquist(b);
            spec.coeffs[g.idx(a, b)] *= f(k, nyq);
        }
    }
}

fn real_of(spec: &Spectrum) -> Vec<f64> {
    synthesize(spec).iter().map(|c| c.re).collect()
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn first(k: f64, nyq: bool) -> Complex64 {
    if nyq {
        ZERO
    } else {
        I * k
    }
}

pub fn gradient(f: &PerScalarField) -> PerVecField {
    let g = &f.grid;
    let base = spectrum_of(g, &f.values);
    let mut sx = base.clone();
    map_modes(&mut sx, |k, nyq| first(k[0], nyq));
    let mut sy = base;
    map_modes(&mut sy, |k, nyq| first(k[1], nyq));
    PerVecField { grid: g.clone(), x: real_of(&sx), y: real_of(&sy) }
}

fn combine(
    a: &PerVecField,
    fx: impl Fn(Vec2, bool) -> Complex64,
    fy: impl Fn(Vec2, bool) -> Complex64,
) -> PerScalarField {
    let g = &a.grid;
    let mut sx = spectrum_of(g, &a.x);
    let mut sy = spectrum_of(g, &a.y);
    map_modes(&mut sx, fx);
    map_modes(&mut sy, fy);
    for (p, q) in sx.coeffs.iter_mut().zip(&sy.coeffs) {
        *p += q;
    }
    PerScalarField { grid: g.clone(), values: real_of(&sx) }
}

pub fn div(a: &PerVecField) -> PerScalarField {
    combine(a, |k, nyq| first(k[0], nyq), |k, nyq| first(k[1], nyq))
}

/// `curl a = ∂1 a2 - ∂2 a1`.
pub fn curl(a: &PerVecField) -> PerScalarField {
    combine(a, |k, nyq| -first(k[1], nyq), |k, nyq| first(k[0], nyq))
}

/// `curl* f = (∂2 f, -∂1 f)`.
pub fn curl_star(f: &PerScalarField) -> PerVecField {
    let g = &f.grid;
    let base = spectrum_of(g, &f.values);
    let mut sx = base.clone();
    map_modes(&mut sx, |k, nyq| first(k[1], nyq));
    let mut sy = base;
    map_modes(&mut sy, |k, nyq| -first(k[0], nyq));
    PerVecField { grid: g.clone(), x: real_of(&sx), y: real_of(&sy) }
}

pub fn laplacian(f: &PerScalarField) -> PerScalarField {
    let g = &f.grid;
    let mut s = spectrum_of(g, &f.values);
    map_modes(&mut s, |k, nyq| if nyq { ZERO } else { Complex64::new(-(k[0] * k[0] + k[1] * k[1]), 0.0) });
    PerScalarField { grid: g.clone(), values: real_of(&s) }
}

/// Mean-zero solution of `-Δ u = f - <f>`.
pub fn inverse_neg_laplacian(f: &PerScalarField) -> PerScalarField {
    let g = &f.grid;
    let mut s = spectrum_of(g, &f.values);
    map_modes(&mut s, |k, nyq| {
        let k2 = k[0] * k[0] + k[1] * k[1];
        if nyq || k2 == 0.0 {
            ZERO
        } else {
            Complex64::new(1.0 / k2, 0.0)
        }
    });
    PerScalarField { grid: g.clone(), values: real_of(&s) }
}

/// `P' = I - k kᵀ/|k|²` on nonzero modes; the constant mode is kept.
pub fn project_divfree(a: &PerVecField) -> PerVecField {
    let g = &a.grid;
    let mut sx = spectrum_of(g, &a.x);
    let mut sy = spectrum_of(g, &a.y);
    let n = g.size();
    for p in 0..n {
        for q in 0..n {
            let k = g.wave_vector(p, q);
            let k2 = k[0] * k[0] + k[1] * k[1];
            if k2 == 0.0 {
                continue;
            }
            let i = g.idx(p, q);
            let d = (sx.coeffs[i] * k[0] + sy.coeffs[i] * k[1]) / k2;
            sx.coeffs[i] -= d * k[0];
            sy.coeffs[i] -= d * k[1];
        }
    }
    PerVecField { grid: g.clone(), x: real_of(&sx), y: real_of(&sy) }
}

/// Stream function of the oscillating divergence-free part: the mean-zero `η`
/// with `P' a = <a> + curl* η`.
pub fn stream_function(a: &PerVecField) -> PerScalarField {
    inverse_neg_laplacian(&curl(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use crate::fields::{CellAverage, SpectralGrid};
    use crate::lattice::{dot, make_lattice};
    use rand::{Rng, SeedableRng};

    fn grid() -> Arc<SpectralGrid> {
        SpectralGrid::new(&make_lattice(Complex64::new(0.3, 1.1), 1).unwrap(), 16).unwrap()
    }

    fn random_band(g: &Arc<SpectralGrid>, seed: u64) -> PerScalarField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(f64, f64, f64, f64)> = (0..8)
            .map(|_| (rng.gen_range(-4..=4) as f64, rng.gen_range(-4..=4) as f64, rng.gen(), rng.gen()))
            .collect();
        let d = g.dual;
        PerScalarField::from_fn(g, |x| {
            modes.iter().map(|&(a, b, c, s)| {
                let t = dot(d.vector(a, b), x);
                c * t.cos() + s * t.sin()
            }).sum()
        })
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn curl_star_of_sine() {
        let g = grid();
        let k = g.dual.vector(1.0, 2.0);
        let f = PerScalarField::from_fn(&g, |x| dot(k, x).sin());
        let c = curl_star(&f);
        let ex = PerVecField::from_fn(&g, |x| [k[1] * dot(k, x).cos(), -k[0] * dot(k, x).cos()]);
        assert!(max_diff(&c.x, &ex.x) < 1e-11);
        assert!(max_diff(&c.y, &ex.y) < 1e-11);
    }

    #[test]
    fn curl_curl_star_is_minus_laplacian() {
        let g = grid();
        let f = random_band(&g, 1);
        let lhs = curl(&curl_star(&f));
        let rhs = laplacian(&f);
        let err = lhs.values.iter().zip(&rhs.values).fold(0.0_f64, |m, (a, b)| m.max((a + b).abs()));
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn projection_properties() {
        let g = grid();
        let f = random_band(&g, 2).mean_zero();
        let p = project_divfree(&gradient(&f));
        assert!(p.norm() < 1e-12);
        let c = PerVecField::constant(&g, [0.3, -1.2]);
        let pc = project_divfree(&c);
        assert!(pc.sub(&c).norm() < 1e-14);
        let v = PerVecField { grid: g.clone(), x: random_band(&g, 3).values, y: random_band(&g, 4).values };
        let p1 = project_divfree(&v);
        let p2 = project_divfree(&p1);
        assert!(p2.sub(&p1).norm() < 1e-12);
        assert!(div(&p1).norm() < 1e-11);
        let cv = c.cell_average();
        assert!((cv[0] - 0.3).abs() < 1e-14);
    }

    #[test]
    fn poisson_inverse() {
        let g = grid();
        let f = random_band(&g, 5);
        let u = inverse_neg_laplacian(&f);
        let back = laplacian(&u);
        let fz = f.mean_zero();
        assert!(max_diff(&back.values.iter().map(|v| -v).collect::<Vec<_>>(), &fz.values) < 1e-11);
        assert!(u.cell_average().abs() < 1e-14);
    }
}
