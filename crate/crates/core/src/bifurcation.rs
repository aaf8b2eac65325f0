//! The modified map `F_{nb}`, its leading-order bifurcation coefficients and
//! Newton continuation of the vortex-lattice branch in the amplitude `s`.
//!
//! `a0` is kept mean-zero. The constant part of the electric potential is
//! `ω = ½<|psi|²>`, determined by `psi` and added in `F1`, so that `F1` reads
//! `-Δ_a psi + v_λ(|psi|²) psi - (a0 + ω) psi`.
//!
//! The branch solver eliminates the linear blocks exactly: `θ` from `F4`,
//! the oscillating part of `α` from `F3`, and `a0` from `F2` up to the mean
//! current. What remains is a Galerkin system for the ladder coefficients of
//! `psi`, the mean `<α>` and `b` (or `s`), solved by Gauss-Newton with a
//! finite-difference Jacobian. A constant shift of `α` combined with a
//! magnetic translation maps solutions to solutions, so `<α> = 0` is imposed
//! to select one member of that family; the mean current `<J>` is kept as an
//! equation and vanishes at the solution by the inversion symmetry of `psi_0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fields::{CellAverage, PerScalarField, PerVecField, QpField, SpectralGrid};
use crate::landau::{LadderBasis, Psi0};
use crate::lattice::LatticeParam;
use crate::operators::{
    apply_magnetic_laplacian, curl, curl_star, current, div, inverse_neg_laplacian, project_divfree, GaugePotential,
};

/// Potential `V(t) = v0 - χ t + (g/2) t² + Σ_k higher[k] t^{k+3}/(k+3)!`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub chi: f64,
    pub g: f64,
    pub higher: Vec<f64>,
    pub v0: f64,
    pub b: f64,
    pub n: u32,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl ModelParams {
    /// Double well `(g/2)(t - χ/g)²`, so `V(0) = χ²/(2g)`.
    pub fn double_well(chi: f64, g: f64, b: f64) -> Self {
        ModelParams { chi, g, higher: Vec::new(), v0: chi * chi / (2.0 * g), b, n: 1 }
    }

    pub fn with_b(&self, b: f64) -> Self {
        ModelParams { b, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0) {
            return Err(invalid("chi = -V'(0) must be positive"));
        }
        if !(self.g > 0.0) {
            return Err(invalid("g = V''(0) must be positive"));
        }
        if !(self.b > 0.0) {
            return Err(invalid("b must be positive"));
        }
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        Ok(())
    }

    pub fn potential(&self, t: f64) -> f64 {
        let mut v = self.v0 - self.chi * t + 0.5 * self.g * t * t;
        for (k, c) in self.higher.iter().enumerate() {
            v += c * t.powi(k as i32 + 3) / factorial(k + 3);
        }
        v
    }

    /// `v = V'`.
    pub fn v(&self, t: f64) -> f64 {
        let mut v = -self.chi + self.g * t;
        for (k, c) in self.higher.iter().enumerate() {
            v += c * t.powi(k as i32 + 2) / factorial(k + 2);
        }
        v
    }

    /// `v_λ(t) = λ v(t/λ)`.
    pub fn v_lambda(&self, t: f64, lambda: f64) -> f64 {
        lambda * self.v(t / lambda)
    }

    /// Beyond-quartic part `V(t) - V(0) + χ t - (g/2) t²`.
    pub fn remainder(&self, t: f64) -> f64 {
        self.higher
            .iter()
            .enumerate()
            .map(|(k, c)| c * t.powi(k as i32 + 3) / factorial(k + 3))
            .sum()
    }

    pub fn lambda(&self, theta: f64) -> f64 {
        self.n as f64 / self.b + theta
    }
}

/// `u = (psi, α, a0, θ)`.
#[derive(Debug, Clone)]
pub struct GaugeState {
    pub psi: QpField,
    pub alpha: PerVecField,
    pub a0: PerScalarField,
    pub theta: f64,
}

impl GaugeState {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        GaugeState {
            psi: QpField::zeros(grid, grid.lattice.n),
            alpha: PerVecField::zeros(grid),
            a0: PerScalarField::zeros(grid),
            theta: 0.0,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.psi.grid
    }

    /// Global gauge rotation `psi -> e^{iδ} psi`.
    pub fn rotate(&self, delta: f64) -> Self {
        GaugeState { psi: self.psi.scale(Complex64::from_polar(1.0, delta)), ..self.clone() }
    }

    pub fn scale(&self, c: f64) -> Self {
        GaugeState {
            psi: self.psi.scale(Complex64::new(c, 0.0)),
            alpha: self.alpha.scale(c),
            a0: self.a0.with_values(self.a0.values.iter().map(|v| v * c).collect()),
            theta: self.theta * c,
        }
    }

    pub fn sub(&self, o: &GaugeState) -> Self {
        GaugeState {
            psi: self.psi.sub(&o.psi),
            alpha: self.alpha.sub(&o.alpha),
            a0: self.a0.with_values(self.a0.values.iter().zip(&o.a0.values).map(|(a, b)| a - b).collect()),
            theta: self.theta - o.theta,
        }
    }

    /// Real inner product `Re<psi, psi'> + <α, α'> + <a0, a0'> + θ θ'`.
    pub fn inner(&self, o: &GaugeState) -> f64 {
        let a0: f64 = self.a0.values.iter().zip(&o.a0.values).map(|(a, b)| a * b).sum::<f64>()
            / self.a0.values.len() as f64;
        self.psi.inner(&o.psi).re + self.alpha.inner(&o.alpha) + a0 + self.theta * o.theta
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn potential(&self) -> GaugePotential {
        GaugePotential::with_alpha(self.alpha.clone())
    }

    /// `ω = ½<|psi|²>`.
    pub fn omega(&self) -> f64 {
        0.5 * self.psi.modulus_sq().cell_average()
    }

    /// Random state with `α` divergence-free and `a0` mean-zero. `psi` mixes the
    /// first `levels` ladder states.
    pub fn random<R: Rng>(basis: &LadderBasis, levels: usize, scale: f64, rng: &mut R) -> Self {
        let g = &basis.grid;
        let coeffs: Vec<Complex64> = (0..=levels.min(basis.m_max()))
            .map(|m| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * (scale / (1.0 + m as f64)))
            .collect();
        let psi = basis.synthesize(&coeffs);
        let stream = random_periodic(g, 3, rng);
        let mut alpha = curl_star(&stream).scale(scale);
        let c = [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
        alpha.x.iter_mut().for_each(|v| *v += scale * c[0]);
        alpha.y.iter_mut().for_each(|v| *v += scale * c[1]);
        let a0 = random_periodic(g, 3, rng).mean_zero();
        let a0 = a0.with_values(a0.values.iter().map(|v| v * scale).collect());
        GaugeState { psi, alpha, a0, theta: scale * (rng.gen::<f64>() - 0.5) }
    }
}

/// Band-limited random periodic field with modes `|m1|, |m2| <= kmax`.
pub fn random_periodic<R: Rng>(grid: &Arc<SpectralGrid>, kmax: i64, rng: &mut R) -> PerScalarField {
    let mut modes = Vec::new();
    for a in -kmax..=kmax {
        for b in -kmax..=kmax {
            let decay = 1.0 / (1.0 + (a * a + b * b) as f64);
            modes.push((grid.dual.vector(a as f64, b as f64), decay * (rng.gen::<f64>() - 0.5), decay * (rng.gen::<f64>() - 0.5)));
        }
    }
    PerScalarField::from_fn(grid, |x| {
        modes.iter().map(|(k, c, s)| {
            let t = k[0] * x[0] + k[1] * x[1];
            c * t.cos() + s * t.sin()
        }).sum()
    })
}

/// `F_{nb}(u)`, component by component.
pub fn assemble_f(u: &GaugeState, model: &ModelParams) -> Result<GaugeState> {
    let lambda = model.lambda(u.theta);
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda = n/b + theta must be positive, got {lambda}")));
    }
    let a = u.potential();
    let rho = u.psi.modulus_sq();
    let mean = rho.cell_average();
    let omega = 0.5 * mean;
    let lap = apply_magnetic_laplacian(&u.psi, &a)?;
    let mut f1 = lap;
    for k in 0..f1.values.len() {
        let p = u.psi.values[k];
        f1.values[k] += p * (model.v_lambda(rho.values[k], lambda) - u.a0.values[k] - omega);
    }
    let j = current(&u.psi, &a)?;
    let f2 = curl_star(&u.a0).sub(&project_divfree(&j));
    let c = curl(&u.alpha);
    let f3 = c.with_values(c.values.iter().zip(&rho.values).map(|(cv, r)| cv - 0.5 * mean + 0.5 * r).collect());
    let f4 = -u.theta * model.b + 0.5 * mean;
    Ok(GaugeState { psi: f1, alpha: f2, a0: f3, theta: f4 })
}

/// Leading coefficients of the branch at `b = χ`.
#[derive(Debug, Clone)]
pub struct LeadingCoeffs {
    pub alpha1: PerVecField,
    /// Mean-zero part `½(|psi_0|² - <|psi_0|²>)`.
    pub a01: PerScalarField,
    /// The constant `½<|psi_0|²>` carried by `ω`.
    pub a01_mean: f64,
    pub theta1: f64,
    pub bprime: f64,
    pub lamprime: f64,
    pub beta: f64,
}

pub fn leading_coeffs(psi0: &Psi0, model: &ModelParams) -> Result<LeadingCoeffs> {
    if model.n != 1 || psi0.field.flux != 1 {
        return Err(invalid("leading coefficients are defined for n = 1"));
    }
    let rho = psi0.field.modulus_sq();
    let mean = rho.cell_average();
    let half = rho.with_values(rho.values.iter().map(|v| -0.5 * v).collect());
    let alpha1 = curl_star(&inverse_neg_laplacian(&half));
    let a01 = rho.with_values(rho.values.iter().map(|v| 0.5 * (v - mean)).collect());
    let beta = psi0.beta();
    let chi = model.chi;
    let n = model.n as f64;
    Ok(LeadingCoeffs {
        alpha1,
        a01,
        a01_mean: 0.5 * mean,
        theta1: mean / (2.0 * chi),
        bprime: -(chi / n) * (model.g - 1.0) * beta,
        lamprime: ((model.g - 1.0) * beta + 0.5) / chi,
        beta,
    })
}

#[derive(Debug, Clone)]
pub struct BranchConfig {
    pub n_grid: usize,
    pub m_max: usize,
    /// Largest ladder truncation the solver may grow to when the residual
    /// beyond `m_max` exceeds the tolerance.
    pub m_cap: usize,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub s_max: f64,
    pub step: f64,
    pub self_dual: bool,
}

impl Default for BranchConfig {
    fn default() -> Self {
        BranchConfig { n_grid: 64, m_max: 60, m_cap: 120, newton_tol: 1e-10, max_iter: 50, s_max: 0.3, step: 0.01, self_dual: false }
    }
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub s: f64,
    pub b: f64,
    pub state: GaugeState,
    /// `‖F_{n b_s}(u_s)‖` on the full grid.
    pub residual: f64,
    /// Norm of the reduced Galerkin residual at exit.
    pub galerkin_residual: f64,
    /// `‖div J(psi_s, α_s)‖`.
    pub div_j: f64,
    /// `‖(I - Π_M) F1‖`: the part of the residual beyond the ladder truncation.
    pub tail: f64,
    pub energy: f64,
    pub iterations: usize,
    /// Set when `s` exceeds the validated radius.
    pub beyond_radius: bool,
    coeffs: Vec<Complex64>,
}

impl BranchPoint {
    pub fn ladder_coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }
}

#[derive(Debug, Clone, Copy)]
enum Pin {
    /// `<psi_0, psi> = s`, `b` unknown.
    Amplitude(f64),
    /// `b` fixed, `s` unknown.
    Field(f64),
}

struct Reduced<'a> {
    basis: &'a LadderBasis,
    model: &'a ModelParams,
    pin: Pin,
}

#[derive(Clone)]
struct Unpacked {
    coeffs: Vec<Complex64>,
    b: f64,
}

impl<'a> Reduced<'a> {
    fn levels(&self) -> usize {
        self.basis.m_max()
    }

    fn unpack(&self, x: &[f64]) -> Unpacked {
        let m = self.levels();
        let last = x[2 * m];
        let (s, b) = match self.pin {
            Pin::Amplitude(s) => (s, last),
            Pin::Field(b) => (last, b),
        };
        let mut coeffs = vec![Complex64::new(s, 0.0)];
        for k in 0..m {
            coeffs.push(Complex64::new(x[2 * k], x[2 * k + 1]));
        }
        Unpacked { coeffs, b }
    }

    fn pack(&self, p: &Unpacked) -> Vec<f64> {
        let m = self.levels();
        let mut x = Vec::with_capacity(2 * m + 1);
        for c in &p.coeffs[1..] {
            x.push(c.re);
            x.push(c.im);
        }
        x.push(match self.pin {
            Pin::Amplitude(_) => p.b,
            Pin::Field(_) => p.coeffs[0].re,
        });
        x
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.unpack(x);
        let (u, mean_j) = eliminate(self.basis, &p.coeffs, p.b)?;
        let f = assemble_f(&u, &self.model.with_b(p.b))?;
        let mut r = Vec::with_capacity(2 * self.levels() + 4);
        for s in &self.basis.states {
            let c = s.inner(&f.psi);
            r.push(c.re);
            r.push(c.im);
        }
        r.push(mean_j[0]);
        r.push(mean_j[1]);
        Ok(r)
    }
}

/// State determined by `psi` and `b` through the linear equations, with
/// `<α> = 0`. Returns it with the mean current `<J>`.
fn eliminate(basis: &LadderBasis, coeffs: &[Complex64], b: f64) -> Result<(GaugeState, [f64; 2])> {
    let mut u = constrained_state(basis.synthesize(coeffs), [0.0, 0.0], b);
    let j = current(&u.psi, &u.potential())?;
    u.a0 = inverse_neg_laplacian(&curl(&j));
    let mean_j = j.cell_average();
    Ok((u, mean_j))
}

/// State with `α`, `θ` solving the third and fourth equations for the given
/// `psi` (so the constraint `curl α = θ b - ½|psi|²` holds) and `a0 = 0`.
pub fn constrained_state(psi: QpField, mean_alpha: [f64; 2], b: f64) -> GaugeState {
    let rho = psi.modulus_sq();
    let mean = rho.cell_average();
    let half = rho.with_values(rho.values.iter().map(|v| -0.5 * v).collect());
    let mut alpha = curl_star(&inverse_neg_laplacian(&half));
    alpha.x.iter_mut().for_each(|v| *v += mean_alpha[0]);
    alpha.y.iter_mut().for_each(|v| *v += mean_alpha[1]);
    let a0 = PerScalarField::zeros(&psi.grid);
    GaugeState { psi, alpha, a0, theta: mean / (2.0 * b) }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn jacobian(red: &Reduced, x: &[f64]) -> Result<DMatrix<f64>> {
    let cols: Vec<Vec<f64>> = (0..x.len())
        .into_par_iter()
        .map(|k| {
            let h = 1e-6 * (1.0 + x[k].abs());
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let rp = red.residual(&xp)?;
            let rm = red.residual(&xm)?;
            Ok(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        })
        .collect::<Result<_>>()?;
    let rows = cols[0].len();
    Ok(DMatrix::from_fn(rows, x.len(), |i, j| cols[j][i]))
}

fn gauss_newton(red: &Reduced, mut x: Vec<f64>, max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
    let mut r = red.residual(&x)?;
    let mut rn = norm(&r);
    let mut it = 0;
    while it < max_iter {
        if rn < 1e-15 {
            break;
        }
        it += 1;
        let jac = jacobian(red, &x)?;
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd
            .solve(&DVector::from_vec(r.clone()), 1e-13 * smax)
            .map_err(|e| invalid(format!("least-squares step failed: {e}")))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a - t * d).collect();
            if let Ok(rn_vec) = red.residual(&xn) {
                let nn = norm(&rn_vec);
                if nn < rn || nn < 1e-14 {
                    let stalled = nn > 0.5 * rn;
                    x = xn;
                    r = rn_vec;
                    rn = nn;
                    accepted = true;
                    if stalled && rn < 1e-12 {
                        return Ok((x, rn, it));
                    }
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            if rn < 1e-12 {
                break;
            }
            return Err(Error::BranchFailure { iterations: it, residual: rn });
        }
    }
    if rn > 1e-10 {
        return Err(Error::BranchFailure { iterations: it, residual: rn });
    }
    Ok((x, rn, it))
}

fn full_point(basis: &LadderBasis, model: &ModelParams, p: &Unpacked, gal: f64, it: usize, cfg: &BranchConfig) -> Result<BranchPoint> {
    let (state, _) = eliminate(basis, &p.coeffs, p.b)?;
    let m = model.with_b(p.b);
    let f = assemble_f(&state, &m)?;
    let residual = f.norm();
    let tail = basis.tail(&f.psi, basis.m_max());
    let j = current(&state.psi, &state.potential())?;
    let div_j = div(&j).norm();
    let energy = crate::energy::energy_per_cell(&state, &m)?;
    let s = p.coeffs[0].re;
    Ok(BranchPoint {
        s,
        b: p.b,
        state,
        residual,
        galerkin_residual: gal,
        div_j,
        tail,
        energy,
        iterations: it,
        beyond_radius: s > cfg.s_max,
        coeffs: p.coeffs.clone(),
    })
}

fn check_model(lattice: &LatticeParam, model: &ModelParams) -> Result<()> {
    if lattice.n != 1 || model.n != 1 {
        return Err(invalid("the branch solver requires n = 1"));
    }
    if !(model.chi > 0.0) || !(model.g > 0.0) {
        return Err(invalid("chi and g must be positive"));
    }
    Ok(())
}

fn solve_pinned(
    basis: &LadderBasis,
    model: &ModelParams,
    pin: Pin,
    guess: &Unpacked,
    cfg: &BranchConfig,
) -> Result<BranchPoint> {
    let red = Reduced { basis, model, pin };
    let x0 = red.pack(guess);
    let (x, gal, it) = gauss_newton(&red, x0, cfg.max_iter)?;
    let p = red.unpack(&x);
    full_point(basis, model, &p, gal, it, cfg)
}

/// Solve, enlarging the ladder by 20 levels at a time while the residual is
/// dominated by the part beyond the truncation.
fn solve_adaptive(
    base: &LadderBasis,
    grown: &mut Option<LadderBasis>,
    model: &ModelParams,
    pin: Pin,
    guess: Unpacked,
    cfg: &BranchConfig,
) -> Result<BranchPoint> {
    let mut guess = guess;
    loop {
        let basis = grown.as_ref().unwrap_or(base);
        guess.coeffs.resize(basis.m_max() + 1, Complex64::new(0.0, 0.0));
        let point = solve_pinned(basis, model, pin, &guess, cfg)?;
        if point.residual <= cfg.newton_tol {
            return Ok(point);
        }
        let m = basis.m_max();
        if m + 20 > cfg.m_cap || point.tail < 0.5 * point.residual {
            return Err(Error::BranchFailure { iterations: point.iterations, residual: point.residual });
        }
        *grown = Some(LadderBasis::new(&base.grid, m + 20)?);
        guess = Unpacked { coeffs: point.coeffs.clone(), b: point.b };
    }
}

fn trivial_point(basis: &LadderBasis, model: &ModelParams, cfg: &BranchConfig) -> Result<BranchPoint> {
    let p = Unpacked { coeffs: vec![Complex64::new(0.0, 0.0); basis.m_max() + 1], b: model.chi };
    full_point(basis, model, &p, 0.0, 0, cfg)
}

fn predictor(basis: &LadderBasis, model: &ModelParams, beta: f64, s: f64, prev: Option<&BranchPoint>) -> Unpacked {
    let m = basis.m_max();
    match prev {
        Some(p) if p.s > 0.0 => {
            let r = s / p.s;
            let mut coeffs: Vec<Complex64> = p.coeffs.iter().map(|c| c * r * r * r).collect();
            coeffs[0] = Complex64::new(s, 0.0);
            Unpacked { coeffs, b: model.chi + (p.b - model.chi) * r * r }
        }
        _ => {
            let mut coeffs = vec![Complex64::new(0.0, 0.0); m + 1];
            coeffs[0] = Complex64::new(s, 0.0);
            let bprime = -model.chi / model.n as f64 * (model.g - 1.0) * beta;
            Unpacked { coeffs, b: model.chi + bprime * s * s }
        }
    }
}

/// Newton continuation of the branch through the given amplitudes. `model.b`
/// is ignored; each point carries its own `b_s`.
pub fn solve_branch(basis: &LadderBasis, model: &ModelParams, s_values: &[f64], cfg: &BranchConfig) -> Result<Vec<BranchPoint>> {
    check_model(&basis.grid.lattice, model)?;
    if model.g == 1.0 && !cfg.self_dual {
        return Err(invalid("g = 1 is the self-dual point; pass the self-dual override to continue there"));
    }
    let beta = basis_beta(basis);
    let mut grown: Option<LadderBasis> = None;
    let mut out = Vec::with_capacity(s_values.len());
    let mut prev: Option<BranchPoint> = None;
    for &s in s_values {
        if !(s >= 0.0) {
            return Err(invalid(format!("amplitude must be nonnegative, got {s}")));
        }
        if s == 0.0 {
            out.push(trivial_point(basis, &model.with_b(model.chi), cfg)?);
            continue;
        }
        let start = prev.as_ref().map(|p| p.s).unwrap_or(0.0);
        let mut cur = start;
        let mut last = prev.clone();
        loop {
            let gap = s - cur;
            let next = if gap.abs() <= cfg.step + 1e-12 { s } else { cur + cfg.step * gap.signum() };
            let guess = predictor(basis, model, beta, next, last.as_ref());
            let p = solve_adaptive(basis, &mut grown, model, Pin::Amplitude(next), guess, cfg)?;
            cur = next;
            last = Some(p);
            if cur == s {
                break;
            }
        }
        let p = last.unwrap();
        out.push(p.clone());
        prev = Some(p);
    }
    Ok(out)
}

/// Re-solve at amplitude `s` from a supplied state (e.g. a rotated copy of a
/// converged point).
pub fn resolve_from(basis: &LadderBasis, model: &ModelParams, start: &BranchPoint, rotate: f64, cfg: &BranchConfig) -> Result<BranchPoint> {
    let ph = Complex64::from_polar(1.0, rotate);
    let mut coeffs: Vec<Complex64> = start.coeffs.iter().map(|c| c * ph).collect();
    coeffs[0] = Complex64::new(start.s, 0.0);
    let guess = Unpacked { coeffs, b: start.b };
    solve_adaptive(basis, &mut None, model, Pin::Amplitude(start.s), guess, cfg)
}

/// `<|psi_0|⁴>` from the stored ground state, which has `<|psi_0|²> = 1`.
pub fn basis_beta(basis: &LadderBasis) -> f64 {
    let rho = basis.states[0].modulus_sq();
    rho.values.iter().map(|v| v * v).sum::<f64>() / rho.values.len() as f64
}

/// `μ = (χ - b)/(g - 1)` after checking `sign(χ - b) = sign(g - 1)`.
pub fn check_sign_condition(model: &ModelParams, b: f64) -> Result<f64> {
    let (d, e) = (model.chi - b, model.g - 1.0);
    if e == 0.0 {
        return Err(invalid("g = 1: the amplitude is not determined by b at leading order"));
    }
    if d != 0.0 && d.signum() != e.signum() {
        return Err(Error::NoSolution { chi_minus_b: d, g_minus_one: e });
    }
    Ok(d / e)
}

/// Amplitude `s(b)` and the branch point at field `b`.
pub fn s_of_b(basis: &LadderBasis, model: &ModelParams, b: f64, cfg: &BranchConfig) -> Result<(f64, BranchPoint)> {
    check_model(&basis.grid.lattice, model)?;
    let mu = check_sign_condition(model, b)?;
    if mu == 0.0 {
        let p = trivial_point(basis, &model.with_b(model.chi), cfg)?;
        return Ok((0.0, p));
    }
    let beta = basis_beta(basis);
    let s0 = (mu / (model.chi * beta) * model.n as f64).sqrt();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); basis.m_max() + 1];
    coeffs[0] = Complex64::new(s0, 0.0);
    let guess = Unpacked { coeffs, b };
    let p = solve_adaptive(basis, &mut None, model, Pin::Field(b), guess, cfg)?;
    Ok((p.s, p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corrections {
    pub psi: f64,
    pub alpha: f64,
    pub a0: f64,
    pub theta: f64,
}

impl Corrections {
    /// The norms divided by `s³, s⁴, s⁴, s⁴`.
    pub fn scaled(&self, s: f64) -> Corrections {
        Corrections { psi: self.psi / s.powi(3), alpha: self.alpha / s.powi(4), a0: self.a0 / s.powi(4), theta: self.theta / s.powi(4) }
    }
}

/// `‖psi_s - s psi_0‖`, `‖α_s - s² α'‖`, `‖a0_s - s² a0'‖`, `|θ_s - s² θ'|`.
pub fn check_corrections(point: &BranchPoint, psi0: &QpField, lead: &LeadingCoeffs) -> Corrections {
    let s = point.s;
    let u = &point.state;
    let psi = u.psi.sub(&psi0.scale(Complex64::new(s, 0.0))).norm();
    let alpha = u.alpha.sub(&lead.alpha1.scale(s * s)).norm();
    let a0 = u.a0.values.iter().zip(&lead.a01.values).map(|(a, b)| (a - s * s * b).powi(2)).sum::<f64>();
    let a0 = (a0 / u.a0.values.len() as f64).sqrt();
    let theta = (u.theta - s * s * lead.theta1).abs();
    Corrections { psi, alpha, a0, theta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landau::build_psi0_on;
    use crate::lattice::make_lattice;
    use crate::operators::LinearizedOp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn setup(tau: Complex64, m: usize) -> LadderBasis {
        let l = make_lattice(tau, 1).unwrap();
        let grid = SpectralGrid::new(&l, 64).unwrap();
        LadderBasis::new(&grid, m).unwrap()
    }

    fn square() -> Complex64 {
        Complex64::new(0.0, 1.0)
    }

    #[test]
    fn potential_taylor_data() {
        let mut m = ModelParams::double_well(1.0, 2.0, 1.0);
        assert_eq!(m.v0, 0.25);
        assert!((m.potential(0.5)).abs() < 1e-15);
        assert_eq!(m.v(0.0), -1.0);
        m.higher = vec![6.0];
        assert!((m.potential(1.0) - (0.25 - 1.0 + 1.0 + 1.0)).abs() < 1e-15);
        assert!((m.v(1.0) - (-1.0 + 2.0 + 3.0)).abs() < 1e-15);
        assert!((m.remainder(1.0) - 1.0).abs() < 1e-15);
        assert!((m.v_lambda(0.3, 2.0) - 2.0 * m.v(0.15)).abs() < 1e-15);
        assert!(ModelParams::double_well(-1.0, 2.0, 1.0).validate().is_err());
        assert!(ModelParams::double_well(1.0, 0.0, 1.0).validate().is_err());
    }

    #[test]
    fn f_of_zero_vanishes() {
        let basis = setup(square(), 4);
        let u = GaugeState::zeros(&basis.grid);
        for b in [0.5, 1.0, 2.0] {
            let f = assemble_f(&u, &ModelParams::double_well(1.0, 2.0, b)).unwrap();
            assert_eq!(f.norm(), 0.0);
        }
    }

    #[test]
    fn nonpositive_lambda_is_rejected() {
        let basis = setup(square(), 4);
        let mut u = GaugeState::zeros(&basis.grid);
        u.theta = -2.0;
        assert!(matches!(assemble_f(&u, &ModelParams::double_well(1.0, 2.0, 1.0)), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn gauge_covariance_and_realness() {
        let basis = setup(Complex64::new(0.3, 1.1), 8);
        let model = ModelParams::double_well(1.0, 2.0, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..4 {
            let u = GaugeState::random(&basis, 8, 0.3, &mut rng);
            assert!(div(&u.alpha).norm() < 1e-12);
            assert!(u.a0.cell_average().abs() < 1e-14);
            let delta = rng.gen::<f64>() * 2.0 * PI;
            let lhs = assemble_f(&u.rotate(delta), &model).unwrap();
            let rhs = assemble_f(&u, &model).unwrap().rotate(delta);
            assert!(lhs.sub(&rhs).norm() < 1e-11);
            let f = assemble_f(&u, &model).unwrap();
            assert!(u.psi.inner(&f.psi).im.abs() <= 1e-10 * u.norm().powi(2));
        }
    }

    #[test]
    fn linearization_matches_difference_quotient() {
        let basis = setup(square(), 6);
        let model = ModelParams::double_well(1.0, 2.0, 0.95);
        let op = LinearizedOp::new(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = GaugeState::random(&basis, 6, 1.0, &mut rng);
        let h = 1e-6;
        let fp = assemble_f(&v.scale(h), &model).unwrap();
        let fm = assemble_f(&v.scale(-h), &model).unwrap();
        let fd = fp.sub(&fm).scale(0.5 / h);
        let a = op.apply(&v).unwrap();
        assert!(fd.sub(&a).norm() < 1e-7 * (1.0 + a.norm()));
    }

    #[test]
    fn leading_coefficient_values() {
        let basis = setup(square(), 0);
        let psi0 = build_psi0_on(&basis.grid).unwrap();
        let c = leading_coeffs(&psi0, &ModelParams::double_well(1.0, 2.0, 1.0)).unwrap();
        assert!((c.theta1 - 0.5).abs() < 1e-12);
        assert!((c.bprime + 1.180340599016).abs() < 1e-9);
        assert!((c.a01_mean - 0.5).abs() < 1e-12);
        assert!(div(&c.alpha1).norm() < 1e-12);
        assert!(c.alpha1.x.iter().sum::<f64>().abs() < 1e-10);
        let rho = psi0.field.modulus_sq();
        let target = rho.with_values(rho.values.iter().map(|v| 0.5 - 0.5 * v).collect());
        let diff: Vec<f64> = curl(&c.alpha1).values.iter().zip(&target.values).map(|(a, b)| a - b).collect();
        assert!(diff.iter().map(|d| d.abs()).fold(0.0, f64::max) < 1e-12);
        let sd = leading_coeffs(&psi0, &ModelParams::double_well(1.0, 1.0, 1.0)).unwrap();
        assert!(sd.bprime.abs() < 1e-12);
        assert!((sd.lamprime - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sign_condition() {
        let basis = setup(square(), 4);
        let m = ModelParams::double_well(1.0, 0.5, 1.0);
        let r = s_of_b(&basis, &m, 0.99, &BranchConfig::default());
        assert!(matches!(r, Err(Error::NoSolution { .. })));
        let (s, p) = s_of_b(&basis, &ModelParams::double_well(1.0, 2.0, 1.0), 1.0, &BranchConfig::default()).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(p.state.norm(), 0.0);
        assert!(check_sign_condition(&ModelParams::double_well(1.0, 1.0, 1.0), 0.9).is_err());
    }

    #[test]
    fn self_dual_needs_override() {
        let basis = setup(square(), 4);
        let m = ModelParams::double_well(1.0, 1.0, 1.0);
        assert!(solve_branch(&basis, &m, &[0.01], &BranchConfig::default()).is_err());
    }

    #[test]
    fn branch_points_and_gauge_orbit() {
        let basis = setup(square(), 60);
        let model = ModelParams::double_well(1.0, 2.0, 1.0);
        let cfg = BranchConfig::default();
        let pts = solve_branch(&basis, &model, &[0.0, 0.02], &cfg).unwrap();
        assert_eq!(pts[0].b, 1.0);
        assert_eq!(pts[0].residual, 0.0);
        let p = &pts[1];
        assert!(p.residual <= 1e-10 && p.div_j <= 1e-9);
        let c0 = basis.states[0].inner(&p.state.psi);
        assert!((c0.re - 0.02).abs() < 1e-14 && c0.im.abs() < 1e-14);
        let beta = basis_beta(&basis);
        assert!((p.b - (1.0 - beta * 4e-4)).abs() < 1e-6);
        let charge = -p.state.theta * p.b + 0.5 * p.state.psi.modulus_sq().cell_average();
        assert!(charge.abs() < 1e-10);
        let again = resolve_from(&basis, &model, p, 0.7, &cfg).unwrap();
        assert!((again.b - p.b).abs() < 1e-10);
        assert!(again.state.psi.sub(&p.state.psi).norm() < 1e-9);
        assert!(energy_below_normal(p, &model));
    }

    fn energy_below_normal(p: &BranchPoint, m: &ModelParams) -> bool {
        p.energy < m.v0
    }

    #[test]
    fn s_of_b_refines_seed() {
        let basis = setup(square(), 60);
        let model = ModelParams::double_well(1.0, 2.0, 1.0);
        let mu = 0.01;
        let (s, p) = s_of_b(&basis, &model, 1.0 - mu, &BranchConfig::default()).unwrap();
        assert!((p.b - (1.0 - mu)).abs() <= 1e-10);
        let seed = mu / basis_beta(&basis);
        assert!((s * s - seed).abs() < 3.0 * mu * mu);
    }
}
