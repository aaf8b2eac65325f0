//! Energy per cell, its representation under the constraint, the small-`μ`
//! asymptotics and the scan over lattice shapes.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bifurcation::{basis_beta, s_of_b, BranchConfig, GaugeState, ModelParams};
use crate::error::{invalid, Error, Result};
use crate::fields::SpectralGrid;
use crate::landau::{beta, LadderBasis};
use crate::lattice::make_lattice;
use crate::operators::{apply_dbar, covariant_gradient, curl};

pub const CONSTRAINT_TOL: f64 = 1e-8;

/// `max |curl α - θ b + ½|psi|²|`.
pub fn constraint_residual(u: &GaugeState, model: &ModelParams) -> f64 {
    let c = curl(&u.alpha);
    let rho = u.psi.modulus_sq();
    c.values
        .iter()
        .zip(&rho.values)
        .map(|(cv, r)| (cv - u.theta * model.b + 0.5 * r).abs())
        .fold(0.0, f64::max)
}

fn lambda_checked(u: &GaugeState, model: &ModelParams) -> Result<f64> {
    let r = constraint_residual(u, model);
    if r > CONSTRAINT_TOL {
        return Err(Error::ConstraintViolation(r));
    }
    let lambda = model.lambda(u.theta);
    if !(lambda > 0.0) {
        return Err(invalid(format!("lambda = n/b + theta must be positive, got {lambda}")));
    }
    Ok(lambda)
}

/// `<λ⁻² |∇_a psi|² + V(|psi|²/λ)>`.
pub fn energy_per_cell(u: &GaugeState, model: &ModelParams) -> Result<f64> {
    let lambda = lambda_checked(u, model)?;
    let [g1, g2] = covariant_gradient(&u.psi, &u.potential())?;
    let n = u.psi.values.len() as f64;
    let e: f64 = (0..u.psi.values.len())
        .map(|k| {
            let rho = u.psi.values[k].norm_sqr();
            (g1.values[k].norm_sqr() + g2.values[k].norm_sqr()) / (lambda * lambda) + model.potential(rho / lambda)
        })
        .sum();
    Ok(e / n)
}

/// `V(0) + λ⁻²<4|∂_a psi|² + ½(g-1)|psi|⁴> + <R(|psi|²/λ)> + 2(χ-b)(n/λ - b)`,
/// where `R` collects the Taylor terms of `V` beyond second order.
pub fn energy_representation(u: &GaugeState, model: &ModelParams) -> Result<f64> {
    let lambda = lambda_checked(u, model)?;
    let d = apply_dbar(&u.psi, &u.potential())?;
    let n = u.psi.values.len() as f64;
    let mut acc = 0.0;
    for k in 0..u.psi.values.len() {
        let rho = u.psi.values[k].norm_sqr();
        acc += (4.0 * d.values[k].norm_sqr() + 0.5 * (model.g - 1.0) * rho * rho) / (lambda * lambda)
            + model.remainder(rho / lambda);
    }
    let flux = model.n as f64;
    Ok(model.v0 + acc / n + 2.0 * (model.chi - model.b) * (flux / lambda - model.b))
}

/// Lower bound `V(0) + 2(χ-b)(n/λ - b)` of the representation at `g = 1`.
pub fn self_dual_bound(u: &GaugeState, model: &ModelParams) -> f64 {
    let lambda = model.lambda(u.theta);
    model.v0 + 2.0 * (model.chi - model.b) * (model.n as f64 / lambda - model.b)
}

/// `V(0) - ½(g-1)μ²/β(τ)`.
pub fn energy_asymptotic(tau: Complex64, mu: f64, model: &ModelParams) -> Result<f64> {
    Ok(asymptotic_from_beta(beta(tau)?, mu, model))
}

pub fn asymptotic_from_beta(beta: f64, mu: f64, model: &ModelParams) -> f64 {
    model.v0 - 0.5 * (model.g - 1.0) * mu * mu / beta
}

/// `μ = (χ - b)/(g - 1)` inverted: `b = χ - (g - 1)μ`.
pub fn field_for_mu(model: &ModelParams, mu: f64) -> f64 {
    model.chi - (model.g - 1.0) * mu
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub e_direct: f64,
    pub e_repr: f64,
    pub e_asymp: f64,
    pub mu: f64,
    pub tau_re: f64,
    pub tau_im: f64,
    pub s: f64,
    pub b: f64,
    pub residual: f64,
}

/// Solve the branch at field `b = χ - (g-1)μ` and evaluate all three energies.
pub fn branch_energy(tau: Complex64, mu: f64, model: &ModelParams, cfg: &BranchConfig) -> Result<EnergyReport> {
    let l = make_lattice(tau, 1)?;
    let grid = SpectralGrid::new(&l, cfg.n_grid)?;
    let basis = LadderBasis::new(&grid, cfg.m_max)?;
    branch_energy_on(&basis, tau, mu, model, cfg)
}

pub fn branch_energy_on(basis: &LadderBasis, tau: Complex64, mu: f64, model: &ModelParams, cfg: &BranchConfig) -> Result<EnergyReport> {
    let b = field_for_mu(model, mu);
    let (s, p) = s_of_b(basis, model, b, cfg)?;
    let m = model.with_b(p.b);
    let beta = basis_beta(basis);
    Ok(EnergyReport {
        e_direct: energy_per_cell(&p.state, &m)?,
        e_repr: energy_representation(&p.state, &m)?,
        e_asymp: asymptotic_from_beta(beta, mu, model),
        mu,
        tau_re: tau.re,
        tau_im: tau.im,
        s,
        b: p.b,
        residual: p.residual,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeConfig {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
    pub mu: f64,
    pub refine: bool,
    /// Stop refinement once the step is below this.
    pub refine_tol: f64,
    pub hessian_step: f64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig {
            re_min: -0.5,
            re_max: 0.5,
            im_min: 0.85,
            im_max: 1.3,
            n_re: 41,
            n_im: 41,
            mu: 0.01,
            refine: true,
            refine_tol: 1e-4,
            hessian_step: 0.01,
        }
    }
}

impl LandscapeConfig {
    pub fn nodes(&self) -> Vec<Complex64> {
        let step = |lo: f64, hi: f64, n: usize, k: usize| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
        let mut out = Vec::with_capacity(self.n_re * self.n_im);
        for j in 0..self.n_im {
            for i in 0..self.n_re {
                out.push(Complex64::new(step(self.re_min, self.re_max, self.n_re, i), step(self.im_min, self.im_max, self.n_im, j)));
            }
        }
        out
    }
}

/// Closed fundamental domain `|Re τ| <= ½, |τ| >= 1`, with a little slack for
/// grid nodes sitting on the boundary.
pub fn in_fundamental_domain(tau: Complex64) -> bool {
    tau.im > 0.0 && tau.re.abs() <= 0.5 + 1e-12 && tau.norm() >= 1.0 - 1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    Outside,
    Failed,
}

impl PointStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Outside => "outside",
            PointStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub tau_re: f64,
    pub tau_im: f64,
    pub beta: Option<f64>,
    pub e_asymp: Option<f64>,
    pub e_direct: Option<f64>,
    pub mu: f64,
    pub status: PointStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hessian {
    pub tau_re: f64,
    pub tau_im: f64,
    pub step: f64,
    /// Second derivatives of `E` in `(Re τ, Im τ)`.
    pub matrix: [[f64; 2]; 2],
    pub eigenvalues: [f64; 2],
}

impl Hessian {
    pub fn is_saddle(&self) -> bool {
        self.eigenvalues[0] * self.eigenvalues[1] < 0.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Landscape {
    pub rows: Vec<LandscapeRow>,
    pub grid_argmin: Complex64,
    pub refined_argmin: Option<Complex64>,
    pub refined_energy: Option<f64>,
    pub hessian_at_i: Hessian,
}

fn energy_at(tau: Complex64, mu: f64, model: &ModelParams) -> Result<f64> {
    energy_asymptotic(tau, mu, model)
}

/// Pick the lowest energy; equal values (to 1e-13) prefer `Re τ >= 0`, then the
/// smaller `Im τ`.
fn better(a: (Complex64, f64), b: (Complex64, f64)) -> bool {
    let tol = 1e-13 * (1.0 + a.1.abs());
    if (a.1 - b.1).abs() > tol {
        return a.1 < b.1;
    }
    let (ra, rb) = (a.0.re >= 0.0, b.0.re >= 0.0);
    if ra != rb {
        return ra;
    }
    a.0.im < b.0.im
}

/// Pattern search inside the fundamental domain, halving the step until it
/// drops below `tol`.
pub fn refine_minimum(start: Complex64, mu: f64, model: &ModelParams, tol: f64) -> Result<(Complex64, f64)> {
    let eval = |t: Complex64| -> Result<f64> {
        if in_fundamental_domain(t) { energy_at(t, mu, model) } else { Ok(f64::INFINITY) }
    };
    let mut x = start;
    let mut fx = eval(x)?;
    let mut h = 0.01;
    while h >= tol {
        let mut moved = false;
        for d in [Complex64::new(h, 0.0), Complex64::new(-h, 0.0), Complex64::new(0.0, h), Complex64::new(0.0, -h)] {
            let y = x + d;
            let fy = eval(y)?;
            if fy < fx {
                x = y;
                fx = fy;
                moved = true;
                break;
            }
        }
        if !moved {
            // The minimum may sit on the arc |τ| = 1; try sliding onto it.
            let proj = x / x.norm();
            let snapped = if proj.re.abs() <= 0.5 && (proj - x).norm() < h { Some(proj) } else { None };
            match snapped {
                Some(p) if eval(p)? < fx => {
                    x = p;
                    fx = eval(p)?;
                }
                _ => h *= 0.5,
            }
        }
    }
    Ok((x, fx))
}

pub fn hessian(tau: Complex64, mu: f64, model: &ModelParams, h: f64) -> Result<Hessian> {
    let f = |dr: f64, di: f64| energy_at(tau + Complex64::new(dr, di), mu, model);
    let f0 = f(0.0, 0.0)?;
    let rr = (f(h, 0.0)? - 2.0 * f0 + f(-h, 0.0)?) / (h * h);
    let ii = (f(0.0, h)? - 2.0 * f0 + f(0.0, -h)?) / (h * h);
    let ri = (f(h, h)? - f(h, -h)? - f(-h, h)? + f(-h, -h)?) / (4.0 * h * h);
    let tr = rr + ii;
    let det = rr * ii - ri * ri;
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    Ok(Hessian { tau_re: tau.re, tau_im: tau.im, step: h, matrix: [[rr, ri], [ri, ii]], eigenvalues: [0.5 * tr - disc, 0.5 * tr + disc] })
}

/// Asymptotic energy over the grid, argmin, optional refinement and the
/// Hessian at `τ = i`.
pub fn landscape_scan(cfg: &LandscapeConfig, model: &ModelParams) -> Result<Landscape> {
    if cfg.n_re == 0 || cfg.n_im == 0 || !(cfg.im_min > 0.0) {
        return Err(invalid("empty or invalid tau grid"));
    }
    let rows: Vec<LandscapeRow> = cfg
        .nodes()
        .into_par_iter()
        .map(|t| {
            let mut row = LandscapeRow { tau_re: t.re, tau_im: t.im, beta: None, e_asymp: None, e_direct: None, mu: cfg.mu, status: PointStatus::Outside };
            if !in_fundamental_domain(t) {
                return row;
            }
            match beta(t) {
                Ok(b) => {
                    row.beta = Some(b);
                    row.e_asymp = Some(asymptotic_from_beta(b, cfg.mu, model));
                    row.status = PointStatus::Ok;
                }
                Err(_) => row.status = PointStatus::Failed,
            }
            row
        })
        .collect();
    let mut best: Option<(Complex64, f64)> = None;
    for r in &rows {
        if let Some(e) = r.e_asymp {
            let cand = (Complex64::new(r.tau_re, r.tau_im), e);
            if best.map_or(true, |b| better(cand, b)) {
                best = Some(cand);
            }
        }
    }
    let (grid_argmin, _) = best.ok_or_else(|| invalid("no grid point inside the fundamental domain"))?;
    let (refined_argmin, refined_energy) = if cfg.refine {
        let (t, e) = refine_minimum(grid_argmin, cfg.mu, model, cfg.refine_tol)?;
        (Some(t), Some(e))
    } else {
        (None, None)
    };
    let hessian_at_i = hessian(Complex64::new(0.0, 1.0), cfg.mu, model, cfg.hessian_step)?;
    Ok(Landscape { rows, grid_argmin, refined_argmin, refined_energy, hessian_at_i })
}

/// Nodes of the scan grid inside the fundamental domain nearest to the given
/// points.
pub fn nearest_nodes(cfg: &LandscapeConfig, targets: &[Complex64]) -> Vec<usize> {
    let nodes = cfg.nodes();
    let inside: Vec<usize> = (0..nodes.len()).filter(|&k| in_fundamental_domain(nodes[k])).collect();
    targets
        .iter()
        .filter_map(|t| {
            inside.iter().copied().min_by(|&a, &b| (nodes[a] - t).norm().total_cmp(&(nodes[b] - t).norm()))
        })
        .collect()
}

/// Branch-backed energies at selected rows; failures are recorded in the row.
pub fn spot_check(rows: &mut [LandscapeRow], indices: &[usize], model: &ModelParams, bcfg: &BranchConfig) {
    let results: Vec<(usize, Result<EnergyReport>)> = indices
        .par_iter()
        .map(|&k| {
            let r = &rows[k];
            (k, branch_energy(Complex64::new(r.tau_re, r.tau_im), r.mu, model, bcfg))
        })
        .collect();
    for (k, res) in results {
        if rows[k].status != PointStatus::Ok {
            continue;
        }
        match res {
            Ok(rep) => rows[k].e_direct = Some(rep.e_direct),
            Err(_) => rows[k].status = PointStatus::Failed,
        }
    }
}

pub fn spot_targets() -> Vec<Complex64> {
    let mut out = Vec::new();
    for im in [1.0, 1.15, 1.3] {
        for re in [0.0, 0.25, 0.5] {
            out.push(Complex64::new(re, im));
        }
    }
    out
}
