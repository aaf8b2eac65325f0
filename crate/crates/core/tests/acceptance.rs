//! One test per acceptance criterion. Each prints a single PASS/FAIL line.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zhk_core::bifurcation::{
    check_corrections, constrained_state, leading_coeffs, solve_branch, BranchConfig, GaugeState, ModelParams,
};
use zhk_core::energy::{
    branch_energy_on, energy_per_cell, landscape_scan, nearest_nodes, self_dual_bound, spot_check, spot_targets,
    LandscapeConfig, PointStatus,
};
use zhk_core::fields::SpectralGrid;
use zhk_core::landau::{beta_modular_check, build_psi0_on, fd_oracle, LadderBasis};
use zhk_core::lattice::make_lattice;
use zhk_core::verify::{run_verify, VerifyConfig};

fn hex() -> Complex64 {
    Complex64::from_polar(1.0, PI / 3.0)
}

fn square() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

fn report(n: u32, title: &str, failures: &[String], detail: &str) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("criterion {n} [{verdict}] {title}: {detail}");
    for f in failures {
        println!("    {f}");
    }
    assert!(failures.is_empty(), "criterion {n} failed: {failures:?}");
}

fn need(failures: &mut Vec<String>, ok: bool, what: String) {
    if !ok {
        failures.push(what);
    }
}

fn basis_for(tau: Complex64, m: usize) -> LadderBasis {
    let l = make_lattice(tau, 1).unwrap();
    LadderBasis::new(&SpectralGrid::new(&l, 64).unwrap(), m).unwrap()
}

/// Least-squares slope of `log y` against `log x`.
fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn criterion_1_ground_state() {
    let mut fails = Vec::new();
    let mut worst = (0.0_f64, 0.0_f64, 1.0_f64, 0.0_f64);
    for tau in [square(), hex(), Complex64::new(0.3, 1.1)] {
        let t0 = Instant::now();
        let l = make_lattice(tau, 1).unwrap();
        let grid = SpectralGrid::new(&l, 64).unwrap();
        let p = build_psi0_on(&grid).unwrap();
        let dbar = p.dbar_residual().unwrap();
        let qp = p.qp_residual(&l.cocycle()).unwrap();
        let o = fd_oracle(tau, 64).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        need(&mut fails, dbar <= 1e-10, format!("tau {tau}: dbar residual {dbar:.2e}"));
        need(&mut fails, qp <= 1e-10, format!("tau {tau}: quasi-periodicity residual {qp:.2e}"));
        need(&mut fails, o.overlap >= 1.0 - 1e-6, format!("tau {tau}: overlap {}", o.overlap));
        need(&mut fails, dt < 10.0, format!("tau {tau}: {dt:.1}s"));
        worst = (worst.0.max(dbar), worst.1.max(qp), worst.2.min(o.overlap), worst.3.max(dt));
    }
    let detail = format!(
        "max dbar {:.1e}, max qp {:.1e}, min overlap 1-{:.1e}, max time {:.2}s",
        worst.0, worst.1, 1.0 - worst.2, worst.3
    );
    report(1, "psi_0 construction", &fails, &detail);
}

#[test]
fn criterion_2_beta() {
    let mut fails = Vec::new();
    let h = fd_oracle(hex(), 64).unwrap();
    let s = fd_oracle(square(), 64).unwrap();
    for (name, o) in [("hex", h), ("square", s)] {
        let d = (o.beta_theta - o.beta_fd).abs();
        need(&mut fails, d <= 1e-6, format!("{name}: oracles differ by {d:.2e}"));
        need(&mut fails, o.beta_theta >= 1.0 && o.beta_fd >= 1.0, format!("{name}: beta below 1"));
    }
    need(&mut fails, h.beta_theta < s.beta_theta, "beta(hex) not below beta(i)".into());
    let mut modular = 0.0_f64;
    for tau in [square(), hex()] {
        let r = beta_modular_check(tau).unwrap();
        modular = modular.max(r.shift).max(r.inversion);
    }
    need(&mut fails, modular <= 1e-7, format!("modular residual {modular:.2e}"));
    let detail = format!(
        "beta(hex) = {:.10} / {:.10}, beta(i) = {:.10} / {:.10}, modular {:.1e}",
        h.beta_theta, h.beta_fd, s.beta_theta, s.beta_fd, modular
    );
    report(2, "beta values and ordering", &fails, &detail);
}

#[test]
fn criterion_3_bifurcation() {
    let mut fails = Vec::new();
    let model = ModelParams::double_well(1.0, 2.0, 1.0);
    let s_list = [0.02, 0.04, 0.08];
    let mut detail = String::new();
    for (name, tau) in [("i", square()), ("hex", hex())] {
        let t0 = Instant::now();
        let basis = basis_for(tau, 60);
        let psi0 = build_psi0_on(&basis.grid).unwrap();
        let lead = leading_coeffs(&psi0, &model).unwrap();
        let pts = solve_branch(&basis, &model, &s_list, &BranchConfig::default()).unwrap();
        let dev: Vec<f64> = pts.iter().map(|p| p.b - (model.chi + lead.bprime * p.s * p.s)).collect();
        let slope = log_slope(&s_list, &dev);
        let c = dev.iter().zip(&s_list).map(|(d, s)| d.abs() / s.powi(4)).fold(0.0, f64::max);
        need(&mut fails, (slope - 4.0).abs() <= 0.3, format!("tau {name}: exponent {slope:.3}"));
        for p in &pts {
            need(&mut fails, p.residual <= 1e-10, format!("tau {name}, s {}: residual {:.2e}", p.s, p.residual));
            need(&mut fails, p.div_j <= 1e-9, format!("tau {name}, s {}: div J {:.2e}", p.s, p.div_j));
        }
        let corr: Vec<_> = pts.iter().map(|p| check_corrections(p, &psi0.field, &lead)).collect();
        let mut ratios = Vec::new();
        for w in corr.windows(2) {
            let r = [w[1].psi / w[0].psi, w[1].alpha / w[0].alpha, w[1].a0 / w[0].a0, w[1].theta / w[0].theta];
            for (k, (got, want)) in r.iter().zip([8.0, 16.0, 16.0, 16.0]).enumerate() {
                let q = got / want;
                need(&mut fails, (1.0 / 1.5..=1.5).contains(&q), format!("tau {name}: correction {k} ratio {got:.3} vs {want}"));
            }
            ratios.push(r);
        }
        let dt = t0.elapsed().as_secs_f64();
        need(&mut fails, dt < 120.0, format!("tau {name}: {dt:.1}s"));
        detail += &format!(
            "[tau {name}: slope {slope:.3}, C {c:.3}, ratios {:.2}/{:.2}/{:.2}/{:.2}, {dt:.1}s] ",
            ratios[0][0], ratios[0][1], ratios[0][2], ratios[0][3]
        );
    }
    report(3, "bifurcation coefficients", &fails, detail.trim_end());
}

#[test]
fn criterion_4_energy_asymptotics() {
    let mut fails = Vec::new();
    let model = ModelParams::double_well(1.0, 2.0, 1.0);
    let cfg = BranchConfig::default();
    let mut detail = String::new();
    for (name, tau) in [("i", square()), ("hex", hex())] {
        let basis = basis_for(tau, 60);
        let mut errs = Vec::new();
        for mu in [0.02, 0.01, 0.005] {
            let r = branch_energy_on(&basis, tau, mu, &model, &cfg).unwrap();
            need(&mut fails, r.e_direct < model.v0, format!("tau {name}, mu {mu}: energy {} not below V(0)", r.e_direct));
            need(&mut fails, r.residual <= 1e-10, format!("tau {name}, mu {mu}: residual {:.2e}", r.residual));
            errs.push((r.e_direct - r.e_asymp).abs());
        }
        let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
        for q in ratios {
            need(&mut fails, (4.0..=16.0).contains(&q), format!("tau {name}: halving ratio {q:.3}"));
        }
        let c: Vec<f64> = errs.iter().zip([0.02f64, 0.01, 0.005]).map(|(e, m)| e / m.powi(3)).collect();
        detail += &format!("[tau {name}: err/mu^3 {:.4}/{:.4}/{:.4}, ratios {:.2}/{:.2}] ", c[0], c[1], c[2], ratios[0], ratios[1]);
    }
    report(4, "energy asymptotic", &fails, detail.trim_end());
}

#[test]
fn criterion_5_hexagonal_minimizer() {
    let t0 = Instant::now();
    let mut fails = Vec::new();
    let model = ModelParams::double_well(1.0, 2.0, 1.0);
    let cfg = LandscapeConfig::default();
    let mut scan = landscape_scan(&cfg, &model).unwrap();
    let grid_d = (scan.grid_argmin - hex()).norm();
    let refined = scan.refined_argmin.unwrap();
    let ref_d = (refined - hex()).norm();
    need(&mut fails, grid_d <= 0.02, format!("grid argmin {} at distance {grid_d:.4}", scan.grid_argmin));
    need(&mut fails, ref_d <= 0.02, format!("refined argmin {refined} at distance {ref_d:.4}"));
    let h = &scan.hessian_at_i;
    need(&mut fails, h.is_saddle(), format!("Hessian at i eigenvalues {:?}", h.eigenvalues));
    let idx = nearest_nodes(&cfg, &spot_targets());
    spot_check(&mut scan.rows, &idx, &model, &BranchConfig::default());
    let mut worst = 0.0_f64;
    for &k in &idx {
        let r = &scan.rows[k];
        match (r.status, r.e_direct, r.e_asymp) {
            (PointStatus::Ok, Some(d), Some(a)) => {
                worst = worst.max((d - a).abs());
                need(&mut fails, (d - a).abs() <= cfg.mu.powi(3), format!("spot ({}, {}): |E_direct - E_asymp| = {:.2e}", r.tau_re, r.tau_im, (d - a).abs()));
            }
            _ => fails.push(format!("spot ({}, {}) failed", r.tau_re, r.tau_im)),
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    need(&mut fails, dt < 600.0, format!("{dt:.1}s"));
    let detail = format!(
        "grid argmin {:.4}+{:.4}i, refined {:.5}+{:.5}i (distance {ref_d:.1e}), Hessian eigenvalues at i {:.3e}/{:.3e}, 9 spot checks max |dE| {worst:.2e}, {dt:.1}s",
        scan.grid_argmin.re, scan.grid_argmin.im, refined.re, refined.im, h.eigenvalues[0], h.eigenvalues[1]
    );
    report(5, "hexagonal minimizer", &fails, &detail);
}

#[test]
fn criterion_6_invariant_suite() {
    let t0 = Instant::now();
    let r = run_verify(&VerifyConfig::default()).unwrap();
    let mut fails: Vec<String> = r
        .failures()
        .iter()
        .map(|c| format!("{}: {} > {} ({})", c.name, c.value, c.tolerance, c.detail))
        .collect();
    let dt = t0.elapsed().as_secs_f64();
    need(&mut fails, dt < 300.0, format!("{dt:.1}s"));
    let detail = format!("{} checks, {:.1}s", r.checks.len(), dt);
    report(6, "structural invariant suite", &fails, &detail);
}

#[test]
fn criterion_7_self_dual() {
    let mut fails = Vec::new();
    let basis = basis_for(hex(), 12);
    let model = ModelParams::double_well(1.0, 1.0, 0.85);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let psi = GaugeState::random(&basis, 12, 0.8, &mut rng).psi;
        let u = constrained_state(psi, [0.0, 0.0], model.b);
        worst = worst.max(self_dual_bound(&u, &model) - energy_per_cell(&u, &model).unwrap());
    }
    need(&mut fails, worst <= 1e-9, format!("bound exceeded by {worst:.2e}"));
    let psi0 = build_psi0_on(&basis.grid).unwrap();
    let lead = leading_coeffs(&psi0, &model).unwrap();
    need(&mut fails, lead.bprime.abs() <= 1e-12, format!("b' = {:.2e}", lead.bprime));
    let detail = format!("max(bound - E) over 100 states {worst:.2e}, b' = {:.1e}", lead.bprime);
    report(7, "self-dual regime", &fails, &detail);
}
