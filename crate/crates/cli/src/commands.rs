//! The four subcommands. Each writes its outputs and the resolved
//! configuration into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use zhk_core::bifurcation::{check_corrections, check_sign_condition, leading_coeffs, s_of_b, solve_branch, BranchPoint};
use zhk_core::energy::{landscape_scan, nearest_nodes, spot_check, spot_targets, Hessian, PointStatus};
use zhk_core::fields::SpectralGrid;
use zhk_core::landau::{beta_report, build_psi0_on, LadderBasis};
use zhk_core::lattice::make_lattice;
use zhk_core::verify::{run_verify, VerifyConfig, VerifyReport};

use crate::config::RunConfig;
use crate::CliError;

fn prepare(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let dir = cfg.output.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    write_text(&dir.join("config.toml"), &cfg.to_toml()?)?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct BetaRow {
    tau_re: f64,
    tau_im: f64,
    beta: f64,
    #[serde(rename = "grid_N")]
    grid_n: usize,
    residual: f64,
}

pub fn beta_scan(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = prepare(cfg)?;
    let mut taus: Vec<Complex64> = match &cfg.tau_grid {
        Some(_) => cfg.landscape_config().nodes(),
        None => vec![cfg.tau()],
    };
    if let Some(bad) = taus.iter().find(|t| !(t.im > 0.0)) {
        return Err(CliError::Model(format!("Im tau must be positive, got {bad}")));
    }
    taus.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    let n = cfg.numerics.grid_n;
    let rows: Vec<BetaRow> = taus
        .par_iter()
        .map(|&t| {
            let r = beta_report(t, n)?;
            Ok(BetaRow { tau_re: t.re, tau_im: t.im, beta: r.beta, grid_n: r.grid_n, residual: r.residual })
        })
        .collect::<Result<_, zhk_core::Error>>()?;
    write_csv(&dir.join("beta_scan.csv"), &rows)?;
    Ok(dir)
}

#[derive(Serialize)]
struct BranchRow {
    s: f64,
    b_s: f64,
    theta_s: f64,
    residual: f64,
    #[serde(rename = "divJ_norm")]
    div_j_norm: f64,
    energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi_corr_s3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_corr_s4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a0_corr_s4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_corr_s4: Option<f64>,
}

#[derive(Serialize)]
struct BranchManifest<'a> {
    tau: [f64; 2],
    model: &'a crate::config::ModelConfig,
    numerics: &'a crate::config::Numerics,
    mode: &'static str,
    points: Vec<PointSummary>,
    beyond_radius: Vec<f64>,
}

#[derive(Serialize)]
struct PointSummary {
    s: f64,
    b_s: f64,
    ladder_levels: usize,
    newton_iterations: usize,
    galerkin_residual: f64,
    tail: f64,
}

pub fn branch(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let model = cfg.model();
    model.validate()?;
    if let Some(b) = cfg.model.b {
        check_sign_condition(&model, b)?;
    }
    if model.g == 1.0 && !cfg.branch.self_dual {
        return Err(CliError::Model("g = 1 is the self-dual point; pass --self-dual to continue the branch there".into()));
    }
    let dir = prepare(cfg)?;
    let tau = cfg.tau();
    let l = make_lattice(tau, model.n)?;
    let grid = SpectralGrid::new(&l, cfg.numerics.grid_n)?;
    let basis = LadderBasis::new(&grid, cfg.numerics.m_max)?;
    let bcfg = cfg.branch_config();
    let (points, mode): (Vec<BranchPoint>, _) = match cfg.model.b {
        Some(b) => (vec![s_of_b(&basis, &model, b, &bcfg)?.1], "fixed-field"),
        None => (solve_branch(&basis, &model, &cfg.branch.s_values, &bcfg)?, "amplitude"),
    };
    let extra = if cfg.branch.verify {
        let psi0 = build_psi0_on(&grid)?;
        let lead = leading_coeffs(&psi0, &model)?;
        Some(points.iter().map(|p| check_corrections(p, &psi0.field, &lead).scaled(p.s)).collect::<Vec<_>>())
    } else {
        None
    };
    let rows: Vec<BranchRow> = points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let c = extra.as_ref().map(|e| e[k]);
            let live = c.filter(|_| p.s > 0.0);
            BranchRow {
                s: p.s,
                b_s: p.b,
                theta_s: p.state.theta,
                residual: p.residual,
                div_j_norm: p.div_j,
                energy: p.energy,
                psi_corr_s3: live.map(|c| c.psi),
                alpha_corr_s4: live.map(|c| c.alpha),
                a0_corr_s4: live.map(|c| c.a0),
                theta_corr_s4: live.map(|c| c.theta),
            }
        })
        .collect();
    if cfg.branch.verify && points.iter().any(|p| p.s == 0.0) {
        // Keep the column set fixed: a zero-amplitude row gets empty diagnostics.
        write_branch_csv_with_blanks(&dir.join("branch.csv"), &rows)?;
    } else {
        write_csv(&dir.join("branch.csv"), &rows)?;
    }
    let manifest = BranchManifest {
        tau: [tau.re, tau.im],
        model: &cfg.model,
        numerics: &cfg.numerics,
        mode,
        points: points
            .iter()
            .map(|p| PointSummary {
                s: p.s,
                b_s: p.b,
                ladder_levels: p.ladder_coefficients().len(),
                newton_iterations: p.iterations,
                galerkin_residual: p.galerkin_residual,
                tail: p.tail,
            })
            .collect(),
        beyond_radius: points.iter().filter(|p| p.beyond_radius).map(|p| p.s).collect(),
    };
    write_json(&dir.join("branch_manifest.json"), &manifest)?;
    Ok(dir)
}

fn write_branch_csv_with_blanks(path: &Path, rows: &[BranchRow]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record([
        "s", "b_s", "theta_s", "residual", "divJ_norm", "energy", "psi_corr_s3", "alpha_corr_s4", "a0_corr_s4", "theta_corr_s4",
    ])?;
    let num = |x: f64| format!("{x:?}");
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in rows {
        w.write_record([
            num(r.s),
            num(r.b_s),
            num(r.theta_s),
            num(r.residual),
            num(r.div_j_norm),
            num(r.energy),
            opt(r.psi_corr_s3),
            opt(r.alpha_corr_s4),
            opt(r.a0_corr_s4),
            opt(r.theta_corr_s4),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LandscapeCsvRow {
    tau_re: f64,
    tau_im: f64,
    beta: Option<f64>,
    #[serde(rename = "E_asymp")]
    e_asymp: Option<f64>,
    #[serde(rename = "E_direct")]
    e_direct: Option<f64>,
    mu: f64,
    status: &'static str,
}

#[derive(Serialize)]
struct LandscapeSummary {
    g: f64,
    mu: f64,
    grid_argmin: [f64; 2],
    refined_argmin: Option<[f64; 2]>,
    refined_energy: Option<f64>,
    hessian_at_i: Hessian,
    hessian_at_i_is_saddle: bool,
    spot_checks: Vec<SpotCheck>,
    failed_points: usize,
}

#[derive(Serialize)]
struct SpotCheck {
    tau: [f64; 2],
    e_asymp: Option<f64>,
    e_direct: Option<f64>,
    status: &'static str,
}

pub fn energy_landscape(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let model = cfg.model();
    model.validate()?;
    let dir = prepare(cfg)?;
    let lcfg = cfg.landscape_config();
    let mut scan = landscape_scan(&lcfg, &model)?;
    let mut spots = Vec::new();
    if !cfg.landscape.asymptotic_only {
        let idx = nearest_nodes(&lcfg, &spot_targets());
        spot_check(&mut scan.rows, &idx, &model, &cfg.branch_config());
        for k in idx {
            let r = &scan.rows[k];
            spots.push(SpotCheck { tau: [r.tau_re, r.tau_im], e_asymp: r.e_asymp, e_direct: r.e_direct, status: r.status.as_str() });
        }
    }
    let rows: Vec<LandscapeCsvRow> = scan
        .rows
        .iter()
        .map(|r| LandscapeCsvRow {
            tau_re: r.tau_re,
            tau_im: r.tau_im,
            beta: r.beta,
            e_asymp: r.e_asymp,
            e_direct: r.e_direct,
            mu: r.mu,
            status: r.status.as_str(),
        })
        .collect();
    write_csv(&dir.join("landscape.csv"), &rows)?;
    let summary = LandscapeSummary {
        g: model.g,
        mu: lcfg.mu,
        grid_argmin: [scan.grid_argmin.re, scan.grid_argmin.im],
        refined_argmin: scan.refined_argmin.map(|t| [t.re, t.im]),
        refined_energy: scan.refined_energy,
        hessian_at_i_is_saddle: scan.hessian_at_i.is_saddle(),
        hessian_at_i: scan.hessian_at_i.clone(),
        spot_checks: spots,
        failed_points: scan.rows.iter().filter(|r| r.status == PointStatus::Failed).count(),
    };
    write_json(&dir.join("landscape_summary.json"), &summary)?;
    Ok(dir)
}

pub fn verify(cfg: &RunConfig) -> Result<VerifyReport, CliError> {
    let dir = prepare(cfg)?;
    let vcfg = VerifyConfig {
        quick: cfg.verify.quick,
        seed: cfg.seed,
        n_grid: cfg.numerics.grid_n,
        cocycle_twist: cfg.verify.cocycle_twist,
    };
    let report = run_verify(&vcfg)?;
    write_json(&dir.join("verify_report.json"), &report)?;
    Ok(report)
}
