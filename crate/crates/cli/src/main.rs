use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zhk_cli::config::{RunConfig, TauGrid};
use zhk_cli::{commands, CliError};

#[derive(Parser)]
#[command(name = "zhk", version, about = "Vortex lattices of the static Zhang-Hansen-Kivelson Chern-Simons equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Abrikosov parameter beta(tau) at one shape or over a grid.
    BetaScan(Common),
    /// Newton continuation of the vortex-lattice branch.
    Branch(BranchArgs),
    /// Asymptotic energy over lattice shapes with branch-backed spot checks.
    EnergyLandscape(LandscapeArgs),
    /// Run the structural invariant suite.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    tau_re: Option<f64>,
    #[arg(long)]
    tau_im: Option<f64>,
    /// Scan grid as RE_MIN,RE_MAX,N_RE,IM_MIN,IM_MAX,N_IM.
    #[arg(long, allow_hyphen_values = true)]
    tau_grid: Option<String>,
    /// Use the default scan grid over the fundamental domain.
    #[arg(long)]
    default_grid: bool,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    /// Higher Taylor coefficients of V, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    higher: Option<String>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long)]
    newton_tol: Option<f64>,
}

#[derive(Args)]
struct BranchArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated amplitudes.
    #[arg(long)]
    s_values: Option<String>,
    /// Solve at this applied field instead of a list of amplitudes.
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    self_dual: bool,
    /// Add correction-scaling diagnostics columns.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct LandscapeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    mu: Option<f64>,
    /// Skip the branch-backed spot checks.
    #[arg(long)]
    asymptotic_only: bool,
    #[arg(long)]
    no_refine: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    quick: bool,
    /// Replace the cocycle's n*pi term (negative test).
    #[arg(long, allow_hyphen_values = true)]
    cocycle_twist: Option<f64>,
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|e| CliError::Config(format!("bad number {p:?}: {e}"))))
        .collect()
}

fn resolve(name: &str, c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.command = name.to_string();
    if let Some(o) = &c.out {
        cfg.output = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.tau_re.is_some() || c.tau_im.is_some() {
        let t = cfg.tau.unwrap_or([0.0, 1.0]);
        cfg.tau = Some([c.tau_re.unwrap_or(t[0]), c.tau_im.unwrap_or(t[1])]);
    }
    if c.default_grid {
        cfg.tau_grid = Some(TauGrid::default());
    }
    if let Some(g) = &c.tau_grid {
        let v = parse_list(g)?;
        if v.len() != 6 || v[2] < 1.0 || v[5] < 1.0 || v[2].fract() != 0.0 || v[5].fract() != 0.0 {
            return Err(CliError::Config("--tau-grid expects RE_MIN,RE_MAX,N_RE,IM_MIN,IM_MAX,N_IM".into()));
        }
        cfg.tau_grid = Some(TauGrid { re_min: v[0], re_max: v[1], n_re: v[2] as usize, im_min: v[3], im_max: v[4], n_im: v[5] as usize });
    }
    if let Some(x) = c.chi {
        cfg.model.chi = x;
    }
    if let Some(x) = c.g {
        cfg.model.g = x;
    }
    if let Some(h) = &c.higher {
        cfg.model.higher = parse_list(h)?;
    }
    if let Some(x) = c.grid_n {
        cfg.numerics.grid_n = x;
    }
    if let Some(x) = c.m_max {
        cfg.numerics.m_max = x;
        cfg.numerics.m_cap = cfg.numerics.m_cap.max(x);
    }
    if let Some(x) = c.newton_tol {
        cfg.numerics.newton_tol = x;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BetaScan(c) => {
            let cfg = resolve("beta-scan", &c)?;
            let dir = commands::beta_scan(&cfg)?;
            println!("wrote {}", dir.join("beta_scan.csv").display());
        }
        Command::Branch(a) => {
            let mut cfg = resolve("branch", &a.common)?;
            if let Some(s) = &a.s_values {
                cfg.branch.s_values = parse_list(s)?;
            }
            if a.b.is_some() {
                cfg.model.b = a.b;
            }
            cfg.branch.self_dual |= a.self_dual;
            cfg.branch.verify |= a.verify;
            let dir = commands::branch(&cfg)?;
            println!("wrote {}", dir.join("branch.csv").display());
        }
        Command::EnergyLandscape(a) => {
            let mut cfg = resolve("energy-landscape", &a.common)?;
            if let Some(mu) = a.mu {
                cfg.landscape.mu = mu;
            }
            cfg.landscape.asymptotic_only |= a.asymptotic_only;
            if a.no_refine {
                cfg.landscape.refine = false;
            }
            let dir = commands::energy_landscape(&cfg)?;
            println!("wrote {}", dir.join("landscape.csv").display());
        }
        Command::Verify(a) => {
            let mut cfg = resolve("verify", &a.common)?;
            cfg.verify.quick |= a.quick;
            if a.cocycle_twist.is_some() {
                cfg.verify.cocycle_twist = a.cocycle_twist;
            }
            let report = commands::verify(&cfg)?;
            for c in &report.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {:<28} {:>12.3e} (tol {:.1e}) {}", c.name, c.value, c.tolerance, c.detail);
            }
            let failed: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(CliError::Failure(format!("invariants failed: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zhk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
