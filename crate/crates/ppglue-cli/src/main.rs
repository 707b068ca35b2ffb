// `!(x > 0.0)` guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ppglue::config::SweepConfig;
use ppglue::grid::{richardson_order, RadialGrid};
use ppglue::lichnerowicz::{
    injectivity_spectrum, kid_residual, picard_solve, KidCandidate, LichnerowiczProblem, SpectrumBc, WarpedSlice,
};
use ppglue::model::{AeProfile, RadialProfile};
use ppglue::modes::{kernel_suite, repair_momentum, RepairOptions};
use ppglue::radial::{divergence, CmcExtrinsicCurvature, RadialMetric, RadialVectorField, TraceFreeRadialTensor};
use ppglue::report::{emit_report, parse_csv, write_plots};
use ppglue::sweep::{case_setup, fit_catalogue, run_sweep, CaseResult, CaseStatus, MAX_PICARD_ITER};
use ppglue::{Error, ErrorClass};

// stdout may be a closed pipe (`| head`); that is not an error
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "ppglue", version, about = "Point-particle gluing of radial initial data")]
struct Cli {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(subcommand)]
    cmd: Command,
}

/// Config file plus one override flag per key.
#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML key-value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long = "C", global = true, value_name = "REAL")]
    c: Option<String>,
    /// comma-separated, strictly decreasing; `2^-10` style accepted
    #[arg(long, global = true, value_name = "LIST", allow_hyphen_values = true)]
    epsilons: Option<String>,
    #[arg(long, global = true, value_name = "REAL")]
    nu: Option<String>,
    #[arg(long = "grid.n", global = true, value_name = "INT")]
    grid_n: Option<String>,
    /// inner radius in units of epsilon
    #[arg(long = "grid.rmin", global = true, value_name = "REAL")]
    grid_rmin: Option<String>,
    #[arg(long = "grid.rmax", global = true, value_name = "REAL")]
    grid_rmax: Option<String>,
    #[arg(long = "tol.linear", global = true, value_name = "REAL")]
    tol_linear: Option<String>,
    #[arg(long = "tol.picard", global = true, value_name = "REAL")]
    tol_picard: Option<String>,
    #[arg(long = "M", global = true, value_name = "REAL")]
    mass: Option<String>,
    #[arg(long = "Lambda", global = true, value_name = "REAL", allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, global = true, value_name = "REAL", allow_hyphen_values = true)]
    tau: Option<String>,
    #[arg(long = "mu0.c", global = true, value_name = "REAL")]
    mu0_c: Option<String>,
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<String>,
    #[arg(long, global = true, value_name = "BOOL")]
    parallel: Option<String>,
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<SweepConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => SweepConfig::load(p)?,
            None => SweepConfig::default(),
        };
        let pairs = [
            ("C", &self.c),
            ("epsilons", &self.epsilons),
            ("nu", &self.nu),
            ("grid.n", &self.grid_n),
            ("grid.rmin", &self.grid_rmin),
            ("grid.rmax", &self.grid_rmax),
            ("tol.linear", &self.tol_linear),
            ("tol.picard", &self.tol_picard),
            ("M", &self.mass),
            ("Lambda", &self.lambda),
            ("tau", &self.tau),
            ("mu0.c", &self.mu0_c),
            ("out_dir", &self.out_dir),
            ("parallel", &self.parallel),
            ("seed", &self.seed),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the AE profile (M, mu0.c) into an `ae-profile v1` file
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        rho_min: f64,
        #[arg(long, default_value_t = 1e4)]
        rho_max: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
    /// Build the glued data for one epsilon and write r, A, m, w
    Glue(CaseArgs),
    /// Glue and repair the momentum constraint
    Repair(CaseArgs),
    /// Glue, repair and solve the Lichnerowicz equation
    Solve(CaseArgs),
    /// Flat-space kernel catalogue check on two dyadic grids over [1, 3]
    VerifyKernel {
        /// coarse step is 2^-k
        #[arg(long, default_value_t = 8)]
        k: i32,
    },
    /// Radial injectivity spectrum on a model slice
    Spectrum {
        #[arg(long, value_enum, default_value_t = SpectrumCase::Sphere)]
        case: SpectrumCase,
        #[arg(long, default_value_t = 400)]
        cells: usize,
    },
    /// KID residuals of a static lapse, with refinement order
    Kid {
        #[arg(long, value_enum, default_value_t = KidCase::Sphere)]
        case: KidCase,
        #[arg(long, default_value_t = 513)]
        n: usize,
    },
    /// Run the epsilon sweep and write results.csv, manifest.json, plots
    Sweep {
        /// exit with 3 unless every acceptance check passes
        #[arg(long)]
        check: bool,
    },
    /// Refit and replot an existing results.csv in out_dir
    Report,
}

#[derive(Args)]
struct CaseArgs {
    /// defaults to the first configured epsilon
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    /// tabulated AE profile replacing the built-in one
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpectrumCase {
    Sphere,
    Hyperbolic,
    Flat,
}

#[derive(Clone, Copy, ValueEnum)]
enum KidCase {
    Sphere,
    Schwarzschild,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.class() == ErrorClass::Numerical => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn case_eps(cfg: &SweepConfig, a: &CaseArgs) -> anyhow::Result<f64> {
    Ok(match &a.epsilon {
        Some(s) => ppglue::config::parse_real(s)?,
        None => cfg.epsilons[0],
    })
}

fn load_profile(a: &CaseArgs) -> anyhow::Result<Option<AeProfile>> {
    Ok(match &a.profile {
        Some(p) => Some(AeProfile::load(p)?),
        None => None,
    })
}

fn write_columns(path: &Path, header: &str, cols: &[&[f64]]) -> anyhow::Result<()> {
    let mut s = String::from(header);
    s.push('\n');
    for i in 0..cols[0].len() {
        let row: Vec<String> = cols.iter().map(|c| format!("{:.17e}", c[i])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn out_dir(cfg: &SweepConfig) -> anyhow::Result<PathBuf> {
    let d = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&d).map_err(|e| Error::Io { path: d.display().to_string(), msg: e.to_string() })?;
    Ok(d)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let cfg = cli.cfg.resolve()?;
    match cli.cmd {
        Command::Generate { out, rho_min, rho_max, points } => {
            let ae = AeProfile::Analytic { mass: cfg.mass, c: cfg.mu0.c };
            let (floor, _) = ae.range();
            if !(rho_min > floor) {
                return Err(Error::AeRangeExceeded { rho: rho_min, lo: floor, hi: f64::INFINITY }.into());
            }
            let grid = RadialGrid::log_uniform(rho_min, rho_max, points)?;
            ae.write(&out, &grid)?;
            say!("wrote {} ({points} rows, rho in [{rho_min}, {rho_max}])", out.display());
        }
        Command::Glue(a) => {
            let g = case_setup(&cfg, case_eps(&cfg, &a)?, load_profile(&a)?.as_ref())?;
            let path = out_dir(&cfg)?.join("glued.csv");
            write_columns(&path, "r,A,m,w", &[g.grid.nodes(), &g.a, &g.m, &g.weight()])?;
            let div = divergence(&g.mu(), &g.grid);
            let support: Vec<f64> = g.grid.nodes().iter().zip(&div).filter(|(_, d)| d.abs() > 0.0).map(|(r, _)| *r).collect();
            say!("epsilon {:e}: {} nodes on [{:.4e}, {:.4e}]", g.cfg.epsilon, g.grid.len(), g.grid.r_min(), g.grid.r_max());
            if let (Some(lo), Some(hi)) = (support.first(), support.last()) {
                say!("momentum violation on [{lo:.4e}, {hi:.4e}], sup {:.4e}", div.iter().fold(0.0f64, |a, b| a.max(b.abs())));
            }
            say!("wrote {}", path.display());
        }
        Command::Repair(a) => {
            let g = case_setup(&cfg, case_eps(&cfg, &a)?, load_profile(&a)?.as_ref())?;
            let (mt, x, rep) = repair_momentum(&g, RepairOptions { tol: cfg.tol.linear })?;
            let path = out_dir(&cfg)?.join("repair.csv");
            write_columns(&path, "r,u,m,m_tilde", &[g.grid.nodes(), &x.u, &g.m, &mt.m])?;
            say!("{}", serde_json::to_string_pretty(&rep)?);
        }
        Command::Solve(a) => {
            let g = case_setup(&cfg, case_eps(&cfg, &a)?, load_profile(&a)?.as_ref())?;
            let (mt, _, _) = repair_momentum(&g, RepairOptions { tol: cfg.tol.linear })?;
            let p = LichnerowiczProblem::new(g.grid.clone(), g.metric(), mt, cfg.tau, cfg.lambda)?.with_weight(g.weight());
            let (phi, rep) = picard_solve(&p, cfg.nu, cfg.tol.picard, MAX_PICARD_ITER)?;
            let path = out_dir(&cfg)?.join("solution.csv");
            write_columns(&path, "r,phi", &[g.grid.nodes(), &phi])?;
            say!("{}", serde_json::to_string_pretty(&rep)?);
        }
        Command::VerifyKernel { k } => {
            let h = 2f64.powi(-k);
            let coarse = RadialGrid::uniform_step(1.0, h, (2.0 / h) as usize + 1)?;
            let fine = RadialGrid::uniform_step(1.0, h / 2.0, (4.0 / h) as usize + 1)?;
            let checks = kernel_suite(&coarse, &fine, cfg.parallel)?;
            let mut ok = true;
            for c in &checks {
                ok &= c.pass;
                say!(
                    "{:<5} {:?} {:?} l={} residual {:.3e} -> {:.3e} order {:.3}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.tag.growth,
                    c.tag.family,
                    c.l,
                    c.residual_h,
                    c.residual_h2,
                    c.order
                );
            }
            if !ok {
                return Err(anyhow!(Error::Eigen("kernel catalogue check failed".into())).context("verify-kernel"));
            }
        }
        Command::Spectrum { case, cells } => {
            let (sin, sinh, lin) = (|s: f64| s.sin(), |s: f64| s.sinh(), |s: f64| s);
            let (zero, three) = (|_: f64| 0.0, |_: f64| 3.0);
            let sl = match case {
                SpectrumCase::Sphere => WarpedSlice {
                    s0: 0.0,
                    s1: std::f64::consts::PI,
                    warp: &sin,
                    k_norm2: &zero,
                    lambda: 3.0,
                    bc: [SpectrumBc::PoleRegular; 2],
                },
                SpectrumCase::Hyperbolic => {
                    WarpedSlice { s0: 0.5, s1: 2.0, warp: &sinh, k_norm2: &three, lambda: 0.0, bc: [SpectrumBc::Neumann; 2] }
                }
                SpectrumCase::Flat => {
                    WarpedSlice { s0: 1.0, s1: 2.0, warp: &lin, k_norm2: &zero, lambda: 0.0, bc: [SpectrumBc::Dirichlet; 2] }
                }
            };
            let rep = injectivity_spectrum(&sl, cells, 4, 1e-2)?;
            say!("{}", serde_json::to_string_pretty(&rep)?);
        }
        Command::Kid { case, n } => {
            let sup = |n: usize| -> anyhow::Result<f64> {
                let (a, b) = match case {
                    KidCase::Sphere => (0.1, 0.9),
                    KidCase::Schwarzschild => (3.0 * cfg.mass, 20.0 * cfg.mass),
                };
                let g = RadialGrid::uniform(a, b, n)?;
                let (f, c, lam) = match case {
                    KidCase::Sphere => (g.map(|r| r * r), g.map(|r| (1.0 - r * r).sqrt()), 3.0),
                    KidCase::Schwarzschild => {
                        (g.map(|r| 2.0 * cfg.mass / r), g.map(|r| (1.0 - 2.0 * cfg.mass / r).sqrt()), 0.0)
                    }
                };
                let k = CmcExtrinsicCurvature { tau: 0.0, mu: TraceFreeRadialTensor::zeros(n) };
                let cand = KidCandidate { c, x: RadialVectorField { u: vec![0.0; n] } };
                Ok(kid_residual(&RadialMetric::from_f(f), &k, lam, &cand, &g)?.sup())
            };
            let (e1, e2) = (sup(n)?, sup(2 * n - 1)?);
            say!("residual {e1:.4e} (n = {n}) -> {e2:.4e} (n = {}), order {:.3}", 2 * n - 1, richardson_order(e1, e2));
        }
        Command::Sweep { check } => {
            let run = run_sweep(&cfg)?;
            let dir = PathBuf::from(&cfg.out_dir);
            let files = emit_report(&run, &dir)?;
            for c in &run.checks() {
                say!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            say!("wrote {} files to {}", files.len(), dir.display());
            if check && !run.passed() {
                return Ok(3);
            }
        }
        Command::Report => {
            let dir = PathBuf::from(&cfg.out_dir);
            let path = dir.join("results.csv");
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })?;
            let rows = parse_csv(&text, &path.display().to_string())?;
            let mut cases: Vec<CaseResult> = Vec::new();
            for r in rows {
                if cases.last().map(|c| c.epsilon) != Some(r.epsilon) {
                    cases.push(CaseResult { epsilon: r.epsilon, status: CaseStatus::Ok, values: Default::default() });
                }
                cases.last_mut().expect("just pushed").values.insert(r.quantity, r.value);
            }
            let fits = fit_catalogue(&cases, cfg.nu);
            for f in &fits {
                match &f.fit {
                    Some(r) => say!(
                        "{:<5} {:<28} slope {:>7.3}  target {:>6.3}  r2 {:.4}",
                        if r.pass { "PASS" } else { "FAIL" },
                        f.quantity,
                        r.slope,
                        r.target,
                        r.r2
                    ),
                    None => say!("SKIP  {:<28} {}", f.quantity, f.error.as_deref().unwrap_or("")),
                }
            }
            let n = write_plots(&fits, &dir)?.len();
            say!("wrote {n} plots to {}", dir.display());
        }
    }
    Ok(0)
}
