//! Command-line front end for the saddle-node laboratory.
//!
//! Every numeric table is emitted as deterministic CSV (17 significant
//! digits, LF line endings); failures print a one-line JSON object on
//! stderr and map to stable exit codes per error class.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nodelab::center::{center_coeffs, estimate_s_infty, fmt17};
use nodelab::flow::{flap_sweep, track_wu, track_wws_trace, Side, TrackOptions};
use nodelab::locus::{fold_find, sinfty_scan, scan_to_csv, zero_bisect};
use nodelab::nonlinearity::{load_spec, NonlinearitySpec};
use nodelab::unfolding::{
    eval_ubar, eval_vbar, eval_vbar_asymptotic, t_monomial_quadrature, t_monomial_series,
    weak_manifold_coeffs, weight_majorant_diag, UnfoldingContext,
};
use nodelab::Error;

#[derive(Parser)]
#[command(name = "nodelab", version, about = "Saddle-node normal form laboratory")]
struct Cli {
    /// Number of worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecArg {
    /// Path to a JSON system description.
    #[arg(long = "spec")]
    spec: PathBuf,
}

#[derive(Args)]
struct CtxArgs {
    /// Parameter value (alternative to --n/--alpha).
    #[arg(long, conflicts_with_all = ["n", "alpha"])]
    eps: Option<f64>,
    /// Resonance index (with --alpha).
    #[arg(long, requires = "alpha")]
    n: Option<usize>,
    /// Resonance offset in (0, 1) (with --n).
    #[arg(long, requires = "n")]
    alpha: Option<f64>,
}

impl CtxArgs {
    fn build(&self, spec: &NonlinearitySpec) -> Result<UnfoldingContext, Error> {
        match (self.eps, self.n, self.alpha) {
            (Some(eps), None, None) => UnfoldingContext::from_eps_spec(eps, spec),
            (None, Some(n), Some(alpha)) => UnfoldingContext::from_parts_spec(n, alpha, spec),
            _ => Err(Error::Parse(
                "provide either --eps or both --n and --alpha".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Critical-parameter manifold coefficients and the limit constant.
    Center {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 120)]
        k: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// `csv` (coefficient table) or `json` (limit-constant summary).
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Scan the limit constant of the two-parameter family over a grid.
    SinftyScan {
        /// f2 grid as `lo:hi:count`.
        #[arg(long, default_value = "0:10:41", allow_hyphen_values = true)]
        f2_grid: String,
        /// p grid as `lo:hi:count`.
        #[arg(long, default_value = "0:2:21", allow_hyphen_values = true)]
        p_grid: String,
        #[arg(long, default_value_t = 100)]
        k: usize,
    },
    /// Locate the fold of the family's zero locus.
    LocusFold {
        #[arg(long, default_value_t = 1.5)]
        p_lo: f64,
        #[arg(long, default_value_t = 2.5)]
        p_hi: f64,
        #[arg(long, default_value_t = 0.0)]
        f2_lo: f64,
        #[arg(long, default_value_t = 10.0)]
        f2_hi: f64,
        #[arg(long, default_value_t = 0.005)]
        p_tol: f64,
        #[arg(long, default_value_t = 100)]
        k: usize,
    },
    /// Bisect a zero of the family's limit constant in f2 at fixed p.
    LocusZero {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        f2_lo: f64,
        #[arg(long, default_value_t = 10.0)]
        f2_hi: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        k: usize,
    },
    /// Near-resonant weights and weak-manifold coefficients.
    Unfold {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        ctx: CtxArgs,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Tracking-series evaluators on a grid.
    Vbar {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        ctx: CtxArgs,
        /// x grid (rescaled variable) as `lo:hi:count`.
        #[arg(long, default_value = "-0.7:0.7:29", allow_hyphen_values = true)]
        x_grid: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Weak-manifold shooting over a grid of resonance offsets.
    Flap {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        n: usize,
        /// Offset grid as `lo:hi:count`.
        #[arg(long, default_value = "0.1:0.9:9")]
        alpha_grid: String,
        #[arg(long, default_value_t = 0.1)]
        c: f64,
    },
    /// Sampled invariant manifolds (rescaled variables) for plotting.
    Portrait {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        ctx: CtxArgs,
        #[arg(long, default_value_t = 0.1)]
        c: f64,
    },
    /// Exactly solvable model: graph, resonant part, and their difference.
    Baby {
        /// Forcing coefficients of x^2, x^3, ... as a comma list.
        #[arg(long)]
        u: String,
        #[arg(long)]
        eps: f64,
        /// x grid as `lo:hi:count`.
        #[arg(long, default_value = "-0.75:0.75:31", allow_hyphen_values = true)]
        x_grid: String,
    },
}

fn parse_grid(text: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("grid '{text}' is not lo:hi:count")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Parse(format!("bad grid bound '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Parse(format!("bad grid bound '{}'", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Error::Parse(format!("bad grid count '{}'", parts[2])))?;
    if count == 0 || (count == 1 && hi != lo) {
        return Err(Error::Parse(format!("grid '{text}' has too few points")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}

fn read_spec(path: &PathBuf) -> Result<NonlinearitySpec, Error> {
    let text = std::fs::read_to_string(path)?;
    let spec = load_spec(&text)?;
    for w in spec.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(spec)
}

fn run(cli: &Cli) -> Result<String, Error> {
    match &cli.command {
        Command::Center { spec, k, tol, format } => {
            let spec = read_spec(&spec.spec)?;
            if format == "json" {
                let est = estimate_s_infty(&spec, *k, *tol)?;
                Ok(format!(
                    "{}\n",
                    serde_json::json!({
                        "S": est.value,
                        "k_used": est.k_used,
                        "residual": est.residual,
                        "converged": est.converged,
                    })
                ))
            } else if format == "csv" {
                Ok(center_coeffs(&spec, *k)?.to_csv())
            } else {
                Err(Error::Parse(format!("unknown format '{format}'")))
            }
        }
        Command::SinftyScan { f2_grid, p_grid, k } => {
            let f2 = parse_grid(f2_grid)?;
            let p = parse_grid(p_grid)?;
            Ok(scan_to_csv(&sinfty_scan(&f2, &p, *k)?))
        }
        Command::LocusFold {
            p_lo,
            p_hi,
            f2_lo,
            f2_hi,
            p_tol,
            k,
        } => {
            let fold = fold_find(*p_lo, *p_hi, *f2_lo, *f2_hi, *p_tol, *k)?;
            Ok(format!(
                "{}\n",
                serde_json::json!({
                    "p": fold.p,
                    "f2": fold.f2,
                    "S": fold.s,
                    "dS_df2": fold.ds_df2,
                    "dS_dp": fold.ds_dp,
                })
            ))
        }
        Command::LocusZero {
            p,
            f2_lo,
            f2_hi,
            tol,
            k,
        } => {
            let root = zero_bisect(*p, *f2_lo, *f2_hi, *tol, *k)?;
            Ok(format!(
                "{}\n",
                serde_json::json!({ "p": p, "f2_root": root })
            ))
        }
        Command::Unfold { spec, ctx, k } => {
            let spec = read_spec(&spec.spec)?;
            let ctx = ctx.build(&spec)?;
            let k = k.unwrap_or(ctx.n());
            let exp = weak_manifold_coeffs(&spec, &ctx, k)?;
            let (q, p, viol) = if ctx.n() >= 5 {
                weight_majorant_diag(&ctx)?
            } else {
                (f64::NAN, f64::NAN, f64::NAN)
            };
            eprintln!(
                "majorant: slope {} intercept {} violation {}",
                fmt17(q),
                fmt17(p),
                fmt17(viol)
            );
            exp.to_csv()
        }
        Command::Vbar { spec, ctx, x_grid, tol } => {
            let spec = read_spec(&spec.spec)?;
            let ctx = ctx.build(&spec)?;
            let grid = parse_grid(x_grid)?;
            let mut out = String::from("x,V,U,T_series,T_quadrature,V_asymptotic\n");
            for &x in &grid {
                let v = eval_vbar(&ctx, x, *tol)?;
                let u = eval_ubar(&ctx, x, *tol)?;
                let ts = t_monomial_series(&ctx, x, *tol)?;
                let tq = t_monomial_quadrature(&ctx, x, 1e-9)?;
                let va = eval_vbar_asymptotic(&ctx, x / ctx.eps(), 1e-10)?;
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt17(x),
                    fmt17(v),
                    fmt17(u),
                    fmt17(ts),
                    fmt17(tq),
                    fmt17(va)
                ));
            }
            Ok(out)
        }
        Command::Flap {
            spec,
            n,
            alpha_grid,
            c,
        } => {
            let spec = read_spec(&spec.spec)?;
            let alphas = parse_grid(alpha_grid)?;
            let sweep = flap_sweep(&spec, *n, &alphas, *c, &TrackOptions::default());
            let mut out = String::new();
            for r in &sweep.reports {
                out.push_str(&format!(
                    "{}\n",
                    serde_json::json!({
                        "eps": r.eps,
                        "n": r.n,
                        "alpha": r.alpha,
                        "side": r.side.label(),
                        "c": r.c,
                        "s_sign": r.s_sign,
                        "crossed": r.crossed,
                        "predicted": r.predicted,
                        "agree": r.agrees(),
                        "crossing_x": r.crossing_x,
                        "seed_r0": r.seed_r0,
                        "steps": r.steps,
                    })
                ));
            }
            for (alpha, side, err) in &sweep.errors {
                out.push_str(&format!(
                    "{}\n",
                    serde_json::json!({
                        "alpha": alpha,
                        "side": side.label(),
                        "error": err,
                    })
                ));
            }
            Ok(out)
        }
        Command::Portrait { spec, ctx, c } => {
            let spec = read_spec(&spec.spec)?;
            let ctx = ctx.build(&spec)?;
            let mut out = String::from("manifold,x,y\n");
            let opts = TrackOptions::default();
            for (side, label) in [(Side::Left, "wws_left"), (Side::Right, "wws_right")] {
                let (_, trace) = track_wws_trace(&spec, &ctx, side, *c, &opts)?;
                for (_, x, y) in &trace.points {
                    out.push_str(&format!("{label},{},{}\n", fmt17(*x), fmt17(*y)));
                }
            }
            let branch = track_wu(&spec, &ctx, &opts.integrator)?;
            for (_, x, y) in &branch.trace.points {
                out.push_str(&format!("wu,{},{}\n", fmt17(*x), fmt17(*y)));
            }
            // The strong-stable manifold is the invariant y-axis.
            for i in 0..=20 {
                let y = -1.0 + 0.1 * i as f64;
                out.push_str(&format!("wss,{},{}\n", fmt17(0.0), fmt17(y)));
            }
            Ok(out)
        }
        Command::Baby { u, eps, x_grid } => {
            let u: Vec<f64> = u
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad coefficient '{s}'")))
                })
                .collect::<Result<_, _>>()?;
            let grid = parse_grid(x_grid)?;
            let mut out = String::from("x,m,V,B\n");
            for &x in &grid {
                let m = nodelab::flow::baby_exact(&u, *eps, x)?;
                let v = nodelab::flow::baby_v(&u, *eps, x)?;
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt17(x),
                    fmt17(m),
                    fmt17(v),
                    fmt17(m - v)
                ));
            }
            Ok(out)
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse(_) | Error::Io(_) => 3,
        Error::Hypothesis(_) => 4,
        Error::Resonance { .. } => 5,
        Error::Domain(_) | Error::GammaPole(_, _) | Error::Truncation(_) => 6,
        Error::NoConvergence(_) | Error::Stiffness(_) | Error::SeedQuality(_) => 7,
        Error::Bracket(_) => 8,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Parse(_) => "parse",
        Error::Io(_) => "io",
        Error::Hypothesis(_) => "hypothesis",
        Error::Resonance { .. } => "resonance",
        Error::Domain(_) => "domain",
        Error::GammaPole(_, _) => "gamma_pole",
        Error::Truncation(_) => "truncation",
        Error::NoConvergence(_) => "no_convergence",
        Error::Stiffness(_) => "stiffness",
        Error::SeedQuality(_) => "seed_quality",
        Error::Bracket(_) => "bracket",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match run(&cli) {
        Ok(output) => {
            let result = match &cli.out {
                Some(path) => std::fs::write(path, output).map_err(Error::from),
                None => std::io::stdout()
                    .write_all(output.as_bytes())
                    .map_err(Error::from),
            };
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!(
                        "{}",
                        serde_json::json!({ "error": error_kind(&e), "message": e.to_string() })
                    );
                    ExitCode::from(exit_code_for(&e))
                }
            }
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": error_kind(&e), "message": e.to_string() })
            );
            ExitCode::from(exit_code_for(&e))
        }
    }
}
