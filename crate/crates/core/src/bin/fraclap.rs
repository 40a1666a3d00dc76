use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fraclap::dirichlet::{EllipticSolver, Forcing, ParabolicProblem, ParabolicStepper, TimeScheme};
use fraclap::domain::graded_grid;
use fraclap::fraclap_op::{build_dirichlet_operator, expected_exit_time};
use fraclap::harness::{emit_report, run_check, CheckId, Report, SweepConfig};
use fraclap::killed_mc::{
    density_csv, density_from_ensemble, envelope_bins, simulate_killed_paths, survival_csv, Bins, MCConfig,
};
use fraclap::norms::{
    fit_boundary_decay, lp_refinement, weighted_holder_norm, weighted_lp_norm, DistanceWeight, HolderSpec, NormRow,
    WeightSpec, NORM_CSV_HEADER,
};
use fraclap::stable_kernel::tabulate;
use fraclap::{Alpha, Domain, Error, GridFunction};

#[derive(Parser)]
#[command(name = "fraclap", version, about = "Fractional-Laplacian Dirichlet toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Clone)]
struct Opts {
    /// Stability index in (0, 2); repeat or comma-separate for sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    theta: Vec<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Number of grid nodes; a list sets the refinement ladder.
    #[arg(long, global = true, value_delimiter = ',')]
    grid: Vec<usize>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML sweep configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory. Without it results go to standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the free stable density against its two-sided envelope.
    Kernel {
        #[arg(long, default_value_t = 1)]
        dim: usize,
    },
    /// Killed Monte Carlo on (-1, 1) started from the origin.
    Mc {
        /// Time at which the transition density is binned.
        #[arg(long, default_value_t = 0.25)]
        t: f64,
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
    /// Solve Δ^(α/2) u - λu = f on (-1, 1) with f = 1.
    SolveElliptic,
    /// Implicit Euler for ∂ₜu = Δ^(α/2) u + f, u(0) = 0, f = 1 on (-1, 1).
    SolveParabolic,
    /// Weighted norms of the torsion function on a refinement ladder.
    Norms,
    /// Run one verification check and write its report.
    Verify { check: String },
    /// Run every verification check.
    Report,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter { .. } | Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn sweep_config(opts: &Opts, check: Option<CheckId>) -> fraclap::Result<SweepConfig> {
    let mut cfg = match &opts.config {
        Some(path) => SweepConfig::from_file(path)?,
        None => SweepConfig::default(),
    };
    if check.is_some() {
        cfg.check = check;
    }
    let set = |slot: &mut Option<Vec<f64>>, v: &Vec<f64>| {
        if !v.is_empty() {
            *slot = Some(v.clone());
        }
    };
    set(&mut cfg.params.alpha, &opts.alpha);
    set(&mut cfg.params.p, &opts.p);
    set(&mut cfg.params.theta, &opts.theta);
    set(&mut cfg.params.lambda, &opts.lambda);
    if !opts.grid.is_empty() {
        cfg.resolution.ladder = Some(opts.grid.clone());
    }
    if opts.steps.is_some() {
        cfg.resolution.steps = opts.steps;
    }
    if opts.paths.is_some() {
        cfg.resolution.paths = opts.paths;
    }
    if opts.dt.is_some() {
        cfg.resolution.dt = opts.dt;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.out = Some(out.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn first(v: &Option<Vec<f64>>, default: f64) -> f64 {
    v.as_ref().and_then(|v| v.first().copied()).unwrap_or(default)
}

fn nodes(cfg: &SweepConfig, default: usize) -> usize {
    cfg.resolution.ladder.as_ref().and_then(|l| l.last().copied()).unwrap_or(default)
}

fn write_output(opts: &Opts, stem: &str, csv: &str, json: &serde_json::Value) -> fraclap::Result<()> {
    let (body, ext) = match opts.format {
        Format::Csv => (csv.to_string(), "csv"),
        Format::Json => (serde_json::to_string_pretty(json).expect("json value serializes"), "json"),
    };
    match &opts.out {
        None => {
            print!("{body}");
            if !body.ends_with('\n') {
                println!();
            }
            Ok(())
        }
        Some(dir) => {
            let io = |p: &Path, e: std::io::Error| Error::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            };
            std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, body).map_err(|e| io(&path, e))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn csv_json(csv: &str) -> serde_json::Value {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<serde_json::Value> = lines
        .map(|l| {
            let obj: serde_json::Map<String, serde_json::Value> = header
                .iter()
                .zip(l.split(','))
                .map(|(k, v)| {
                    let val = v.parse::<f64>().ok().filter(|x| x.is_finite()).map_or(json!(v), |x| json!(x));
                    (k.to_string(), val)
                })
                .collect();
            serde_json::Value::Object(obj)
        })
        .collect();
    json!(rows)
}

fn run(cli: Cli) -> fraclap::Result<u8> {
    let opts = cli.opts;
    match cli.command {
        Command::Kernel { dim } => {
            let cfg = sweep_config(&opts, None)?;
            let alpha = Alpha::new(first(&cfg.params.alpha, 1.0))?;
            let times = cfg.params.t.clone().unwrap_or_else(|| vec![0.01, 1.0, 100.0]);
            let radii = cfg.params.x.clone().unwrap_or_else(|| (0..=40).map(|k| 10f64.powf(-2.0 + 0.1 * k as f64)).collect());
            let rows = tabulate(alpha, dim, &times, &radii)?;
            let mut csv = String::from("t,x,density,envelope_ratio\n");
            for r in &rows {
                csv.push_str(&format!("{:.6e},{:.6e},{:.12e},{:.12e}\n", r.t, r.r, r.density, r.envelope_ratio));
            }
            write_output(&opts, "kernel", &csv, &csv_json(&csv))?;
            Ok(0)
        }
        Command::Mc { t, bins } => {
            let cfg = sweep_config(&opts, Some(CheckId::Mc))?;
            let alpha = Alpha::new(first(&cfg.params.alpha, 1.0))?;
            let domain = Domain::interval(-1.0, 1.0)?;
            let oracle = expected_exit_time(alpha, 1, 0.0);
            let mc = MCConfig {
                seed: cfg.seed,
                n_paths: cfg.resolution.paths.unwrap_or(20_000),
                dt: cfg.resolution.dt.unwrap_or(1e-3),
                t_max: (40.0 * oracle).max(t),
                domain: domain.clone(),
                alpha,
            };
            let ens = simulate_killed_paths(&mc, &[0.0], &[t])?;
            let stats = ens.exit_time_stats();
            eprintln!(
                "E0[tau] = {:.6} +- {:.6} (closed form {oracle:.6}, censored {})",
                stats.mean, stats.std_err, stats.censored
            );
            let grid_t: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64 * oracle).collect();
            let surv = survival_csv(&ens.survival_curve(&grid_t));
            let b = Bins::uniform(-1.0, 1.0, bins);
            let est = density_from_ensemble(&ens, t, &b)?;
            let env = envelope_bins(&domain, alpha, t, 0.0, &b)?;
            let dens = density_csv(&est, &env);
            write_output(&opts, "survival", &surv, &csv_json(&surv))?;
            write_output(&opts, "density", &dens, &csv_json(&dens))?;
            Ok(0)
        }
        Command::SolveElliptic => {
            let cfg = sweep_config(&opts, None)?;
            let alpha = Alpha::new(first(&cfg.params.alpha, 1.0))?;
            let lambda = first(&cfg.params.lambda, 0.0);
            let domain = Domain::interval(-1.0, 1.0)?;
            let grid = graded_grid(&domain, nodes(&cfg, 256), 2.0, None)?;
            let op = Arc::new(build_dirichlet_operator(&domain, &grid, alpha)?);
            let u = EllipticSolver::new(op, lambda)?.solve(&vec![1.0; grid.len()])?;
            let mut csv = String::from("x,u\n");
            for (x, v) in grid.nodes.iter().zip(&u) {
                csv.push_str(&format!("{x:.15e},{v:.15e}\n"));
            }
            write_output(&opts, "elliptic", &csv, &csv_json(&csv))?;
            Ok(0)
        }
        Command::SolveParabolic => {
            let cfg = sweep_config(&opts, None)?;
            let alpha = Alpha::new(first(&cfg.params.alpha, 1.0))?;
            let domain = Domain::interval(-1.0, 1.0)?;
            let grid = graded_grid(&domain, nodes(&cfg, 128), 2.0, None)?;
            let steps = cfg.resolution.steps.unwrap_or(64);
            let dt = cfg.resolution.dt.unwrap_or(1.0 / steps as f64);
            let op = build_dirichlet_operator(&domain, &grid, alpha)?;
            let problem = ParabolicProblem {
                domain,
                alpha,
                t_final: dt * steps as f64,
                u0: GridFunction::zeros(&grid),
                f: Forcing::steady(vec![1.0; grid.len()]),
            };
            let series = ParabolicStepper::new(&op, dt, TimeScheme::ImplicitEuler)?.run(&problem, steps)?;
            let csv = series.to_csv();
            write_output(&opts, "parabolic", &csv, &csv_json(&csv))?;
            Ok(0)
        }
        Command::Norms => {
            let cfg = sweep_config(&opts, None)?;
            let alpha = Alpha::new(first(&cfg.params.alpha, 1.0))?;
            let h = alpha.value() / 2.0;
            let domain = Domain::interval(-1.0, 1.0)?;
            let ladder = cfg.resolution.ladder.clone().unwrap_or_else(|| vec![128, 256, 512]);
            let solve = |n: usize| -> fraclap::Result<GridFunction> {
                let grid = graded_grid(&domain, n, 2.0, None)?;
                let op = Arc::new(build_dirichlet_operator(&domain, &grid, alpha)?);
                let u = EllipticSolver::new(op, 0.0)?.solve(&vec![-1.0; n])?;
                GridFunction::new(grid, u)
            };
            let levels: Vec<GridFunction> = ladder.iter().map(|&n| solve(n)).collect::<fraclap::Result<_>>()?;
            let finest = levels.last().expect("non-empty ladder");
            let ps = cfg.params.p.clone().unwrap_or_else(|| vec![2.0]);
            let thetas = cfg.params.theta.clone().unwrap_or_else(|| vec![0.5, 1.0, 1.5]);
            let mut rows = Vec::new();
            for &p in &ps {
                for &theta in &thetas {
                    let spec = WeightSpec::new(p, theta, -h)?;
                    let r = lp_refinement(&ladder, &spec, DistanceWeight::Psi, |n| {
                        Ok(levels[ladder.iter().position(|m| *m == n).expect("level")].clone())
                    })?;
                    rows.push(NormRow {
                        norm_kind: "lp".into(),
                        p,
                        theta,
                        psi_power: -h,
                        value: weighted_lp_norm(finest, &spec)?,
                        refinement_ratio: r.max_drift() + 1.0,
                        divergence_flag: r.diverging,
                    });
                }
            }
            let hs = HolderSpec::new(h, -h)?;
            let holder = weighted_holder_norm(finest, &hs)?;
            let ratio = match levels.len() {
                1 => 1.0,
                n => holder / weighted_holder_norm(&levels[n - 2], &hs)?,
            };
            rows.push(NormRow {
                norm_kind: "holder".into(),
                p: f64::INFINITY,
                theta: 0.0,
                psi_power: -h,
                value: holder,
                refinement_ratio: ratio,
                divergence_flag: ratio > 1.0 + fraclap::norms::DIVERGENCE_GROWTH,
            });
            eprintln!("boundary decay exponent: {:.4}", fit_boundary_decay(finest, (1e-3, 0.05))?);
            let mut csv = format!("{NORM_CSV_HEADER}\n");
            for r in &rows {
                csv.push_str(&r.csv());
                csv.push('\n');
            }
            write_output(&opts, "norms", &csv, &serde_json::to_value(&rows).expect("rows serialize"))?;
            Ok(0)
        }
        Command::Verify { check } => {
            let id: CheckId = check.parse()?;
            let cfg = sweep_config(&opts, Some(id))?;
            let report = run_check(id, &cfg)?;
            finish(&opts, &cfg, &[report])
        }
        Command::Report => {
            let mut reports = Vec::new();
            let mut cfg = sweep_config(&opts, None)?;
            for id in CheckId::ALL {
                cfg.check = Some(id);
                eprintln!("running {id}");
                reports.push(run_check(id, &cfg)?);
            }
            finish(&opts, &cfg, &reports)
        }
    }
}

fn finish(opts: &Opts, cfg: &SweepConfig, reports: &[Report]) -> fraclap::Result<u8> {
    let dir = cfg.out.as_ref().map(PathBuf::from);
    for r in reports {
        match &dir {
            Some(d) => {
                for p in emit_report(r, d)? {
                    eprintln!("wrote {}", p.display());
                }
            }
            None => match opts.format {
                Format::Csv => print!("{}", r.to_csv()),
                Format::Json => println!("{}", serde_json::to_string_pretty(&r.to_json()).expect("json value serializes")),
            },
        }
        for c in &r.criteria {
            eprintln!("[{}] {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, r.check_id, c.name, c.detail);
        }
    }
    Ok(if reports.iter().all(Report::passed) { 0 } else { 1 })
}
