//! Command-line surface: data generation, band construction, robust solves,
//! experiment runs, and the greedy-vs-LP oracle cross-check.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures. Every
//! command takes `--seed` (overridden by the `BANDRO_SEED` environment
//! variable when set) and `--out`; outputs are pure functions of the flags
//! and the seed.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use bandro::band::{self, DeltaSpec, DensityBand, Kernel, SrParams};
use bandro::dro::{self, SgdConfig};
use bandro::experiments::{self, ExperimentConfig};
use bandro::oracle;
use bandro::problems::{Newsvendor, Portfolio, TrueDensity};
use bandro::{Problem, SampleSet, SeedStream, SupportBox};

#[derive(Parser)]
#[command(
    name = "bandro",
    about = "Distributionally robust optimization over density confidence bands",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV from a ground-truth distribution.
    GenData(GenDataArgs),
    /// Build a confidence band and write its curve CSV.
    Band(BandCmdArgs),
    /// Build a band and solve the robust program; writes a decision JSON.
    Solve(SolveArgs),
    /// Run a holdout/multi-trial experiment from a config JSON.
    Experiment(ExperimentArgs),
    /// Cross-check the greedy inner maximization against the LP route.
    OracleCheck(OracleCheckArgs),
}

#[derive(Args)]
struct SeedArg {
    /// Random seed; the BANDRO_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SeedArg {
    fn resolve(&self) -> anyhow::Result<u64> {
        match std::env::var("BANDRO_SEED") {
            Ok(v) => v
                .trim()
                .parse::<u64>()
                .map_err(|e| anyhow!("BANDRO_SEED must be an unsigned integer: {e}")),
            Err(_) => Ok(self.seed),
        }
    }
}

#[derive(Args)]
struct GenDataArgs {
    /// truncated-normal | scaled-beta | truncated-exponential | factor-normal
    #[arg(long)]
    family: String,
    /// Number of observations.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    mean: Option<f64>,
    #[arg(long)]
    sd: Option<f64>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long)]
    shape_a: Option<f64>,
    #[arg(long)]
    shape_b: Option<f64>,
    #[arg(long)]
    assets: Option<usize>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

fn density_from_flags(a: &GenDataArgs) -> anyhow::Result<TrueDensity> {
    let lo = a.lo.unwrap_or(0.0);
    let hi = a.hi.unwrap_or(250.0);
    Ok(match a.family.as_str() {
        "truncated-normal" => TrueDensity::TruncatedNormal {
            mean: a.mean.unwrap_or(100.0),
            sd: a.sd.unwrap_or(50.0),
            lo,
            hi,
        },
        "scaled-beta" => TrueDensity::ScaledBeta {
            alpha: a.shape_a.unwrap_or(5.0),
            beta: a.shape_b.unwrap_or(2.0),
            lo,
            hi,
        },
        "truncated-exponential" => {
            TrueDensity::TruncatedExponential { mean: a.mean.unwrap_or(100.0), lo, hi }
        }
        "factor-normal" => TrueDensity::FactorNormal { assets: a.assets.unwrap_or(10) },
        other => bail!("unknown family '{other}'"),
    })
}

#[derive(Args, Clone)]
struct BandArgs {
    /// sr | kde
    #[arg(long)]
    kind: String,
    /// Support endpoints for shape-restricted bands.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Known mode location (shape-restricted).
    #[arg(long)]
    mode: Option<f64>,
    /// Known density cap U.
    #[arg(long)]
    cap: Option<f64>,
    /// Significance level.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    /// Explicit group size K (shape-restricted).
    #[arg(long)]
    group_size: Option<usize>,
    /// Group-size scale c in K(N, c) when --group-size is absent.
    #[arg(long, default_value_t = 1.0)]
    group_c: f64,
    /// Replicates for the mass-bracket calibration.
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
    /// boxcar | gaussian | epanechnikov
    #[arg(long, default_value = "boxcar")]
    kernel: String,
    /// Explicit KDE bandwidth.
    #[arg(long)]
    h: Option<f64>,
    /// Bandwidth scale c in h = c (ln N / N)^(1/(2+m)) when --h is absent.
    #[arg(long, default_value_t = 0.1)]
    h_c: f64,
    /// Explicit KDE band half-width.
    #[arg(long)]
    delta: Option<f64>,
    /// Use the theoretical half-width instead of --delta.
    #[arg(long, default_value_t = false)]
    delta_theory: bool,
    /// Holder constant C for --delta-theory.
    #[arg(long)]
    holder_c: Option<f64>,
    /// Holder exponent rho for --delta-theory.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
}

fn build_band(args: &BandArgs, data: &SampleSet, stream: &SeedStream) -> anyhow::Result<DensityBand> {
    match args.kind.as_str() {
        "sr" => {
            let values = data.values().context("shape-restricted bands need 1-D data")?;
            let data_lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let data_hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let a = args.a.unwrap_or(data_lo);
            let b = args.b.unwrap_or(data_hi);
            let mode = args.mode.ok_or_else(|| anyhow!("--mode is required for --kind sr"))?;
            let cap = args.cap.ok_or_else(|| anyhow!("--cap is required for --kind sr"))?;
            let group_size = args
                .group_size
                .unwrap_or_else(|| band::sr::group_size_rule(data.len(), args.group_c));
            let params = SrParams {
                a,
                b,
                mode,
                cap,
                alpha: args.alpha,
                group_size,
                mc_samples: args.mc_samples,
            };
            Ok(band::build_sr_band(data, &params, stream)?)
        }
        "kde" => {
            let kernel = Kernel::parse(&args.kernel)?;
            let n = data.len() as f64;
            let m = data.dim() as f64;
            let h = args.h.unwrap_or_else(|| args.h_c * (n.ln() / n).powf(1.0 / (2.0 + m)));
            let delta = if args.delta_theory {
                let holder_c =
                    args.holder_c.ok_or_else(|| anyhow!("--holder-c is required for theory"))?;
                let cap = args.cap.ok_or_else(|| anyhow!("--cap is required for theory"))?;
                DeltaSpec::Theoretical { holder_c, rho: args.rho, cap, alpha: args.alpha }
            } else {
                DeltaSpec::Explicit(args.delta.unwrap_or(0.05))
            };
            let support = match (args.a, args.b) {
                (Some(a), Some(b)) if data.dim() == 1 => Some(SupportBox::interval(a, b)?),
                _ => None,
            };
            Ok(band::build_kde_band(data, kernel, h, delta, support)?)
        }
        other => bail!("unknown band kind '{other}'"),
    }
}

#[derive(Args)]
struct BandCmdArgs {
    /// Input dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    band: BandArgs,
    /// Number of curve grid points (1-D) or points per axis (2-D).
    #[arg(long, default_value_t = 201)]
    grid: usize,
    /// Output curve CSV path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct SolveArgs {
    /// Input dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    band: BandArgs,
    /// newsvendor | portfolio
    #[arg(long)]
    problem: String,
    /// Newsvendor shortage cost per unit.
    #[arg(long, default_value_t = 19.0)]
    cs: f64,
    /// Newsvendor holding cost per unit.
    #[arg(long, default_value_t = 1.0)]
    ch: f64,
    /// Portfolio CVaR level.
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    /// Portfolio risk-aversion weight.
    #[arg(long, default_value_t = 10.0)]
    gamma: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// Step scale; derived from problem scale when absent.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    iters: usize,
    /// Grid cells the band is frozen to before the stochastic solver
    /// (shape-restricted bands only).
    #[arg(long, default_value_t = 512)]
    tabulate: usize,
    /// Also report the discretized oracle value and the duality gap.
    #[arg(long, default_value_t = false)]
    oracle: bool,
    #[arg(long, default_value_t = 2000)]
    oracle_cells: usize,
    /// Optional per-iteration trace CSV (iter,F_hat,lambda,step).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output decision JSON path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Shrink to desk scale (20 trials, 20k evaluation draws).
    #[arg(long, default_value_t = false)]
    desk: bool,
    /// Output directory for the three CSVs.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Work-pool size (defaults to the logical core count).
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the seed in the config when provided.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 200)]
    max_cells: usize,
    /// Optional per-instance report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenData(args) => gen_data(args),
        Command::Band(args) => band_cmd(args),
        Command::Solve(args) => solve_cmd(args),
        Command::Experiment(args) => experiment_cmd(args),
        Command::OracleCheck(args) => oracle_check_cmd(args),
    }
}

fn gen_data(args: GenDataArgs) -> anyhow::Result<()> {
    let seed = args.seed.resolve()?;
    let density = density_from_flags(&args)?;
    let mut rng = SeedStream::new(seed).derive_stream("gen-data").rng();
    let data = density.sample_set(args.n, &mut rng, seed)?;
    data.write_csv_path(&args.out)?;
    println!("wrote {} observations (dim {}) to {}", data.len(), data.dim(), args.out.display());
    Ok(())
}

fn curve_grid(band: &DensityBand, points: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    let support = band.support();
    match support.dim() {
        1 => Ok(band::grid_1d(support.lower()[0], support.upper()[0], points)),
        2 => {
            let mut grid = Vec::with_capacity(points * points);
            for i in 0..points {
                for j in 0..points {
                    let x = support.lower()[0] + support.width(0) * i as f64 / (points - 1) as f64;
                    let y = support.lower()[1] + support.width(1) * j as f64 / (points - 1) as f64;
                    grid.push(vec![x, y]);
                }
            }
            Ok(grid)
        }
        d => bail!("band curves support 1-D and 2-D supports, got {d}-D"),
    }
}

fn band_cmd(args: BandCmdArgs) -> anyhow::Result<()> {
    if args.grid < 2 {
        bail!("--grid needs at least 2 points");
    }
    let seed = args.seed.resolve()?;
    let data = SampleSet::read_csv_path(&args.data, seed)?;
    let stream = SeedStream::new(seed).derive_stream("band");
    let band = build_band(&args.band, &data, &stream)?;

    let grid = curve_grid(&band, args.grid)?;
    let rows = band::band_curve(&band, &grid);
    let file = std::fs::File::create(&args.out)?;
    band::write_curve_csv(file, &rows)?;

    let mean_width: f64 =
        rows.iter().map(|r| r.upper - r.lower).sum::<f64>() / rows.len() as f64;
    // Mass bounds of the discretized band at the curve resolution. A small
    // quadrature tolerance keeps collapsed bands (l = u) from flagging.
    let (mass_lower, mass_upper) = band_mass_bounds(&band, (args.grid - 1).max(10));
    let feasible = mass_lower <= 1.0 + 1e-6 && mass_upper >= 1.0 - 1e-6;
    println!(
        "band kind: {}; rows: {}; mean width: {:.6}; sum l w = {:.6}, sum u w = {:.6}; \
         holds a density at this resolution: {}",
        band.kind_name(),
        rows.len(),
        mean_width,
        mass_lower,
        mass_upper,
        if feasible { "yes" } else { "no" }
    );
    Ok(())
}

/// Midpoint sums of `l` and `u` over a uniform grid (per-axis cells).
fn band_mass_bounds(band: &DensityBand, cells: usize) -> (f64, f64) {
    let support = band.support();
    let m = support.dim();
    let total = cells.pow(m as u32);
    let weight = support.volume() / total as f64;
    let mut idx = vec![0usize; m];
    let (mut lo, mut hi) = (0.0, 0.0);
    for _ in 0..total {
        let mid: Vec<f64> = (0..m)
            .map(|k| support.lower()[k] + (idx[k] as f64 + 0.5) * support.width(k) / cells as f64)
            .collect();
        let (l, u) = band.eval(&mid);
        lo += l * weight;
        hi += u * weight;
        for k in (0..m).rev() {
            idx[k] += 1;
            if idx[k] < cells {
                break;
            }
            idx[k] = 0;
        }
    }
    (lo, hi)
}

fn solve_cmd(args: SolveArgs) -> anyhow::Result<()> {
    let seed = args.seed.resolve()?;
    let data = SampleSet::read_csv_path(&args.data, seed)?;
    let root = SeedStream::new(seed).derive_stream("solve");
    let band = build_band(&args.band, &data, &root.derive_stream("band"))?;

    let (problem, x0): (Box<dyn Problem>, Vec<f64>) = match args.problem.as_str() {
        "newsvendor" => {
            let cap = band.support().upper()[0];
            let nv = Newsvendor::new(args.cs, args.ch, cap)?;
            (Box::new(nv), vec![cap / 2.0])
        }
        "portfolio" => {
            let assets = data.dim();
            let pf = Portfolio::new(assets, args.eps, args.gamma)?;
            let mut x0 = vec![1.0 / assets as f64; assets];
            x0.push(0.0);
            (Box::new(pf), x0)
        }
        other => bail!("unknown problem '{other}'"),
    };

    // Freeze per-point band programs onto a grid before the hot loop.
    let solver_band = match band.kind() {
        band::BandKind::ShapeRestricted(_) => band.tabulate(args.tabulate)?,
        _ => band,
    };

    let lambda0 = dro::lambda_init(problem.as_ref(), &x0, &data);
    let eta = match args.eta {
        Some(e) => e,
        None => dro::default_eta(
            problem.as_ref(),
            &solver_band,
            &x0,
            lambda0,
            &root.derive_stream("eta"),
        ),
    };
    let cfg = SgdConfig { batch: args.batch, eta, iters: args.iters, x0, lambda0 };
    let saddle = dro::sgd_solve(problem.as_ref(), &solver_band, &cfg, &root.derive_stream("sgd"))?;

    if let Some(path) = &args.trace {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "iter,F_hat,lambda,step")?;
        for r in &saddle.history {
            writeln!(w, "{},{},{},{}", r.iter, r.f_hat, r.lambda, r.step)?;
        }
    }

    let f_hat = if solver_band.dim() <= 2 {
        dro::dual_objective(&saddle.x, saddle.lambda, &solver_band, problem.as_ref(), 2000)?
    } else {
        dro::dual_objective_mc(
            &saddle.x,
            saddle.lambda,
            &solver_band,
            problem.as_ref(),
            200_000,
            &root.derive_stream("fhat"),
        )
    };

    let mut doc = serde_json::json!({
        "x": saddle.x,
        "lambda": saddle.lambda,
        "F_hat": f_hat,
        "iters": args.iters,
    });
    if args.oracle {
        let oracle_value =
            oracle::robust_value_oracle(problem.as_ref(), &solver_band, &saddle.x, args.oracle_cells)?;
        let (_, dual_value) =
            dro::min_lambda_dual(&saddle.x, &solver_band, problem.as_ref(), args.oracle_cells)?;
        let gap = (dual_value - oracle_value).abs() / (1.0 + oracle_value.abs());
        doc["oracle_value"] = serde_json::json!(oracle_value);
        doc["dual_value"] = serde_json::json!(dual_value);
        doc["duality_gap"] = serde_json::json!(gap);
    }
    std::fs::write(&args.out, serde_json::to_string_pretty(&doc)?)?;
    println!("decision written to {}", args.out.display());
    Ok(())
}

fn experiment_cmd(args: ExperimentArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if args.desk {
        cfg.desk();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Ok(v) = std::env::var("BANDRO_SEED") {
        cfg.seed = v.trim().parse().map_err(|e| anyhow!("BANDRO_SEED: {e}"))?;
    }
    std::fs::create_dir_all(&args.out)?;
    let out = experiments::run_experiment(&cfg, args.jobs)?;

    let stem = cfg.name.replace([' ', '/'], "_");
    let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> bandro::Result<()>| -> anyhow::Result<PathBuf> {
        let path = args.out.join(format!("{stem}_{name}.csv"));
        let mut buf = Vec::new();
        f(&mut buf)?;
        std::fs::write(&path, buf)?;
        Ok(path)
    };
    let trials_path = write("trials", &|w| experiments::write_trials_csv(w, &out.trials))?;
    let agg_path = write("aggregates", &|w| experiments::write_aggregates_csv(w, &out.aggregates))?;
    let choice_path = write("choices", &|w| experiments::write_choices_csv(w, &out.trials))?;

    for a in &out.aggregates {
        println!(
            "size {:>5}: mean {:.6}  p20 {:.6}  p80 {:.6}",
            a.size, a.mean, a.p20, a.p80
        );
    }
    if !out.failures.is_empty() {
        println!("{} trial(s) failed (tolerated)", out.failures.len());
    }
    println!(
        "wrote {}, {}, {}",
        trials_path.display(),
        agg_path.display(),
        choice_path.display()
    );
    Ok(())
}

fn oracle_check_cmd(args: OracleCheckArgs) -> anyhow::Result<()> {
    use rand::Rng;
    let seed = args.seed.resolve()?;
    let mut rng = SeedStream::new(seed).derive_stream("oracle-check").rng();
    let mut report: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut worst: f64 = 0.0;
    for instance in 0..args.instances {
        let g = rng.gen_range(10..=args.max_cells.max(10));
        let w = rng.gen_range(0.005..0.2);
        let mut lower = Vec::with_capacity(g);
        let mut upper = Vec::with_capacity(g);
        for _ in 0..g {
            let l: f64 = rng.gen_range(0.0..(1.5 / (g as f64 * w)));
            lower.push(l);
            upper.push(l + rng.gen_range(0.0..(3.0 / (g as f64 * w))));
        }
        let lo: f64 = lower.iter().sum::<f64>() * w;
        let hi: f64 = upper.iter().sum::<f64>() * w;
        if lo > 1.0 {
            let s = rng.gen_range(0.2..0.99) / lo;
            lower.iter_mut().for_each(|v| *v *= s);
        }
        if hi < 1.0 {
            let s = rng.gen_range(1.01..2.0) / hi;
            upper.iter_mut().for_each(|v| *v *= s);
        }
        let centers: Vec<Vec<f64>> = (0..g).map(|i| vec![i as f64]).collect();
        let grid = oracle::GridBand::from_parts(centers, w, lower, upper)?;
        let fvals: Vec<f64> = (0..g).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let (greedy, _) = oracle::inner_sup(&grid, &fvals)?;
        let (lp, _) = oracle::inner_sup_lp(&grid, &fvals)?;
        let gap = (greedy - lp).abs();
        worst = worst.max(gap);
        report.push((instance, g, greedy, lp));
    }
    if let Some(path) = &args.out {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "instance,cells,greedy,lp")?;
        for (i, g, gr, lp) in &report {
            writeln!(w, "{i},{g},{gr},{lp}")?;
        }
    }
    println!("{} instances checked; worst |greedy - lp| = {worst:.3e}", args.instances);
    if worst > 1e-9 {
        bail!("greedy and LP routes disagree by {worst:.3e} (tolerance 1e-9)");
    }
    Ok(())
}
