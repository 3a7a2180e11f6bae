//! Multi-trial experiment protocol: holdout hyperparameter validation,
//! out-of-sample evaluation on fresh draws, and percentile aggregation.
//!
//! Each trial draws a dataset, splits it 70/30, solves the robust program on
//! the training split for every hyperparameter cell, scores decisions by mean
//! cost on the test split, re-solves on the full dataset with the winning
//! cell, and finally evaluates the decision on a large fresh sample. Trials
//! run in a work pool with per-trial random streams, so results do not depend
//! on scheduling.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::{
    build_kde_band, build_sr_band, sr::group_size_rule, DeltaSpec, DensityBand, Kernel, SrParams,
};
use crate::dro::{self, SgdConfig};
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::problems::{Newsvendor, Portfolio, TrueDensity};
use crate::rng::SeedStream;
use crate::sample::SampleSet;

/// Stochastic-solver settings shared by every cell of an experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SgdSettings {
    pub batch: usize,
    /// Explicit step scale; when absent a crude scale-normalized default is
    /// derived per solve.
    pub eta: Option<f64>,
    pub iters: usize,
}

/// Which cost model the experiment runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Newsvendor { shortage_cost: f64, holding_cost: f64 },
    Portfolio { assets: usize, cvar_level: f64, risk_aversion: f64 },
}

/// Band family and its hyperparameter grids. `param1` is always the group or
/// bandwidth scale `c`; `param2` is the significance level (shape-restricted)
/// or the band half-width (KDE).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandGridConfig {
    Sr {
        c_grid: Vec<f64>,
        alpha_grid: Vec<f64>,
        /// Density cap; defaults to 1.25x the true peak.
        cap: Option<f64>,
        #[serde(default = "default_mc_samples")]
        mc_samples: usize,
        /// Grid resolution the band is frozen to before entering the solver.
        #[serde(default = "default_tabulate_cells")]
        tabulate_cells: usize,
    },
    Kde {
        c_grid: Vec<f64>,
        delta_grid: Vec<f64>,
        #[serde(default = "default_kernel")]
        kernel: String,
        /// Truncate bands to the density's declared support box instead of
        /// the per-dataset bounding box, so the sampling region is identical
        /// across sample sizes.
        #[serde(default)]
        fixed_support: bool,
    },
}

fn default_mc_samples() -> usize {
    100_000
}

fn default_tabulate_cells() -> usize {
    512
}

fn default_kernel() -> String {
    "boxcar".into()
}

fn default_trials() -> usize {
    100
}

fn default_n_large() -> usize {
    100_000
}

/// Full experiment description; serializable so the CLI can run from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemConfig,
    pub density: TrueDensity,
    pub band: BandGridConfig,
    pub sizes: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_n_large")]
    pub n_large: usize,
    pub sgd: SgdSettings,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Shrink to desk scale: at most 20 trials and 20k evaluation draws.
    pub fn desk(&mut self) {
        self.trials = self.trials.min(20);
        self.n_large = self.n_large.min(20_000);
    }

    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad config JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.trials == 0 {
            return Err(Error::invalid("need at least one size and one trial"));
        }
        if self.sizes.iter().any(|n| *n < 10) {
            return Err(Error::invalid("holdout needs N >= 10 per size"));
        }
        let empty = match &self.band {
            BandGridConfig::Sr { c_grid, alpha_grid, .. } => {
                c_grid.is_empty() || alpha_grid.is_empty()
            }
            BandGridConfig::Kde { c_grid, delta_grid, .. } => {
                c_grid.is_empty() || delta_grid.is_empty()
            }
        };
        if empty {
            return Err(Error::invalid("hyperparameter grids must be non-empty"));
        }
        Ok(())
    }
}

/// Concrete problem instance plus its solver start point.
#[derive(Clone, Debug)]
pub enum ProblemKind {
    News(Newsvendor),
    Port(Portfolio),
}

impl ProblemKind {
    pub fn from_config(cfg: &ProblemConfig, density: &TrueDensity) -> Result<ProblemKind> {
        match cfg {
            ProblemConfig::Newsvendor { shortage_cost, holding_cost } => {
                let support = density.support()?;
                if support.dim() != 1 {
                    return Err(Error::invalid("newsvendor needs a univariate density"));
                }
                // Orders beyond the maximal demand are dominated.
                let cap = support.upper()[0];
                Ok(ProblemKind::News(Newsvendor::new(*shortage_cost, *holding_cost, cap)?))
            }
            ProblemConfig::Portfolio { assets, cvar_level, risk_aversion } => {
                if density.dim() != *assets {
                    return Err(Error::invalid(format!(
                        "portfolio over {assets} assets but density has dimension {}",
                        density.dim()
                    )));
                }
                Ok(ProblemKind::Port(Portfolio::new(*assets, *cvar_level, *risk_aversion)?))
            }
        }
    }

    pub fn problem(&self) -> &dyn Problem {
        match self {
            ProblemKind::News(p) => p,
            ProblemKind::Port(p) => p,
        }
    }

    pub fn initial_x(&self) -> Vec<f64> {
        match self {
            ProblemKind::News(p) => vec![p.order_cap / 2.0],
            ProblemKind::Port(p) => {
                let mut x = vec![1.0 / p.assets as f64; p.assets];
                x.push(0.0);
                x
            }
        }
    }
}

/// Band grids with the shape-restricted priors resolved.
#[derive(Clone, Debug)]
pub enum ResolvedBand {
    Sr {
        a: f64,
        b: f64,
        mode: f64,
        cap: f64,
        c_grid: Vec<f64>,
        alpha_grid: Vec<f64>,
        mc_samples: usize,
        tabulate_cells: usize,
    },
    Kde {
        kernel: Kernel,
        c_grid: Vec<f64>,
        delta_grid: Vec<f64>,
        support: Option<crate::SupportBox>,
    },
}

impl ResolvedBand {
    pub fn resolve(cfg: &BandGridConfig, density: &TrueDensity) -> Result<ResolvedBand> {
        match cfg {
            BandGridConfig::Sr { c_grid, alpha_grid, cap, mc_samples, tabulate_cells } => {
                let support = density.support()?;
                if support.dim() != 1 {
                    return Err(Error::invalid("shape-restricted bands are univariate"));
                }
                Ok(ResolvedBand::Sr {
                    a: support.lower()[0],
                    b: support.upper()[0],
                    mode: density.mode()[0],
                    cap: cap.unwrap_or(1.25 * density.peak()),
                    c_grid: c_grid.clone(),
                    alpha_grid: alpha_grid.clone(),
                    mc_samples: *mc_samples,
                    tabulate_cells: *tabulate_cells,
                })
            }
            BandGridConfig::Kde { c_grid, delta_grid, kernel, fixed_support } => {
                Ok(ResolvedBand::Kde {
                    kernel: Kernel::parse(kernel)?,
                    c_grid: c_grid.clone(),
                    delta_grid: delta_grid.clone(),
                    support: if *fixed_support { Some(density.support()?) } else { None },
                })
            }
        }
    }

    /// All `(param1, param2)` cells in grid order.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let (firsts, seconds) = match self {
            ResolvedBand::Sr { c_grid, alpha_grid, .. } => (c_grid, alpha_grid),
            ResolvedBand::Kde { c_grid, delta_grid, .. } => (c_grid, delta_grid),
        };
        let mut cells = Vec::with_capacity(firsts.len() * seconds.len());
        for p1 in firsts {
            for p2 in seconds {
                cells.push((*p1, *p2));
            }
        }
        cells
    }

    /// Build the band for one cell, ready for the stochastic solver.
    pub fn build(
        &self,
        data: &SampleSet,
        param1: f64,
        param2: f64,
        stream: &SeedStream,
    ) -> Result<DensityBand> {
        match self {
            ResolvedBand::Sr { a, b, mode, cap, mc_samples, tabulate_cells, .. } => {
                let params = SrParams {
                    a: *a,
                    b: *b,
                    mode: *mode,
                    cap: *cap,
                    alpha: param2,
                    group_size: group_size_rule(data.len(), param1),
                    mc_samples: *mc_samples,
                };
                build_sr_band(data, &params, stream)?.tabulate(*tabulate_cells)
            }
            ResolvedBand::Kde { kernel, support, .. } => {
                let n = data.len() as f64;
                let h = param1 * (n.ln() / n).powf(1.0 / (2.0 + data.dim() as f64));
                build_kde_band(data, *kernel, h, DeltaSpec::Explicit(param2), support.clone())
            }
        }
    }
}

/// Outcome of one hyperparameter cell during holdout selection.
#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub param1: f64,
    pub param2: f64,
    /// Mean test-split cost, or `None` when the cell was skipped.
    pub score: Option<f64>,
}

/// Winning cell of a holdout pass.
#[derive(Clone, Debug)]
pub struct HoldoutChoice {
    pub param1: f64,
    pub param2: f64,
    pub x: Vec<f64>,
    pub lambda: f64,
    pub score: f64,
    pub cells: Vec<CellOutcome>,
}

/// 70/30 split by a seeded uniform permutation.
fn holdout_split(n: usize, stream: &SeedStream) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream.rng());
    let cut = (0.7 * n as f64).floor() as usize;
    let train = order[..cut].to_vec();
    let test = order[cut..].to_vec();
    (train, test)
}

fn solve_on_band(
    problem: &dyn Problem,
    band: &DensityBand,
    x0: Vec<f64>,
    train: &SampleSet,
    sgd: &SgdSettings,
    stream: &SeedStream,
) -> Result<crate::dro::SaddlePoint> {
    let lambda0 = dro::lambda_init(problem, &x0, train);
    let eta = match sgd.eta {
        Some(e) => e,
        None => dro::default_eta(problem, band, &x0, lambda0, &stream.derive_stream("eta")),
    };
    let cfg = SgdConfig { batch: sgd.batch, eta, iters: sgd.iters, x0, lambda0 };
    dro::sgd_solve(problem, band, &cfg, &stream.derive_stream("sgd"))
}

/// Pick the hyperparameter cell whose training-split decision attains the
/// smallest mean cost on the test split. The same split is reused across all
/// cells; cells whose band cannot be built are skipped.
pub fn holdout_select(
    data: &SampleSet,
    kind: &ProblemKind,
    band: &ResolvedBand,
    sgd: &SgdSettings,
    stream: &SeedStream,
) -> Result<HoldoutChoice> {
    if data.len() < 10 {
        return Err(Error::Experiment("holdout needs at least 10 points".into()));
    }
    let (train_idx, test_idx) = holdout_split(data.len(), &stream.derive_stream("split"));
    let train = data.subset(&train_idx)?;
    let test = data.subset(&test_idx)?;
    let problem = kind.problem();

    let mut best: Option<HoldoutChoice> = None;
    let mut cells = Vec::new();
    for (i, (param1, param2)) in band.cells().into_iter().enumerate() {
        let cell_stream = stream.derive_indexed("cell", i as u64);
        let built = band.build(&train, param1, param2, &cell_stream.derive_stream("band"));
        let outcome = match built {
            Err(e) => {
                log::debug!("cell ({param1}, {param2}) skipped: {e}");
                None
            }
            Ok(b) => {
                match solve_on_band(problem, &b, kind.initial_x(), &train, sgd, &cell_stream) {
                    Err(e) => {
                        log::debug!("cell ({param1}, {param2}) solver failed: {e}");
                        None
                    }
                    Ok(saddle) => {
                        let score = mean_cost(problem, &saddle.x, test.points());
                        Some((saddle, score))
                    }
                }
            }
        };
        cells.push(CellOutcome {
            param1,
            param2,
            score: outcome.as_ref().map(|(_, s)| *s),
        });
        if let Some((saddle, score)) = outcome {
            let better = best.as_ref().is_none_or(|b| score < b.score);
            if better {
                best = Some(HoldoutChoice {
                    param1,
                    param2,
                    x: saddle.x,
                    lambda: saddle.lambda,
                    score,
                    cells: Vec::new(),
                });
            }
        }
    }
    match best {
        Some(mut choice) => {
            choice.cells = cells;
            Ok(choice)
        }
        None => Err(Error::Experiment("every hyperparameter cell was skipped".into())),
    }
}

fn mean_cost(problem: &dyn Problem, x: &[f64], points: &[Vec<f64>]) -> f64 {
    points.iter().map(|p| problem.evaluate(x, p)).sum::<f64>() / points.len() as f64
}

/// One finished trial.
#[derive(Clone, Debug)]
pub struct TrialRow {
    pub size: usize,
    pub trial: usize,
    pub param1: f64,
    pub param2: f64,
    pub x: Vec<f64>,
    pub oos_cost: f64,
    pub wall_ms: u128,
}

/// Per-size summary: mean plus the 20th and 80th percentiles.
#[derive(Clone, Debug, PartialEq)]
pub struct SizeAggregate {
    pub size: usize,
    pub mean: f64,
    pub p20: f64,
    pub p80: f64,
}

#[derive(Clone, Debug)]
pub struct TrialFailure {
    pub size: usize,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub trials: Vec<TrialRow>,
    pub aggregates: Vec<SizeAggregate>,
    pub failures: Vec<TrialFailure>,
}

/// Linear-interpolation percentile of an unsorted slice, `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.len() == 1 {
        return v[0];
    }
    let h = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < v.len() {
        v[lo] * (1.0 - frac) + v[lo + 1] * frac
    } else {
        v[lo]
    }
}

/// Aggregate trial rows into per-size summaries. Pure and order-insensitive:
/// permuting the rows leaves the aggregates unchanged.
pub fn aggregate(rows: &[TrialRow]) -> Vec<SizeAggregate> {
    let mut by_size: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_size.entry(r.size).or_default().push(r.oos_cost);
    }
    by_size
        .into_iter()
        .map(|(size, costs)| SizeAggregate {
            size,
            mean: costs.iter().sum::<f64>() / costs.len() as f64,
            p20: percentile(&costs, 0.2),
            p80: percentile(&costs, 0.8),
        })
        .collect()
}

/// Run the full protocol: per size and trial, draw data, holdout-select, fit
/// on the full dataset, and score out of sample on fresh draws. Trials run in
/// parallel; per-trial failures are collected and only fatal when more than
/// a tenth of all trials fail.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let kind = ProblemKind::from_config(&cfg.problem, &cfg.density)?;
    let band = ResolvedBand::resolve(&cfg.band, &cfg.density)?;
    let root = SeedStream::new(cfg.seed).derive_stream(&cfg.name);

    let mut units: Vec<(usize, usize)> = Vec::new();
    for &size in &cfg.sizes {
        for trial in 0..cfg.trials {
            units.push((size, trial));
        }
    }

    let run_one = |&(size, trial): &(usize, usize)| -> (usize, usize, Result<TrialRow>) {
        let started = Instant::now();
        // Size enters the stream tree below the trial, and the dataset for a
        // given size is a prefix of the trial's master draw sequence: size
        // comparisons are paired (common random numbers across sizes).
        let trial_stream = root.derive_stream(&format!("trial{trial}"));
        let stream = trial_stream.derive_stream(&format!("size{size}"));
        let result = (|| {
            let mut rng = trial_stream.derive_stream("data").rng();
            let data = cfg.density.sample_set(size, &mut rng, cfg.seed)?;
            let choice =
                holdout_select(&data, &kind, &band, &cfg.sgd, &stream.derive_stream("holdout"))?;
            // Final fit on the full dataset with the winning cell.
            let final_stream = stream.derive_stream("final");
            let final_band = band.build(
                &data,
                choice.param1,
                choice.param2,
                &final_stream.derive_stream("band"),
            )?;
            let saddle = solve_on_band(
                kind.problem(),
                &final_band,
                kind.initial_x(),
                &data,
                &cfg.sgd,
                &final_stream,
            )?;
            let mut oos_rng = trial_stream.derive_stream("oos").rng();
            let mut total = 0.0;
            for _ in 0..cfg.n_large {
                total += kind.problem().evaluate(&saddle.x, &cfg.density.sample(&mut oos_rng));
            }
            Ok(TrialRow {
                size,
                trial,
                param1: choice.param1,
                param2: choice.param2,
                x: saddle.x,
                oos_cost: total / cfg.n_large as f64,
                wall_ms: started.elapsed().as_millis(),
            })
        })();
        (size, trial, result)
    };

    let outcomes: Vec<(usize, usize, Result<TrialRow>)> = match jobs {
        Some(1) => units.iter().map(run_one).collect(),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Experiment(format!("work pool: {e}")))?
            .install(|| units.par_iter().map(run_one).collect()),
        None => units.par_iter().map(run_one).collect(),
    };

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (size, trial, result) in outcomes {
        match result {
            Ok(row) => trials.push(row),
            Err(e) => {
                log::warn!("trial (size {size}, trial {trial}) failed: {e}");
                failures.push(TrialFailure { size, trial, message: e.to_string() });
            }
        }
    }
    trials.sort_by_key(|r| (r.size, r.trial));
    if failures.len() * 10 > units.len() {
        return Err(Error::Experiment(format!(
            "{} of {} trials failed",
            failures.len(),
            units.len()
        )));
    }
    let aggregates = aggregate(&trials);
    Ok(ExperimentOutput { trials, aggregates, failures })
}

/// Results CSV: `size,trial,param1,param2,x1..xn,oos_cost`.
pub fn write_trials_csv(mut w: impl Write, rows: &[TrialRow]) -> Result<()> {
    let dim = rows.first().map_or(1, |r| r.x.len());
    let xcols: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    writeln!(w, "size,trial,param1,param2,{},oos_cost", xcols.join(","))?;
    for r in rows {
        let xs: Vec<String> = r.x.iter().map(|v| format!("{v}")).collect();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.size,
            r.trial,
            r.param1,
            r.param2,
            xs.join(","),
            r.oos_cost
        )?;
    }
    Ok(())
}

/// Aggregate CSV: `size,mean,p20,p80`.
pub fn write_aggregates_csv(mut w: impl Write, rows: &[SizeAggregate]) -> Result<()> {
    writeln!(w, "size,mean,p20,p80")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.size, r.mean, r.p20, r.p80)?;
    }
    Ok(())
}

/// Chosen-hyperparameter log: `size,trial,param1,param2`.
pub fn write_choices_csv(mut w: impl Write, rows: &[TrialRow]) -> Result<()> {
    writeln!(w, "size,trial,param1,param2")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.size, r.trial, r.param1, r.param2)?;
    }
    Ok(())
}

/// Settings for the empirical check of the robust upper bound: across
/// trials, the robust value at the fitted decision should dominate the true
/// expected cost with frequency close to the band confidence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UpperBoundCheckConfig {
    pub problem: ProblemConfig,
    pub density: TrueDensity,
    pub n: usize,
    pub alpha: f64,
    pub group_size: usize,
    /// Density cap used for the band (defaults to 1.25x the true peak).
    pub cap: Option<f64>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_tabulate_cells")]
    pub tabulate_cells: usize,
    pub sgd: SgdSettings,
    pub trials: usize,
    pub n_large: usize,
    pub oracle_cells: usize,
    pub seed: u64,
}

/// Frequency of `robust value at x_hat >= true expected cost of x_hat` over
/// seeded trials, using the exact (untabulated) band in the oracle.
pub fn probabilistic_upper_bound_check(cfg: &UpperBoundCheckConfig) -> Result<f64> {
    let kind = ProblemKind::from_config(&cfg.problem, &cfg.density)?;
    let support = cfg.density.support()?;
    if support.dim() != 1 {
        return Err(Error::invalid("the upper-bound check is univariate"));
    }
    let params = SrParams {
        a: support.lower()[0],
        b: support.upper()[0],
        mode: cfg.density.mode()[0],
        cap: cfg.cap.unwrap_or(1.25 * cfg.density.peak()),
        alpha: cfg.alpha,
        group_size: cfg.group_size,
        mc_samples: cfg.mc_samples,
    };
    let root = SeedStream::new(cfg.seed).derive_stream("upper-bound-check");

    let hits: Vec<Result<bool>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let stream = root.derive_indexed("trial", trial as u64);
            let mut rng = stream.derive_stream("data").rng();
            let data = cfg.density.sample_set(cfg.n, &mut rng, cfg.seed)?;
            let band = build_sr_band(&data, &params, &stream.derive_stream("band"))?;
            let table = band.tabulate(cfg.tabulate_cells)?;
            let saddle = solve_on_band(
                kind.problem(),
                &table,
                kind.initial_x(),
                &data,
                &cfg.sgd,
                &stream,
            )?;
            let robust =
                crate::oracle::robust_value_oracle(kind.problem(), &band, &saddle.x, cfg.oracle_cells)?;
            let mut oos_rng = stream.derive_stream("oos").rng();
            let mut total = 0.0;
            for _ in 0..cfg.n_large {
                total += kind.problem().evaluate(&saddle.x, &cfg.density.sample(&mut oos_rng));
            }
            let truth = total / cfg.n_large as f64;
            Ok(robust >= truth)
        })
        .collect();

    let mut covered = 0usize;
    for h in hits {
        if h? {
            covered += 1;
        }
    }
    Ok(covered as f64 / cfg.trials as f64)
}
