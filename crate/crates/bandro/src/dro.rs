//! The saddle solver: dual objective of the worst-case expectation,
//! stochastic subgradients, and projected SGD with weighted iterate
//! averaging.
//!
//! The worst-case expectation over the band ambiguity set dualizes to
//!
//! ```text
//! F(x, lambda) = lambda - int l(xi) (f(x,xi) - lambda)_- dxi
//!                       + int u(xi) (f(x,xi) - lambda)_+ dxi
//! ```
//!
//! which is jointly convex in `(x, lambda)` and is minimized directly. The
//! integrals are estimated by uniform sampling over the band's support box;
//! a point with `f(x, xi) == lambda` exactly is charged to the `u` side.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::band::DensityBand;
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::rng::SeedStream;
use crate::sample::SampleSet;
use crate::scalar::Real;

/// Projected-SGD settings.
#[derive(Clone, Debug)]
pub struct SgdConfig {
    /// Minibatch size `B >= 1`.
    pub batch: usize,
    /// Step scale: the step at iteration `k` is `eta / sqrt(k + 1)`.
    pub eta: f64,
    /// Iteration budget.
    pub iters: usize,
    /// Initial decision (projected onto the feasible set on entry).
    pub x0: Vec<f64>,
    /// Initial dual value; see [`lambda_init`].
    pub lambda0: f64,
}

impl SgdConfig {
    fn validate(&self, problem: &dyn Problem) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.eta <= 0.0 || self.eta.is_nan() {
            return Err(Error::invalid(format!("step scale must be positive, got {}", self.eta)));
        }
        if self.iters == 0 {
            return Err(Error::invalid("iteration budget must be at least 1"));
        }
        if self.x0.len() != problem.dim_x() {
            return Err(Error::invalid(format!(
                "x0 has dimension {}, problem needs {}",
                self.x0.len(),
                problem.dim_x()
            )));
        }
        Ok(())
    }
}

/// One diagnostic record per iteration.
#[derive(Clone, Copy, Debug)]
pub struct IterRecord {
    pub iter: usize,
    /// Minibatch estimate of `F(x_k, lambda_k)`.
    pub f_hat: f64,
    pub lambda: f64,
    pub step: f64,
}

/// Weighted-average saddle iterate plus the per-iterate diagnostics.
#[derive(Clone, Debug)]
pub struct SaddlePoint {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub history: Vec<IterRecord>,
}

/// Default dual start: the sample mean of `f(x0, xi)` over the data, which
/// puts `lambda` in the range of attained costs.
pub fn lambda_init(problem: &dyn Problem, x0: &[f64], data: &SampleSet) -> f64 {
    let total: f64 = data.points().iter().map(|p| problem.evaluate(x0, p)).sum();
    total / data.len() as f64
}

/// Default step scale `0.1 * (|F_hat(x0, lambda0)| + 1) / |I|`, a crude
/// normalization by problem scale; experiments override it explicitly.
pub fn default_eta(
    problem: &dyn Problem,
    band: &DensityBand,
    x0: &[f64],
    lambda0: f64,
    stream: &SeedStream,
) -> f64 {
    let mut rng = stream.rng();
    let volume = band.support().volume();
    let (_, _, f_hat) = minibatch(problem, band, x0, lambda0, 256, &mut rng);
    0.1 * (f_hat.abs() + 1.0) / volume
}

fn sample_uniform(band: &DensityBand, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let b = band.support();
    for (k, v) in out.iter_mut().enumerate() {
        *v = b.lower()[k] + rng.gen::<f64>() * b.width(k);
    }
}

/// One minibatch: returns `(g_x, g_lambda, F_hat)` where the gradients
/// are the importance-weighted sums of the algorithm and `F_hat` is the
/// matching objective estimate.
fn minibatch(
    problem: &dyn Problem,
    band: &DensityBand,
    x: &[f64],
    lambda: f64,
    batch: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64, f64) {
    let n = problem.dim_x();
    let volume = band.support().volume();
    let mut g_x = vec![0.0; n];
    let mut sub = vec![0.0; n];
    let mut xi = vec![0.0; band.dim()];
    let mut mass = 0.0;
    let mut f_acc = 0.0;
    for _ in 0..batch {
        sample_uniform(band, rng, &mut xi);
        let (l, u) = band.eval(&xi);
        let f = problem.evaluate(x, &xi);
        // Ties f == lambda fall on the u branch.
        let w = if f >= lambda { u } else { l };
        if w != 0.0 {
            problem.subgradient(x, &xi, &mut sub);
            for (g, s) in g_x.iter_mut().zip(&sub) {
                *g += w * s;
            }
            mass += w;
            f_acc += w * (f - lambda);
        }
    }
    let scale = volume / batch as f64;
    for g in g_x.iter_mut() {
        *g *= scale;
    }
    let g_lambda = 1.0 - mass * scale;
    let f_hat = lambda + f_acc * scale;
    (g_x, g_lambda, f_hat)
}

/// Minibatch stochastic subgradient of `F` at `(x, lambda)`.
pub fn stochastic_subgradient(
    problem: &dyn Problem,
    band: &DensityBand,
    x: &[f64],
    lambda: f64,
    batch: usize,
    stream: &SeedStream,
) -> (Vec<f64>, f64) {
    let mut rng = stream.rng();
    let (g_x, g_lambda, _) = minibatch(problem, band, x, lambda, batch, &mut rng);
    (g_x, g_lambda)
}

const DIVERGENCE_GUARD: f64 = 1e9;

/// Projected SGD on `F(x, lambda)` with weighted iterate averaging.
///
/// Runs exactly `cfg.iters` iterations; `x` steps are projected through the
/// problem, `lambda` descends unconstrained. The returned point is the
/// step-size-weighted average of the visited iterates, so it is feasible by
/// convexity. Deterministic for a fixed stream.
pub fn sgd_solve(
    problem: &dyn Problem,
    band: &DensityBand,
    cfg: &SgdConfig,
    stream: &SeedStream,
) -> Result<SaddlePoint> {
    cfg.validate(problem)?;
    let mut rng = stream.rng();
    let n = problem.dim_x();
    let mut x = cfg.x0.clone();
    problem.project(&mut x);
    let mut lambda = cfg.lambda0;
    let mut avg_x = vec![0.0; n];
    let mut avg_lambda = 0.0;
    let mut weight_sum = 0.0;
    let mut history = Vec::with_capacity(cfg.iters);

    for k in 0..cfg.iters {
        let step = cfg.eta / ((k + 1) as f64).sqrt();
        // Averages include the current iterate before it moves.
        weight_sum += step;
        for (a, v) in avg_x.iter_mut().zip(&x) {
            *a += step * v;
        }
        avg_lambda += step * lambda;

        let (g_x, g_lambda, f_hat) = minibatch(problem, band, &x, lambda, cfg.batch, &mut rng);
        history.push(IterRecord { iter: k, f_hat, lambda, step });

        for (v, g) in x.iter_mut().zip(&g_x) {
            *v -= step * g;
        }
        problem.project(&mut x);
        lambda -= step * g_lambda;

        if lambda.abs() > DIVERGENCE_GUARD || x.iter().any(|v| v.abs() > DIVERGENCE_GUARD) {
            return Err(Error::Divergence(format!(
                "iterate escaped at iteration {k}: |lambda| = {:.3e}",
                lambda.abs()
            )));
        }
    }

    Ok(SaddlePoint {
        x: avg_x.iter().map(|v| v / weight_sum).collect(),
        lambda: avg_lambda / weight_sum,
        history,
    })
}

/// Deterministic quadrature estimate of `F(x, lambda)` by the tensor
/// midpoint rule with `cells_per_axis` cells (1-D and 2-D supports). Used for
/// diagnostics and verification, never inside the SGD loop.
pub fn dual_objective(
    x: &[f64],
    lambda: f64,
    band: &DensityBand,
    problem: &dyn Problem,
    cells_per_axis: usize,
) -> Result<f64> {
    if cells_per_axis < 100 {
        return Err(Error::invalid("need at least 100 quadrature cells per axis"));
    }
    if band.dim() > 2 {
        return Err(Error::invalid(
            "tensor quadrature supports 1-D/2-D; use dual_objective_mc instead",
        ));
    }
    let (value, _) = quadrature_terms(x, lambda, band, problem, cells_per_axis);
    Ok(value)
}

/// Monte Carlo estimate of `F(x, lambda)` for higher-dimensional supports.
pub fn dual_objective_mc(
    x: &[f64],
    lambda: f64,
    band: &DensityBand,
    problem: &dyn Problem,
    samples: usize,
    stream: &SeedStream,
) -> f64 {
    let mut rng = stream.rng();
    let (_, _, f_hat) = minibatch(problem, band, x, lambda, samples, &mut rng);
    f_hat
}

/// Midpoint-rule value of `F(x, lambda)` plus the deterministic subgradient
/// `(g_x, g_lambda)` on the same grid.
pub fn quadrature_dual(
    x: &[f64],
    lambda: f64,
    band: &DensityBand,
    problem: &dyn Problem,
    cells_per_axis: usize,
) -> (f64, Vec<f64>, f64) {
    let (value, (g_x, g_lambda)) = quadrature_terms(x, lambda, band, problem, cells_per_axis);
    (value, g_x, g_lambda)
}

fn quadrature_terms(
    x: &[f64],
    lambda: f64,
    band: &DensityBand,
    problem: &dyn Problem,
    cells_per_axis: usize,
) -> (f64, (Vec<f64>, f64)) {
    let support = band.support();
    let m = support.dim();
    let total = cells_per_axis.pow(m as u32);
    let weight = support.volume() / total as f64;
    let n = problem.dim_x();
    let mut value = lambda;
    let mut g_x = vec![0.0; n];
    let mut g_mass = 0.0;
    let mut sub = vec![0.0; n];
    let mut idx = vec![0usize; m];
    let mut mid = vec![0.0; m];
    for _ in 0..total {
        for k in 0..m {
            let w = support.width(k) / cells_per_axis as f64;
            mid[k] = support.lower()[k] + (idx[k] as f64 + 0.5) * w;
        }
        let (l, u) = band.eval(&mid);
        let f = problem.evaluate(x, &mid);
        let w = if f >= lambda { u } else { l };
        if w != 0.0 {
            value += w * (f - lambda) * weight;
            problem.subgradient(x, &mid, &mut sub);
            for (g, s) in g_x.iter_mut().zip(&sub) {
                *g += w * s * weight;
            }
            g_mass += w * weight;
        }
        for k in (0..m).rev() {
            idx[k] += 1;
            if idx[k] < cells_per_axis {
                break;
            }
            idx[k] = 0;
        }
    }
    (value, (g_x, 1.0 - g_mass))
}

/// Exact minimizer of the quadrature dual over `lambda` at fixed `x`.
///
/// On the midpoint grid, `F(x, .)` is convex piecewise linear with breaks at
/// the attained cost values; the minimum sits at the smallest break where the
/// right-hand slope `1 - sum_{f <= lambda} l w - sum_{f > lambda} u w` turns
/// nonnegative.
pub fn min_lambda_dual(
    x: &[f64],
    band: &DensityBand,
    problem: &dyn Problem,
    cells_per_axis: usize,
) -> Result<(f64, f64)> {
    if cells_per_axis < 100 {
        return Err(Error::invalid("need at least 100 quadrature cells per axis"));
    }
    if band.dim() > 2 {
        return Err(Error::invalid("tensor quadrature supports 1-D/2-D supports"));
    }
    let support = band.support();
    let m = support.dim();
    let total = cells_per_axis.pow(m as u32);
    let weight = support.volume() / total as f64;
    let mut cells: Vec<(f64, f64, f64)> = Vec::with_capacity(total); // (f, l, u)
    let mut idx = vec![0usize; m];
    let mut mid = vec![0.0; m];
    for _ in 0..total {
        for k in 0..m {
            let w = support.width(k) / cells_per_axis as f64;
            mid[k] = support.lower()[k] + (idx[k] as f64 + 0.5) * w;
        }
        let (l, u) = band.eval(&mid);
        cells.push((problem.evaluate(x, &mid), l, u));
        for k in (0..m).rev() {
            idx[k] += 1;
            if idx[k] < cells_per_axis {
                break;
            }
            idx[k] = 0;
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mass_u: f64 = cells.iter().map(|c| c.2).sum::<f64>() * weight;
    if mass_u < 1.0 - 1e-9 {
        return Err(Error::InfeasibleBand(format!(
            "upper band mass {mass_u:.6} cannot reach one; the dual is unbounded below"
        )));
    }
    // Sweep lambda through the attained costs, tracking the right slope.
    let mut mass_low = 0.0; // sum of l w over f <= lambda
    let mut mass_high = mass_u; // sum of u w over f > lambda
    let mut best_lambda = cells[0].0;
    let mut i = 0;
    while i < cells.len() {
        // Move all ties at this cost value across the threshold together.
        let f = cells[i].0;
        while i < cells.len() && cells[i].0 == f {
            mass_low += cells[i].1 * weight;
            mass_high -= cells[i].2 * weight;
            i += 1;
        }
        best_lambda = f;
        if 1.0 - mass_low - mass_high >= 0.0 {
            break;
        }
    }
    let value = dual_objective(x, best_lambda, band, problem, cells_per_axis)?;
    Ok((best_lambda, value))
}

/// Euclidean projection onto the probability simplex by sort-and-threshold.
pub fn project_simplex<T: Real>(w: &mut [T]) {
    let n = w.len();
    if n == 0 {
        return;
    }
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // The indices with v > (cumsum - 1)/j form a prefix; theta comes from the
    // last of them.
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (j, &v) in sorted.iter().enumerate() {
        cumsum = cumsum + v;
        let candidate = (cumsum - T::one()) / T::from_usize(j + 1).unwrap();
        if v - candidate > T::zero() {
            theta = candidate;
        } else {
            break;
        }
    }
    for v in w.iter_mut() {
        *v = (*v - theta).max(T::zero());
    }
}
