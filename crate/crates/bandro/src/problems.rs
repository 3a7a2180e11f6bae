//! Concrete cost models and synthetic ground-truth distributions for the two
//! case studies: a single-item newsvendor and a mean-CVaR portfolio.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta as BetaDist, Continuous, ContinuousCDF, Normal as NormalDist};

use crate::dro::project_simplex;
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::SupportBox;

/// Single-item newsvendor: order `x` before demand `xi` arrives; unmet demand
/// costs `shortage_cost` per unit, surplus costs `holding_cost` per unit.
/// Feasible orders are `[0, order_cap]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Newsvendor {
    pub shortage_cost: f64,
    pub holding_cost: f64,
    pub order_cap: f64,
}

impl Newsvendor {
    pub fn new(shortage_cost: f64, holding_cost: f64, order_cap: f64) -> Result<Newsvendor> {
        if shortage_cost <= 0.0 || holding_cost <= 0.0 || order_cap <= 0.0 {
            return Err(Error::invalid("newsvendor costs and order cap must be positive"));
        }
        Ok(Newsvendor { shortage_cost, holding_cost, order_cap })
    }

    /// Critical quantile `c_s / (c_s + c_h)` of the classical solution.
    pub fn critical_ratio(&self) -> f64 {
        self.shortage_cost / (self.shortage_cost + self.holding_cost)
    }
}

impl Problem for Newsvendor {
    fn dim_x(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &[f64], xi: &[f64]) -> f64 {
        (self.shortage_cost * (xi[0] - x[0])).max(self.holding_cost * (x[0] - xi[0]))
    }

    fn subgradient(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        // Ties take the shortage branch.
        let shortage = self.shortage_cost * (xi[0] - x[0]);
        let holding = self.holding_cost * (x[0] - xi[0]);
        out[0] = if shortage >= holding { -self.shortage_cost } else { self.holding_cost };
    }

    fn project(&self, x: &mut [f64]) {
        x[0] = x[0].clamp(0.0, self.order_cap);
    }
}

/// Mean-CVaR portfolio over `assets` securities: the decision is
/// `x = (w, beta)` with weights on the probability simplex and the CVaR
/// threshold `beta` free. The cost is the Rockafellar-Uryasev hinge form of
/// `-w.xi + risk_aversion * CVaR_eps(-w.xi)` written as a max of two affine
/// functions of `xi`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Portfolio {
    pub assets: usize,
    /// CVaR tail level `eps` in (0, 1).
    pub cvar_level: f64,
    /// Risk-aversion weight `gamma > 0`.
    pub risk_aversion: f64,
}

impl Portfolio {
    pub fn new(assets: usize, cvar_level: f64, risk_aversion: f64) -> Result<Portfolio> {
        if assets == 0 {
            return Err(Error::invalid("portfolio needs at least one asset"));
        }
        if !(0.0 < cvar_level && cvar_level < 1.0) {
            return Err(Error::invalid("CVaR level must lie in (0, 1)"));
        }
        if risk_aversion <= 0.0 {
            return Err(Error::invalid("risk aversion must be positive"));
        }
        Ok(Portfolio { assets, cvar_level, risk_aversion })
    }

    fn branches(&self, x: &[f64], xi: &[f64]) -> (f64, f64) {
        let w_dot: f64 = x[..self.assets].iter().zip(xi).map(|(w, r)| w * r).sum();
        let beta = x[self.assets];
        let g = self.risk_aversion;
        let e = self.cvar_level;
        let first = -w_dot + g * beta;
        let second = -(1.0 + g / e) * w_dot + g * (1.0 - 1.0 / e) * beta;
        (first, second)
    }
}

impl Problem for Portfolio {
    fn dim_x(&self) -> usize {
        self.assets + 1
    }

    fn evaluate(&self, x: &[f64], xi: &[f64]) -> f64 {
        let (first, second) = self.branches(x, xi);
        first.max(second)
    }

    fn subgradient(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        let (first, second) = self.branches(x, xi);
        let g = self.risk_aversion;
        let e = self.cvar_level;
        // Ties take the larger-index branch.
        if second >= first {
            for (o, r) in out[..self.assets].iter_mut().zip(xi) {
                *o = -(1.0 + g / e) * r;
            }
            out[self.assets] = g * (1.0 - 1.0 / e);
        } else {
            for (o, r) in out[..self.assets].iter_mut().zip(xi) {
                *o = -r;
            }
            out[self.assets] = g;
        }
    }

    fn project(&self, x: &mut [f64]) {
        project_simplex(&mut x[..self.assets]);
        // beta is unconstrained.
    }
}

/// Ground-truth distributions the experiments sample from; each knows its
/// density, support, mode and peak value analytically.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrueDensity {
    /// Normal(mean, sd) conditioned on `[lo, hi]`.
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
    /// `lo + (hi - lo) * Beta(alpha, beta)`.
    ScaledBeta { alpha: f64, beta: f64, lo: f64, hi: f64 },
    /// Exponential with the given mean conditioned on `[lo, hi]`.
    TruncatedExponential { mean: f64, lo: f64, hi: f64 },
    /// Asset returns `xi_i = phi + zeta_i` with a shared factor
    /// `phi ~ N(0, 0.02)` and idiosyncratic `zeta_i ~ N(0.03 i, 0.025 i)`
    /// (standard deviations).
    FactorNormal { assets: usize },
}

const FACTOR_SD: f64 = 0.02;
const FACTOR_MEAN_STEP: f64 = 0.03;
const FACTOR_SD_STEP: f64 = 0.025;

impl TrueDensity {
    pub fn dim(&self) -> usize {
        match self {
            TrueDensity::FactorNormal { assets } => *assets,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            TrueDensity::TruncatedNormal { sd, lo, hi, .. } => {
                if sd <= 0.0 || lo >= hi {
                    return Err(Error::invalid("truncated normal needs sd > 0 and lo < hi"));
                }
            }
            TrueDensity::ScaledBeta { alpha, beta, lo, hi } => {
                if alpha <= 1.0 || beta <= 1.0 || lo >= hi {
                    return Err(Error::invalid(
                        "scaled beta needs shape parameters above one and lo < hi",
                    ));
                }
            }
            TrueDensity::TruncatedExponential { mean, lo, hi } => {
                if mean <= 0.0 || lo >= hi {
                    return Err(Error::invalid("truncated exponential needs mean > 0 and lo < hi"));
                }
            }
            TrueDensity::FactorNormal { assets } => {
                if assets == 0 {
                    return Err(Error::invalid("factor model needs at least one asset"));
                }
            }
        }
        Ok(())
    }

    /// Support box. The factor model is unbounded; its box is the
    /// conservative 4.5-sigma range a practitioner would declare, not a
    /// truncation of the sampler.
    pub fn support(&self) -> Result<SupportBox> {
        self.validate()?;
        match *self {
            TrueDensity::TruncatedNormal { lo, hi, .. }
            | TrueDensity::ScaledBeta { lo, hi, .. }
            | TrueDensity::TruncatedExponential { lo, hi, .. } => SupportBox::interval(lo, hi),
            TrueDensity::FactorNormal { assets } => {
                let mut lower = Vec::with_capacity(assets);
                let mut upper = Vec::with_capacity(assets);
                for i in 1..=assets {
                    let mean = FACTOR_MEAN_STEP * i as f64;
                    let sd = Self::asset_sd(i);
                    lower.push(mean - 4.5 * sd);
                    upper.push(mean + 4.5 * sd);
                }
                SupportBox::new(lower, upper)
            }
        }
    }

    fn asset_sd(i: usize) -> f64 {
        (FACTOR_SD * FACTOR_SD + (FACTOR_SD_STEP * i as f64).powi(2)).sqrt()
    }

    /// Location of the density maximum.
    pub fn mode(&self) -> Vec<f64> {
        match *self {
            TrueDensity::TruncatedNormal { mean, lo, hi, .. } => vec![mean.clamp(lo, hi)],
            TrueDensity::ScaledBeta { alpha, beta, lo, hi } => {
                vec![lo + (hi - lo) * (alpha - 1.0) / (alpha + beta - 2.0)]
            }
            TrueDensity::TruncatedExponential { lo, .. } => vec![lo],
            TrueDensity::FactorNormal { assets } => {
                (1..=assets).map(|i| FACTOR_MEAN_STEP * i as f64).collect()
            }
        }
    }

    /// Peak density value `p(mode)`.
    pub fn peak(&self) -> f64 {
        self.density(&self.mode())
    }

    /// Density value at `xi` (zero outside the truncation interval for the
    /// univariate families).
    pub fn density(&self, xi: &[f64]) -> f64 {
        match *self {
            TrueDensity::TruncatedNormal { mean, sd, lo, hi } => {
                let x = xi[0];
                if x < lo || x > hi {
                    return 0.0;
                }
                let base = NormalDist::new(mean, sd).expect("validated");
                base.pdf(x) / (base.cdf(hi) - base.cdf(lo))
            }
            TrueDensity::ScaledBeta { alpha, beta, lo, hi } => {
                let x = xi[0];
                if x < lo || x > hi {
                    return 0.0;
                }
                let u = (x - lo) / (hi - lo);
                BetaDist::new(alpha, beta).expect("validated").pdf(u) / (hi - lo)
            }
            TrueDensity::TruncatedExponential { mean, lo, hi } => {
                let x = xi[0];
                if x < lo || x > hi {
                    return 0.0;
                }
                let rate = 1.0 / mean;
                rate * (-(x - lo) * rate).exp() / (1.0 - (-(hi - lo) * rate).exp())
            }
            TrueDensity::FactorNormal { assets } => {
                let means: Vec<f64> = (1..=assets).map(|i| FACTOR_MEAN_STEP * i as f64).collect();
                let mut cov = vec![vec![FACTOR_SD * FACTOR_SD; assets]; assets];
                for (i, row) in cov.iter_mut().enumerate() {
                    row[i] += (FACTOR_SD_STEP * (i + 1) as f64).powi(2);
                }
                mvn_density(&means, &cov, xi)
            }
        }
    }

    /// Draw one observation.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match *self {
            TrueDensity::TruncatedNormal { mean, sd, lo, hi } => {
                // Inverse CDF restricted to [lo, hi].
                let base = NormalDist::new(mean, sd).expect("validated");
                let (clo, chi) = (base.cdf(lo), base.cdf(hi));
                let u: f64 = rng.gen();
                vec![base.inverse_cdf(clo + u * (chi - clo))]
            }
            TrueDensity::ScaledBeta { alpha, beta, lo, hi } => {
                let b = rand_distr::Beta::new(alpha, beta).expect("validated");
                vec![lo + (hi - lo) * b.sample(rng)]
            }
            TrueDensity::TruncatedExponential { mean, lo, hi } => {
                // Inverse CDF of the exponential conditioned on [lo, hi].
                let rate = 1.0 / mean;
                let tail = 1.0 - (-(hi - lo) * rate).exp();
                let u: f64 = rng.gen();
                vec![lo - (1.0 - u * tail).ln() / rate]
            }
            TrueDensity::FactorNormal { assets } => {
                let std = rand_distr::StandardNormal;
                let phi: f64 = <rand_distr::StandardNormal as Distribution<f64>>::sample(&std, rng)
                    * FACTOR_SD;
                (1..=assets)
                    .map(|i| {
                        let z: f64 =
                            <rand_distr::StandardNormal as Distribution<f64>>::sample(&std, rng);
                        phi + FACTOR_MEAN_STEP * i as f64 + FACTOR_SD_STEP * i as f64 * z
                    })
                    .collect()
            }
        }
    }

    /// Draw a whole dataset.
    pub fn sample_set(&self, n: usize, rng: &mut ChaCha8Rng, seed: u64) -> Result<crate::SampleSet> {
        self.validate()?;
        let points = (0..n).map(|_| self.sample(rng)).collect();
        crate::SampleSet::new(points, seed)
    }

    /// Largest slope magnitude of a univariate density, the Lipschitz
    /// (Holder rho = 1) constant used by the theoretical band half-width.
    pub fn lipschitz(&self) -> Option<f64> {
        match *self {
            TrueDensity::TruncatedNormal { mean, sd, lo, hi } => {
                // |p'(x)| = |x - mean|/sd^2 * p(x), maximized at one sd from
                // the mean or at the truncation boundary.
                let candidates = [mean - sd, mean + sd, lo, hi];
                let slope = |x: f64| {
                    if x < lo || x > hi {
                        0.0
                    } else {
                        (x - mean).abs() / (sd * sd) * self.density(&[x])
                    }
                };
                Some(candidates.iter().cloned().map(slope).fold(0.0, f64::max))
            }
            TrueDensity::TruncatedExponential { mean, .. } => Some(self.peak() / mean),
            TrueDensity::ScaledBeta { alpha, beta, lo, hi } => {
                // Fine-grid maximum of the analytic derivative.
                let b = BetaDist::new(alpha, beta).expect("validated");
                let w = hi - lo;
                let n = 20_000;
                let mut worst = 0.0f64;
                for i in 1..n {
                    let u = i as f64 / n as f64;
                    // d/dx [pdf(u)/w] with u = (x-lo)/w.
                    let d = b.pdf(u) * ((alpha - 1.0) / u - (beta - 1.0) / (1.0 - u)) / (w * w);
                    worst = worst.max(d.abs());
                }
                Some(worst)
            }
            TrueDensity::FactorNormal { .. } => None,
        }
    }
}

/// Density of a multivariate normal via a small in-place Cholesky solve.
#[allow(clippy::needless_range_loop)]
fn mvn_density(mean: &[f64], cov: &[Vec<f64>], xi: &[f64]) -> f64 {
    let n = mean.len();
    debug_assert_eq!(xi.len(), n);
    // Cholesky factor L with cov = L L^T.
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = cov[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                debug_assert!(s > 0.0, "covariance must be positive definite");
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // Solve L y = xi - mean and accumulate the quadratic form.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = xi[i] - mean[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let quad: f64 = y.iter().map(|v| v * v).sum();
    let log_det: f64 = (0..n).map(|i| l[i][i].ln()).sum::<f64>() * 2.0;
    let log_norm = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
    (log_norm - 0.5 * quad).exp()
}
