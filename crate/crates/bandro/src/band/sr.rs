//! Shape-restricted confidence band for a unimodal univariate density.
//!
//! Construction: sort the sample, split it into groups of size `K`, and
//! bracket every group's probability mass between two constants `(c-, c+)`
//! calibrated by Monte Carlo so that all group masses fall inside the bracket
//! jointly with probability at least `1 - alpha`. The band value at a point
//! is then the min/max density value at that point over all piecewise-constant
//! unimodal densities that obey the mass brackets, the cap `U` and total mass
//! one — two small linear programs per query point.

use std::sync::atomic::{AtomicBool, Ordering};

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::band::DensityBand;
use crate::error::{Error, Result};
use crate::lp::{self, LpStatus};
use crate::rng::SeedStream;
use crate::sample::SampleSet;
use crate::{LpProblem, SupportBox};

/// Inputs for [`build_sr_band`].
#[derive(Clone, Debug)]
pub struct SrParams {
    /// Support interval `[a, b]` containing all data.
    pub a: f64,
    pub b: f64,
    /// Known mode location in `[a, b]` (`a` for decreasing, `b` for
    /// increasing densities).
    pub mode: f64,
    /// Known density cap `U > 0`.
    pub cap: f64,
    /// Significance level in (0, 1); coverage is `1 - alpha`.
    pub alpha: f64,
    /// Group size `K`, `1 <= K < N`.
    pub group_size: usize,
    /// Monte Carlo replicates used to calibrate the mass bracket.
    pub mc_samples: usize,
}

/// Precomputed state of a shape-restricted band.
#[derive(Debug)]
pub struct SrBandState {
    support: SupportBox,
    a: f64,
    b: f64,
    mode: f64,
    cap: f64,
    alpha: f64,
    group_size: usize,
    mc_samples: usize,
    /// Strictly increasing order statistics (ties nudged apart).
    sorted: Vec<f64>,
    /// Group anchor ranks `k_i` (1-based) and their sample values.
    anchor_ranks: Vec<usize>,
    anchors: Vec<f64>,
    c_minus: f64,
    c_plus: f64,
    degenerate_warned: AtomicBool,
}

/// Group count `M = ceil(n / k)` and full-group count `M' = floor(n / k)`.
fn group_counts(n: usize, k: usize) -> (usize, usize) {
    (n.div_ceil(k), n / k)
}

/// Draw one replicate of the group-mass vector via independent gamma
/// variates: full groups contribute `Gamma(K, 1)`, the ragged tail group
/// `Gamma(N - K*M', 1)`, and the denominator is the total plus one extra unit
/// exponential, so every coordinate is a positive ratio below the sum.
pub fn sample_group_mass_vector(n: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let (m, m_full) = group_counts(n, k);
    let full = Gamma::new(k as f64, 1.0).expect("valid gamma shape");
    let unit = Gamma::new(1.0, 1.0).expect("valid gamma shape");
    let mut numerators = Vec::with_capacity(m);
    for _ in 0..m_full {
        numerators.push(full.sample(rng));
    }
    if m != m_full {
        let tail_shape = (n - k * m_full) as f64;
        numerators.push(Gamma::new(tail_shape, 1.0).expect("valid gamma shape").sample(rng));
    }
    let denom: f64 = numerators.iter().sum::<f64>() + unit.sample(rng);
    numerators.iter_mut().for_each(|v| *v /= denom);
    numerators
}

/// Monte Carlo estimate of the joint mass bracket `(c-, c+)`.
///
/// Starts from the `alpha/2` quantile of per-replicate minima and the
/// `1 - alpha/2` quantile of per-replicate maxima, then widens both ends one
/// order statistic at a time until the joint empirical coverage on the same
/// replicates reaches `1 - alpha`.
pub fn estimate_c_bounds(
    n: usize,
    group_size: usize,
    alpha: f64,
    mc_samples: usize,
    stream: &SeedStream,
) -> Result<(f64, f64)> {
    if group_size == 0 || group_size >= n {
        return Err(Error::invalid(format!(
            "group size must satisfy 1 <= K < N, got K={group_size}, N={n}"
        )));
    }
    if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if mc_samples < 1000 {
        return Err(Error::invalid("need at least 1000 Monte Carlo replicates"));
    }

    let mut rng = stream.rng();
    let mut mins = Vec::with_capacity(mc_samples);
    let mut maxs = Vec::with_capacity(mc_samples);
    for _ in 0..mc_samples {
        let v = sample_group_mass_vector(n, group_size, &mut rng);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for d in v {
            lo = lo.min(d);
            hi = hi.max(d);
        }
        mins.push(lo);
        maxs.push(hi);
    }
    let mut sorted_mins = mins.clone();
    let mut sorted_maxs = maxs.clone();
    sorted_mins.sort_by(f64::total_cmp);
    sorted_maxs.sort_by(f64::total_cmp);

    let s = mc_samples;
    let mut i_lo = ((alpha / 2.0) * s as f64).floor() as usize;
    let mut i_hi = (((1.0 - alpha / 2.0) * s as f64).ceil() as usize).min(s - 1);
    let target = 1.0 - alpha;
    loop {
        let c_minus = sorted_mins[i_lo];
        let c_plus = sorted_maxs[i_hi];
        let covered = mins
            .iter()
            .zip(&maxs)
            .filter(|(lo, hi)| **lo >= c_minus && **hi <= c_plus)
            .count();
        if covered as f64 / s as f64 >= target || (i_lo == 0 && i_hi == s - 1) {
            return Ok((c_minus, c_plus));
        }
        i_lo = i_lo.saturating_sub(1);
        i_hi = (i_hi + 1).min(s - 1);
    }
}

/// Group size rule `K(N, c) = min(ceil(c (N^2 ln N)^(1/3)), N - 1)`.
pub fn group_size_rule(n: usize, c: f64) -> usize {
    let k = (c * ((n * n) as f64 * (n as f64).ln()).cbrt()).ceil() as usize;
    k.clamp(1, n.saturating_sub(1).max(1))
}

/// Build a shape-restricted band from univariate data.
pub fn build_sr_band(
    data: &SampleSet,
    params: &SrParams,
    stream: &SeedStream,
) -> Result<DensityBand> {
    if data.dim() != 1 {
        return Err(Error::Band("shape-restricted bands are univariate".into()));
    }
    let SrParams { a, b, mode, cap, alpha, group_size, mc_samples } = *params;
    if a >= b || a.is_nan() || b.is_nan() {
        return Err(Error::Band(format!("need a < b, got [{a}, {b}]")));
    }
    if !(a..=b).contains(&mode) {
        return Err(Error::Band(format!("mode {mode} outside [{a}, {b}]")));
    }
    if cap <= 0.0 {
        return Err(Error::Band(format!("density cap must be positive, got {cap}")));
    }
    let values = data.values()?;
    if values.iter().any(|v| *v < a || *v > b) {
        return Err(Error::Band("data point outside the declared support".into()));
    }
    let n = values.len();
    if group_size == 0 || group_size >= n {
        return Err(Error::Band(format!(
            "group size must satisfy 1 <= K < N, got K={group_size}, N={n}"
        )));
    }

    let sorted = strictly_sorted(values, a, b);
    let (c_minus, c_plus) =
        estimate_c_bounds(n, group_size, alpha, mc_samples, &stream.derive_stream("c-bounds"))?;

    let (m, m_full) = group_counts(n, group_size);
    let mut anchor_ranks: Vec<usize> = (1..=m_full).map(|i| (i - 1) * group_size + 1).collect();
    if m != m_full {
        anchor_ranks.push(n);
    }
    let anchors: Vec<f64> = anchor_ranks.iter().map(|&k| sorted[k - 1]).collect();

    let state = SrBandState {
        support: SupportBox::interval(a, b)?,
        a,
        b,
        mode,
        cap,
        alpha,
        group_size,
        mc_samples,
        sorted,
        anchor_ranks,
        anchors,
        c_minus,
        c_plus,
        degenerate_warned: AtomicBool::new(false),
    };
    Ok(DensityBand::shape_restricted(state))
}

/// Sort and nudge duplicates apart by `1e-12 (b - a)` per collision so the
/// order statistics are strictly increasing.
fn strictly_sorted(mut values: Vec<f64>, a: f64, b: f64) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let eps = 1e-12 * (b - a);
    for i in 1..values.len() {
        if values[i] <= values[i - 1] {
            values[i] = values[i - 1] + eps;
        }
    }
    // Keep everything inside [a, b] if the nudges spilled past b.
    if let Some(last) = values.last().copied() {
        if last > b {
            let n = values.len();
            values[n - 1] = b;
            for i in (0..n - 1).rev() {
                if values[i] >= values[i + 1] {
                    values[i] = values[i + 1] - eps;
                }
            }
        }
    }
    values
}

impl SrBandState {
    pub fn support(&self) -> &SupportBox {
        &self.support
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn mc_samples(&self) -> usize {
        self.mc_samples
    }

    pub fn c_bounds(&self) -> (f64, f64) {
        (self.c_minus, self.c_plus)
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn anchor_ranks(&self) -> &[usize] {
        &self.anchor_ranks
    }

    pub fn order_statistics(&self) -> &[f64] {
        &self.sorted
    }

    /// Band value at `xi` in `[a, b]`: solve the two programs over the mass
    /// polyhedron. Falls back to the uninformative `(0, U)` band when the
    /// polyhedron is empty for the realized sample.
    pub fn eval(&self, xi: f64) -> (f64, f64) {
        let poly = self.polyhedron(xi);
        let lower = match poly.lower_cell {
            None => Some(0.0),
            Some(cell) => self.solve_cell(&poly, cell, false),
        };
        let upper = match poly.upper_cell {
            None => Some(self.cap),
            Some(cell) => self.solve_cell(&poly, cell, true),
        };
        match (lower, upper) {
            (Some(l), Some(u)) => (l.clamp(0.0, self.cap), u.clamp(0.0, self.cap).max(l.max(0.0))),
            _ => {
                if !self.degenerate_warned.swap(true, Ordering::Relaxed) {
                    log::warn!(
                        "shape-restricted band polyhedron infeasible (N={}, K={}, c-=[{:.4}], c+=[{:.4}]); \
                         falling back to the (0, U) band",
                        self.sorted.len(),
                        self.group_size,
                        self.c_minus,
                        self.c_plus
                    );
                }
                (0.0, self.cap)
            }
        }
    }

    fn solve_cell(&self, poly: &Polyhedron, cell: usize, maximize: bool) -> Option<f64> {
        let mut objective = vec![0.0; poly.cells];
        objective[cell] = 1.0;
        let lp = self.base_program(poly, objective);
        let solution = if maximize { lp::solve_max(&lp) } else { lp::solve_min(&lp) };
        match solution {
            Ok(s) if s.status == LpStatus::Optimal => Some(s.objective),
            Ok(_) => None,
            Err(e) => {
                log::warn!("band program failed numerically: {e}");
                None
            }
        }
    }

    fn base_program(&self, poly: &Polyhedron, objective: Vec<f64>) -> LpProblem {
        let cells = poly.cells;
        let z = &poly.breakpoints;
        let widths: Vec<f64> = (0..cells).map(|j| z[j + 1] - z[j]).collect();
        let mut lp = LpProblem::new(objective);
        for j in 0..cells {
            lp.set_var_bounds(j, 0.0, self.cap);
        }
        // Unimodality: nondecreasing left of the mode, nonincreasing right of
        // it; the pair straddling the mode breakpoint is unconstrained.
        for j in 0..cells.saturating_sub(1) {
            let mut row = vec![0.0; cells];
            row[j] = 1.0;
            row[j + 1] = -1.0;
            if j + 1 < poly.mode_split {
                lp.add_row(row, f64::NEG_INFINITY, 0.0); // beta_j <= beta_{j+1}
            } else if j >= poly.mode_split {
                lp.add_row(row, 0.0, f64::INFINITY); // beta_j >= beta_{j+1}
            }
        }
        // Group mass brackets between consecutive anchors.
        for g in 1..self.anchors.len() {
            let from = poly.anchor_cells[g - 1];
            let to = poly.anchor_cells[g];
            let mut row = vec![0.0; cells];
            row[from..to].copy_from_slice(&widths[from..to]);
            lp.add_row(row, self.c_minus, self.c_plus);
        }
        // Total mass.
        lp.add_row(widths, 1.0, 1.0);
        lp
    }

    fn polyhedron(&self, xi: f64) -> Polyhedron {
        // Breakpoints: distinct sorted values of {a, b, mode, xi, anchors}.
        let mut z = Vec::with_capacity(self.anchors.len() + 4);
        z.push(self.a);
        z.push(self.b);
        z.push(self.mode);
        z.push(xi);
        z.extend_from_slice(&self.anchors);
        z.sort_by(f64::total_cmp);
        z.dedup();
        let cells = z.len() - 1;

        let idx_of = |v: f64| z.partition_point(|w| *w < v);
        // Cells 0..mode_split-1 lie left of the mode (nondecreasing chain),
        // cells mode_split.. lie right of it (nonincreasing chain); the two
        // chains are not linked across the mode breakpoint.
        let mode_split = idx_of(self.mode);
        let j_xi = idx_of(xi);

        // Query cells per band side. The lower band reads the density as
        // left-continuous below the mode and right-continuous above it; the
        // upper band mirrors that, which is what makes the band bracket the
        // true unimodal density on both slopes.
        let left: Option<usize> = if j_xi > 0 { Some(j_xi - 1) } else { None };
        let right: Option<usize> = if j_xi < cells { Some(j_xi) } else { None };
        let (lower_cell, upper_cell) = if xi < self.mode {
            (left, right)
        } else if xi > self.mode {
            (right, left)
        } else {
            // Exactly at the mode: both sides read the cell the mode opens.
            let cell = mode_split.min(cells - 1);
            (Some(cell), Some(cell))
        };

        let anchor_cells: Vec<usize> = self.anchors.iter().map(|&v| idx_of(v)).collect();

        Polyhedron { breakpoints: z, cells, mode_split, lower_cell, upper_cell, anchor_cells }
    }

    /// The LP solution vectors at a query point, exposed for validation.
    pub fn solutions(&self, xi: f64) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        let poly = self.polyhedron(xi);
        let solve = |cell: Option<usize>, maximize: bool| {
            let cell = cell?;
            let mut objective = vec![0.0; poly.cells];
            objective[cell] = 1.0;
            let lp = self.base_program(&poly, objective);
            let s = if maximize { lp::solve_max(&lp) } else { lp::solve_min(&lp) }.ok()?;
            (s.status == LpStatus::Optimal).then_some(s.x)
        };
        (solve(poly.lower_cell, false), solve(poly.upper_cell, true))
    }

    /// Breakpoint grid used at a query point (exposed for validation).
    pub fn breakpoints(&self, xi: f64) -> Vec<f64> {
        self.polyhedron(xi).breakpoints
    }

    /// Group masses of a cell-value vector over the polyhedron at `xi`.
    pub fn group_masses(&self, xi: f64, beta: &[f64]) -> Vec<f64> {
        let poly = self.polyhedron(xi);
        let z = &poly.breakpoints;
        (1..self.anchors.len())
            .map(|g| {
                (poly.anchor_cells[g - 1]..poly.anchor_cells[g])
                    .map(|j| beta[j] * (z[j + 1] - z[j]))
                    .sum()
            })
            .collect()
    }
}

struct Polyhedron {
    breakpoints: Vec<f64>,
    cells: usize,
    /// Count of cells strictly left of the mode breakpoint.
    mode_split: usize,
    lower_cell: Option<usize>,
    upper_cell: Option<usize>,
    /// Cell index whose left edge is each anchor.
    anchor_cells: Vec<usize>,
}
