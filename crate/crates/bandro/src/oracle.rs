//! Independent brute-force evaluation of the worst-case expectation.
//!
//! Discretizes a band onto a uniform grid and solves the resulting
//! box-constrained, single-equality program by greedy water filling: start
//! every cell at its lower band value and pour the remaining probability mass
//! into cells in decreasing cost order. Used as ground truth for the dual
//! solver; an LP route over the same grid must agree to 1e-9.

use crate::band::DensityBand;
use crate::error::{Error, Result};
use crate::lp::{self, LpStatus};
use crate::problem::Problem;
use crate::scalar::Real;
use crate::LpProblem;

/// A band sampled at the midpoints of `G` uniform cells (per axis).
#[derive(Clone, Debug)]
pub struct GridBand {
    centers: Vec<Vec<f64>>,
    /// Common cell measure (length in 1-D, area in 2-D).
    weight: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl GridBand {
    pub fn from_parts(
        centers: Vec<Vec<f64>>,
        weight: f64,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<GridBand> {
        if centers.len() != lower.len() || centers.len() != upper.len() || centers.is_empty() {
            return Err(Error::invalid("grid band parts must be non-empty and aligned"));
        }
        if weight <= 0.0 {
            return Err(Error::invalid("cell weight must be positive"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| *l < 0.0 || l > u) {
            return Err(Error::invalid("need 0 <= l <= u per cell"));
        }
        let gb = GridBand { centers, weight, lower, upper };
        gb.check_feasible()?;
        Ok(gb)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn mass_lower(&self) -> f64 {
        self.lower.iter().sum::<f64>() * self.weight
    }

    pub fn mass_upper(&self) -> f64 {
        self.upper.iter().sum::<f64>() * self.weight
    }

    /// A density must fit between the sums: `sum l w <= 1 <= sum u w`.
    fn check_feasible(&self) -> Result<()> {
        let tol = 1e-9;
        let lo = self.mass_lower();
        let hi = self.mass_upper();
        if lo > 1.0 + tol || hi < 1.0 - tol {
            return Err(Error::InfeasibleBand(format!(
                "grid band cannot hold a density: sum l w = {lo:.6}, sum u w = {hi:.6}"
            )));
        }
        Ok(())
    }
}

/// Midpoint-sample a 1-D or 2-D band onto `cells_per_axis` uniform cells.
pub fn discretize(band: &DensityBand, cells_per_axis: usize) -> Result<GridBand> {
    if cells_per_axis < 10 {
        return Err(Error::invalid("need at least 10 cells per axis"));
    }
    let support = band.support();
    let m = support.dim();
    if m > 2 {
        return Err(Error::invalid("oracle supports 1-D and 2-D bands"));
    }
    let total = cells_per_axis.pow(m as u32);
    let weight = support.volume() / total as f64;
    let mut centers = Vec::with_capacity(total);
    let mut lower = Vec::with_capacity(total);
    let mut upper = Vec::with_capacity(total);
    let mut idx = vec![0usize; m];
    for _ in 0..total {
        let mid: Vec<f64> = (0..m)
            .map(|k| {
                let w = support.width(k) / cells_per_axis as f64;
                support.lower()[k] + (idx[k] as f64 + 0.5) * w
            })
            .collect();
        let (l, u) = band.eval(&mid);
        centers.push(mid);
        lower.push(l.max(0.0));
        upper.push(u.max(0.0));
        for k in (0..m).rev() {
            idx[k] += 1;
            if idx[k] < cells_per_axis {
                break;
            }
            idx[k] = 0;
        }
    }
    GridBand::from_parts(centers, weight, lower, upper)
}

/// Greedy water filling over arbitrary-scalar slices: start at `lower`, pour
/// the remaining mass into cells by decreasing `fvals`, ties to the lower
/// index. Returns the optimal value and the worst-case cell densities.
pub fn water_fill<T: Real>(
    lower: &[T],
    upper: &[T],
    weight: T,
    fvals: &[T],
) -> std::result::Result<(T, Vec<T>), String> {
    let g = lower.len();
    if upper.len() != g || fvals.len() != g {
        return Err("mismatched slice lengths".into());
    }
    let base: T = lower.iter().fold(T::zero(), |acc, l| acc + *l) * weight;
    let mut remaining = T::one() - base;
    let tol = T::c(1e-9);
    if remaining < -tol {
        return Err("lower band already exceeds unit mass".into());
    }
    let mut density: Vec<T> = lower.to_vec();
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| fvals[b].partial_cmp(&fvals[a]).unwrap().then(a.cmp(&b)));
    for &c in &order {
        if remaining <= T::zero() {
            break;
        }
        let capacity = (upper[c] - lower[c]) * weight;
        let pour = capacity.min(remaining);
        density[c] = density[c] + pour / weight;
        remaining = remaining - pour;
    }
    if remaining > tol {
        return Err("upper band cannot absorb unit mass".into());
    }
    let value = density
        .iter()
        .zip(fvals)
        .fold(T::zero(), |acc, (p, f)| acc + *p * *f)
        * weight;
    Ok((value, density))
}

/// Worst-case expectation of per-cell costs over the discretized ambiguity
/// set, by greedy water filling.
pub fn inner_sup(grid: &GridBand, fvals: &[f64]) -> Result<(f64, Vec<f64>)> {
    if fvals.len() != grid.len() {
        return Err(Error::invalid("cost vector length must match the grid"));
    }
    water_fill(grid.lower(), grid.upper(), grid.weight(), fvals).map_err(Error::InfeasibleBand)
}

/// Same program solved through the LP module; kept as the cross-check route.
pub fn inner_sup_lp(grid: &GridBand, fvals: &[f64]) -> Result<(f64, Vec<f64>)> {
    if fvals.len() != grid.len() {
        return Err(Error::invalid("cost vector length must match the grid"));
    }
    let w = grid.weight();
    let mut lp = LpProblem::new(fvals.iter().map(|f| f * w).collect());
    for (j, (l, u)) in grid.lower().iter().zip(grid.upper()).enumerate() {
        lp.set_var_bounds(j, *l, *u);
    }
    lp.add_row(vec![w; grid.len()], 1.0, 1.0);
    let solution = lp::solve_max(&lp)?;
    match solution.status {
        LpStatus::Optimal => Ok((solution.objective, solution.x)),
        other => Err(Error::InfeasibleBand(format!("inner LP ended {other:?}"))),
    }
}

/// Reference robust value `sup_p int f(x, xi) p(xi) dxi` at a fixed decision,
/// via discretization and water filling.
pub fn robust_value_oracle(
    problem: &dyn Problem,
    band: &DensityBand,
    x: &[f64],
    cells_per_axis: usize,
) -> Result<f64> {
    let grid = discretize(band, cells_per_axis)?;
    let fvals: Vec<f64> = grid.centers().iter().map(|c| problem.evaluate(x, c)).collect();
    inner_sup(&grid, &fvals).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band::{DensityBand, GridTable};
    use crate::SupportBox;
    use rand::Rng;

    fn uniform_band() -> DensityBand {
        let b = SupportBox::interval(0.0, 1.0).unwrap();
        DensityBand::explicit(GridTable::constant(b, 1.0, 1.0))
    }

    #[test]
    fn discretize_uniform_band() {
        let grid = discretize(&uniform_band(), 10).unwrap();
        assert_eq!(grid.len(), 10);
        assert!((grid.weight() - 0.1).abs() < 1e-15);
        assert!(grid.lower().iter().all(|l| (l - 1.0).abs() < 1e-12));
        assert!((grid.mass_lower() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slack_band_is_feasible() {
        let b = SupportBox::interval(0.0, 1.0).unwrap();
        let band = DensityBand::explicit(GridTable::constant(b, 0.0, 2.0));
        let grid = discretize(&band, 10).unwrap();
        assert!(grid.mass_lower() <= 1.0 && grid.mass_upper() >= 1.0);
    }

    #[test]
    fn infeasible_bands_are_reported() {
        let b = SupportBox::interval(0.0, 1.0).unwrap();
        // Upper bound cannot carry unit mass.
        let starved = DensityBand::explicit(GridTable::constant(b.clone(), 0.0, 0.5));
        assert!(discretize(&starved, 10).is_err());
        // Lower bound already exceeds unit mass.
        let flooded = DensityBand::explicit(GridTable::constant(b, 1.5, 2.0));
        assert!(discretize(&flooded, 10).is_err());
    }

    #[test]
    fn hand_worked_three_cell_pour() {
        let grid = GridBand::from_parts(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            1.0,
            vec![0.1, 0.1, 0.1],
            vec![0.6, 0.6, 0.6],
        )
        .unwrap();
        let (value, density) = inner_sup(&grid, &[3.0, 2.0, 1.0]).unwrap();
        assert!((value - 2.5).abs() < 1e-12);
        let expect = [0.6, 0.3, 0.1];
        for (p, e) in density.iter().zip(expect) {
            assert!((p - e).abs() < 1e-12);
        }
        let (lp_value, _) = inner_sup_lp(&grid, &[3.0, 2.0, 1.0]).unwrap();
        assert!((lp_value - 2.5).abs() < 1e-9);
    }

    #[test]
    fn pinned_band_gives_plain_expectation() {
        let grid = GridBand::from_parts(
            vec![vec![0.0], vec![1.0]],
            0.5,
            vec![0.5, 1.5],
            vec![0.5, 1.5],
        )
        .unwrap();
        for fvals in [[2.0, -1.0], [-1.0, 2.0], [5.0, 5.0]] {
            let (value, _) = inner_sup(&grid, &fvals).unwrap();
            let expect = 0.5 * (0.5 * fvals[0] + 1.5 * fvals[1]);
            assert!((value - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_equivariance() {
        let lower = vec![0.0, 0.2, 0.1, 0.3];
        let upper = vec![0.9, 0.8, 0.7, 1.0];
        let fvals = vec![1.0, -2.0, 0.5, 3.0];
        let centers: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let grid =
            GridBand::from_parts(centers.clone(), 0.5, lower.clone(), upper.clone()).unwrap();
        let (v1, p1) = inner_sup(&grid, &fvals).unwrap();
        let perm = [2usize, 0, 3, 1];
        let grid2 = GridBand::from_parts(
            centers,
            0.5,
            perm.iter().map(|&i| lower[i]).collect(),
            perm.iter().map(|&i| upper[i]).collect(),
        )
        .unwrap();
        let fvals2: Vec<f64> = perm.iter().map(|&i| fvals[i]).collect();
        let (v2, p2) = inner_sup(&grid2, &fvals2).unwrap();
        assert!((v1 - v2).abs() < 1e-12);
        for (k, &i) in perm.iter().enumerate() {
            assert!((p2[k] - p1[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn worst_density_is_feasible_and_value_monotone_in_upper() {
        let mut rng = crate::SeedStream::new(33).derive_stream("oracle").rng();
        for _ in 0..100 {
            let g = rng.gen_range(5..40);
            let w = 1.0 / g as f64 * rng.gen_range(0.5..2.0);
            let mut lower = Vec::new();
            let mut upper = Vec::new();
            for _ in 0..g {
                let l: f64 = rng.gen_range(0.0..0.5);
                lower.push(l);
                upper.push(l + rng.gen_range(0.0..2.0));
            }
            // Rescale until the unit mass fits.
            let lo: f64 = lower.iter().sum::<f64>() * w;
            let hi: f64 = upper.iter().sum::<f64>() * w;
            if lo > 1.0 {
                let s = 0.9 / lo;
                lower.iter_mut().for_each(|v| *v *= s);
            }
            if hi < 1.0 {
                let s = 1.1 / hi;
                upper.iter_mut().for_each(|v| *v *= s);
            }
            let centers: Vec<Vec<f64>> = (0..g).map(|i| vec![i as f64]).collect();
            let grid =
                GridBand::from_parts(centers, w, lower.clone(), upper.clone()).unwrap();
            let fvals: Vec<f64> = (0..g).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (value, density) = inner_sup(&grid, &fvals).unwrap();
            // Feasible worst case.
            let mass: f64 = density.iter().sum::<f64>() * w;
            assert!((mass - 1.0).abs() < 1e-10, "mass {mass}");
            for ((p, l), u) in density.iter().zip(&lower).zip(&upper) {
                assert!(*p >= l - 1e-12 && *p <= u + 1e-12);
            }
            // Enlarging one upper bound never decreases the value.
            let c = rng.gen_range(0..g);
            let mut upper2 = upper.clone();
            upper2[c] += 0.5;
            let centers: Vec<Vec<f64>> = (0..g).map(|i| vec![i as f64]).collect();
            let grid2 = GridBand::from_parts(centers, w, lower, upper2).unwrap();
            let (value2, _) = inner_sup(&grid2, &fvals).unwrap();
            assert!(value2 >= value - 1e-12);
        }
    }

    #[test]
    fn greedy_matches_lp_on_random_instances() {
        let mut rng = crate::SeedStream::new(7).derive_stream("greedy-lp").rng();
        for _ in 0..200 {
            let g = rng.gen_range(10..=60);
            let w = rng.gen_range(0.01..0.2);
            let mut lower = Vec::new();
            let mut upper = Vec::new();
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
            let grid = GridBand::from_parts(centers, w, lower, upper).unwrap();
            let fvals: Vec<f64> = (0..g).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let (greedy, _) = inner_sup(&grid, &fvals).unwrap();
            let (lp_value, _) = inner_sup_lp(&grid, &fvals).unwrap();
            assert!(
                (greedy - lp_value).abs() <= 1e-9 * (1.0 + lp_value.abs()),
                "greedy {greedy} vs lp {lp_value}"
            );
        }
    }

    #[test]
    fn constant_cost_returns_that_constant() {
        struct Flat(f64);
        impl Problem for Flat {
            fn dim_x(&self) -> usize {
                1
            }
            fn evaluate(&self, _x: &[f64], _xi: &[f64]) -> f64 {
                self.0
            }
            fn subgradient(&self, _x: &[f64], _xi: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn project(&self, _x: &mut [f64]) {}
        }
        let v = robust_value_oracle(&Flat(4.25), &uniform_band(), &[0.0], 100).unwrap();
        assert!((v - 4.25).abs() < 1e-10);
    }

    #[test]
    fn monotone_cost_saturates_the_expensive_side() {
        let b = SupportBox::interval(0.0, 1.0).unwrap();
        let band = DensityBand::explicit(GridTable::constant(b, 0.5, 1.5));
        let grid = discretize(&band, 10).unwrap();
        let fvals: Vec<f64> = grid.centers().iter().map(|c| c[0]).collect();
        let (_, density) = inner_sup(&grid, &fvals).unwrap();
        // Half the surplus mass fits: the top half of cells saturate at u.
        for (i, p) in density.iter().enumerate() {
            if i < 5 {
                assert!((p - 0.5).abs() < 1e-12);
            } else {
                assert!((p - 1.5).abs() < 1e-12);
            }
        }
    }
}
