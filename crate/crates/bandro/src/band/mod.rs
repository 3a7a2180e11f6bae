//! Density confidence bands: the common evaluation surface plus the two
//! construction methods.
//!
//! A band is a pair of functions `(l, u)` with `0 <= l <= u` on a compact
//! support box and zero outside it. The ambiguity set it induces is the set
//! of all densities trapped pointwise between `l` and `u` that integrate to
//! one over the box.

pub mod kde;
pub mod sr;

use std::io::Write;

use crate::error::{Error, Result};
use crate::SupportBox;

pub use kde::{build_kde_band, delta_theoretical, kde_eval, DeltaSpec, KdeBandState, Kernel};
pub use sr::{build_sr_band, estimate_c_bounds, SrBandState, SrParams};

/// An evaluable density confidence band, truncated to its support box.
#[derive(Debug)]
pub struct DensityBand {
    kind: BandKind,
}

#[derive(Debug)]
pub enum BandKind {
    ShapeRestricted(SrBandState),
    Kde(KdeBandState),
    /// Piecewise-constant band on a uniform grid; also the result of
    /// tabulating one of the other kinds.
    Explicit(GridTable),
}

impl DensityBand {
    pub fn explicit(table: GridTable) -> DensityBand {
        DensityBand { kind: BandKind::Explicit(table) }
    }

    pub(crate) fn shape_restricted(state: SrBandState) -> DensityBand {
        DensityBand { kind: BandKind::ShapeRestricted(state) }
    }

    pub(crate) fn kde(state: KdeBandState) -> DensityBand {
        DensityBand { kind: BandKind::Kde(state) }
    }

    pub fn kind(&self) -> &BandKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            BandKind::ShapeRestricted(_) => "shape-restricted",
            BandKind::Kde(_) => "kde",
            BandKind::Explicit(_) => "explicit",
        }
    }

    pub fn support(&self) -> &SupportBox {
        match &self.kind {
            BandKind::ShapeRestricted(s) => s.support(),
            BandKind::Kde(s) => s.support(),
            BandKind::Explicit(t) => t.support(),
        }
    }

    pub fn dim(&self) -> usize {
        self.support().dim()
    }

    /// A finite upper bound on `u` over the support (the density cap plus the
    /// width slack declared by the band kind).
    pub fn cap(&self) -> f64 {
        match &self.kind {
            BandKind::ShapeRestricted(s) => s.cap(),
            BandKind::Kde(s) => s.cap(),
            BandKind::Explicit(t) => t.cap(),
        }
    }

    /// Evaluate `(l(xi), u(xi))`; zero outside the support box.
    pub fn eval(&self, xi: &[f64]) -> (f64, f64) {
        if !self.support().contains(xi) {
            return (0.0, 0.0);
        }
        match &self.kind {
            BandKind::ShapeRestricted(s) => s.eval(xi[0]),
            BandKind::Kde(s) => s.eval(xi),
            BandKind::Explicit(t) => t.eval(xi),
        }
    }

    /// Univariate convenience wrapper around [`DensityBand::eval`].
    pub fn eval1(&self, xi: f64) -> (f64, f64) {
        self.eval(&[xi])
    }

    /// Freeze the band onto a uniform grid (`cells` per axis, midpoint
    /// sampled). Used to amortize per-point band programs before handing the
    /// band to the stochastic solver. Supported for 1- and 2-dimensional
    /// bands.
    pub fn tabulate(&self, cells: usize) -> Result<DensityBand> {
        if cells < 2 {
            return Err(Error::invalid("tabulation needs at least 2 cells per axis"));
        }
        if self.dim() > 2 {
            return Err(Error::invalid(
                "tabulation supported for 1-D and 2-D bands; evaluate directly instead",
            ));
        }
        let table = GridTable::from_fn(self.support().clone(), cells, |xi| self.eval(xi));
        Ok(DensityBand::explicit(table))
    }
}

/// Piecewise-constant `(l, u)` values on a uniform grid over a box.
#[derive(Clone, Debug)]
pub struct GridTable {
    support: SupportBox,
    cells_per_axis: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl GridTable {
    /// Sample `f` at cell midpoints. Grid is `cells` per axis, row-major.
    pub fn from_fn(
        support: SupportBox,
        cells: usize,
        f: impl Fn(&[f64]) -> (f64, f64),
    ) -> GridTable {
        let m = support.dim();
        let total = cells.pow(m as u32);
        let mut lower = Vec::with_capacity(total);
        let mut upper = Vec::with_capacity(total);
        let mut idx = vec![0usize; m];
        let mut mid = vec![0.0; m];
        for _ in 0..total {
            for k in 0..m {
                let w = support.width(k) / cells as f64;
                mid[k] = support.lower()[k] + (idx[k] as f64 + 0.5) * w;
            }
            let (l, u) = f(&mid);
            lower.push(l.max(0.0));
            upper.push(u.max(0.0));
            // Odometer increment over the multi-index.
            for k in (0..m).rev() {
                idx[k] += 1;
                if idx[k] < cells {
                    break;
                }
                idx[k] = 0;
            }
        }
        GridTable { support, cells_per_axis: cells, lower, upper }
    }

    /// Constant band `l = lo`, `u = hi` over the whole box.
    pub fn constant(support: SupportBox, lo: f64, hi: f64) -> GridTable {
        GridTable {
            support,
            cells_per_axis: 1,
            lower: vec![lo.max(0.0)],
            upper: vec![hi.max(0.0)],
        }
    }

    pub fn support(&self) -> &SupportBox {
        &self.support
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn cap(&self) -> f64 {
        self.upper.iter().cloned().fold(0.0, f64::max)
    }

    fn flat_index(&self, xi: &[f64]) -> usize {
        let mut flat = 0;
        for (k, v) in xi.iter().enumerate() {
            let w = self.support.width(k) / self.cells_per_axis as f64;
            let mut c = ((v - self.support.lower()[k]) / w).floor() as isize;
            c = c.clamp(0, self.cells_per_axis as isize - 1);
            flat = flat * self.cells_per_axis + c as usize;
        }
        flat
    }

    /// Value of the containing cell; caller guarantees `xi` is in the box.
    pub fn eval(&self, xi: &[f64]) -> (f64, f64) {
        let i = self.flat_index(xi);
        (self.lower[i], self.upper[i])
    }
}

/// One sampled band point, in grid order.
#[derive(Clone, Debug)]
pub struct CurveRow {
    pub xi: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

/// Evaluate the band along a grid of query points.
pub fn band_curve(band: &DensityBand, grid: &[Vec<f64>]) -> Vec<CurveRow> {
    grid.iter()
        .map(|xi| {
            let (lower, upper) = band.eval(xi);
            CurveRow { xi: xi.clone(), lower, upper }
        })
        .collect()
}

/// Uniform 1-D query grid with `points` nodes including both endpoints.
pub fn grid_1d(lo: f64, hi: f64, points: usize) -> Vec<Vec<f64>> {
    assert!(points >= 2, "need at least the two endpoints");
    (0..points)
        .map(|i| vec![lo + (hi - lo) * i as f64 / (points - 1) as f64])
        .collect()
}

/// Band-curve CSV: header `xi,l,u` for 1-D, `xi1,xi2,l,u` for 2-D.
pub fn write_curve_csv(mut w: impl Write, rows: &[CurveRow]) -> Result<()> {
    let dim = rows.first().map_or(1, |r| r.xi.len());
    match dim {
        1 => writeln!(w, "xi,l,u")?,
        2 => writeln!(w, "xi1,xi2,l,u")?,
        d => return Err(Error::invalid(format!("curve CSV supports 1-D/2-D, got {d}-D"))),
    }
    for r in rows {
        let coords: Vec<String> = r.xi.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{},{},{}", coords.join(","), r.lower, r.upper)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_uniform() -> DensityBand {
        let b = SupportBox::interval(0.0, 1.0).unwrap();
        DensityBand::explicit(GridTable::constant(b, 1.0, 1.0))
    }

    #[test]
    fn zero_outside_box() {
        let band = unit_uniform();
        assert_eq!(band.eval(&[-0.1]), (0.0, 0.0));
        assert_eq!(band.eval(&[1.1]), (0.0, 0.0));
        assert_eq!(band.eval(&[0.5]), (1.0, 1.0));
    }

    #[test]
    fn grid_table_lookup_in_two_dimensions() {
        let b = SupportBox::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        let t = GridTable::from_fn(b, 2, |xi| (xi[0], xi[1]));
        // Cell midpoints are (0.5, 0.5), (0.5, 1.5), (1.5, 0.5), (1.5, 1.5).
        assert_eq!(t.eval(&[0.1, 0.1]), (0.5, 0.5));
        assert_eq!(t.eval(&[0.1, 1.9]), (0.5, 1.5));
        assert_eq!(t.eval(&[1.9, 0.1]), (1.5, 0.5));
        assert_eq!(t.eval(&[2.0, 2.0]), (1.5, 1.5));
    }

    #[test]
    fn curve_matches_pointwise_eval() {
        let band = unit_uniform();
        let grid = grid_1d(0.0, 1.0, 3);
        let rows = band_curve(&band, &grid);
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert_eq!((r.lower, r.upper), band.eval(&r.xi));
            assert!(r.lower <= r.upper);
        }
    }

    #[test]
    fn curve_csv_shape() {
        let band = unit_uniform();
        let rows = band_curve(&band, &grid_1d(0.0, 1.0, 3));
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "xi,l,u");
        assert_eq!(lines.len(), 4);
    }
}
