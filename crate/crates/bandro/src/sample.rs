//! I.i.d. sample sets with provenance metadata and the dataset CSV format.
//!
//! Dataset CSV: one observation per row, `m` comma-separated decimal fields,
//! optional header rows beginning with `#`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::SupportBox;

/// An i.i.d. dataset of `m`-dimensional observations, stored in insertion
/// order. Sorting is performed by consumers, never in place.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    dim: usize,
    seed: u64,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Data("sample set needs at least one point".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::Data("points must have at least one coordinate".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Data(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("point {i} has a non-finite coordinate")));
            }
        }
        Ok(SampleSet { points, dim, seed })
    }

    /// Univariate convenience constructor.
    pub fn univariate(values: Vec<f64>, seed: u64) -> Result<Self> {
        SampleSet::new(values.into_iter().map(|v| vec![v]).collect(), seed)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Coordinate values for a univariate sample set.
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.dim != 1 {
            return Err(Error::Data(format!(
                "expected univariate samples, got dimension {}",
                self.dim
            )));
        }
        Ok(self.points.iter().map(|p| p[0]).collect())
    }

    /// New sample set holding the selected rows, same seed tag.
    pub fn subset(&self, indices: &[usize]) -> Result<SampleSet> {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        SampleSet::new(points, self.seed)
    }

    /// Tight axis-aligned bounding box of the data. Degenerate axes are
    /// widened by a hair so the box stays valid.
    pub fn bounding_box(&self) -> Result<SupportBox> {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in &self.points {
            for (k, v) in p.iter().enumerate() {
                lo[k] = lo[k].min(*v);
                hi[k] = hi[k].max(*v);
            }
        }
        for k in 0..self.dim {
            if hi[k] - lo[k] < 1e-12 {
                let pad = 0.5 * (1.0 + lo[k].abs()) * 1e-9;
                lo[k] -= pad;
                hi[k] += pad;
            }
        }
        SupportBox::new(lo, hi)
    }

    pub fn read_csv(reader: impl Read, seed: u64) -> Result<SampleSet> {
        let mut points = Vec::new();
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                trimmed.split(',').map(|f| f.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| {
                Error::Data(format!("line {}: cannot parse '{trimmed}': {e}", lineno + 1))
            })?;
            points.push(row);
        }
        SampleSet::new(points, seed)
    }

    pub fn read_csv_path(path: impl AsRef<Path>, seed: u64) -> Result<SampleSet> {
        let file = std::fs::File::open(path.as_ref())?;
        SampleSet::read_csv(file, seed)
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "# dim={} count={} seed={}", self.dim, self.len(), self.seed)?;
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        self.write_csv(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_non_finite_points() {
        assert!(SampleSet::new(vec![], 0).is_err());
        assert!(SampleSet::new(vec![vec![1.0], vec![1.0, 2.0]], 0).is_err());
        assert!(SampleSet::new(vec![vec![f64::NAN]], 0).is_err());
    }

    #[test]
    fn csv_round_trip_skips_comments() {
        let data = SampleSet::new(vec![vec![1.5, -2.0], vec![0.25, 4.0]], 9).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# dim=2"));
        let back = SampleSet::read_csv(&buf[..], 9).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn insertion_order_preserved() {
        let data = SampleSet::univariate(vec![3.0, 1.0, 2.0], 0).unwrap();
        assert_eq!(data.values().unwrap(), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn bounding_box_covers_all_points() {
        let data = SampleSet::new(vec![vec![1.0, -1.0], vec![2.0, 5.0]], 0).unwrap();
        let b = data.bounding_box().unwrap();
        for p in data.points() {
            assert!(b.contains(p));
        }
    }
}
