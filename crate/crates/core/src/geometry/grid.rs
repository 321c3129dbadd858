//! Tabulated metrics: coefficients on a regular 4-D grid, read from CSV with
//! header `x0,x1,x2,x3,g00,g01,...,g33` and interpolated multilinearly.

use std::io::Read;
use std::path::Path;

use nalgebra::Matrix4;

use super::{GeometryError, Point};

#[derive(Debug, Clone)]
pub struct GridMetric {
    axes: [Vec<f64>; 4],
    /// Row-major over axes (x0 slowest), 16 components per node.
    values: Vec<[f64; 16]>,
}

impl GridMetric {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, GeometryError> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| GeometryError::GridFormat(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, GeometryError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| GeometryError::GridFormat(e.to_string()))?.clone();
        let mut expected: Vec<String> = (0..4).map(|i| format!("x{i}")).collect();
        for i in 0..4 {
            for j in 0..4 {
                expected.push(format!("g{i}{j}"));
            }
        }
        if headers.iter().collect::<Vec<_>>() != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(GeometryError::GridFormat(format!(
                "expected header {}, found {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows: Vec<([f64; 4], [f64; 16])> = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| GeometryError::GridFormat(e.to_string()))?;
            let mut nums = [0.0; 20];
            for (k, field) in record.iter().enumerate() {
                nums[k] = field
                    .parse()
                    .map_err(|_| GeometryError::GridFormat(format!("row {}: bad number {field:?}", line + 2)))?;
            }
            let mut x = [0.0; 4];
            x.copy_from_slice(&nums[..4]);
            let mut g = [0.0; 16];
            g.copy_from_slice(&nums[4..]);
            rows.push((x, g));
        }
        let mut axes: [Vec<f64>; 4] = Default::default();
        for (k, axis) in axes.iter_mut().enumerate() {
            let mut vals: Vec<f64> = rows.iter().map(|(x, _)| x[k]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            if vals.len() < 2 {
                return Err(GeometryError::GridFormat(format!("axis x{k} needs at least two nodes")));
            }
            *axis = vals;
        }
        let total: usize = axes.iter().map(Vec::len).product();
        if total != rows.len() {
            return Err(GeometryError::GridFormat(format!(
                "grid is not a full tensor product: {} rows for {} nodes",
                rows.len(),
                total
            )));
        }
        let mut values = vec![[f64::NAN; 16]; total];
        for (x, g) in rows {
            let mut idx = 0;
            for k in 0..4 {
                let pos = axes[k].binary_search_by(|v| v.total_cmp(&x[k])).expect("node on axis");
                idx = idx * axes[k].len() + pos;
            }
            values[idx] = g;
        }
        Ok(Self { axes, values })
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..4).all(|k| x[k] >= self.axes[k][0] && x[k] <= *self.axes[k].last().unwrap())
    }

    pub fn interpolate(&self, x: &Point) -> Matrix4<f64> {
        let mut lo = [0usize; 4];
        let mut frac = [0.0; 4];
        for k in 0..4 {
            let axis = &self.axes[k];
            let i = axis.partition_point(|v| *v <= x[k]).clamp(1, axis.len() - 1) - 1;
            lo[k] = i;
            frac[k] = (x[k] - axis[i]) / (axis[i + 1] - axis[i]);
        }
        let mut acc = [0.0; 16];
        for corner in 0..16usize {
            let mut weight = 1.0;
            let mut idx = 0;
            for k in 0..4 {
                let bit = (corner >> k) & 1;
                weight *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                idx = idx * self.axes[k].len() + lo[k] + bit;
            }
            if weight == 0.0 {
                continue;
            }
            for (a, v) in acc.iter_mut().zip(self.values[idx].iter()) {
                *a += weight * v;
            }
        }
        Matrix4::from_row_slice(&acc)
    }
}
