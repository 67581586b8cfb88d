//! Real-valued functions on a torus grid.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

/// A function on the grid nodes, tagged with the fractional time slice
/// τ ∈ [0,1) it lives on.
#[derive(Clone, Debug)]
pub struct ValueFunction {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
    pub time_tag: f64,
}

impl ValueFunction {
    pub fn new(grid: TorusGrid, values: Vec<f64>, time_tag: f64) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        ValueFunction {
            grid,
            values,
            time_tag,
        }
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        ValueFunction::new(grid, vec![value; grid.node_count()], 0.0)
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|i| f(&grid.coords(i)[..grid.dim()]))
            .collect();
        ValueFunction::new(grid, values, 0.0)
    }

    pub fn sup_norm_diff(&self, other: &ValueFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument(
                "sup_norm_diff: grids do not match".into(),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn shifted(&self, kappa: f64) -> ValueFunction {
        ValueFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v + kappa).collect(),
            time_tag: self.time_tag,
        }
    }

    /// CSV emission: `index,x[,y],value` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        if self.grid.dim() == 1 {
            writeln!(w, "index,x,value")?;
        } else {
            writeln!(w, "index,x,y,value")?;
        }
        for (i, &v) in self.values.iter().enumerate() {
            let c = self.grid.coords(i);
            if self.grid.dim() == 1 {
                writeln!(w, "{i},{:.16e},{:.16e}", c[0], v)?;
            } else {
                writeln!(w, "{i},{:.16e},{:.16e},{:.16e}", c[0], c[1], v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let g = TorusGrid::new(1, 8).unwrap();
        let u = ValueFunction::constant(g, 1.5);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("index,x,value\n"));
        assert_eq!(s.lines().count(), 9);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = ValueFunction::constant(TorusGrid::new(1, 8).unwrap(), 0.0);
        let b = ValueFunction::constant(TorusGrid::new(1, 16).unwrap(), 0.0);
        assert!(a.sup_norm_diff(&b).is_err());
    }
}
