//! Uniform grids on the flat tori T^1 and T^2.
//!
//! Nodes are the points (i_1/N, ..., i_d/N) with indices taken mod N. In two
//! dimensions the linear index is `ix * N + iy`; the second (`y`) axis is the
//! one that carries tent initial data and the drift of the 2d catalog member.

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

/// Distance on T^1 between two coordinates in [0,1).
pub fn torus_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Minimal representative of `a - b` on T^1, in [-1/2, 1/2).
pub fn torus_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

impl TorusGrid {
    pub fn new(dim: usize, n_per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if n_per_axis < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 nodes per axis, got {n_per_axis}"
            )));
        }
        Ok(TorusGrid { dim, n: n_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Coordinates of a node; the unused axis of a 1d grid reads 0.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let n = self.n as f64;
        match self.dim {
            1 => [idx as f64 / n, 0.0],
            _ => {
                let ix = idx / self.n;
                let iy = idx % self.n;
                [ix as f64 / n, iy as f64 / n]
            }
        }
    }

    /// Linear index from per-axis integer indices (wrapped mod N).
    pub fn index_of(&self, ix: i64, iy: i64) -> usize {
        let n = self.n as i64;
        let ix = ix.rem_euclid(n) as usize;
        match self.dim {
            1 => ix,
            _ => {
                let iy = iy.rem_euclid(n) as usize;
                ix * self.n + iy
            }
        }
    }

    pub fn axis_indices(&self, idx: usize) -> (usize, usize) {
        match self.dim {
            1 => (idx, 0),
            _ => (idx / self.n, idx % self.n),
        }
    }

    /// Node nearest to a point of the torus.
    pub fn nearest_node(&self, p: &[f64]) -> Result<usize> {
        if p.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "point dimension {} does not match grid dimension {}",
                p.len(),
                self.dim
            )));
        }
        let n = self.n as f64;
        let round = |x: f64| (x.rem_euclid(1.0) * n).round() as i64;
        let ix = round(p[0]);
        let iy = if self.dim == 2 { round(p[1]) } else { 0 };
        Ok(self.index_of(ix, iy))
    }

    /// Minimal torus displacement vector from node `from` to node `to`,
    /// component-wise in [-1/2, 1/2).
    pub fn displacement(&self, from: usize, to: usize) -> [f64; 2] {
        let a = self.coords(from);
        let b = self.coords(to);
        [
            torus_diff(b[0], a[0]),
            if self.dim == 2 {
                torus_diff(b[1], a[1])
            } else {
                0.0
            },
        ]
    }

    /// Torus distance between two nodes.
    pub fn node_dist(&self, a: usize, b: usize) -> f64 {
        let d = self.displacement(a, b);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }
}
