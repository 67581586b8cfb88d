//! Karp's minimum mean cycle algorithm on a full-period cost kernel.
//!
//! The discrete critical value is minus the minimum mean cycle weight of the
//! one-period kernel viewed as a complete digraph (edges carrying the `BIG`
//! sentinel count as absent). Karp's characterization
//!
//!   mean* = min_v max_k (F_M(v) - F_k(v)) / (M - k)
//!
//! runs a table of walk minima F_k(v) for k = 0..M from an arbitrary source.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{CostKernel, BIG, BIG_GUARD};

/// Returns `c_est = -(minimum mean cycle weight per period)`.
pub fn karp_min_mean_cycle(kernel: &CostKernel) -> Result<f64> {
    if (kernel.duration() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "karp_min_mean_cycle: kernel must cover exactly one period, duration {}",
            kernel.duration()
        )));
    }
    let m = kernel.grid().node_count();
    // transpose once so the inner relaxation reads rows contiguously
    let raw = kernel.raw_slice();
    let mut tr = vec![BIG; m * m];
    for y in 0..m {
        for x in 0..m {
            tr[x * m + y] = raw[y * m + x];
        }
    }

    let mut table = Vec::with_capacity(m + 1);
    let mut layer = vec![BIG; m];
    layer[0] = 0.0;
    table.push(layer);
    for _ in 1..=m {
        let prev = table.last().unwrap();
        let next: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|v| {
                let col = &tr[v * m..(v + 1) * m];
                let mut best = BIG;
                for (y, &w) in col.iter().enumerate() {
                    let p = prev[y];
                    if p < BIG_GUARD && w < BIG_GUARD {
                        let s = p + w;
                        if s < best {
                            best = s;
                        }
                    }
                }
                best
            })
            .collect();
        table.push(next);
    }

    let last = &table[m];
    let mut mean = f64::INFINITY;
    for v in 0..m {
        if last[v] >= BIG_GUARD {
            continue;
        }
        let mut worst = f64::NEG_INFINITY;
        for (k, row) in table.iter().enumerate().take(m) {
            if row[v] < BIG_GUARD {
                let r = (last[v] - row[v]) / (m - k) as f64;
                if r > worst {
                    worst = r;
                }
            }
        }
        if worst.is_finite() && worst < mean {
            mean = worst;
        }
    }
    if !mean.is_finite() {
        return Err(Error::Numerical(
            "karp_min_mean_cycle: all cycles blocked by the window sentinel".into(),
        ));
    }
    // per-edge raw weights carry the kernel's normalization offset
    Ok(-(mean - kernel.normalization_offset()))
}

/// Exhaustive minimum mean cycle by enumerating all simple cycles; only
/// sensible for a handful of nodes. Used as an independent oracle.
pub fn exhaustive_min_mean_cycle(kernel: &CostKernel) -> Option<f64> {
    let m = kernel.grid().node_count();
    assert!(m <= 8, "exhaustive cycle enumeration is for tiny kernels");
    let mut best: Option<f64> = None;
    let mut stack = Vec::new();
    let mut visited = vec![false; m];

    fn dfs(
        kernel: &CostKernel,
        m: usize,
        start: usize,
        node: usize,
        cost: f64,
        stack: &mut Vec<usize>,
        visited: &mut [bool],
        best: &mut Option<f64>,
    ) {
        for next in 0..m {
            let w = kernel.entry(node, next);
            if w >= BIG_GUARD {
                continue;
            }
            if next == start {
                let mean = (cost + w) / (stack.len() as f64);
                if best.map_or(true, |b| mean < b) {
                    *best = Some(mean);
                }
            } else if next > start && !visited[next] {
                visited[next] = true;
                stack.push(next);
                dfs(kernel, m, start, next, cost + w, stack, visited, best);
                stack.pop();
                visited[next] = false;
            }
        }
    }

    for start in 0..m {
        visited[start] = true;
        stack.push(start);
        dfs(kernel, m, start, start, 0.0, &mut stack, &mut visited, &mut best);
        stack.pop();
        visited[start] = false;
    }
    best.map(|b| -b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;

    #[test]
    fn identity_has_zero_mean() {
        let g = TorusGrid::new(1, 8).unwrap();
        let id = CostKernel::identity(g, 0.0);
        let id = CostKernel::from_matrix(g, 0.0, 1.0, id.effective_matrix());
        assert_eq!(karp_min_mean_cycle(&id).unwrap(), 0.0);
    }

    #[test]
    fn hand_enumerable_cycle() {
        // 3-cycle with weights 2, 3, 4: min mean cycle 3, c_est = -3
        let g = TorusGrid::new(1, 3).unwrap();
        let mut e = vec![BIG; 9];
        e[0 * 3 + 1] = 2.0;
        e[1 * 3 + 2] = 3.0;
        e[2 * 3 + 0] = 4.0;
        let k = CostKernel::from_matrix(g, 0.0, 1.0, e);
        assert_eq!(karp_min_mean_cycle(&k).unwrap(), -3.0);
        assert_eq!(exhaustive_min_mean_cycle(&k).unwrap(), -3.0);
    }

    #[test]
    fn blocked_graph_fails() {
        let g = TorusGrid::new(1, 3).unwrap();
        let k = CostKernel::from_matrix(g, 0.0, 1.0, vec![BIG; 9]);
        assert!(karp_min_mean_cycle(&k).is_err());
    }

    #[test]
    fn duration_checked() {
        let g = TorusGrid::new(1, 3).unwrap();
        let k = CostKernel::from_matrix(g, 0.0, 0.5, vec![1.0; 9]);
        assert!(karp_min_mean_cycle(&k).is_err());
    }
}
