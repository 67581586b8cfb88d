//! Discrete action kernels and the min-plus (tropical) matrix algebra.
//!
//! A `CostKernel` holds, for every ordered pair of grid nodes, the least
//! action of moving from the first to the second over a fixed time interval.
//! The discrete ansatz is a straight line in the universal cover per
//! sub-step, minimized over integer winding shifts, with the time integral
//! evaluated by a composite midpoint rule. Kernel composition is matrix
//! multiplication over the semiring (R ∪ {+BIG}, min, +); powers of the
//! one-period kernel realize long-horizon action minimization.
//!
//! Entries excluded by the velocity window carry the saturating sentinel
//! `BIG` instead of an infinity so that all tropical operations stay total.
//! Normalization by the critical value is kept as a separate additive offset
//! (`effective = raw - offset`), so re-normalizing with the opposite constant
//! restores a kernel bit-for-bit.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::lagrangian::LagrangianSpec;
use crate::value::ValueFunction;

/// Sentinel for excluded transitions.
pub const BIG: f64 = 1e15;
/// Values at or above this are treated as unreachable.
pub const BIG_GUARD: f64 = 1e14;

const TIME_TOL: f64 = 1e-9;

#[inline]
pub fn sat_add(a: f64, b: f64) -> f64 {
    if a >= BIG_GUARD || b >= BIG_GUARD {
        BIG
    } else {
        a + b
    }
}

#[derive(Clone)]
pub struct CostKernel {
    grid: TorusGrid,
    t_start: f64,
    t_end: f64,
    raw: Arc<Vec<f64>>,
    /// Amount already subtracted from every raw entry (accumulated
    /// critical-value normalization over this kernel's duration).
    offset: f64,
}

impl CostKernel {
    pub fn from_matrix(grid: TorusGrid, t_start: f64, t_end: f64, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), grid.node_count() * grid.node_count());
        CostKernel {
            grid,
            t_start,
            t_end,
            raw: Arc::new(entries),
            offset: 0.0,
        }
    }

    /// Tropical identity: 0 on the diagonal, `BIG` elsewhere.
    pub fn identity(grid: TorusGrid, t: f64) -> Self {
        let m = grid.node_count();
        let mut e = vec![BIG; m * m];
        for i in 0..m {
            e[i * m + i] = 0.0;
        }
        CostKernel::from_matrix(grid, t, t, e)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn normalization_offset(&self) -> f64 {
        self.offset
    }

    /// Effective entry (y -> x) with the normalization offset folded in.
    #[inline]
    pub fn entry(&self, from: usize, to: usize) -> f64 {
        let m = self.grid.node_count();
        let r = self.raw[from * m + to];
        if r >= BIG_GUARD {
            BIG
        } else {
            r - self.offset
        }
    }

    pub(crate) fn raw_slice(&self) -> &[f64] {
        &self.raw
    }

    /// Dense matrix of effective entries (row = start node).
    pub fn effective_matrix(&self) -> Vec<f64> {
        self.raw
            .iter()
            .map(|&r| if r >= BIG_GUARD { BIG } else { r - self.offset })
            .collect()
    }

    pub fn finite_min_max(&self) -> Option<(f64, f64)> {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &r in self.raw.iter() {
            if r < BIG_GUARD {
                let v = r - self.offset;
                min = min.min(v);
                max = max.max(v);
            }
        }
        if min.is_finite() {
            Some((min, max))
        } else {
            None
        }
    }

    /// Kernel with `c_est * duration` subtracted from every effective entry
    /// on top of any normalization already applied. `c_est` is the estimated
    /// critical value (non-positive for the catalog members), so entries
    /// change by `+ c_est * duration`.
    pub fn normalized(&self, c_est: f64) -> CostKernel {
        CostKernel {
            grid: self.grid,
            t_start: self.t_start,
            t_end: self.t_end,
            raw: Arc::clone(&self.raw),
            offset: self.offset - c_est * self.duration(),
        }
    }

    /// Entrywise shift of the raw matrix (used to probe critical-value
    /// covariance under L -> L + kappa).
    pub fn shifted_entries(&self, kappa: f64) -> CostKernel {
        let m = self.grid.node_count();
        let mut e = Vec::with_capacity(m * m);
        for &r in self.raw.iter() {
            e.push(if r >= BIG_GUARD { BIG } else { r + kappa });
        }
        CostKernel {
            grid: self.grid,
            t_start: self.t_start,
            t_end: self.t_end,
            raw: Arc::new(e),
            offset: self.offset,
        }
    }
}

fn frac_close(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(1.0);
    d < TIME_TOL || d > 1.0 - TIME_TOL
}

/// out(x) = min_y u(y) + K(y, x).
pub fn minplus_matvec(k: &CostKernel, u: &ValueFunction) -> Result<ValueFunction> {
    if u.grid != k.grid {
        return Err(Error::InvalidArgument(
            "minplus_matvec: grid mismatch".into(),
        ));
    }
    let m = k.grid.node_count();
    let mut out = vec![BIG; m];
    for (y, &uy) in u.values.iter().enumerate() {
        if uy >= BIG_GUARD {
            continue;
        }
        let row = &k.raw[y * m..(y + 1) * m];
        for (o, &r) in out.iter_mut().zip(row) {
            if r < BIG_GUARD {
                let s = uy + r;
                if s < *o {
                    *o = s;
                }
            }
        }
    }
    if k.offset != 0.0 {
        for o in out.iter_mut() {
            if *o < BIG_GUARD {
                *o -= k.offset;
            }
        }
    }
    Ok(ValueFunction::new(k.grid, out, k.t_end.rem_euclid(1.0)))
}

/// out(y, x) = min_z K1(y, z) + K2(z, x). Requires K2 to start (mod 1) where
/// K1 ends; the composed kernel spans the union of the intervals.
pub fn minplus_matmul(k1: &CostKernel, k2: &CostKernel) -> Result<CostKernel> {
    if !frac_close(k1.t_end, k2.t_start) {
        return Err(Error::InvalidArgument(format!(
            "minplus_matmul: time mismatch (left ends at {}, right starts at {})",
            k1.t_end, k2.t_start
        )));
    }
    matmul_unchecked(k1, k2)
}

/// Product without the start-time check; powering treats its operand as one
/// homogeneous step.
fn matmul_unchecked(k1: &CostKernel, k2: &CostKernel) -> Result<CostKernel> {
    if k1.grid != k2.grid {
        return Err(Error::InvalidArgument(
            "minplus_matmul: grid mismatch".into(),
        ));
    }
    let m = k1.grid.node_count();
    let a = k1.raw_slice();
    let b = k2.raw_slice();
    let mut out = vec![BIG; m * m];
    out.par_chunks_mut(m).enumerate().for_each(|(y, row)| {
        let arow = &a[y * m..(y + 1) * m];
        for (z, &az) in arow.iter().enumerate() {
            if az >= BIG_GUARD {
                continue;
            }
            let brow = &b[z * m..(z + 1) * m];
            for (o, &bzx) in row.iter_mut().zip(brow) {
                if bzx < BIG_GUARD {
                    let s = az + bzx;
                    if s < *o {
                        *o = s;
                    }
                }
            }
        }
    });
    Ok(CostKernel {
        grid: k1.grid,
        t_start: k1.t_start,
        t_end: k1.t_end + k2.duration(),
        raw: Arc::new(out),
        offset: k1.offset + k2.offset,
    })
}

/// K^{⊗k} by binary power-by-doubling; k = 0 yields the tropical identity.
pub fn minplus_power(k: &CostKernel, mut exponent: usize) -> Result<CostKernel> {
    if exponent == 0 {
        return Ok(CostKernel::identity(k.grid, k.t_start));
    }
    let mut base = k.clone();
    let mut acc: Option<CostKernel> = None;
    loop {
        if exponent & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => matmul_unchecked(&a, &base)?,
            });
        }
        exponent >>= 1;
        if exponent == 0 {
            break;
        }
        base = matmul_unchecked(&base, &base)?;
    }
    Ok(acc.expect("exponent was nonzero"))
}

/// Straight-line one-step cost between two nodes: the minimum over integer
/// winding shifts w per axis in {-W, ..., W} of the midpoint-rule integral of
/// L along the lifted segment of duration h starting at time t0.
pub fn one_step_cost(
    spec: &LagrangianSpec,
    grid: &TorusGrid,
    from: usize,
    to: usize,
    t0: f64,
    h: f64,
    substeps: usize,
    winding: i64,
) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument("one_step_cost: h must be > 0".into()));
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument(
            "one_step_cost: substeps must be >= 1".into(),
        ));
    }
    if spec.dim != grid.dim() {
        return Err(Error::InvalidArgument(
            "one_step_cost: spec and grid dimensions differ".into(),
        ));
    }
    Ok(one_step_cost_detail(spec, grid, from, to, t0, h, substeps, winding).0)
}

/// Returns (cost, winding-boundary-hit flag). The flag is set when the
/// minimizing winding uses |w| = W, which signals that the configured winding
/// range may be clipping the true infimum.
#[allow(clippy::too_many_arguments)]
fn one_step_cost_detail(
    spec: &LagrangianSpec,
    grid: &TorusGrid,
    from: usize,
    to: usize,
    t0: f64,
    h: f64,
    substeps: usize,
    winding: i64,
) -> (f64, bool) {
    let dim = grid.dim();
    let d0 = grid.displacement(from, to);
    let xc = grid.coords(from);
    let dt = h / substeps as f64;

    let mut best = f64::INFINITY;
    let mut best_wmax = 0i64;
    let wy_range = if dim == 2 { -winding..=winding } else { 0..=0 };
    for wx in -winding..=winding {
        for wy in wy_range.clone() {
            let d = [d0[0] + wx as f64, d0[1] + wy as f64];
            let v = [d[0] / h, d[1] / h];
            let mut acc = 0.0;
            for i in 0..substeps {
                let s = (i as f64 + 0.5) * dt;
                let pos = [xc[0] + v[0] * s, xc[1] + v[1] * s];
                acc += spec.eval_unchecked(&pos[..dim], &v[..dim], t0 + s);
            }
            let cost = acc * dt;
            if cost < best {
                best = cost;
                best_wmax = wx.abs().max(wy.abs());
            }
        }
    }
    (best, best_wmax == winding && winding > 0)
}

/// One-step kernels for every sub-interval of the period, plus build
/// diagnostics.
pub struct StepKernels {
    pub kernels: Vec<CostKernel>,
    pub steps_per_period: usize,
    /// In-window entries whose minimizing winding sat on the configured
    /// boundary |w| = W. Nonzero values mean the winding range should grow.
    pub winding_boundary_hits: usize,
}

/// Build the S sub-step kernels at t0 = j/S, h = 1/S. Transitions with torus
/// displacement larger than `v_max / S` are excluded with the `BIG` sentinel.
pub fn build_step_kernels(
    spec: &LagrangianSpec,
    grid: &TorusGrid,
    steps_per_period: usize,
    substeps: usize,
    v_max: f64,
    winding: i64,
) -> Result<StepKernels> {
    if steps_per_period < 4 {
        return Err(Error::Config(format!(
            "steps_per_period must be >= 4, got {steps_per_period}"
        )));
    }
    if substeps == 0 {
        return Err(Error::Config("substeps must be >= 1".into()));
    }
    if winding < 0 {
        return Err(Error::Config("winding must be >= 0".into()));
    }
    if spec.dim != grid.dim() {
        return Err(Error::Config(
            "system dimension does not match grid dimension".into(),
        ));
    }
    let h = 1.0 / steps_per_period as f64;
    let radius = v_max * h;
    if radius + 1e-12 < grid.spacing() {
        return Err(Error::Config(format!(
            "velocity window too small to connect neighbors: v_max/S = {radius} < spacing {}",
            grid.spacing()
        )));
    }

    let m = grid.node_count();
    let build_one = |t0: f64| -> (Vec<f64>, usize) {
        let mut entries = vec![BIG; m * m];
        let hits: usize = entries
            .par_chunks_mut(m)
            .enumerate()
            .map(|(y, row)| {
                let mut local_hits = 0usize;
                for (x, e) in row.iter_mut().enumerate() {
                    let d = grid.displacement(y, x);
                    if (d[0] * d[0] + d[1] * d[1]).sqrt() <= radius + 1e-12 {
                        let (cost, hit) =
                            one_step_cost_detail(spec, grid, y, x, t0, h, substeps, winding);
                        *e = cost;
                        if hit {
                            local_hits += 1;
                        }
                    }
                }
                local_hits
            })
            .sum();
        (entries, hits)
    };

    let mut kernels = Vec::with_capacity(steps_per_period);
    let mut total_hits = 0usize;
    if spec.time_independent() {
        let (entries, hits) = build_one(0.0);
        total_hits = hits;
        let shared = Arc::new(entries);
        for j in 0..steps_per_period {
            kernels.push(CostKernel {
                grid: *grid,
                t_start: j as f64 * h,
                t_end: (j + 1) as f64 * h,
                raw: Arc::clone(&shared),
                offset: 0.0,
            });
        }
    } else {
        for j in 0..steps_per_period {
            let (entries, hits) = build_one(j as f64 * h);
            total_hits += hits;
            kernels.push(CostKernel {
                grid: *grid,
                t_start: j as f64 * h,
                t_end: (j + 1) as f64 * h,
                raw: Arc::new(entries),
                offset: 0.0,
            });
        }
    }
    Ok(StepKernels {
        kernels,
        steps_per_period,
        winding_boundary_hits: total_hits,
    })
}

/// Full-period kernel together with every prefix K_τj = F_{0, j/S}.
pub struct PeriodKernel {
    pub full: CostKernel,
    /// prefixes[j] covers [0, j/S]; prefixes[0] is the tropical identity.
    pub prefixes: Vec<CostKernel>,
}

fn check_coverage(steps: &[CostKernel]) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::InvalidArgument("period_kernel: no step kernels".into()));
    }
    if steps[0].t_start.abs() > TIME_TOL {
        return Err(Error::InvalidArgument(
            "period_kernel: coverage must start at t = 0".into(),
        ));
    }
    for w in steps.windows(2) {
        if (w[0].t_end - w[1].t_start).abs() > TIME_TOL {
            return Err(Error::InvalidArgument(
                "period_kernel: gap in step coverage".into(),
            ));
        }
    }
    if (steps.last().unwrap().t_end - 1.0).abs() > TIME_TOL {
        return Err(Error::InvalidArgument(
            "period_kernel: coverage must end at t = 1".into(),
        ));
    }
    Ok(())
}

/// Left-to-right product of the step kernels, retaining all prefixes.
pub fn period_kernel(steps: &[CostKernel]) -> Result<PeriodKernel> {
    check_coverage(steps)?;
    let grid = steps[0].grid;
    let mut prefixes = vec![CostKernel::identity(grid, 0.0)];
    let mut acc = steps[0].clone();
    for step in &steps[1..] {
        prefixes.push(acc.clone());
        acc = minplus_matmul(&acc, step)?;
    }
    Ok(PeriodKernel {
        full: acc,
        prefixes,
    })
}

/// Same product without keeping prefixes (saves memory on large 2d grids).
pub fn compose_all(steps: &[CostKernel]) -> Result<CostKernel> {
    check_coverage(steps)?;
    let mut acc = steps[0].clone();
    for step in &steps[1..] {
        acc = minplus_matmul(&acc, step)?;
    }
    Ok(acc)
}

/// An argmin node sequence with sub-step timestamps.
#[derive(Clone, Debug)]
pub struct DiscretePath {
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
    pub total_action: f64,
}

/// Forward value layers of `u` composed through a concrete sub-step
/// sequence; the cache backtracking runs on.
pub struct ForwardSweep {
    steps: Vec<CostKernel>,
    layers: Vec<Vec<f64>>,
    h: f64,
}

/// Compose `u` through `periods` full periods plus the first `tau_index`
/// sub-steps, keeping every intermediate layer.
pub fn forward_sweep(
    step_kernels: &[CostKernel],
    u: &ValueFunction,
    periods: usize,
    tau_index: usize,
) -> Result<ForwardSweep> {
    check_coverage(step_kernels)?;
    if tau_index >= step_kernels.len() + 1 {
        return Err(Error::InvalidArgument(
            "forward_sweep: tau_index out of range".into(),
        ));
    }
    let s = step_kernels.len();
    let mut seq = Vec::with_capacity(periods * s + tau_index);
    for _ in 0..periods {
        seq.extend(step_kernels.iter().cloned());
    }
    seq.extend(step_kernels[..tau_index].iter().cloned());

    let mut layers = Vec::with_capacity(seq.len() + 1);
    layers.push(u.values.clone());
    let mut cur = u.clone();
    for step in &seq {
        cur = minplus_matvec(step, &cur)?;
        layers.push(cur.values.clone());
    }
    Ok(ForwardSweep {
        steps: seq,
        layers,
        h: 1.0 / s as f64,
    })
}

impl ForwardSweep {
    pub fn final_values(&self) -> &[f64] {
        self.layers.last().unwrap()
    }

    pub fn len_substeps(&self) -> usize {
        self.steps.len()
    }
}

/// Walk the cached layers backwards from `endpoint`, recovering a minimizing
/// node sequence. The path start attains the outer minimum and every interior
/// node attains its one-step minimum; `total_action + u(start)` reproduces
/// the operator value at the endpoint.
pub fn backtrack_minimizer(sweep: &ForwardSweep, endpoint: usize) -> Result<DiscretePath> {
    let t_final = sweep.steps.len();
    let m = match sweep.layers.first() {
        Some(l) => l.len(),
        None => return Err(Error::State("backtrack: empty forward cache".into())),
    };
    if endpoint >= m {
        return Err(Error::InvalidArgument("backtrack: endpoint out of range".into()));
    }
    let mut nodes = vec![endpoint];
    let mut total = 0.0;
    let mut v = endpoint;
    for t in (1..=t_final).rev() {
        let step = &sweep.steps[t - 1];
        let prev = &sweep.layers[t - 1];
        let raw = step.raw_slice();
        let mut best_y = usize::MAX;
        let mut best_val = f64::INFINITY;
        for (y, &py) in prev.iter().enumerate() {
            if py >= BIG_GUARD {
                continue;
            }
            let r = raw[y * m + v];
            if r >= BIG_GUARD {
                continue;
            }
            let cand = py + r;
            if cand < best_val {
                best_val = cand;
                best_y = y;
            }
        }
        if best_y == usize::MAX {
            return Err(Error::State(
                "backtrack: no admissible predecessor (window exhausted)".into(),
            ));
        }
        total += step.entry(best_y, v);
        nodes.push(best_y);
        v = best_y;
    }
    nodes.reverse();
    let times = (0..=t_final).map(|t| t as f64 * sweep.h).collect();
    Ok(DiscretePath {
        nodes,
        times,
        total_action: total,
    })
}
