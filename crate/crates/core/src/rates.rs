//! Convergence measurement: error sequences against the discrete limit,
//! exponential and power-law fits on auto-trimmed windows, and the full
//! configured pipeline (build → normalize → limit → iterate → fit).
//!
//! The reference limit is the discrete system's own converged tail object,
//! not a continuum solution, which isolates the operator family's rate from
//! discretization bias; the representation through the barrier is checked
//! separately as a cross-oracle.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{InitialKind, OperatorKind, RunConfig};
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::kernel::{
    build_step_kernels, compose_all, minplus_matvec, period_kernel, CostKernel,
};
use crate::karp::karp_min_mean_cycle;
use crate::lagrangian::{catalog_get, tent_initial_condition, LagrangianSpec, ReferencePoint};
use crate::value::ValueFunction;

#[derive(Clone, Copy, Debug)]
pub struct FitResult {
    /// Decay parameter: ρ for the exponential model, p for the power law.
    pub rate: f64,
    /// Intercept in log space (ln K).
    pub intercept: f64,
    pub r2: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy <= 1e-30 {
        1.0
    } else {
        ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
    };
    (slope, intercept, r2)
}

fn check_fit_window(ns: &[f64], es: &[f64]) -> Result<()> {
    if ns.len() != es.len() || ns.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "fit window must hold at least 5 points, got {}",
            ns.len()
        )));
    }
    if es.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidArgument(
            "fit window requires strictly positive errors".into(),
        ));
    }
    Ok(())
}

/// Least squares of ln e against n; ρ = −slope.
pub fn fit_exponential(ns: &[f64], es: &[f64]) -> Result<FitResult> {
    check_fit_window(ns, es)?;
    let ys: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let (slope, intercept, r2) = least_squares(ns, &ys);
    Ok(FitResult {
        rate: -slope,
        intercept,
        r2,
    })
}

/// Least squares of ln e against ln n; p = −slope.
pub fn fit_power(ns: &[f64], es: &[f64]) -> Result<FitResult> {
    check_fit_window(ns, es)?;
    if ns.iter().any(|&n| !(n > 0.0)) {
        return Err(Error::InvalidArgument(
            "power-law fit needs strictly positive horizons".into(),
        ));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let (slope, intercept, r2) = least_squares(&xs, &ys);
    Ok(FitResult {
        rate: -slope,
        intercept,
        r2,
    })
}

/// Median of the 10 trailing values: the discretization floor the fit window
/// must stay clear of.
pub fn floor_estimate(series: &[f64]) -> Result<f64> {
    if series.len() < 10 {
        return Err(Error::InvalidArgument(
            "floor estimate needs at least 10 trailing points".into(),
        ));
    }
    let mut tail: Vec<f64> = series[series.len() - 10..].to_vec();
    tail.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(0.5 * (tail[4] + tail[5]))
}

/// Contiguous fit window above the plateau: starting from the first horizon
/// n ≥ 1, keep points while e_n > max(3·floor, 0).
pub fn trim_window(series: &[(usize, f64)], floor: f64) -> (usize, usize) {
    let cut = 3.0 * floor;
    let mut start = None;
    for (i, &(n, e)) in series.iter().enumerate() {
        if n >= 1 {
            if e > cut && e > 0.0 {
                start = Some(i);
            }
            break;
        }
    }
    let Some(s) = start else { return (0, 0) };
    let mut end = s;
    for (i, &(_, e)) in series.iter().enumerate().skip(s) {
        if e > cut && e > 0.0 {
            end = i + 1;
        } else {
            break;
        }
    }
    (s, end)
}

pub struct ConvergenceReport {
    pub system: String,
    pub operator: OperatorKind,
    pub grid_n: usize,
    pub steps_per_period: usize,
    pub c_est: f64,
    /// (n, e_n); even horizons only when the run was configured that way.
    pub series: Vec<(usize, f64)>,
    pub exp_fit: Option<FitResult>,
    pub pow_fit: Option<FitResult>,
    pub floor: f64,
    /// Horizon range [n_lo, n_hi] the fits ran on (empty when no window).
    pub fit_window: (usize, usize),
    pub stagnated_at: Option<usize>,
    pub detected_period: Option<usize>,
    pub winding_boundary_hits: usize,
    /// The limit value at the probe node, when a probe was configured.
    pub ubar_at_probe: Option<f64>,
}

impl ConvergenceReport {
    pub fn series_csv(&self) -> String {
        let mut s = String::from("n,error\n");
        for &(n, e) in &self.series {
            s.push_str(&format!("{n},{e:.16e}\n"));
        }
        s
    }

    pub fn render(&self) -> String {
        let fmt_fit = |f: &Option<FitResult>| match f {
            Some(f) => format!("{:.6} (r2 {:.6})", f.rate, f.r2),
            None => "n/a".into(),
        };
        let mut s = String::new();
        s.push_str(&format!("system = {}\n", self.system));
        s.push_str(&format!("operator = {}\n", self.operator.as_str()));
        s.push_str(&format!(
            "grid_n = {}\nsteps_per_period = {}\n",
            self.grid_n, self.steps_per_period
        ));
        s.push_str(&format!("c_est = {:.16e}\n", self.c_est));
        s.push_str(&format!(
            "rho_meas = {}\n",
            self.exp_fit
                .map(|f| format!("{:.6}", f.rate))
                .unwrap_or_else(|| "n/a".into())
        ));
        s.push_str(&format!(
            "p_meas = {}\n",
            self.pow_fit
                .map(|f| format!("{:.6}", f.rate))
                .unwrap_or_else(|| "n/a".into())
        ));
        s.push_str(&format!(
            "r2_exp = {}\nr2_pow = {}\n",
            self.exp_fit
                .map(|f| format!("{:.6}", f.r2))
                .unwrap_or_else(|| "n/a".into()),
            self.pow_fit
                .map(|f| format!("{:.6}", f.r2))
                .unwrap_or_else(|| "n/a".into())
        ));
        s.push_str(&format!("floor = {:.16e}\n", self.floor));
        s.push_str(&format!(
            "window = [{}, {}]\n",
            self.fit_window.0, self.fit_window.1
        ));
        s.push_str(&format!(
            "stagnated_at = {}\n",
            self.stagnated_at
                .map(|k| k.to_string())
                .unwrap_or_else(|| "none".into())
        ));
        s.push_str(&format!(
            "detected_period = {}\n",
            self.detected_period
                .map(|k| k.to_string())
                .unwrap_or_else(|| "none".into())
        ));
        let _ = fmt_fit;
        s
    }
}

/// Seeded Lipschitz test profile: a few low harmonics per axis with bounded
/// total slope.
pub fn random_lipschitz(grid: &TorusGrid, seed: u64) -> ValueFunction {
    use std::f64::consts::TAU;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mut terms = Vec::new();
    for axis in 0..dim {
        for m in 1..=3u32 {
            let amp = (rng.gen::<f64>() - 0.5) * 0.2 / m as f64;
            let phase = rng.gen::<f64>() * TAU;
            terms.push((axis, m as f64, amp, phase));
        }
    }
    ValueFunction::from_fn(*grid, move |c| {
        terms
            .iter()
            .map(|&(axis, m, amp, phase)| amp * (TAU * m * c[axis] + phase).sin())
            .sum()
    })
}

pub fn initial_condition(cfg: &RunConfig, grid: &TorusGrid) -> Result<ValueFunction> {
    match cfg.initial {
        InitialKind::Tent => tent_initial_condition(grid, cfg.initial_center, cfg.initial_height),
        InitialKind::Zero => Ok(ValueFunction::constant(*grid, 0.0)),
        InitialKind::RandomLipschitz => Ok(random_lipschitz(grid, cfg.seed)),
    }
}

/// Everything a convergence run shares with downstream consumers (checks,
/// barrier commands, acceptance drivers).
pub struct PreparedSystem {
    pub spec: LagrangianSpec,
    pub reference: ReferencePoint,
    pub grid: TorusGrid,
    pub steps: Vec<CostKernel>,
    pub period: CostKernel,
    /// Normalized prefixes; present only when τ offsets beyond 0 are needed.
    pub prefixes: Option<Vec<CostKernel>>,
    pub c_est: f64,
    pub winding_boundary_hits: usize,
}

/// Build kernels, estimate the critical value and normalize.
pub fn prepare_system(cfg: &RunConfig, with_prefixes: bool) -> Result<PreparedSystem> {
    cfg.validate()?;
    let (spec, reference) = catalog_get(&cfg.system_name, &cfg.params)?;
    let grid = TorusGrid::new(spec.dim, cfg.grid_n)?;
    let built = build_step_kernels(
        &spec,
        &grid,
        cfg.steps_per_period,
        cfg.substeps,
        cfg.v_max,
        cfg.winding,
    )?;
    let (raw_period, prefixes) = if with_prefixes {
        let pk = period_kernel(&built.kernels)?;
        (pk.full, Some(pk.prefixes))
    } else {
        (compose_all(&built.kernels)?, None)
    };
    let c_est = karp_min_mean_cycle(&raw_period)?;
    let period = raw_period.normalized(c_est);
    let prefixes = prefixes.map(|ps| ps.iter().map(|p| p.normalized(c_est)).collect());
    let steps = built
        .kernels
        .iter()
        .map(|k| k.normalized(c_est))
        .collect();
    Ok(PreparedSystem {
        spec,
        reference,
        grid,
        steps,
        period,
        prefixes,
        c_est,
        winding_boundary_hits: built.winding_boundary_hits,
    })
}

struct SweepOutcome {
    history: Vec<Vec<f64>>,
    ubar: Vec<f64>,
    stagnated_at: Option<usize>,
    detected_period: Option<usize>,
}

/// One iteration sweep: record T_k u for k ≤ hist_len, accumulate the tail
/// minimum over [b0, b1], exit early on exact stagnation.
fn iterate_with_tail(
    period: &CostKernel,
    u0: &ValueFunction,
    hist_len: usize,
    b0: usize,
    b1: usize,
    fp_tol: f64,
) -> Result<SweepOutcome> {
    let n_final = hist_len.max(b1);
    let mut history = Vec::with_capacity(hist_len + 1);
    history.push(u0.values.clone());
    let mut cur = u0.clone();
    let mut tail: Option<Vec<f64>> = None;
    let mut tail_hist: Vec<Vec<f64>> = Vec::new();
    let mut stagnated_at = None;
    let mut last_increments: Vec<f64> = Vec::new();
    for k in 1..=n_final {
        let next = minplus_matvec(period, &cur)?;
        let diff = next.sup_norm_diff(&cur)?;
        last_increments.push(diff);
        if last_increments.len() > 5 {
            last_increments.remove(0);
        }
        cur = next;
        if k <= hist_len {
            history.push(cur.values.clone());
        }
        if k >= b0 {
            match tail.as_mut() {
                None => tail = Some(cur.values.clone()),
                Some(t) => {
                    for (ti, &vi) in t.iter_mut().zip(&cur.values) {
                        if vi < *ti {
                            *ti = vi;
                        }
                    }
                }
            }
            tail_hist.push(cur.values.clone());
        }
        if diff <= fp_tol {
            stagnated_at = Some(k);
            break;
        }
    }
    if let Some(k) = stagnated_at {
        // the iteration is pinned from here on; extend the history virtually
        while history.len() <= hist_len {
            history.push(cur.values.clone());
        }
        let _ = k;
    }
    let detected_period = if stagnated_at.is_some() {
        Some(1)
    } else {
        detect_vec_period(&tail_hist)
    };
    if stagnated_at.is_none() && detected_period.is_none() {
        return Err(Error::Numerical(format!(
            "limit iteration neither stagnated to {fp_tol} nor settled into a short cycle by n = {n_final}; last sup increments: {last_increments:?}"
        )));
    }
    let ubar = match (stagnated_at, tail) {
        (Some(_), _) => cur.values.clone(),
        (None, Some(t)) => t,
        (None, None) => cur.values.clone(),
    };
    Ok(SweepOutcome {
        history,
        ubar,
        stagnated_at,
        detected_period,
    })
}

fn detect_vec_period(hist: &[Vec<f64>]) -> Option<usize> {
    for p in 1..=8usize {
        if hist.len() < p + 2 {
            return None;
        }
        let ok = (p..hist.len()).all(|i| {
            hist[i]
                .iter()
                .zip(&hist[i - p])
                .all(|(a, b)| (a - b).abs() <= 1e-12)
        });
        if ok {
            return Some(p);
        }
    }
    None
}

/// Full configured pipeline producing the error series and its fits.
pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceReport> {
    let taus = cfg.tau_indices();
    let need_prefixes = taus.iter().any(|&t| t != 0);
    let sys = prepare_system(cfg, need_prefixes)?;
    let grid = sys.grid;
    let u0 = initial_condition(cfg, &grid)?;

    let (b0, b1) = cfg.barrier_window(grid.node_count());
    let hist_len = match cfg.operator {
        OperatorKind::Classic => cfg.n_max,
        OperatorKind::New => 2 * cfg.n_max,
    };
    let sweep = iterate_with_tail(&sys.period, &u0, hist_len, b0, b1, cfg.tol_fixed_point)?;

    let ubar0 = ValueFunction::new(grid, sweep.ubar.clone(), 0.0);
    // limit slice per requested τ offset
    let mut ubar_slices = Vec::with_capacity(taus.len());
    for &t in &taus {
        if t == 0 {
            ubar_slices.push(ubar0.clone());
        } else {
            let p = sys.prefixes.as_ref().expect("prefixes were built");
            ubar_slices.push(minplus_matvec(&p[t], &ubar0)?);
        }
    }

    let probe_node = match &cfg.probe {
        Some(p) => Some(grid.nearest_node(p)?),
        None => None,
    };

    let mut series = Vec::new();
    for n in 0..=cfg.n_max {
        if cfg.even_only && n % 2 != 0 {
            continue;
        }
        // windowed or single-horizon value at τ = 0, reusing the history
        let base: Vec<f64> = match cfg.operator {
            OperatorKind::Classic => sweep.history[n].clone(),
            OperatorKind::New => {
                let mut w = sweep.history[n].clone();
                for k in n + 1..=2 * n {
                    for (wi, &vi) in w.iter_mut().zip(&sweep.history[k]) {
                        if vi < *wi {
                            *wi = vi;
                        }
                    }
                }
                w
            }
        };
        let base = ValueFunction::new(grid, base, 0.0);
        let e = match probe_node {
            Some(node) => (base.values[node] - ubar0.values[node]).abs(),
            None => {
                let mut worst: f64 = 0.0;
                for (i, &t) in taus.iter().enumerate() {
                    let slice = if t == 0 {
                        base.clone()
                    } else {
                        let p = sys.prefixes.as_ref().expect("prefixes were built");
                        minplus_matvec(&p[t], &base)?
                    };
                    worst = worst.max(slice.sup_norm_diff(&ubar_slices[i])?);
                }
                worst
            }
        };
        series.push((n, e));
    }

    let evals: Vec<f64> = series.iter().map(|&(_, e)| e).collect();
    let floor = if evals.len() >= 10 {
        floor_estimate(&evals)?
    } else {
        0.0
    };
    let (ws, we) = trim_window(&series, floor);
    let (exp_fit, pow_fit, window_ns) = if we.saturating_sub(ws) >= 5 {
        let ns: Vec<f64> = series[ws..we].iter().map(|&(n, _)| n as f64).collect();
        let es: Vec<f64> = series[ws..we].iter().map(|&(_, e)| e).collect();
        (
            fit_exponential(&ns, &es).ok(),
            fit_power(&ns, &es).ok(),
            (series[ws].0, series[we - 1].0),
        )
    } else {
        (None, None, (0, 0))
    };

    Ok(ConvergenceReport {
        system: cfg.system_name.clone(),
        operator: cfg.operator,
        grid_n: cfg.grid_n,
        steps_per_period: cfg.steps_per_period,
        c_est: sys.c_est,
        series,
        exp_fit,
        pow_fit,
        floor,
        fit_window: window_ns,
        stagnated_at: sweep.stagnated_at,
        detected_period: sweep.detected_period,
        winding_boundary_hits: sys.winding_boundary_hits,
        ubar_at_probe: probe_node.map(|n| ubar0.values[n]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_recovery_is_exact() {
        let ns: Vec<f64> = (1..=20).map(|n| n as f64).collect();
        let es: Vec<f64> = ns.iter().map(|n| 7.0 * (-0.3 * n).exp()).collect();
        let f = fit_exponential(&ns, &es).unwrap();
        assert!((f.rate - 0.3).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!((f.intercept - 7.0f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn power_recovery_and_discrimination() {
        let ns: Vec<f64> = (1..=30).map(|n| n as f64).collect();
        let e1: Vec<f64> = ns.iter().map(|n| 5.0 / n).collect();
        let f = fit_power(&ns, &e1).unwrap();
        assert!((f.rate - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);

        let e2: Vec<f64> = ns.iter().map(|n| 3.0 / (n * n)).collect();
        let f2 = fit_power(&ns, &e2).unwrap();
        assert!((f2.rate - 2.0).abs() < 1e-12);

        // model discrimination both ways
        let exp_series: Vec<f64> = ns.iter().map(|n| (-n).exp()).collect();
        let pow_on_exp = fit_power(&ns, &exp_series).unwrap();
        let exp_on_exp = fit_exponential(&ns, &exp_series).unwrap();
        assert!(exp_on_exp.r2 > pow_on_exp.r2);

        let pow_on_inv = fit_power(&ns, &e1).unwrap();
        let exp_on_inv = fit_exponential(&ns, &e1).unwrap();
        assert!(pow_on_inv.r2 > exp_on_inv.r2);
    }

    #[test]
    fn constant_series_fits_flat() {
        let ns: Vec<f64> = (1..=10).map(|n| n as f64).collect();
        let es = vec![0.25; 10];
        let f = fit_exponential(&ns, &es).unwrap();
        assert_eq!(f.rate, 0.0);
    }

    #[test]
    fn short_or_nonpositive_windows_rejected() {
        let ns = [1.0, 2.0, 3.0, 4.0];
        let es = [1.0, 0.5, 0.25, 0.125];
        assert!(fit_exponential(&ns, &es).is_err());
        let ns5 = [1.0, 2.0, 3.0, 4.0, 5.0];
        let bad = [1.0, 0.5, 0.0, 0.25, 0.1];
        assert!(fit_exponential(&ns5, &bad).is_err());
    }

    #[test]
    fn floor_and_window_trimming() {
        let mut series: Vec<(usize, f64)> = Vec::new();
        for n in 0..30 {
            let e = (0.5 * (-0.4 * n as f64).exp()).max(1e-4);
            series.push((n, e));
        }
        let evals: Vec<f64> = series.iter().map(|&(_, e)| e).collect();
        let floor = floor_estimate(&evals).unwrap();
        assert!((floor - 1e-4).abs() < 1e-12);
        let (s, e) = trim_window(&series, floor);
        assert!(s >= 1);
        for &(_, ev) in &series[s..e] {
            assert!(ev > 3.0 * floor);
        }
        // strictly decaying series floors at the last value
        let dec: Vec<f64> = (0..20).map(|n| (-0.3 * n as f64).exp()).collect();
        let f2 = floor_estimate(&dec).unwrap();
        assert!(f2 >= *dec.last().unwrap() && f2 <= dec[dec.len() - 6]);
    }

    #[test]
    fn zero_error_when_started_at_the_limit() {
        // e_n = 0 for all n when u = ū
        let mut cfg = RunConfig::default();
        cfg.grid_n = 16;
        cfg.steps_per_period = 8;
        cfg.n_max = 6;
        cfg.tau_slices = 1;
        cfg.params.insert("a".into(), 1.0);
        let sys = prepare_system(&cfg, false).unwrap();
        let u0 = initial_condition(&cfg, &sys.grid).unwrap();
        let sweep = iterate_with_tail(&sys.period, &u0, 0, 16, 80, 1e-12).unwrap();
        let ubar = ValueFunction::new(sys.grid, sweep.ubar, 0.0);
        let t1 = minplus_matvec(&sys.period, &ubar).unwrap();
        assert!(t1.sup_norm_diff(&ubar).unwrap() <= 1e-12);
    }
}
