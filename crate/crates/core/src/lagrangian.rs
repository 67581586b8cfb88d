//! Catalog of time-periodic Lagrangians on flat tori.
//!
//! Both catalog members are nonnegative, 1-periodic in time, quadratic in the
//! velocity and vanish exactly on a known minimizing orbit:
//!
//! * `forced_pendulum_1d`: L(x,v,t) = v²/2 + a(1 − cos 2πx)(1 + ε cos 2πt)
//!   on T¹, with 0 ≤ ε < 1 so the potential factor stays positive. For every
//!   ε the line x = 0 is a 1-periodic orbit; it is hyperbolic for small ε
//!   (validated per run through the monodromy matrix, not assumed).
//! * `example_4_1`: L(x,y,vx,vy) = vx²/2 + (1 − cos 2πx) + (vy − c)²/2 on T²,
//!   whose minimizing set is the circle x = 0 traversed with velocity (0, c).
//!
//! The catalog is closed: both members satisfy periodicity, fiberwise
//! positive definiteness and superlinear growth by construction, which keeps
//! every downstream assumption checkable.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::grid::{torus_dist, TorusGrid};
use crate::value::ValueFunction;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Kind {
    ForcedPendulum1d,
    DriftPendulum2d,
}

#[derive(Clone, Copy, Debug)]
pub struct LagrangianSpec {
    pub kind: Kind,
    pub dim: usize,
    /// Potential height `a` of the pendulum family (ignored by the 2d member,
    /// whose x-potential height is fixed at 1).
    pub amplitude: f64,
    /// Time-periodic forcing strength ε (pendulum only).
    pub eps: f64,
    /// Drift velocity c of the 2d member.
    pub drift: f64,
    /// Constant added to L; used to probe how the critical value responds to
    /// shifting the Lagrangian.
    pub shift: f64,
}

/// Analytically known reference data for a catalog member.
#[derive(Clone, Copy, Debug)]
pub struct ReferencePoint {
    /// Anchor of the minimizing orbit: the fixed point for the pendulum, a
    /// point on the circle x = 0 for the 2d member.
    pub anchor: [f64; 2],
    /// Velocity along the reference orbit.
    pub velocity: [f64; 2],
    /// True when the projected Aubry set is the whole circle {x = 0} rather
    /// than a single point.
    pub aubry_is_circle_in_y: bool,
    pub critical_value: f64,
    pub hyperbolic: bool,
}

impl LagrangianSpec {
    /// Pointwise evaluation L(x, v, t). Slices must match `dim`.
    pub fn eval(&self, x: &[f64], v: &[f64], t: f64) -> Result<f64> {
        if x.len() != self.dim || v.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "eval_lagrangian: expected dim {}, got x: {}, v: {}",
                self.dim,
                x.len(),
                v.len()
            )));
        }
        Ok(self.eval_unchecked(x, v, t))
    }

    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], v: &[f64], t: f64) -> f64 {
        // reduce the phase first so 1-periodicity in t holds bit-for-bit
        let tf = t.rem_euclid(1.0);
        self.shift
            + match self.kind {
                Kind::ForcedPendulum1d => {
                    0.5 * v[0] * v[0]
                        + self.amplitude
                            * (1.0 - (TAU * x[0]).cos())
                            * (1.0 + self.eps * (TAU * tf).cos())
                }
                Kind::DriftPendulum2d => {
                    let dv = v[1] - self.drift;
                    0.5 * v[0] * v[0] + (1.0 - (TAU * x[0]).cos()) + 0.5 * dv * dv
                }
            }
    }

    pub fn time_independent(&self) -> bool {
        match self.kind {
            Kind::ForcedPendulum1d => self.eps == 0.0,
            Kind::DriftPendulum2d => true,
        }
    }

    /// Acceleration of the Euler-Lagrange flow, d v / dt = ∂L/∂x.
    pub fn acceleration(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let tf = t.rem_euclid(1.0);
        match self.kind {
            Kind::ForcedPendulum1d => {
                out[0] = self.amplitude
                    * TAU
                    * (TAU * x[0]).sin()
                    * (1.0 + self.eps * (TAU * tf).cos());
            }
            Kind::DriftPendulum2d => {
                out[0] = TAU * (TAU * x[0]).sin();
                out[1] = 0.0;
            }
        }
    }

    /// Derivative of the acceleration with respect to position (diagonal in
    /// both catalog members).
    pub fn acceleration_jacobian(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let tf = t.rem_euclid(1.0);
        match self.kind {
            Kind::ForcedPendulum1d => {
                out[0] = self.amplitude
                    * TAU
                    * TAU
                    * (TAU * x[0]).cos()
                    * (1.0 + self.eps * (TAU * tf).cos());
            }
            Kind::DriftPendulum2d => {
                out[0] = TAU * TAU * (TAU * x[0]).cos();
                out[1] = 0.0;
            }
        }
    }

    pub fn reference(&self) -> ReferencePoint {
        match self.kind {
            Kind::ForcedPendulum1d => ReferencePoint {
                anchor: [0.0, 0.0],
                velocity: [0.0, 0.0],
                aubry_is_circle_in_y: false,
                critical_value: 0.0,
                hyperbolic: true,
            },
            Kind::DriftPendulum2d => ReferencePoint {
                anchor: [0.0, 0.0],
                velocity: [0.0, self.drift],
                aubry_is_circle_in_y: true,
                critical_value: 0.0,
                hyperbolic: true,
            },
        }
    }
}

/// Look up a catalog member and validate its parameters.
///
/// Recognized names and keys:
/// * `forced_pendulum_1d` with `a` (> 0, default 1), `eps` ([0,1), default 0)
/// * `example_4_1` with `c` (any real, default 0)
///
/// Both accept `shift` (constant added to L, default 0). Unknown keys are
/// rejected.
pub fn catalog_get(
    name: &str,
    params: &BTreeMap<String, f64>,
) -> Result<(LagrangianSpec, ReferencePoint)> {
    let mut allowed: Vec<&str> = vec!["shift"];
    let spec = match name {
        "forced_pendulum_1d" => {
            allowed.extend_from_slice(&["a", "eps"]);
            let a = *params.get("a").unwrap_or(&1.0);
            let eps = *params.get("eps").unwrap_or(&0.0);
            if !(a > 0.0) {
                return Err(Error::Config(format!(
                    "forced_pendulum_1d: amplitude a must be > 0, got {a}"
                )));
            }
            if !(0.0..1.0).contains(&eps) {
                return Err(Error::Config(format!(
                    "forced_pendulum_1d: eps must lie in [0, 1), got {eps}"
                )));
            }
            LagrangianSpec {
                kind: Kind::ForcedPendulum1d,
                dim: 1,
                amplitude: a,
                eps,
                drift: 0.0,
                shift: *params.get("shift").unwrap_or(&0.0),
            }
        }
        "example_4_1" => {
            allowed.push("c");
            LagrangianSpec {
                kind: Kind::DriftPendulum2d,
                dim: 2,
                amplitude: 1.0,
                eps: 0.0,
                drift: *params.get("c").unwrap_or(&0.0),
                shift: *params.get("shift").unwrap_or(&0.0),
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown catalog name '{other}' (expected forced_pendulum_1d or example_4_1)"
            )))
        }
    };
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "catalog '{name}' does not accept parameter '{key}'"
            )));
        }
    }
    let reference = spec.reference();
    Ok((spec, reference))
}

/// Tent profile u = max(0, δ − dist_T(y, y0)) in the last grid coordinate,
/// constant along the other axis.
pub fn tent_initial_condition(grid: &TorusGrid, center: f64, height: f64) -> Result<ValueFunction> {
    if !(height > 0.0 && height < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "tent height must lie in (0, 1/2), got {height}"
        )));
    }
    let axis = grid.dim() - 1;
    let values = (0..grid.node_count())
        .map(|i| {
            let c = grid.coords(i);
            (height - torus_dist(c[axis], center)).max(0.0)
        })
        .collect();
    Ok(ValueFunction::new(*grid, values, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pendulum(a: f64, eps: f64) -> LagrangianSpec {
        let mut p = BTreeMap::new();
        p.insert("a".to_string(), a);
        p.insert("eps".to_string(), eps);
        catalog_get("forced_pendulum_1d", &p).unwrap().0
    }

    fn drift2d(c: f64) -> LagrangianSpec {
        let mut p = BTreeMap::new();
        p.insert("c".to_string(), c);
        catalog_get("example_4_1", &p).unwrap().0
    }

    #[test]
    fn zero_on_reference_orbit() {
        let s = drift2d(0.5);
        // the drift orbit has zero cost at any point of the circle x = 0
        assert_eq!(s.eval(&[0.0, 0.3], &[0.0, 0.5], 0.37).unwrap(), 0.0);
        let p = pendulum(1.0, 0.0);
        assert_eq!(p.eval(&[0.0], &[0.0], 0.7).unwrap(), 0.0);
    }

    #[test]
    fn direct_substitution() {
        // 1 - cos(pi) = 2 at the top of the potential
        let p = pendulum(1.0, 0.0);
        assert!((p.eval(&[0.5], &[0.0], 0.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = pendulum(1.0, 0.0);
        assert!(p.eval(&[0.0, 0.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn catalog_validation() {
        let mut p = BTreeMap::new();
        p.insert("a".to_string(), 0.05);
        p.insert("eps".to_string(), 0.2);
        let (spec, r) = catalog_get("forced_pendulum_1d", &p).unwrap();
        assert_eq!(spec.dim, 1);
        assert_eq!(r.critical_value, 0.0);

        p.insert("eps".to_string(), 1.0);
        assert!(catalog_get("forced_pendulum_1d", &p).is_err());
        p.insert("eps".to_string(), 0.2);
        p.insert("bogus".to_string(), 1.0);
        let err = catalog_get("forced_pendulum_1d", &p).unwrap_err();
        assert!(err.to_string().contains("bogus"));
        assert!(catalog_get("nope", &BTreeMap::new()).is_err());

        let mut q = BTreeMap::new();
        q.insert("c".to_string(), 0.5);
        let (spec, r) = catalog_get("example_4_1", &q).unwrap();
        assert_eq!(spec.dim, 2);
        assert_eq!(spec.drift, 0.5);
        assert!(r.aubry_is_circle_in_y);
    }

    #[test]
    fn time_periodicity_is_exact() {
        let specs = [pendulum(0.7, 0.35), drift2d(0.5)];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for spec in specs {
            for _ in 0..1000 {
                let x = [rng.gen::<f64>(), rng.gen::<f64>()];
                let v = [4.0 * rng.gen::<f64>() - 2.0, 4.0 * rng.gen::<f64>() - 2.0];
                // dyadic times so t + 1 is itself exactly representable
                let t = rng.gen_range(-5120..5120) as f64 / 1024.0;
                let d = spec.dim;
                let a = spec.eval(&x[..d], &v[..d], t).unwrap();
                let b = spec.eval(&x[..d], &v[..d], t + 1.0).unwrap();
                assert_eq!(a, b, "L must be exactly 1-periodic in t");
                assert!(a >= 0.0);
            }
        }
    }

    #[test]
    fn fiber_convexity_with_quadratic_modulus() {
        // L(x, (v1+v2)/2, t) <= (L(x,v1,t) + L(x,v2,t))/2 - |v1-v2|^2/8
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in [pendulum(0.4, 0.1), drift2d(0.5)] {
            let d = spec.dim;
            for _ in 0..500 {
                let x = [rng.gen::<f64>(), rng.gen::<f64>()];
                let t = rng.gen::<f64>();
                let v1 = [4.0 * rng.gen::<f64>() - 2.0, 4.0 * rng.gen::<f64>() - 2.0];
                let v2 = [4.0 * rng.gen::<f64>() - 2.0, 4.0 * rng.gen::<f64>() - 2.0];
                let mid = [0.5 * (v1[0] + v2[0]), 0.5 * (v1[1] + v2[1])];
                let dd: f64 = (0..d).map(|i| (v1[i] - v2[i]).powi(2)).sum();
                let lhs = spec.eval(&x[..d], &mid[..d], t).unwrap();
                let rhs = 0.5 * spec.eval(&x[..d], &v1[..d], t).unwrap()
                    + 0.5 * spec.eval(&x[..d], &v2[..d], t).unwrap()
                    - dd / 8.0;
                assert!(lhs <= rhs + 1e-12, "convexity modulus violated");
            }
        }
    }

    #[test]
    fn tent_shape() {
        let g = TorusGrid::new(2, 20).unwrap();
        let u = tent_initial_condition(&g, 0.5, 0.3).unwrap();
        let peak = g.nearest_node(&[0.0, 0.5]).unwrap();
        assert!((u.values[peak] - 0.3).abs() < 1e-15);
        let far = g.nearest_node(&[0.0, 0.0]).unwrap();
        assert_eq!(u.values[far], 0.0);
        // linear flank: dist 0.15 from the center
        let mid = g.nearest_node(&[0.3, 0.35]).unwrap();
        assert!((u.values[mid] - 0.15).abs() < 1e-12);
        // independent of x
        for iy in 0..20 {
            let a = u.values[g.index_of(3, iy)];
            let b = u.values[g.index_of(11, iy)];
            assert_eq!(a, b);
        }
        let min = u.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = u.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(min, 0.0);
        assert!((max - 0.3).abs() < 1e-15);

        assert!(tent_initial_condition(&g, 0.5, 0.5).is_err());
        assert!(tent_initial_condition(&g, 0.5, 0.0).is_err());
    }
}
