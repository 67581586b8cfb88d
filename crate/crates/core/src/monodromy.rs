//! Monodromy matrix of the period-1 Poincaré map at a periodic point.
//!
//! Integrates the Euler-Lagrange equation q̈ = ∂L/∂q together with its
//! variational equation over one period with a classical fourth-order
//! Runge-Kutta scheme, refines the periodic point by a Newton solve on
//! φ(z) − z, and reports the spectrum of A = Dφ at the fixed point. For a
//! mechanical Lagrangian the linearized period map is similar to a
//! symplectic matrix, so eigenvalues come in (λ, 1/λ) pairs and det A = 1;
//! the stable part determines λ_max and the Lyapunov exponent μ = −ln λ_max.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::torus_diff;
use crate::lagrangian::LagrangianSpec;

pub struct MonodromyReport {
    /// Phase-space fixed point (q, v) of the period map.
    pub fixed_point: Vec<f64>,
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    /// Largest modulus among eigenvalues strictly inside the unit circle.
    pub lambda_max: Option<f64>,
    /// Smallest positive Lyapunov exponent, −ln λ_max.
    pub mu: Option<f64>,
    /// No eigenvalue on the unit circle within 1e−6.
    pub hyperbolic: bool,
    pub det: f64,
}

impl MonodromyReport {
    /// Worst deviation of the spectrum from exact (λ, 1/λ) pairing.
    pub fn pairing_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.eigenvalues {
            let best = self
                .eigenvalues
                .iter()
                .map(|b| (a * b - Complex::new(1.0, 0.0)).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        worst
    }
}

struct Flow<'a> {
    spec: &'a LagrangianSpec,
    m: usize,
}

impl Flow<'_> {
    fn deriv(&self, z: &DVector<f64>, mat: &DMatrix<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.m;
        let q: Vec<f64> = (0..m).map(|i| z[i]).collect();
        let mut acc = [0.0; 2];
        self.spec.acceleration(&q, t, &mut acc[..m]);
        let mut dz = DVector::zeros(2 * m);
        for i in 0..m {
            dz[i] = z[m + i];
            dz[m + i] = acc[i];
        }
        let mut jac = [0.0; 2];
        self.spec.acceleration_jacobian(&q, t, &mut jac[..m]);
        let mut j = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            j[(i, m + i)] = 1.0;
            j[(m + i, i)] = jac[i];
        }
        (dz, &j * mat)
    }

    /// One period of the flow with the fundamental matrix, classical RK4.
    fn period_map(&self, z0: &DVector<f64>, steps: usize) -> (DVector<f64>, DMatrix<f64>) {
        let m2 = 2 * self.m;
        let h = 1.0 / steps as f64;
        let mut z = z0.clone();
        let mut mat = DMatrix::identity(m2, m2);
        for i in 0..steps {
            let t = i as f64 * h;
            let (k1z, k1m) = self.deriv(&z, &mat, t);
            let (k2z, k2m) = self.deriv(&(&z + &k1z * (h / 2.0)), &(&mat + &k1m * (h / 2.0)), t + h / 2.0);
            let (k3z, k3m) = self.deriv(&(&z + &k2z * (h / 2.0)), &(&mat + &k2m * (h / 2.0)), t + h / 2.0);
            let (k4z, k4m) = self.deriv(&(&z + &k3z * h), &(&mat + &k3m * h), t + h);
            z += (k1z + k2z * 2.0 + k3z * 2.0 + k4z) * (h / 6.0);
            mat += (k1m + k2m * 2.0 + k3m * 2.0 + k4m) * (h / 6.0);
        }
        (z, mat)
    }
}

/// Locate the periodic point near `guess` (phase-space coordinates, length
/// 2·dim) and report the monodromy matrix with its spectral data.
pub fn monodromy(spec: &LagrangianSpec, guess: &[f64], ode_steps: usize) -> Result<MonodromyReport> {
    let m = spec.dim;
    if guess.len() != 2 * m {
        return Err(Error::InvalidArgument(format!(
            "monodromy: guess must have {} phase-space coordinates",
            2 * m
        )));
    }
    if ode_steps < 16 {
        return Err(Error::InvalidArgument(
            "monodromy: ode_steps too small".into(),
        ));
    }
    let flow = Flow { spec, m };
    let mut z = DVector::from_column_slice(guess);
    let mut mat = DMatrix::identity(2 * m, 2 * m);
    let mut converged = false;
    for _ in 0..30 {
        let (z1, a) = flow.period_map(&z, ode_steps);
        mat = a;
        let mut g = DVector::zeros(2 * m);
        for i in 0..m {
            g[i] = torus_diff(z1[i], z[i]);
            g[m + i] = z1[m + i] - z[m + i];
        }
        if g.norm() <= 1e-12 {
            converged = true;
            break;
        }
        let jac = &mat - DMatrix::<f64>::identity(2 * m, 2 * m);
        let delta = jac
            .lu()
            .solve(&(-&g))
            .ok_or_else(|| Error::Numerical("monodromy: singular Newton system".into()))?;
        if !delta.iter().all(|d| d.is_finite()) || delta.norm() > 1.0 {
            return Err(Error::Numerical(
                "monodromy: Newton step diverged while refining the periodic point".into(),
            ));
        }
        z += delta;
    }
    if !converged {
        return Err(Error::Numerical(
            "monodromy: periodic-point refinement did not converge".into(),
        ));
    }

    let eigenvalues: Vec<Complex<f64>> = mat.complex_eigenvalues().iter().cloned().collect();
    let hyperbolic = eigenvalues.iter().all(|l| (l.norm() - 1.0).abs() > 1e-6);
    let lambda_max = eigenvalues
        .iter()
        .map(|l| l.norm())
        .filter(|&n| n < 1.0 - 1e-12)
        .fold(None, |acc: Option<f64>, n| {
            Some(acc.map_or(n, |a| a.max(n)))
        });
    let mu = lambda_max.map(|l| -l.ln());
    let det = mat.clone().lu().determinant();
    Ok(MonodromyReport {
        fixed_point: z.iter().cloned().collect(),
        matrix: mat,
        eigenvalues,
        lambda_max,
        mu,
        hyperbolic,
        det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::catalog_get;
    use std::collections::BTreeMap;
    use std::f64::consts::TAU;

    fn pendulum(a: f64, eps: f64) -> LagrangianSpec {
        let mut p = BTreeMap::new();
        p.insert("a".to_string(), a);
        p.insert("eps".to_string(), eps);
        catalog_get("forced_pendulum_1d", &p).unwrap().0
    }

    #[test]
    fn autonomous_pendulum_spectrum_is_exponential() {
        // Linearization at the resting point: q̈ = 4π²·a·q, so the period map
        // has eigenvalues exp(±2π√a). The unstable multiplier e^{2π} ≈ 535
        // keeps the Newton basin narrow, so start close.
        let rep = monodromy(&pendulum(1.0, 0.0), &[1e-4, 0.0], 2048).unwrap();
        let l_plus = TAU.exp();
        let l_minus = (-TAU).exp();
        let mut norms: Vec<f64> = rep.eigenvalues.iter().map(|l| l.norm()).collect();
        norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((norms[0] - l_minus).abs() / l_minus < 1e-4);
        assert!((norms[1] - l_plus).abs() / l_plus < 1e-4);
        assert!((rep.det - 1.0).abs() < 1e-6);
        assert!(rep.pairing_residual() < 1e-6);
        assert!(rep.hyperbolic);
        assert!((rep.mu.unwrap() - TAU).abs() < 1e-3);
        assert!(rep.fixed_point[0].abs() < 1e-9);
    }

    #[test]
    fn forced_pendulum_stays_hyperbolic_at_small_eps() {
        let rep = monodromy(&pendulum(0.05, 0.2), &[0.0, 0.0], 2048).unwrap();
        assert!(rep.hyperbolic);
        let mu = rep.mu.unwrap();
        // continuity bound from the eps = 0 exponent 2π√a
        assert!(mu > 0.0 && mu < TAU * (0.06f64).sqrt());
        assert!((rep.det - 1.0).abs() < 1e-6);
        assert!(rep.pairing_residual() < 1e-6);
    }

    #[test]
    fn step_doubling_consistency() {
        let a = monodromy(&pendulum(0.05, 0.2), &[0.0, 0.0], 1024).unwrap();
        let b = monodromy(&pendulum(0.05, 0.2), &[0.0, 0.0], 2048).unwrap();
        let d = (&a.matrix - &b.matrix).norm();
        assert!(d < 1e-8, "RK4 step doubling changed A by {d}");
    }

    #[test]
    fn bad_guess_length_rejected() {
        assert!(monodromy(&pendulum(1.0, 0.0), &[0.0], 2048).is_err());
    }

    #[test]
    fn drifting_orbit_has_no_fixed_point() {
        // with nonzero drift the period map translates the circle, so the
        // Newton system (A - I) is singular and refinement must fail
        let mut p = BTreeMap::new();
        p.insert("c".to_string(), 0.5);
        let (spec, r) = catalog_get("example_4_1", &p).unwrap();
        let guess = [r.anchor[0], r.anchor[1], r.velocity[0], r.velocity[1]];
        let out = monodromy(&spec, &guess, 256);
        assert!(matches!(out, Err(crate::error::Error::Numerical(_))));
    }

    #[test]
    fn zero_drift_circle_point_is_fixed() {
        let (spec, r) = catalog_get("example_4_1", &BTreeMap::new()).unwrap();
        let guess = [r.anchor[0], 0.25, r.velocity[0], r.velocity[1]];
        let rep = monodromy(&spec, &guess, 1024).unwrap();
        // transverse pendulum block contributes exp(±2π); the drift block
        // contributes a unit Jordan pair, so the map is not hyperbolic
        assert!(!rep.hyperbolic);
        assert!((rep.det - 1.0).abs() < 1e-6);
        let lm = rep.lambda_max.unwrap();
        assert!((lm - (-TAU).exp()).abs() / (-TAU).exp() < 1e-3);
    }
}
