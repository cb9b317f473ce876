//! Initial data in the operator domain: regular part phi0 with phi0(0) = gamma |q0|^{2mu} q0.
//!
//! The Gaussian family used throughout is
//!   phi0^(k) = a e^{-alpha k^2} - q0 (2pi)^{-3/2} e^{-beta k^2} / k^2,
//! where the second term (present when a screen width beta is given) cancels the Coulomb
//! tail of q0 G at large |x| so that psi0 = phi0 + q0 G is square-integrable.

use crate::error::{Error, Result};
use crate::form_factor::FormFactor;
use crate::radial::{KGrid, RadialField, Tail, FT3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// |z|^{2 mu} z
pub fn nonlin(z: C64, mu: f64) -> C64 {
    let r = z.norm();
    if r == 0.0 { z } else { z * r.powf(2.0 * mu) }
}

fn inv_4pi32() -> f64 {
    1.0 / (4.0 * PI.powf(1.5))
}

/// (e^{-x} - e^{-y}) without cancellation for x, y >= 0.
fn exp_diff(x: f64, y: f64) -> f64 {
    if (y - x).abs() < 1.0 {
        (-y).exp() * (y - x).exp_m1()
    } else {
        (-x).exp() - (-y).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianProfile {
    pub amplitude: C64,
    pub alpha: f64,
    pub screen: Option<f64>,
    pub q0: C64,
}

impl GaussianProfile {
    /// Amplitude fixed by the boundary condition.
    pub fn with_boundary_condition(gamma: f64, mu: f64, q0: C64, alpha: f64, screen: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("profile width alpha must be positive, got {alpha}")));
        }
        if let Some(b) = screen {
            if !(b > 0.0) {
                return Err(Error::InvalidParameter(format!("screen width must be positive, got {b}")));
            }
        }
        let screen_origin = screen.map(|b| q0 * inv_4pi32() / b.sqrt()).unwrap_or_default();
        let amplitude = (gamma * nonlin(q0, mu) + screen_origin) * (2.0 * alpha).powf(1.5);
        Ok(GaussianProfile { amplitude, alpha, screen, q0 })
    }

    pub fn phi_hat(&self, k: f64) -> C64 {
        let mut v = self.amplitude * (-self.alpha * k * k).exp();
        if let Some(b) = self.screen {
            v -= self.q0 * (FT3 * (-b * k * k).exp() / (k * k));
        }
        v
    }

    /// phi0^ + q0 G^, evaluated without the 1/k^2 cancellation.
    pub fn psi_hat(&self, k: f64) -> C64 {
        let k2 = k * k;
        let mut v = self.amplitude * (-self.alpha * k2).exp();
        match self.screen {
            Some(b) => v += self.q0 * (FT3 * -(-b * k2).exp_m1() / k2),
            None => v += self.q0 * (FT3 / k2),
        }
        v
    }

    /// phi0^ + q0 rho^(eps k) / k^2.
    pub fn psi_eps_hat(&self, ff: &FormFactor, eps: f64, k: f64) -> C64 {
        let k2 = k * k;
        let mut v = self.amplitude * (-self.alpha * k2).exp();
        let smear = match (self.screen, ff.gaussian_sigma()) {
            (Some(b), Some(s)) => FT3 * exp_diff(0.5 * s * s * eps * eps * k2, b * k2) / k2,
            (Some(b), None) => (ff.hat(eps * k) - FT3 * (-b * k2).exp()) / k2,
            (None, _) => ff.hat(eps * k) / k2,
        };
        v += self.q0 * smear;
        v
    }

    pub fn value_at_origin(&self) -> C64 {
        let mut v = self.amplitude * (2.0 * self.alpha).powf(-1.5);
        if let Some(b) = self.screen {
            v -= self.q0 * inv_4pi32() / b.sqrt();
        }
        v
    }

    /// (U(t) phi0)(0).
    pub fn propagator_trace(&self, t: f64) -> C64 {
        self.smeared_trace_shifted(0.0, t)
    }

    /// int_0^t (U(s) phi0)(0) ds.
    pub fn propagator_trace_integral(&self, t: f64) -> C64 {
        self.smeared_trace_integral_shifted(0.0, t)
    }

    /// (rho_eps, U(t) phi0) for a Gaussian form factor of width sigma.
    pub fn smeared_trace(&self, sigma: f64, eps: f64, t: f64) -> C64 {
        self.smeared_trace_shifted(0.5 * sigma * sigma * eps * eps, t)
    }

    pub fn smeared_trace_integral(&self, sigma: f64, eps: f64, t: f64) -> C64 {
        self.smeared_trace_integral_shifted(0.5 * sigma * sigma * eps * eps, t)
    }

    fn smeared_trace_shifted(&self, s: f64, t: f64) -> C64 {
        let z = C64::new(2.0 * (self.alpha + s), 2.0 * t);
        let mut v = self.amplitude / (z * z.sqrt());
        if let Some(b) = self.screen {
            v -= self.q0 * inv_4pi32() / C64::new(b + s, t).sqrt();
        }
        v
    }

    fn smeared_trace_integral_shifted(&self, s: f64, t: f64) -> C64 {
        let i = C64::new(0.0, 1.0);
        let a = self.alpha + s;
        // int_0^t (a + i u)^{-3/2} du = 2i [(a + i t)^{-1/2} - a^{-1/2}]
        let ga = 2.0 * i * (1.0 / C64::new(a, t).sqrt() - 1.0 / a.sqrt());
        let mut v = self.amplitude * 2f64.powf(-1.5) * ga;
        if let Some(b) = self.screen {
            let bb = b + s;
            // int_0^t (b + i u)^{-1/2} du = -2i [(b + i t)^{1/2} - b^{1/2}]
            let gb = -2.0 * i * (C64::new(bb, t).sqrt() - bb.sqrt());
            v -= self.q0 * inv_4pi32() * gb;
        }
        v
    }

    pub fn phi_field(&self, grid: Arc<KGrid>) -> RadialField {
        RadialField::from_fn(grid, |k| self.phi_hat(k), Tail::none())
    }

    pub fn psi_field(&self, grid: Arc<KGrid>) -> RadialField {
        RadialField::from_fn(grid, |k| self.psi_hat(k), Tail::green(self.q0))
    }

    pub fn psi_eps_field(&self, ff: &FormFactor, eps: f64, grid: Arc<KGrid>) -> RadialField {
        RadialField::from_fn(grid, |k| self.psi_eps_hat(ff, eps, k), Tail::none())
    }
}
