//! Gauge transforms `w = e^{-ia∫_{x_min}^x |u|^{2σ} dy} u` and the estimates
//! that carry asymptotics of `w` back to `u`.
//!
//! The lower limit `-∞` becomes `x_min`. The total phase accumulated at
//! `x_max` makes the factor non-periodic; this only matters through the
//! field values near the box edges, which the edge-decay contract keeps
//! negligible.

use crate::error::{Error, Result};
use crate::spectral_grid::{Field, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeParams {
    pub a: f64,
    pub sigma: f64,
}

impl GaugeParams {
    pub fn new(a: f64, sigma: f64) -> Result<GaugeParams> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma = {sigma} must be positive")));
        }
        Ok(GaugeParams { a, sigma })
    }

    /// `a = -1/2`, the gauge that removes `|w|^{2σ}∂_x w`.
    pub fn removing_derivative(sigma: f64) -> GaugeParams {
        GaugeParams { a: -0.5, sigma }
    }
}

/// `θ(x) = ∫_{x_min}^x |u|^{2σ} dy` by the trapezoid rule.
pub fn gauge_phase(u: &Field, sigma: f64) -> Vec<f64> {
    let density: Vec<f64> = u.values().iter().map(|v| v.norm_sqr().powf(sigma)).collect();
    u.grid().cumulative_integral(&density)
}

fn rotate(f: &Field, theta: &[f64], coeff: f64) -> Field {
    let mut out = f.clone();
    for (v, &th) in out.values_mut().iter_mut().zip(theta) {
        *v *= C64::from_polar(1.0, coeff * th);
    }
    out
}

pub fn gauge_forward(u: &Field, params: GaugeParams) -> Field {
    if params.a == 0.0 {
        return u.clone();
    }
    let theta = gauge_phase(u, params.sigma);
    rotate(u, &theta, -params.a)
}

/// Inverts [`gauge_forward`] using `|w| = |u|`: `u = e^{+iaθ[w]} w`.
pub fn gauge_inverse(w: &Field, params: GaugeParams) -> Field {
    if params.a == 0.0 {
        return w.clone();
    }
    let theta = gauge_phase(w, params.sigma);
    rotate(w, &theta, params.a)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailBounds {
    /// `‖∫|w|^{2k}‖_{L^∞} = ‖w‖_{L^{2k}}^{2k}`.
    pub phase_sup: f64,
    /// `‖w‖_{L^∞}^{2k}`, the size of the phase derivative.
    pub phase_deriv_sup: f64,
}

pub fn gauge_tail_bounds(w: &Field, k: u32) -> TailBounds {
    let p = 2.0 * k as f64;
    TailBounds {
        phase_sup: w.lebesgue_norm(p).powf(p),
        phase_deriv_sup: w.lebesgue_norm(f64::INFINITY).powf(p),
    }
}

/// Both sides of the transfer inequality
/// `‖u − V‖_{H¹} ≤ C(‖w − V‖_{H¹} + phase_sup‖V₊‖_{H¹} + phase_deriv_sup‖V₊‖_{L²})`
/// for one snapshot, with `V = e^{it∂_x²}V₊` already evaluated at the
/// snapshot time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferCheck {
    pub u_error: f64,
    pub bound: f64,
}

impl TransferCheck {
    /// The smallest admissible constant `C`.
    pub fn constant(&self) -> f64 {
        if self.bound == 0.0 {
            if self.u_error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.u_error / self.bound
        }
    }
}

pub fn transfer_check(u: &Field, w: &Field, free: &Field, v_plus: &Field, k: u32) -> TransferCheck {
    let tails = gauge_tail_bounds(w, k);
    TransferCheck {
        u_error: (u - free).sobolev_norm(1.0),
        bound: (w - free).sobolev_norm(1.0)
            + tails.phase_sup * v_plus.sobolev_norm(1.0)
            + tails.phase_deriv_sup * v_plus.lebesgue_norm(2.0),
    }
}
