//! Discrete space-time norms over stored trajectories:
//!
//! * `‖w‖_X = sup_t ‖w‖_{H¹} + (∫ ‖⟨∂_x⟩w‖_{L^∞}⁴ dt)^{1/4}`
//! * `‖w‖_Y = (∫ ‖⟨∂_x⟩w‖_{L⁶}⁶ dt)^{1/6}`
//!
//! The supremum is a maximum over snapshots and the time integrals use the
//! composite trapezoid rule on the snapshot times.

use rayon::prelude::*;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::spectral_grid::Field;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormReport {
    pub x_norm: f64,
    pub y_norm: f64,
    pub sup_h1: f64,
    pub l4_linf: f64,
    pub interval: (f64, f64),
}

impl NormReport {
    /// `‖·‖_{X∩Y} = ‖·‖_X + ‖·‖_Y`.
    pub fn x_cap_y(&self) -> f64 {
        self.x_norm + self.y_norm
    }
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]).abs() * (v[0] + v[1]))
        .sum()
}

fn report(snapshots: &[Field], times: &[f64]) -> Result<NormReport> {
    if snapshots.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if snapshots.len() < 2 {
        return Err(Error::InsufficientSnapshots {
            needed: "at least 2".into(),
            got: snapshots.len(),
        });
    }
    let per: Vec<(f64, f64, f64)> = snapshots
        .par_iter()
        .map(|f| {
            let b = f.bracket_derivative();
            (
                f.sobolev_norm(1.0),
                b.lebesgue_norm(f64::INFINITY).powi(4),
                b.lebesgue_norm(6.0).powi(6),
            )
        })
        .collect();
    let sup_h1 = per.iter().fold(0.0f64, |m, p| m.max(p.0));
    let l4: Vec<f64> = per.iter().map(|p| p.1).collect();
    let l6: Vec<f64> = per.iter().map(|p| p.2).collect();
    let l4_linf = trapezoid(times, &l4).powf(0.25);
    let y_norm = trapezoid(times, &l6).powf(1.0 / 6.0);
    let report = NormReport {
        x_norm: sup_h1 + l4_linf,
        y_norm,
        sup_h1,
        l4_linf,
        interval: (times[0], times[times.len() - 1]),
    };
    if !(report.x_norm.is_finite() && report.y_norm.is_finite()) {
        return Err(Error::Blowup { t: times[0] });
    }
    Ok(report)
}

/// Full norm report; `x_norm` is the X functional, `y_norm` is filled in as
/// well since it shares the per-snapshot work.
pub fn xnorm(traj: &Trajectory) -> Result<NormReport> {
    report(traj.snapshots(), traj.times())
}

pub fn ynorm(traj: &Trajectory) -> Result<f64> {
    Ok(xnorm(traj)?.y_norm)
}

/// Norms of the snapshot-wise difference `a − b`.
pub fn traj_distance(a: &Trajectory, b: &Trajectory) -> Result<NormReport> {
    if !a.snapshots().is_empty() && !b.snapshots().is_empty() && a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    if a.len() != b.len() {
        return Err(Error::LatticeMismatch);
    }
    let scale = a.times().iter().fold(1.0f64, |m, t| m.max(t.abs()));
    if a
        .times()
        .iter()
        .zip(b.times())
        .any(|(s, t)| (s - t).abs() > 1e-12 * scale)
    {
        return Err(Error::LatticeMismatch);
    }
    let diffs: Vec<Field> = a
        .snapshots()
        .iter()
        .zip(b.snapshots())
        .map(|(x, y)| x - y)
        .collect();
    report(&diffs, a.times())
}
