//! Numerical wave operator for the gauged equation: final-data solves along
//! a schedule `t_n → ∞`, the Picard map of the normal-form equation on tiny
//! grids, and the transfer of the limit back through the gauge.

use crate::dynamics::{evolve, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::gauge::{gauge_inverse, transfer_check, GaugeParams, TransferCheck};
use crate::normal_form::{normal_form_rhs, Bookkeeping, NormalFormConfig};
use crate::spacetime_norms::{traj_distance, xnorm, NormReport};
use crate::spectral_grid::{Dyadic, Field};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    /// Spacing of the free-evolution samples used for the norms.
    pub sample_dt: f64,
    /// Spacing of the candidate start times `T = 1, 1 + step, …`.
    pub t_step: f64,
    /// Largest edge amplitude, relative to `sup|V₊|`, treated as unwrapped.
    pub edge_tol: f64,
    /// Search cap for the horizon (also the horizon for `V₊ = 0`).
    pub max_horizon: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            sample_dt: 0.1,
            t_step: 0.5,
            edge_tol: 1e-8,
            max_horizon: 200.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParameterChoice {
    pub t_start: f64,
    pub r_measured: f64,
    pub delta_measured: f64,
    pub horizon: f64,
}

/// Fraction of the box on each side treated as the edge zone.
const EDGE_ZONE: f64 = 0.05;

fn edge_ratio(f: &Field, reference: f64) -> f64 {
    let g = f.grid();
    let zone = EDGE_ZONE * g.length();
    let edge = f
        .values()
        .iter()
        .enumerate()
        .filter(|(j, _)| {
            let x = g.x(*j);
            x - g.x_min() < zone || g.x_max() - x < zone
        })
        .fold(0.0f64, |m, (_, v)| m.max(v.norm()));
    edge / reference
}

/// Last time, on the `t_step` lattice, before the free evolution of `v`
/// reaches the box edges at relative amplitude `edge_tol`. Past this time
/// the periodic solution no longer stands in for the one on the line.
pub fn wrap_horizon(v: &Field, opts: &SearchOptions) -> Result<f64> {
    let reference = v.lebesgue_norm(f64::INFINITY);
    if reference == 0.0 {
        return Ok(opts.max_horizon);
    }
    if edge_ratio(v, reference) > opts.edge_tol {
        return Err(Error::InvalidParameter(
            "final state does not decay toward the box edges".into(),
        ));
    }
    let mut t = 0.0;
    while t + opts.t_step <= opts.max_horizon {
        let next = t + opts.t_step;
        if edge_ratio(&v.free_propagate(next), reference) > opts.edge_tol {
            return Ok(t);
        }
        t = next;
    }
    Ok(t)
}

/// Samples `e^{it∂²}v` on `[a, b]` with spacing at most `dt`.
pub fn free_trajectory(v: &Field, a: f64, b: f64, dt: f64) -> Result<Trajectory> {
    let n = (((b - a) / dt) - 1e-9).ceil().max(1.0) as usize;
    let snaps = (0..=n)
        .map(|j| {
            let t = a + (b - a) * j as f64 / n as f64;
            v.free_propagate(t - v.t()).with_time(t)
        })
        .collect();
    Trajectory::new(snaps)
}

/// Measures `R = ‖e^{it∂²}V₊‖_{X([0,H])}` and picks the smallest `T ≥ 1` on
/// the candidate lattice with `‖e^{it∂²}V₊‖_{Y([T,∞))} ≤ δ_target`, where `H`
/// is the wrap-around horizon; the part of the Y integral beyond `H` uses the
/// dispersive decay rate instead of the (wrapped) periodic flow.
pub fn choose_parameters(v_plus: &Field, k: u32, delta_target: f64) -> Result<ParameterChoice> {
    choose_parameters_with(v_plus, k, delta_target, &SearchOptions::default())
}

pub fn choose_parameters_with(
    v_plus: &Field,
    k: u32,
    delta_target: f64,
    opts: &SearchOptions,
) -> Result<ParameterChoice> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!("k = {k} must be at least 3")));
    }
    let v = v_plus.clone().with_time(0.0);
    let horizon = wrap_horizon(&v, opts)?;
    if horizon <= 1.0 {
        return Err(Error::NoDispersiveWindow {
            horizon,
            delta_target,
            best: f64::INFINITY,
        });
    }
    let free = free_trajectory(&v, 0.0, horizon, opts.sample_dt)?;
    let r_measured = xnorm(&free)?.x_norm;

    // ‖⟨∂⟩ e^{it∂²}V₊‖_{L⁶}⁶ per sample, then trapezoid tails.
    let times = free.times().to_vec();
    let l6: Vec<f64> = free
        .snapshots()
        .iter()
        .map(|f| f.bracket_derivative().lebesgue_norm(6.0).powi(6))
        .collect();
    // Past the horizon the sixth power decays like t^{-2}, so the remainder
    // ∫_H^∞ is l6(H)·H; with it δ estimates Y([T, ∞)) independently of the box.
    let last = times.len() - 1;
    let mut tail = vec![0.0; times.len()];
    tail[last] = l6[last] * times[last];
    for j in (0..last).rev() {
        tail[j] = tail[j + 1] + 0.5 * (times[j + 1] - times[j]) * (l6[j] + l6[j + 1]);
    }
    let mut best = f64::INFINITY;
    let mut t = 1.0;
    while t < horizon {
        let j = times
            .iter()
            .position(|&s| s >= t - 1e-9)
            .expect("candidate below horizon");
        let y = tail[j].powf(1.0 / 6.0);
        best = best.min(y);
        if y <= delta_target {
            return Ok(ParameterChoice {
                t_start: times[j],
                r_measured,
                delta_measured: y,
                horizon,
            });
        }
        t += opts.t_step;
    }
    Err(Error::NoDispersiveWindow {
        horizon,
        delta_target,
        best,
    })
}

#[derive(Clone, Debug)]
pub struct FinalDataProblem {
    pub v_plus: Field,
    pub k: u32,
    pub t_start: f64,
    pub t_schedule: Vec<f64>,
    pub probe_end: f64,
    pub tol_cauchy: f64,
    pub n0: Dyadic,
    pub solver: SolverConfig,
    /// Keep iterating until at least this many `w_n` exist, even when the
    /// Cauchy tolerance is met earlier.
    pub min_iterates: usize,
}

impl FinalDataProblem {
    /// Arithmetic schedule `t_n = T + step·n`, `n = 1..=n_max`, with the
    /// default probe window `[T, T + 2]` clipped to `t_1`.
    pub fn arithmetic(
        v_plus: Field,
        k: u32,
        t_start: f64,
        step: f64,
        n_max: usize,
        solver: SolverConfig,
    ) -> FinalDataProblem {
        let t_schedule: Vec<f64> = (1..=n_max).map(|n| t_start + step * n as f64).collect();
        let probe_end = (t_start + 2.0).min(t_schedule.first().copied().unwrap_or(t_start));
        FinalDataProblem {
            v_plus,
            k,
            t_start,
            t_schedule,
            probe_end,
            tol_cauchy: 1e-6,
            n0: Dyadic::ONE,
            solver,
            min_iterates: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.k < 3 {
            return Err(Error::InvalidParameter(format!("k = {} must be at least 3", self.k)));
        }
        if self.t_start < 1.0 {
            return Err(Error::InvalidParameter(format!("T = {} must be at least 1", self.t_start)));
        }
        if self.t_schedule.is_empty() || self.t_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "schedule must be nonempty and strictly increasing".into(),
            ));
        }
        if self.t_schedule[0] <= self.t_start {
            return Err(Error::InvalidParameter("schedule must start after T".into()));
        }
        if !(self.probe_end > self.t_start && self.probe_end <= self.t_schedule[0]) {
            return Err(Error::InvalidParameter("probe_end must lie in (T, t_1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CauchyRecord {
    pub n: usize,
    pub t_n: f64,
    pub distance: NormReport,
}

#[derive(Clone, Debug)]
pub struct WaveOperatorResult {
    pub w_limit: Trajectory,
    pub u_limit: Trajectory,
    pub cauchy_history: Vec<CauchyRecord>,
    /// Norm report of every iterate `w_n` on the probe window.
    pub iterate_reports: Vec<NormReport>,
    pub asymptotic_errors: Vec<(f64, f64)>,
    /// Transfer inequality at each probe time.
    pub transfer: Vec<(f64, TransferCheck)>,
    pub r_measured: f64,
    pub delta_measured: f64,
    pub converged: bool,
}

/// `w_n` on the probe window: backward from `e^{it_n∂²}V₊` at `t_n` to the
/// probe end, then, storing, down to `T`. The stored lattice depends only on
/// `T`, `probe_end` and the solver, never on `n`.
pub fn solve_iterate(problem: &FinalDataProblem, t_n: f64) -> Result<Trajectory> {
    let back = problem.solver.backward();
    let start = problem.v_plus.free_propagate(t_n - problem.v_plus.t()).with_time(t_n);
    let bulk = SolverConfig {
        store_every: usize::MAX,
        ..back
    };
    let at_probe = evolve(&start, t_n, problem.probe_end, &bulk)?;
    let window = evolve(at_probe.last(), problem.probe_end, problem.t_start, &back)?;
    Ok(window.reversed())
}

/// Solves the final-data problem along the schedule. Convergence means the
/// last `X∩Y` distance is at most `tol_cauchy`.
pub fn solve_final_data(problem: &FinalDataProblem) -> Result<WaveOperatorResult> {
    problem.validate()?;
    let t_max = *problem.t_schedule.last().expect("validated");
    let v0 = problem.v_plus.clone().with_time(0.0);
    let r_measured = xnorm(&free_trajectory(&v0, 0.0, t_max, 0.1)?)?.x_norm;
    let delta_measured = xnorm(&free_trajectory(&v0, problem.t_start, t_max, 0.1)?)?.y_norm;

    let mut history = Vec::new();
    let mut reports = Vec::new();
    let mut previous: Option<Trajectory> = None;
    let mut converged = false;
    for (i, &t_n) in problem.t_schedule.iter().enumerate() {
        let n = i + 1;
        let w_n = solve_iterate(problem, t_n).map_err(|e| match e {
            Error::Blowup { t } => {
                log::error!("blowup in iterate n = {n} at t = {t}");
                Error::Blowup { t }
            }
            other => other,
        })?;
        reports.push(xnorm(&w_n)?);
        if let Some(prev) = &previous {
            let d = traj_distance(&w_n, prev)?;
            log::info!("n = {n}: X∩Y distance {:e}", d.x_cap_y());
            let small = d.x_cap_y() <= problem.tol_cauchy;
            history.push(CauchyRecord {
                n,
                t_n,
                distance: d,
            });
            if small && n >= problem.min_iterates {
                converged = true;
                previous = Some(w_n);
                break;
            }
        }
        previous = Some(w_n);
    }
    if !converged {
        if let Some(last) = history.last() {
            converged = last.distance.x_cap_y() <= problem.tol_cauchy;
        }
        if !converged {
            log::warn!("schedule exhausted without reaching the Cauchy tolerance");
        }
    }
    let w_limit = previous.expect("schedule is nonempty");
    let params = GaugeParams::removing_derivative(problem.k as f64);
    let u_limit = w_limit.map(|w| gauge_inverse(w, params))?;
    let asymptotic_errors = final_state_error(&u_limit, &problem.v_plus)?;
    let transfer = w_limit
        .snapshots()
        .iter()
        .zip(u_limit.snapshots())
        .map(|(w, u)| {
            let free = problem.v_plus.free_propagate(w.t() - problem.v_plus.t());
            (w.t(), transfer_check(u, w, &free, &problem.v_plus, problem.k))
        })
        .collect();
    Ok(WaveOperatorResult {
        w_limit,
        u_limit,
        cauchy_history: history,
        iterate_reports: reports,
        asymptotic_errors,
        transfer,
        r_measured,
        delta_measured,
        converged,
    })
}

/// `t ↦ ‖u(t) − e^{it∂²}V₊‖_{H¹}` at every stored time.
pub fn final_state_error(u_traj: &Trajectory, v_plus: &Field) -> Result<Vec<(f64, f64)>> {
    if u_traj.grid() != v_plus.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(u_traj
        .snapshots()
        .iter()
        .map(|u| {
            let free = v_plus.free_propagate(u.t() - v_plus.t());
            (u.t(), (u - &free).sobolev_norm(1.0))
        })
        .collect())
}

/// `Φ_n(w)`: the right side of the normal-form integral equation with data
/// `e^{it_n∂²}V₊` at `t_n`, evaluated at every stored time of `w_traj`, which
/// must end at `t_n`.
pub fn picard_apply(
    w_traj: &Trajectory,
    t_n: f64,
    v_plus: &Field,
    cfg: &NormalFormConfig,
) -> Result<Trajectory> {
    let t_first = w_traj.times()[0].min(*w_traj.times().last().expect("nonempty"));
    let w0 = v_plus.free_propagate(t_n - v_plus.t()).with_time(t_n);
    let mut fields = normal_form_rhs(w_traj, t_n, t_first, &w0, cfg, Bookkeeping::Reconciled)?;
    fields.reverse();
    Trajectory::new(fields)
}

/// `(‖w‖_X ≤ 2R, ‖w‖_Y ≤ 2δ)`.
pub fn ball_membership(report: &NormReport, r: f64, delta: f64) -> (bool, bool) {
    (report.x_norm <= 2.0 * r, report.y_norm <= 2.0 * delta)
}
