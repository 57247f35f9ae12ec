//! Right-hand sides of the original and gauged equations, integrating-factor
//! RK4 time stepping, and the conservation and scaling diagnostics.
//!
//! Both equations are written as `∂_t f = i∂_x² f + 𝒩(f)`:
//!
//! * original: `𝒩(u) = -|u|^{2σ} ∂_x u`
//! * gauged:   `𝒩(w) = -i(F₁ + F₂ + F₃)(w)`
//!
//! Nonlinear products are formed pointwise in physical space; there is no
//! dealiasing, so experiments keep the spectrum resolved instead.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral_grid::{Field, Grid, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Equation {
    /// `i∂_t u + ∂_x²u + i|u|^{2σ}∂_x u = 0` with `σ = k`.
    Original,
    /// `i∂_t w + ∂_x²w = F₁ + F₂ + F₃`.
    Gauged,
    /// Free Schrödinger flow; the nonlinearity switched off.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    IfRk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub k: u32,
    pub dt: f64,
    pub integrator: Integrator,
    pub store_every: usize,
    pub direction: Direction,
    pub equation: Equation,
}

impl SolverConfig {
    pub fn new(k: u32, dt: f64, store_every: usize, equation: Equation) -> SolverConfig {
        SolverConfig {
            k,
            dt,
            integrator: Integrator::IfRk4,
            store_every,
            direction: Direction::Forward,
            equation,
        }
    }

    pub fn backward(mut self) -> SolverConfig {
        self.direction = Direction::Backward;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if self.k < 1 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.store_every == 0 {
            return Err(Error::InvalidParameter("store_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Time-ordered snapshots on one grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: Arc<Grid>,
    times: Vec<f64>,
    snapshots: Vec<Field>,
}

impl Trajectory {
    pub fn new(snapshots: Vec<Field>) -> Result<Trajectory> {
        let first = snapshots.first().ok_or(Error::EmptyTrajectory)?;
        let grid = Arc::clone(first.grid());
        if snapshots.iter().any(|s| !s.same_grid(first)) {
            return Err(Error::GridMismatch);
        }
        let times: Vec<f64> = snapshots.iter().map(Field::t).collect();
        if times.len() > 1 {
            let increasing = times.windows(2).all(|w| w[1] > w[0]);
            let decreasing = times.windows(2).all(|w| w[1] < w[0]);
            if !(increasing || decreasing) {
                return Err(Error::InvalidParameter(
                    "trajectory times must be strictly monotone".into(),
                ));
            }
        }
        Ok(Trajectory {
            grid,
            times,
            snapshots,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn first(&self) -> &Field {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Field {
        &self.snapshots[self.snapshots.len() - 1]
    }

    /// Index of the snapshot stored at time `t`, up to a relative slack that
    /// absorbs the rounding of `t0 + j·h`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let scale = self.times.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * scale)
            .ok_or(Error::UnknownTime { t })
    }

    /// Snapshots whose times lie in `[min(a,b), max(a,b)]`, reordered to
    /// increasing time.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Trajectory> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let scale = self.times.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let slack = 1e-9 * scale;
        let mut kept: Vec<Field> = self
            .snapshots
            .iter()
            .filter(|s| s.t() >= lo - slack && s.t() <= hi + slack)
            .cloned()
            .collect();
        if kept.len() > 1 && kept[0].t() > kept[1].t() {
            kept.reverse();
        }
        Trajectory::new(kept)
    }

    pub fn reversed(&self) -> Trajectory {
        let mut snapshots = self.snapshots.clone();
        snapshots.reverse();
        Trajectory {
            grid: Arc::clone(&self.grid),
            times: snapshots.iter().map(Field::t).collect(),
            snapshots,
        }
    }

    pub fn map(&self, f: impl Fn(&Field) -> Field) -> Result<Trajectory> {
        Trajectory::new(self.snapshots.iter().map(f).collect())
    }
}

fn pow_sigma(r2: f64, sigma: f64) -> f64 {
    if sigma.fract() == 0.0 && sigma.abs() < 64.0 {
        r2.powi(sigma as i32)
    } else {
        r2.powf(sigma)
    }
}

fn nonlinear_original_into(u: &[C64], du: &[C64], sigma: f64, out: &mut [C64]) {
    for ((o, &v), &d) in out.iter_mut().zip(u).zip(du) {
        *o = -d * pow_sigma(v.norm_sqr(), sigma);
    }
}

fn f1_into(grid: &Grid, w: &[C64], dw: &[C64], k: u32, out: &mut [C64]) {
    if k < 2 {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        return;
    }
    let integrand: Vec<f64> = w
        .iter()
        .zip(dw)
        .map(|(&v, &d)| {
            let p = v.conj() * d;
            (p * p).im * v.norm_sqr().powi(k as i32 - 2)
        })
        .collect();
    let cumulative = grid.cumulative_integral(&integrand);
    let coeff = -((k * (k - 1)) as f64);
    for ((o, &v), c) in out.iter_mut().zip(w).zip(cumulative) {
        *o = v * (coeff * c);
    }
}

fn f2_into(w: &[C64], k: u32, out: &mut [C64]) {
    let coeff = -(k as f64 + 1.0) / 4.0;
    for (o, &v) in out.iter_mut().zip(w) {
        *o = v * (coeff * v.norm_sqr().powi(2 * k as i32));
    }
}

fn f3_into(w: &[C64], dw: &[C64], k: u32, out: &mut [C64]) {
    let coeff = I * k as f64;
    for ((o, &v), &d) in out.iter_mut().zip(w).zip(dw) {
        *o = coeff * v.norm_sqr().powi(k as i32 - 1) * v * v * d.conj();
    }
}

/// `∂_t u = i∂_x²u − |u|^{2σ}∂_x u`.
pub fn rhs_original(u: &Field, sigma: f64) -> Field {
    let du = u.derivative(1);
    let d2 = u.derivative(2);
    let mut nl = vec![C64::new(0.0, 0.0); u.values().len()];
    nonlinear_original_into(u.values(), du.values(), sigma, &mut nl);
    let mut out = d2.map(|v| I * v);
    for (o, n) in out.values_mut().iter_mut().zip(nl) {
        *o += n;
    }
    out
}

/// `F₁(w) = −k(k−1) w · Im ∫_{x_min}^x |w|^{2k−4}(w̄ ∂_y w)² dy`; zero for `k < 2`.
///
/// The minus sign is what differentiating the gauge actually produces; with a
/// plus sign the gauged flow is not conjugate to the original one.
pub fn f1(w: &Field, k: u32) -> Field {
    let dw = w.derivative(1);
    let mut out = Field::zeros(w.grid(), w.t());
    f1_into(w.grid(), w.values(), dw.values(), k, out.values_mut());
    out
}

/// `F₂(w) = −((k+1)/4)|w|^{4k} w`.
pub fn f2(w: &Field, k: u32) -> Field {
    let mut out = Field::zeros(w.grid(), w.t());
    f2_into(w.values(), k, out.values_mut());
    out
}

/// `F₃(w) = ik|w|^{2k−2} w² ∂_x w̄`.
pub fn f3(w: &Field, k: u32) -> Field {
    let dw = w.derivative(1);
    let mut out = Field::zeros(w.grid(), w.t());
    f3_into(w.values(), dw.values(), k, out.values_mut());
    out
}

/// `F₁ + F₂ + F₃`.
pub fn gauged_nonlinearity(w: &Field, k: u32) -> Field {
    let a = f1(w, k);
    let b = f2(w, k);
    let c = f3(w, k);
    let mut out = a;
    for ((o, b), c) in out.values_mut().iter_mut().zip(b.values()).zip(c.values()) {
        *o = *o + *b + *c;
    }
    out
}

/// `∂_t w = i∂_x²w − i(F₁ + F₂ + F₃)`.
pub fn rhs_gauged(w: &Field, k: u32) -> Field {
    let d2 = w.derivative(2);
    let f = gauged_nonlinearity(w, k);
    d2.zip_map(&f, |a, b| I * a - I * b)
}

/// Raw-spectrum IF-RK4 stepper. State is the unnormalized FFT of the field.
struct Stepper {
    grid: Arc<Grid>,
    equation: Equation,
    k: u32,
    h: f64,
    half: Vec<C64>,
    full: Vec<C64>,
    ik: Vec<C64>,
    phys: Vec<C64>,
    dphys: Vec<C64>,
    out: Vec<C64>,
}

impl Stepper {
    fn new(grid: &Arc<Grid>, equation: Equation, k: u32, h: f64) -> Stepper {
        let m = grid.len();
        let nyq = grid.nyquist_index();
        let xi = grid.wavenumbers();
        Stepper {
            grid: Arc::clone(grid),
            equation,
            k,
            h,
            half: xi.iter().map(|x| C64::from_polar(1.0, -0.5 * h * x * x)).collect(),
            full: xi.iter().map(|x| C64::from_polar(1.0, -h * x * x)).collect(),
            ik: xi
                .iter()
                .enumerate()
                .map(|(i, &x)| if i == nyq { C64::new(0.0, 0.0) } else { C64::new(0.0, x) })
                .collect(),
            phys: vec![C64::new(0.0, 0.0); m],
            dphys: vec![C64::new(0.0, 0.0); m],
            out: vec![C64::new(0.0, 0.0); m],
        }
    }

    /// Raw spectrum of the nonlinear part evaluated at raw spectrum `c`.
    fn nonlinear(&mut self, c: &[C64]) -> Vec<C64> {
        let m = self.grid.len();
        if self.equation == Equation::Linear {
            return vec![C64::new(0.0, 0.0); m];
        }
        let scale = 1.0 / m as f64;
        for i in 0..m {
            self.phys[i] = c[i] * scale;
            self.dphys[i] = c[i] * self.ik[i] * scale;
        }
        self.grid.ifft(&mut self.phys);
        self.grid.ifft(&mut self.dphys);
        match self.equation {
            Equation::Original => {
                nonlinear_original_into(&self.phys, &self.dphys, self.k as f64, &mut self.out)
            }
            Equation::Gauged => {
                let mut a = vec![C64::new(0.0, 0.0); m];
                let mut b = vec![C64::new(0.0, 0.0); m];
                f1_into(&self.grid, &self.phys, &self.dphys, self.k, &mut a);
                f2_into(&self.phys, self.k, &mut b);
                f3_into(&self.phys, &self.dphys, self.k, &mut self.out);
                for ((o, a), b) in self.out.iter_mut().zip(a).zip(b) {
                    *o = -I * (a + b + *o);
                }
            }
            Equation::Linear => unreachable!(),
        }
        let mut res = self.out.clone();
        self.grid.fft(&mut res);
        res
    }

    /// One Lawson (integrating-factor) RK4 step of size `h` on the profile
    /// equation.
    fn step(&mut self, c: &[C64]) -> Vec<C64> {
        let m = c.len();
        let h = self.h;
        let k1 = self.nonlinear(c);
        let a: Vec<C64> = (0..m).map(|i| self.half[i] * (c[i] + 0.5 * h * k1[i])).collect();
        let k2 = self.nonlinear(&a);
        let b: Vec<C64> = (0..m).map(|i| self.half[i] * c[i] + 0.5 * h * k2[i]).collect();
        let k3 = self.nonlinear(&b);
        let d: Vec<C64> = (0..m)
            .map(|i| self.full[i] * c[i] + h * self.half[i] * k3[i])
            .collect();
        let k4 = self.nonlinear(&d);
        (0..m)
            .map(|i| {
                self.full[i] * c[i]
                    + h / 6.0
                        * (self.full[i] * k1[i] + 2.0 * self.half[i] * (k2[i] + k3[i]) + k4[i])
            })
            .collect()
    }
}

fn raw_spectrum(f: &Field) -> Vec<C64> {
    let mut c = f.values().to_vec();
    f.grid().fft(&mut c);
    c
}

fn field_from_raw(grid: &Arc<Grid>, c: &[C64], t: f64) -> Field {
    let mut v = c.to_vec();
    grid.ifft(&mut v);
    let scale = 1.0 / grid.len() as f64;
    v.iter_mut().for_each(|x| *x *= scale);
    Field::new(grid, v, t).expect("length preserved")
}

/// Advances `f` by `dt` (negative `dt` integrates backward).
pub fn step_if_rk4(f: &Field, dt: f64, equation: Equation, k: u32) -> Result<Field> {
    let mut stepper = Stepper::new(f.grid(), equation, k, dt);
    let next = stepper.step(&raw_spectrum(f));
    let t = f.t() + dt;
    if next.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Blowup { t });
    }
    Ok(field_from_raw(f.grid(), &next, t))
}

/// Integrates from `t0` to `t1`, storing every `store_every`-th step and both
/// endpoints. The step is shrunk so that it divides `|t1 − t0|` exactly.
pub fn evolve(f: &Field, t0: f64, t1: f64, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let span = t1 - t0;
    match cfg.direction {
        Direction::Forward if span < 0.0 => {
            return Err(Error::InvalidParameter(format!(
                "forward solve requested from {t0} to {t1}"
            )))
        }
        Direction::Backward if span > 0.0 => {
            return Err(Error::InvalidParameter(format!(
                "backward solve requested from {t0} to {t1}"
            )))
        }
        _ => {}
    }
    let start = f.clone().with_time(t0);
    if span == 0.0 {
        return Trajectory::new(vec![start]);
    }
    let n_steps = ((span.abs() / cfg.dt) - 1e-9).ceil().max(1.0) as usize;
    let h = span / n_steps as f64;
    let grid = f.grid();
    let mut stepper = Stepper::new(grid, cfg.equation, cfg.k, h);
    let mut c = raw_spectrum(&start);
    let mut snapshots = vec![start];
    for j in 1..=n_steps {
        c = stepper.step(&c);
        let t = t0 + j as f64 * h;
        if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Blowup { t });
        }
        if j % cfg.store_every == 0 || j == n_steps {
            let t = if j == n_steps { t1 } else { t };
            snapshots.push(field_from_raw(grid, &c, t));
        }
    }
    Trajectory::new(snapshots)
}

/// `‖u‖²_{L²}`.
pub fn mass(u: &Field) -> f64 {
    u.lebesgue_norm(2.0).powi(2)
}

/// `s_c = 1/2 − 1/(2σ)`.
pub fn critical_exponent(sigma: f64) -> f64 {
    0.5 - 0.5 / sigma
}

/// `u_λ(t, x) = λ^{1/(2σ)} u(λ²t, λx)` for `λ = 2^m`. The samples are carried
/// over unchanged onto the box shrunk by `λ`, which is exact because the
/// lattice embeds; the time tag becomes `t/λ²`.
pub fn scaling_transform(u: &Field, lambda: f64, sigma: f64) -> Result<Field> {
    let e = lambda.log2();
    if !(lambda > 0.0) || e.fract() != 0.0 || (2f64).powi(e as i32) != lambda {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda} is not a power of two"
        )));
    }
    let g = u.grid();
    let scaled = Grid::new(g.x_min() / lambda, g.x_max() / lambda, g.len())?;
    let amp = lambda.powf(0.5 / sigma);
    Field::new(
        &scaled,
        u.values().iter().map(|v| v * amp).collect(),
        u.t() / (lambda * lambda),
    )
}
