//! The normal-form transform of the high-low part of `F₃`: phase function,
//! multiplier, the `(2k+1)`-linear operator `Ω`, the resonance remainder
//! `R`, and the two integral-equation residuals that check the bookkeeping.
//!
//! `Ω` is evaluated by direct summation over the Fourier lattice. Only the
//! lattice points where every cutoff is nonzero are visited, so the sum is
//! exact and its cost is `(#low modes)^{2k}` per output frequency. With the
//! default separation `2^{m*} ≥ 16k` the low slots see only the zero mode on
//! any grid within the cost cap.

use std::sync::Arc;

use rayon::prelude::*;

use crate::dynamics::{f1, f2, gauged_nonlinearity, Equation, Trajectory};
use crate::error::{Error, Result};
use crate::quadrature::{flexible_weights, propagated_sum, simpson_weights, uniform_step};
use crate::spectral_grid::{lp_project, phi_at, phi_leq, Dyadic, Field, Grid, LpKind, Spectrum, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalFormConfig {
    pub k: u32,
    pub n0: Dyadic,
    pub m_star: u32,
    pub grid_cap: usize,
}

/// `ceil(log₂(16k))`.
pub fn default_m_star(k: u32) -> u32 {
    let mut m = 0;
    while (1u64 << m) < 16 * k as u64 {
        m += 1;
    }
    m
}

impl NormalFormConfig {
    pub fn new(k: u32, n0: f64) -> Result<NormalFormConfig> {
        let cfg = NormalFormConfig {
            k,
            n0: Dyadic::new(n0)?,
            m_star: default_m_star(k),
            grid_cap: 32,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_m_star(mut self, m_star: u32) -> Result<NormalFormConfig> {
        self.m_star = m_star;
        self.validate()?;
        Ok(self)
    }

    pub fn with_grid_cap(mut self, grid_cap: usize) -> NormalFormConfig {
        self.grid_cap = grid_cap;
        self
    }

    pub fn with_n0(mut self, n0: Dyadic) -> NormalFormConfig {
        self.n0 = n0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::InvalidParameter(format!("k = {} must be at least 3", self.k)));
        }
        if (1u64 << self.m_star.min(63)) < 16 * self.k as u64 {
            return Err(Error::InvalidParameter(format!(
                "2^m_star = 2^{} is below 16k = {}",
                self.m_star,
                16 * self.k
            )));
        }
        Ok(())
    }

    pub fn slots(&self) -> usize {
        2 * self.k as usize + 1
    }

    /// Refuses grids above `grid_cap`; every Ω evaluation goes through this.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.len() > self.grid_cap {
            return Err(Error::CostGuard {
                m: grid.len(),
                cap: self.grid_cap,
            });
        }
        Ok(())
    }
}

/// Conjugation pattern of the `2k+1` slots: `+1` keeps `f`, `-1` takes `f̄`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IotaSigns(Vec<i8>);

impl IotaSigns {
    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, slot: usize) -> i8 {
        self.0[slot - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `(+,−,+,−,…,+,−, +,+,−)`: `k−1` alternating pairs, then `+,+,−`.
pub fn iota(k: u32) -> IotaSigns {
    let k = k as usize;
    let mut s = Vec::with_capacity(2 * k + 1);
    for _ in 1..k {
        s.push(1);
        s.push(-1);
    }
    s.extend_from_slice(&[1, 1, -1]);
    IotaSigns(s)
}

fn phase_with(eta: &[f64], iota: &[i8]) -> f64 {
    let sum: f64 = eta.iter().sum();
    let weighted: f64 = eta.iter().zip(iota).map(|(e, &s)| s as f64 * e * e).sum();
    sum * sum - weighted
}

/// `Φ(η) = (Σ η_j)² − Σ ι_j η_j²`.
pub fn phase(eta: &[f64], k: u32) -> f64 {
    phase_with(eta, iota(k).signs())
}

/// `m_N(η) = η_{2k+1}/Φ(η) · Π_{j≤2k} φ_{≪N}(|η_j|) · φ_N(|η_{2k+1}|)`.
///
/// Where `η_{2k+1} = 0` the multiplier is taken to be zero: it multiplies a
/// derivative that vanishes there, and `Φ` may vanish with it when `N = 1`.
#[allow(non_snake_case)]
pub fn multiplier_mN(eta: &[f64], n: Dyadic, cfg: &NormalFormConfig) -> Result<f64> {
    let slots = cfg.slots();
    if eta.len() != slots {
        return Err(Error::InvalidParameter(format!(
            "expected {slots} frequencies, got {}",
            eta.len()
        )));
    }
    let low_scale = n.value() / (2f64).powi(cfg.m_star as i32);
    let last = eta[slots - 1];
    let mut cut = phi_at(last.abs(), n);
    for e in &eta[..slots - 1] {
        cut *= phi_leq(e.abs(), low_scale);
    }
    if cut == 0.0 || last == 0.0 {
        return Ok(0.0);
    }
    let p = phase_with(eta, iota(cfg.k).signs());
    if p == 0.0 {
        return Err(Error::Resonant { n: n.value() });
    }
    Ok(last / p * cut)
}

fn same_grid(fields: &[&Field]) -> Result<Arc<Grid>> {
    let first = fields.first().ok_or(Error::EmptyTrajectory)?;
    if fields.iter().any(|f| !f.same_grid(first)) {
        return Err(Error::GridMismatch);
    }
    Ok(Arc::clone(first.grid()))
}

/// `Ω` with the dyadic sum starting at `n_lo` instead of `cfg.n0`.
fn omega_from(fields: &[&Field], cfg: &NormalFormConfig, n_lo: Dyadic) -> Result<Field> {
    cfg.validate()?;
    let slots = cfg.slots();
    if fields.len() != slots {
        return Err(Error::InvalidParameter(format!(
            "expected {slots} inputs, got {}",
            fields.len()
        )));
    }
    let grid = same_grid(fields)?;
    cfg.check_grid(&grid)?;
    let signs = iota(cfg.k);
    let spectra: Vec<Spectrum> = fields
        .iter()
        .zip(signs.signs())
        .map(|(f, &s)| {
            let sp = f.forward_transform();
            if s < 0 {
                sp.conjugate_field()
            } else {
                sp
            }
        })
        .collect();

    let m = grid.len();
    let half = (m / 2) as i64;
    let dxi = grid.dxi();
    let low_slots = slots - 1;
    let mut total = vec![C64::new(0.0, 0.0); m];

    for n in Dyadic::range(n_lo, grid.dyadic_top()) {
        let low_scale = n.value() / (2f64).powi(cfg.m_star as i32);
        let low: Vec<(i64, f64)> = (-half..half)
            .filter_map(|mo| {
                let w = phi_leq((mo as f64 * dxi).abs(), low_scale);
                (w != 0.0).then_some((mo, w))
            })
            .collect();
        if low.is_empty() {
            continue;
        }
        let low_vals: Vec<Vec<C64>> = spectra[..low_slots]
            .iter()
            .map(|sp| low.iter().map(|&(mo, w)| sp.at_mode(mo) * w).collect())
            .collect();
        let high = &spectra[low_slots];

        let block: Vec<C64> = (0..m)
            .into_par_iter()
            .map(|i| -> Result<C64> {
                let xi_mode = grid.mode(i);
                let xi = xi_mode as f64 * dxi;
                let mut acc = C64::new(0.0, 0.0);
                let mut idx = vec![0usize; low_slots];
                loop {
                    let sum_mode: i64 = idx.iter().map(|&a| low[a].0).sum();
                    let last_mode = xi_mode - sum_mode;
                    // Off-lattice and Nyquist outputs of the last slot carry no
                    // derivative on the grid.
                    if last_mode > -half && last_mode < half && last_mode != 0 {
                        let eta_last = last_mode as f64 * dxi;
                        let cut = phi_at(eta_last.abs(), n);
                        if cut != 0.0 {
                            let mut weighted = eta_last * eta_last * signs.get(slots) as f64;
                            let mut prod = high.at_mode(last_mode);
                            for (j, &a) in idx.iter().enumerate() {
                                let e = low[a].0 as f64 * dxi;
                                weighted += signs.signs()[j] as f64 * e * e;
                                prod *= low_vals[j][a];
                            }
                            let p = xi * xi - weighted;
                            if p == 0.0 {
                                return Err(Error::Resonant { n: n.value() });
                            }
                            acc += prod * (eta_last / p * cut);
                        }
                    }
                    // Odometer over the low slots.
                    let mut pos = 0;
                    while pos < low_slots {
                        idx[pos] += 1;
                        if idx[pos] < low.len() {
                            break;
                        }
                        idx[pos] = 0;
                        pos += 1;
                    }
                    if pos == low_slots {
                        break;
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<C64>>>()?;
        for (t, b) in total.iter_mut().zip(block) {
            *t += b;
        }
    }

    let norm = grid.length().powi(-(low_slots as i32));
    total.iter_mut().for_each(|c| *c *= norm);
    Ok(Spectrum::new(&grid, total, fields[0].t())?.inverse_transform())
}

/// `Ω(f₁, …, f_{2k+1}) = Σ_{N≥N₀} ∫_{Γ_ξ} e^{ixξ} m_N(η) Π_j f̂_j^{(ι_j)}(η_j) dη`
/// with the lattice sum normalized by `(1/L)^{2k}`.
pub fn omega(fields: &[&Field], cfg: &NormalFormConfig) -> Result<Field> {
    omega_from(fields, cfg, cfg.n0)
}

pub fn omega_diag(f: &Field, cfg: &NormalFormConfig) -> Result<Field> {
    let fields = vec![f; cfg.slots()];
    omega(&fields, cfg)
}

fn check_slot(l: usize, cfg: &NormalFormConfig) -> Result<()> {
    if l == 0 || l > cfg.slots() {
        return Err(Error::InvalidSlot {
            l,
            max: cfg.slots(),
        });
    }
    Ok(())
}

/// `Ω` with every slot `f` except slot `l`, which carries `g` (no sign).
pub fn omega_slot_unsigned(f: &Field, g: &Field, l: usize, cfg: &NormalFormConfig) -> Result<Field> {
    check_slot(l, cfg)?;
    let mut fields = vec![f; cfg.slots()];
    fields[l - 1] = g;
    omega(&fields, cfg)
}

/// `Ω_l(f, g)`: every slot `f` except slot `l`, which carries `(−1)^l g`.
pub fn omega_slot(f: &Field, g: &Field, l: usize, cfg: &NormalFormConfig) -> Result<Field> {
    check_slot(l, cfg)?;
    let signed = if l % 2 == 0 { g.clone() } else { g.map(|v| -v) };
    omega_slot_unsigned(f, &signed, l, cfg)
}

/// `|f|^{2k−2} f²`.
fn power_part(f: &Field, k: u32) -> Field {
    f.map(|v| v * v * v.norm_sqr().powi(k as i32 - 1))
}

struct Blocks {
    /// `|w|^{2k−2}w²`.
    full: Field,
    /// Per dyadic `N`: `(N, |w_{≪N}|^{2k−2}w_{≪N}², ∂_x w̄_N)`.
    parts: Vec<(Dyadic, Field, Field)>,
}

fn blocks(w: &Field, cfg: &NormalFormConfig) -> Result<Blocks> {
    let parts = w
        .grid()
        .dyadics()
        .into_iter()
        .map(|n| -> Result<(Dyadic, Field, Field)> {
            let low = lp_project(w, n.value(), LpKind::MuchLess { m_star: cfg.m_star })?;
            let block = lp_project(w, n.value(), LpKind::At)?;
            Ok((n, power_part(&low, cfg.k), block.conj().derivative(1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Blocks {
        full: power_part(w, cfg.k),
        parts,
    })
}

/// `R(w) = Σ_N (|w|^{2k−2}w² − |w_{≪N}|^{2k−2}w_{≪N}²) ∂_x w̄_N
///        + Σ_{N≤N₀} |w_{≪N}|^{2k−2}w_{≪N}² ∂_x w̄_N`,
/// with `N` running over every dyadic block of the grid.
pub fn resonance(w: &Field, cfg: &NormalFormConfig) -> Result<Field> {
    let b = blocks(w, cfg)?;
    let mut out = Field::zeros(w.grid(), w.t());
    for (n, low, d) in &b.parts {
        for (((o, full), low), d) in out
            .values_mut()
            .iter_mut()
            .zip(b.full.values())
            .zip(low.values())
            .zip(d.values())
        {
            *o += (full - low) * d;
            if *n <= cfg.n0 {
                *o += low * d;
            }
        }
    }
    Ok(out)
}

/// `Σ_{N>N₀} |w_{≪N}|^{2k−2}w_{≪N}² ∂_x w̄_N`, the part handed to `Ω`.
pub fn high_low(w: &Field, cfg: &NormalFormConfig) -> Result<Field> {
    let b = blocks(w, cfg)?;
    let mut out = Field::zeros(w.grid(), w.t());
    for (_, low, d) in b.parts.iter().filter(|(n, _, _)| *n > cfg.n0) {
        for ((o, low), d) in out.values_mut().iter_mut().zip(low.values()).zip(d.values()) {
            *o += low * d;
        }
    }
    Ok(out)
}

/// `‖R(w) + Σ_{N>N₀} |w_{≪N}|^{2k−2}w_{≪N}²∂_x w̄_N − F₃(w)/(ik)‖_{L²}`.
pub fn f3_decomposition_check(w: &Field, cfg: &NormalFormConfig) -> Result<f64> {
    let tail = w.forward_transform();
    let xi_max = w.grid().xi_max();
    let outside: f64 = tail
        .coeffs()
        .iter()
        .zip(w.grid().wavenumbers())
        .filter(|(_, xi)| xi.abs() >= 0.5 * xi_max)
        .map(|(c, _)| c.norm_sqr())
        .sum();
    if outside > 1e-20 * tail.energy() * w.grid().length() {
        log::warn!("field is not band-limited below half the Nyquist frequency");
    }
    let r = resonance(w, cfg)?;
    let hl = high_low(w, cfg)?;
    let f3 = crate::dynamics::f3(w, cfg.k);
    let scale = C64::new(0.0, -1.0 / cfg.k as f64);
    let diff = r.zip_map(&hl, |a, b| a + b).zip_map(&f3, |a, b| a - b * scale);
    Ok(diff.lebesgue_norm(2.0))
}

/// Snapshots of `traj` between `t0` and `t` inclusive, ordered from `t0`.
fn window(traj: &Trajectory, t0: f64, t: f64) -> Result<Vec<Field>> {
    traj.index_of(t0)?;
    traj.index_of(t)?;
    let sub = traj.restrict(t0, t)?;
    let mut snaps = sub.snapshots().to_vec();
    if t < t0 {
        snaps.reverse();
    }
    Ok(snaps)
}

/// `‖w(t) − e^{i(t−t₀)∂²}w(t₀) + i∫_{t₀}^t e^{i(t−s)∂²}(F₁+F₂+F₃)(w(s)) ds‖_{L²}`
/// with composite Simpson over the stored snapshots.
pub fn duhamel_residual(traj: &Trajectory, t0: f64, t: f64, k: u32) -> Result<f64> {
    duhamel_residual_for(traj, t0, t, Equation::Gauged, k)
}

/// [`duhamel_residual`] for any of the solver's equations.
pub fn duhamel_residual_for(traj: &Trajectory, t0: f64, t: f64, equation: Equation, k: u32) -> Result<f64> {
    let snaps = window(traj, t0, t)?;
    if snaps.len() == 1 {
        return Ok(0.0);
    }
    let times: Vec<f64> = snaps.iter().map(Field::t).collect();
    let h = uniform_step(&times)?;
    let weights = simpson_weights(snaps.len(), h)?;
    let sources: Vec<Spectrum> = snaps
        .iter()
        .map(|w| match equation {
            Equation::Gauged => gauged_nonlinearity(w, k).map(|v| -I * v),
            Equation::Original => {
                let du = w.derivative(1);
                w.zip_map(&du, |a, b| -b * a.norm_sqr().powi(k as i32))
            }
            Equation::Linear => Field::zeros(w.grid(), w.t()),
        }
        .forward_transform())
        .collect();
    let pairs: Vec<(f64, &Spectrum)> = times.iter().copied().zip(sources.iter()).collect();
    let integral = propagated_sum(&pairs, &weights, t);
    let w0 = &snaps[0];
    let wt = &snaps[snaps.len() - 1];
    let rhs = &w0.free_propagate(t - t0).with_time(t) + &integral;
    Ok((wt - &rhs).lebesgue_norm(2.0))
}

/// How the normal-form identity is assembled.
///
/// `AsWritten` follows the definition literally: `Ω` sums `N ≥ N₀`, and the
/// derivative terms carry the slot sign `(−1)^l`.
///
/// `Reconciled` is what integrating the `F₃` Duhamel term by parts actually
/// produces: the slot-`l` derivative enters with `−ι_l` in place of `(−1)^l`
/// (they disagree in the last two slots), and `Ω` sums `N > N₀` because `R`
/// already contains the block `N = N₀`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Bookkeeping {
    AsWritten,
    #[default]
    Reconciled,
}

impl Bookkeeping {
    fn omega_start(self, cfg: &NormalFormConfig) -> Dyadic {
        match self {
            Bookkeeping::AsWritten => cfg.n0,
            Bookkeeping::Reconciled => cfg.n0.double(),
        }
    }

    /// Coefficient of the unsigned slot-`l` term relative to `−ik∫…`.
    fn slot_sign(self, l: usize, signs: &IotaSigns) -> f64 {
        match self {
            Bookkeeping::AsWritten => {
                if l % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Bookkeeping::Reconciled => -(signs.get(l) as f64),
        }
    }
}

/// Evaluates the normal-form right side at every stored time of `traj`
/// between `t0` and the end nearest `t_end`, with `w0` in place of the state
/// at `t0`. The returned fields are ordered from `t0`.
pub(crate) fn normal_form_rhs(
    traj: &Trajectory,
    t0: f64,
    t_end: f64,
    w0: &Field,
    cfg: &NormalFormConfig,
    bk: Bookkeeping,
) -> Result<Vec<Field>> {
    cfg.check_grid(traj.grid())?;
    let snaps = window(traj, t0, t_end)?;
    let times: Vec<f64> = snaps.iter().map(Field::t).collect();
    let h = uniform_step(&times)?;
    let k = cfg.k;
    let kf = k as f64;
    let om_cfg = cfg.with_n0(bk.omega_start(cfg));
    let signs = iota(k);

    let boundary0 = omega_from(&vec![w0; cfg.slots()], cfg, om_cfg.n0)?;
    let free_part = w0.zip_map(&boundary0, |a, b| a - kf * b);

    let mut sources = Vec::with_capacity(snaps.len());
    let mut boundaries = Vec::with_capacity(snaps.len());
    for w in &snaps {
        let nonlin = gauged_nonlinearity(w, k);
        let f12 = f1(w, k).zip_map(&f2(w, k), |a, b| a + b);
        let r = resonance(w, cfg)?;
        let mut src = f12.zip_map(&r, |a, b| -I * a + kf * b);
        for l in 1..=cfg.slots() {
            let mut fields = vec![w; cfg.slots()];
            fields[l - 1] = &nonlin;
            let om = omega_from(&fields, cfg, om_cfg.n0)?;
            let c = -I * kf * bk.slot_sign(l, &signs);
            src = src.zip_map(&om, |a, b| a + c * b);
        }
        sources.push(src.forward_transform());
        boundaries.push(omega_from(&vec![w; cfg.slots()], cfg, om_cfg.n0)?);
    }

    let mut out = Vec::with_capacity(snaps.len());
    for (j, &t) in times.iter().enumerate() {
        let mut rhs = free_part.free_propagate(t - t0).with_time(t);
        let boundary = &boundaries[j];
        rhs = rhs.zip_map(boundary, |a, b| a + kf * b);
        if j > 0 {
            let weights = flexible_weights(j + 1, h)?;
            let pairs: Vec<(f64, &Spectrum)> =
                times[..=j].iter().copied().zip(sources[..=j].iter()).collect();
            let integral = propagated_sum(&pairs, &weights, t);
            rhs = &rhs + &integral;
        }
        out.push(rhs);
    }
    Ok(out)
}

/// `‖w(t) − RHS(t)‖_{L²}` for the normal-form integral equation, with the
/// reconciled bookkeeping.
pub fn normalform_residual(traj: &Trajectory, t0: f64, t: f64, cfg: &NormalFormConfig) -> Result<f64> {
    normalform_residual_with(traj, t0, t, cfg, Bookkeeping::Reconciled)
}

pub fn normalform_residual_with(
    traj: &Trajectory,
    t0: f64,
    t: f64,
    cfg: &NormalFormConfig,
    bk: Bookkeeping,
) -> Result<f64> {
    let snaps = window(traj, t0, t)?;
    if snaps.len() > 1 {
        // Same quadrature contract as the plain Duhamel residual.
        simpson_weights(snaps.len(), 1.0)?;
    }
    let w0 = snaps[0].clone();
    let rhs = normal_form_rhs(traj, t0, t, &w0, cfg, bk)?;
    let wt = &snaps[snaps.len() - 1];
    Ok((wt - &rhs[rhs.len() - 1]).lebesgue_norm(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, SolverConfig};
    use crate::spectral_grid::make_grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cfg(n0: f64) -> NormalFormConfig {
        NormalFormConfig::new(3, n0).unwrap()
    }

    /// Random field with modes `|m| ≤ band`, coefficient envelope `⟨m⟩^{-1}`.
    fn random_field(g: &Arc<Grid>, band: i64, amp: f64, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Field::zeros(g, 0.0);
        for mo in -band..=band {
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                * (amp / (1.0 + (mo as f64).abs()));
            f = &f + &Field::plane_wave(g, mo, c);
        }
        f
    }

    #[test]
    fn iota_patterns() {
        assert_eq!(iota(3).signs(), &[1, -1, 1, -1, 1, 1, -1]);
        assert_eq!(iota(4).signs(), &[1, -1, 1, -1, 1, -1, 1, 1, -1]);
        for k in 3..10 {
            let s = iota(k);
            assert_eq!(s.len(), 2 * k as usize + 1);
            assert_eq!(s.signs().iter().filter(|&&v| v == -1).count(), k as usize);
        }
    }

    #[test]
    fn m_star_default() {
        assert_eq!(default_m_star(3), 6);
        assert_eq!(default_m_star(4), 6);
        assert_eq!(default_m_star(5), 7);
        assert!(cfg(2.0).with_m_star(5).is_err());
        assert!(NormalFormConfig::new(2, 2.0).is_err());
        assert!(NormalFormConfig::new(3, 3.0).is_err());
    }

    #[test]
    fn phase_cases() {
        assert_eq!(phase(&[0.0; 7], 3), 0.0);
        let eta = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.5];
        assert!((phase(&eta, 3) - 2.0 * 6.25).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let eta: Vec<f64> = (0..7).map(|_| rng.gen_range(-10.0..10.0)).collect();
            // Expanded form: Σ_{i≠j} η_iη_j + Σ (1 − ι_j) η_j².
            let signs = [1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0];
            let mut cross = 0.0;
            for i in 0..7 {
                for j in 0..7 {
                    if i != j {
                        cross += eta[i] * eta[j];
                    }
                }
                cross += (1.0 - signs[i]) * eta[i] * eta[i];
            }
            let p = phase(&eta, 3);
            assert!((p - cross).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn multiplier_support() {
        let c = cfg(2.0);
        let n = Dyadic::new(8.0).unwrap();
        let mut eta = [0.0; 7];
        eta[6] = 3.9;
        assert_eq!(multiplier_mN(&eta, n, &c).unwrap(), 0.0);
        eta[6] = 10.0;
        eta[2] = 2.0 * 8.0 / 64.0;
        assert_eq!(multiplier_mN(&eta, n, &c).unwrap(), 0.0);
        eta[2] = 0.1;
        let m = multiplier_mN(&eta, n, &c).unwrap();
        let p = phase(&eta, 3);
        let cut = phi_at(10.0, n) * phi_leq(0.1, 8.0 / 64.0);
        assert!((m - 10.0 / p * cut).abs() < 1e-15);
        assert!(multiplier_mN(&eta[..6], n, &c).is_err());
        // η_{2k+1} = 0 inside the N = 1 block: zero by convention.
        assert_eq!(multiplier_mN(&[0.0; 7], Dyadic::ONE, &c).unwrap(), 0.0);
    }

    #[test]
    fn multiplier_lower_bounds_on_samples() {
        let c = cfg(2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for e in [3, 4, 5] {
            let n = Dyadic::from_exponent(e);
            let nv = n.value();
            for _ in 0..20_000 {
                let mut eta = [0.0; 7];
                for v in eta.iter_mut().take(6) {
                    *v = rng.gen_range(-1.0..1.0) * 2.0 * nv / 64.0;
                }
                let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                eta[6] = s * rng.gen_range(0.5 * nv..2.0 * nv);
                assert!(phase(&eta, 3).abs() >= nv * nv / 8.0);
                assert!(multiplier_mN(&eta, n, &c).unwrap().abs() <= 16.0 / nv);
            }
        }
    }

    #[test]
    fn omega_cost_guard_and_validation() {
        let g = make_grid(-PI, PI, 64).unwrap();
        let f = Field::zeros(&g, 0.0);
        let err = omega_diag(&f, &cfg(2.0)).unwrap_err();
        assert!(err.to_string().contains("grid_cap"));
        let g16 = make_grid(-PI, PI, 16).unwrap();
        let a = Field::zeros(&g16, 0.0);
        let b = Field::zeros(&make_grid(-PI, PI, 8).unwrap(), 0.0);
        let mut fields = vec![&a; 7];
        fields[3] = &b;
        assert_eq!(omega(&fields, &cfg(2.0)).unwrap_err(), Error::GridMismatch);
        assert!(omega(&fields[..6], &cfg(2.0)).is_err());
        assert!(matches!(omega_slot(&a, &a, 8, &cfg(2.0)), Err(Error::InvalidSlot { .. })));
        assert!(matches!(omega_slot(&a, &a, 0, &cfg(2.0)), Err(Error::InvalidSlot { .. })));
    }

    #[test]
    fn omega_zero_cases() {
        let g = make_grid(-PI, PI, 16).unwrap();
        assert_eq!(omega_diag(&Field::zeros(&g, 0.0), &cfg(2.0)).unwrap().lebesgue_norm(2.0), 0.0);
        // Support in |ξ| ≤ N₀/4: the last slot needs |η| > N₀/2.
        let low = random_field(&g, 1, 0.5, 1);
        assert!(omega_diag(&low, &cfg(8.0)).unwrap().lebesgue_norm(2.0) <= 1e-15);
        let f = random_field(&g, 6, 0.5, 2);
        assert_eq!(omega_slot(&f, &Field::zeros(&g, 0.0), 3, &cfg(2.0)).unwrap().lebesgue_norm(2.0), 0.0);
    }

    /// Brute-force oracle: every lattice tuple, no pruning, the multiplier
    /// through `multiplier_mN`. Feasible for k = 3 on an 8-point grid.
    fn omega_brute(fields: &[&Field], c: &NormalFormConfig) -> Field {
        let g = fields[0].grid();
        let m = g.len() as i64;
        let half = m / 2;
        let signs = iota(c.k);
        let hats: Vec<Spectrum> = fields
            .iter()
            .zip(signs.signs())
            .map(|(f, &s)| {
                if s < 0 {
                    f.conj().forward_transform()
                } else {
                    f.forward_transform()
                }
            })
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); m as usize];
        for i in 0..m as usize {
            let xm = g.mode(i);
            let mut acc = C64::new(0.0, 0.0);
            let total = (m as usize).pow(6);
            for code in 0..total {
                let mut rest = code;
                let mut modes = [0i64; 7];
                for v in modes.iter_mut().take(6) {
                    *v = (rest % m as usize) as i64 - half;
                    rest /= m as usize;
                }
                modes[6] = xm - modes[..6].iter().sum::<i64>();
                if modes[6] <= -half || modes[6] >= half {
                    continue;
                }
                let eta: Vec<f64> = modes.iter().map(|&v| v as f64 * g.dxi()).collect();
                let mut mult = 0.0;
                for n in Dyadic::range(c.n0, g.dyadic_top()) {
                    mult += multiplier_mN(&eta, n, c).unwrap();
                }
                if mult == 0.0 {
                    continue;
                }
                let prod: C64 = modes.iter().zip(&hats).map(|(&v, h)| h.at_mode(v)).product();
                acc += prod * mult;
            }
            out[i] = acc * g.length().powi(-6);
        }
        Spectrum::new(g, out, 0.0).unwrap().inverse_transform()
    }

    #[test]
    fn omega_matches_unpruned_sum() {
        let g = make_grid(-PI, PI, 8).unwrap();
        let c = cfg(1.0);
        let fs: Vec<Field> = (0..7).map(|s| random_field(&g, 3, 0.7, 20 + s)).collect();
        let refs: Vec<&Field> = fs.iter().collect();
        let fast = omega(&refs, &c).unwrap();
        let slow = omega_brute(&refs, &c);
        assert!((&fast - &slow).lebesgue_norm(2.0) <= 1e-14 * slow.lebesgue_norm(2.0).max(1e-300));
        assert!(slow.lebesgue_norm(2.0) > 0.0);
    }

    #[test]
    fn omega_single_mode_closed_form() {
        // Low slots constant c, last slot a plane wave at mode 5. Only the zero
        // mode survives in the low slots, so Φ = 2η₇² and the output is a
        // single mode with amplitude c^{k+1} c̄^{k−1} ā Σ_N φ_N(5)/(2η₇).
        let g = make_grid(-PI, PI, 16).unwrap();
        let c0 = C64::new(0.3, 0.2);
        let cst = Field::from_fn(&g, 0.0, |_| c0);
        let a = C64::new(0.4, -0.1);
        let pw = Field::plane_wave(&g, 5, a);
        let mut fields = vec![&cst; 7];
        fields[6] = &pw;
        let out = omega(&fields, &cfg(2.0)).unwrap();
        // Slot 7 is conjugated: conj(a e^{5ix}) = ā e^{-5ix}, so η₇ = −5.
        let low = c0.powi(4) * c0.conj().powi(2);
        let cut: f64 = Dyadic::range(Dyadic::new(2.0).unwrap(), g.dyadic_top())
            .into_iter()
            .map(|n| phi_at(5.0, n))
            .sum();
        let want = Field::plane_wave(&g, -5, low * a.conj() * (cut / (2.0 * -5.0)));
        assert!((&out - &want).lebesgue_norm(f64::INFINITY) < 1e-14);
    }

    #[test]
    fn omega_multilinear_and_symmetric() {
        let g = make_grid(-PI, PI, 16).unwrap();
        let c = cfg(2.0);
        let f = random_field(&g, 6, 0.6, 3);
        let h = random_field(&g, 6, 0.6, 4);
        let alpha = C64::new(0.3, -1.2);
        let beta = C64::new(-0.7, 0.4);
        let comb = f.zip_map(&h, |a, b| alpha * a + beta * b);
        let lhs = omega_slot_unsigned(&f, &comb, 1, &c).unwrap();
        let rhs = omega_slot_unsigned(&f, &f, 1, &c)
            .unwrap()
            .zip_map(&omega_slot_unsigned(&f, &h, 1, &c).unwrap(), |a, b| alpha * a + beta * b);
        assert!((&lhs - &rhs).lebesgue_norm(2.0) <= 1e-12 * lhs.lebesgue_norm(2.0));

        // Slots 1 and 3 are both unconjugated low slots.
        let fs: Vec<Field> = (0..7).map(|s| random_field(&g, 6, 0.6, 40 + s)).collect();
        let mut refs: Vec<&Field> = fs.iter().collect();
        let a = omega(&refs, &c).unwrap();
        refs.swap(0, 2);
        let b = omega(&refs, &c).unwrap();
        assert!((&a - &b).lebesgue_norm(2.0) <= 1e-12 * a.lebesgue_norm(2.0));
    }

    #[test]
    fn omega_slot_signs() {
        let g = make_grid(-PI, PI, 16).unwrap();
        let c = cfg(2.0);
        let f = random_field(&g, 6, 0.6, 8);
        let h = random_field(&g, 6, 0.6, 9);
        let diag = omega_diag(&f, &c).unwrap();
        for l in [2, 4, 6] {
            let s = omega_slot(&f, &f, l, &c).unwrap();
            assert!((&s - &diag).lebesgue_norm(2.0) <= 1e-14 * diag.lebesgue_norm(2.0));
        }
        for l in [1, 3, 7] {
            let signed = omega_slot(&f, &h, l, &c).unwrap();
            let plain = omega_slot_unsigned(&f, &h, l, &c).unwrap();
            assert!((&signed + &plain).lebesgue_norm(2.0) <= 1e-14 * plain.lebesgue_norm(2.0));
        }
    }

    #[test]
    fn conjugate_slot_matches_physical_conjugation() {
        let g = make_grid(-PI, PI, 16).unwrap();
        let f = random_field(&g, 8, 0.6, 12);
        let a = f.forward_transform().conjugate_field();
        let b = f.conj().forward_transform();
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).norm() <= 1e-12);
        }
    }

    #[test]
    fn resonance_two_block_field() {
        // w = e^{ix}·ε + ε e^{16ix}: blocks N = 1 and N = 16 on a 64-point grid.
        let g = make_grid(-PI, PI, 64).unwrap();
        let c = cfg(4.0);
        let eps = 0.3;
        let w = &Field::plane_wave(&g, 1, C64::new(eps, 0.0)) + &Field::plane_wave(&g, 16, C64::new(eps, 0.0));
        let got = resonance(&w, &c).unwrap();
        // Direct formula from the blocks, written out without the helper.
        let k = 3;
        let mut want = Field::zeros(&g, 0.0);
        for n in g.dyadics() {
            let low = lp_project(&w, n.value(), LpKind::MuchLess { m_star: 6 }).unwrap();
            let wn = lp_project(&w, n.value(), LpKind::At).unwrap();
            let dn = wn.conj().derivative(1);
            let pl = low.map(|v| v * v * v.norm_sqr().powi(k - 1));
            let pf = w.map(|v| v * v * v.norm_sqr().powi(k - 1));
            let mut term = pf.zip_map(&pl, |a, b| a - b);
            if n.value() <= 4.0 {
                term = pf.clone();
            }
            want = &want + &term.zip_map(&dn, |a, b| a * b);
        }
        assert!((&got - &want).lebesgue_norm(2.0) <= 1e-14);
        assert_eq!(resonance(&Field::zeros(&g, 0.0), &c).unwrap().lebesgue_norm(2.0), 0.0);
    }

    #[test]
    fn f3_decomposition_cases() {
        let g = make_grid(-PI, PI, 256).unwrap();
        assert_eq!(f3_decomposition_check(&Field::zeros(&g, 0.0), &cfg(4.0)).unwrap(), 0.0);
        for (seed, n0) in [(1, 1.0), (2, 4.0), (3, 128.0), (4, 1024.0)] {
            let w = random_field(&g, 60, 0.8, seed);
            let r = f3_decomposition_check(&w, &cfg(n0)).unwrap();
            assert!(r <= 1e-10, "N0 = {n0}: {r:e}");
        }
    }

    fn small_run(m: usize, amp: f64, t1: f64, nsnap: usize) -> Trajectory {
        let g = make_grid(-PI, PI, m).unwrap();
        let w0 = random_field(&g, (m / 4) as i64 - 1, amp, 77);
        let steps = (nsnap - 1) * 4;
        let cfg = SolverConfig::new(3, t1 / steps as f64, 4, Equation::Gauged);
        evolve(&w0, 0.0, t1, &cfg).unwrap()
    }

    #[test]
    fn duhamel_residual_cases() {
        let traj = small_run(32, 0.4, 0.05, 51);
        assert_eq!(duhamel_residual(&traj, 0.0, 0.0, 3).unwrap(), 0.0);
        let r = duhamel_residual(&traj, 0.0, 0.05, 3).unwrap();
        assert!(r <= 1e-6, "{r:e}");
        assert!(duhamel_residual(&traj, 0.0, 0.001, 3).is_err());

        let g = make_grid(-PI, PI, 32).unwrap();
        let w0 = random_field(&g, 7, 0.4, 5);
        let lin = evolve(&w0, 0.0, 0.05, &SolverConfig::new(3, 1e-3, 1, Equation::Linear)).unwrap();
        assert!(duhamel_residual_for(&lin, 0.0, 0.05, Equation::Linear, 3).unwrap() <= 1e-12);
    }

    #[test]
    fn normalform_residual_trivial_cases() {
        let traj = small_run(16, 0.4, 0.05, 51);
        let c = cfg(2.0);
        let r0 = normalform_residual(&traj, 0.0, 0.0, &c).unwrap();
        assert!(r0 <= 1e-15, "{r0:e}");
        let zero = traj.map(|f| f.map(|_| C64::new(0.0, 0.0))).unwrap();
        assert!(normalform_residual(&zero, 0.0, 0.05, &c).unwrap() <= 1e-12);
        let wide = small_run(64, 0.4, 0.05, 51);
        assert!(matches!(normalform_residual(&wide, 0.0, 0.05, &c), Err(Error::CostGuard { .. })));
    }

    #[test]
    fn normalform_residual_tracks_duhamel() {
        let traj = small_run(16, 0.4, 0.05, 51);
        let c = cfg(2.0);
        let d = duhamel_residual(&traj, 0.0, 0.05, 3).unwrap();
        let r = normalform_residual(&traj, 0.0, 0.05, &c).unwrap();
        let raw = normalform_residual_with(&traj, 0.0, 0.05, &c, Bookkeeping::AsWritten).unwrap();
        assert!(d <= 1e-6);
        assert!(r <= 5.0 * d, "{r:e} vs {d:e}");
        assert!(raw > 10.0 * r, "{raw:e} vs {r:e}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn phase_is_invariant_under_same_sign_swaps(eta in proptest::collection::vec(-20.0f64..20.0, 7), i in 0usize..7, j in 0usize..7) {
            let signs = iota(3);
            prop_assume!(signs.signs()[i] == signs.signs()[j]);
            let mut swapped = eta.clone();
            swapped.swap(i, j);
            let a = phase(&eta, 3);
            let b = phase(&swapped, 3);
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }
}
