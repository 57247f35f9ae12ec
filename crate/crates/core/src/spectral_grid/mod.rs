//! Periodic grid, continuum-normalized discrete Fourier analysis and the
//! basic linear operators of the laboratory.
//!
//! The transform pair is
//!
//! ```text
//! f̂(ξ_m) = dx · Σ_j f(x_j) e^{-i ξ_m x_j},     f(x_j) = (1/L) · Σ_m f̂(ξ_m) e^{i ξ_m x_j}
//! ```
//!
//! with `x_j = x_min + j·dx` and `ξ_m = 2πm/L`, `m ∈ [-M/2, M/2)`. Spectra are
//! stored in FFT order (index `i` carries mode `i` for `i < M/2` and `i - M`
//! otherwise). With this normalization a pointwise product of `n` fields has
//! the spectrum `(1/L)^{n-1}` times the discrete convolution, so multiplier
//! symbols carry no grid-dependent constants.

mod bump;
mod littlewood_paley;

pub use bump::{phi, phi_at, phi_leq, psi, Dyadic};
pub use littlewood_paley::{lp_project, lp_symbol, LpKind};

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Uniform periodic grid on `[x_min, x_max)` with `M` points.
pub struct Grid {
    x_min: f64,
    x_max: f64,
    m: usize,
    dx: f64,
    length: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// e^{-i ξ_m x_min}, FFT order.
    shift: Vec<C64>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .field("m", &self.m)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.x_min == other.x_min && self.x_max == other.x_max && self.m == other.m
    }
}

/// Builds a grid; `m` must be a power of two no smaller than 4.
pub fn make_grid(x_min: f64, x_max: f64, m: usize) -> Result<Arc<Grid>> {
    Grid::new(x_min, x_max, m)
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, m: usize) -> Result<Arc<Grid>> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "interval [{x_min}, {x_max}) is degenerate"
            )));
        }
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "M = {m} must be a power of two and at least 4"
            )));
        }
        let length = x_max - x_min;
        let dx = length / m as f64;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let shift = (0..m)
            .map(|i| {
                let xi = 2.0 * PI * mode_of(i, m) as f64 / length;
                C64::from_polar(1.0, -xi * x_min)
            })
            .collect();
        Ok(Arc::new(Grid {
            x_min,
            x_max,
            m,
            dx,
            length,
            forward,
            inverse,
            shift,
        }))
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Lattice spacing of the frequency variable, 2π/L.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest |ξ| on the lattice (the Nyquist frequency π/dx).
    pub fn xi_max(&self) -> f64 {
        PI / self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.x(j)).collect()
    }

    /// Integer mode carried by FFT-order index `i`.
    pub fn mode(&self, i: usize) -> i64 {
        mode_of(i, self.m)
    }

    /// FFT-order index of integer mode `m`, if it lies in `[-M/2, M/2)`.
    pub fn index_of_mode(&self, mode: i64) -> Option<usize> {
        let half = (self.m / 2) as i64;
        if mode < -half || mode >= half {
            None
        } else if mode >= 0 {
            Some(mode as usize)
        } else {
            Some((mode + self.m as i64) as usize)
        }
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        self.dxi() * self.mode(i) as f64
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.wavenumber(i)).collect()
    }

    pub fn nyquist_index(&self) -> usize {
        self.m / 2
    }

    /// Unnormalized forward DFT in place (rustfft convention).
    pub fn fft(&self, buf: &mut [C64]) {
        self.forward.process(buf);
    }

    /// Unnormalized inverse DFT in place.
    pub fn ifft(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
    }

    /// Trapezoid-rule antiderivative starting at `x_min`: `F(x_0) = 0`,
    /// `F(x_j) = F(x_{j-1}) + dx·(f_{j-1} + f_j)/2`.
    pub fn cumulative_integral(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.m, "cumulative_integral: length mismatch");
        let half_dx = 0.5 * self.dx;
        let mut out = Vec::with_capacity(self.m);
        let mut acc = 0.0;
        out.push(0.0);
        for w in f.windows(2) {
            acc += half_dx * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    /// Smallest dyadic `N` with `φ_{≤N} ≡ 1` on the whole lattice, i.e. the top
    /// of a Littlewood-Paley sum that resolves the identity exactly.
    pub fn dyadic_top(&self) -> Dyadic {
        let mut n = Dyadic::ONE;
        while n.value() < self.xi_max() {
            n = n.double();
        }
        n
    }

    /// All dyadic blocks `1, 2, …, dyadic_top()`.
    pub fn dyadics(&self) -> Vec<Dyadic> {
        Dyadic::range(Dyadic::ONE, self.dyadic_top())
    }
}

fn mode_of(i: usize, m: usize) -> i64 {
    if i < m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

/// A complex field sampled on a grid at one instant.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<C64>,
    t: f64,
}

/// Continuum-normalized spectrum of a field, FFT order.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Arc<Grid>,
    coeffs: Vec<C64>,
    t: f64,
}

impl Field {
    pub fn new(grid: &Arc<Grid>, values: Vec<C64>, t: f64) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values,
            t,
        })
    }

    pub fn zeros(grid: &Arc<Grid>, t: f64) -> Field {
        Field {
            grid: Arc::clone(grid),
            values: vec![C64::new(0.0, 0.0); grid.len()],
            t,
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, t: f64, f: impl Fn(f64) -> C64) -> Field {
        let values = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        Field {
            grid: Arc::clone(grid),
            values,
            t,
        }
    }

    /// Plane wave `amplitude · e^{i ξ_mode x}` on the lattice.
    pub fn plane_wave(grid: &Arc<Grid>, mode: i64, amplitude: C64) -> Field {
        let xi = grid.dxi() * mode as f64;
        Field::from_fn(grid, 0.0, |x| amplitude * C64::from_polar(1.0, xi * x))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn with_time(mut self, t: f64) -> Field {
        self.t = t;
        self
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
            t: self.t,
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(C64, C64) -> C64) -> Field {
        assert!(self.same_grid(other), "zip_map: fields on different grids");
        Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            t: self.t,
        }
    }

    pub fn conj(&self) -> Field {
        self.map(|v| v.conj())
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn forward_transform(&self) -> Spectrum {
        let mut buf = self.values.clone();
        self.grid.fft(&mut buf);
        let dx = self.grid.dx();
        for (c, s) in buf.iter_mut().zip(&self.grid.shift) {
            *c *= s * dx;
        }
        Spectrum {
            grid: Arc::clone(&self.grid),
            coeffs: buf,
            t: self.t,
        }
    }

    /// Applies the Fourier multiplier `symbol(i, ξ_i)` (FFT-order index and
    /// frequency).
    pub fn apply_symbol(&self, symbol: impl Fn(usize, f64) -> C64) -> Field {
        let grid = &self.grid;
        let mut buf = self.values.clone();
        grid.fft(&mut buf);
        let scale = 1.0 / grid.len() as f64;
        for (i, c) in buf.iter_mut().enumerate() {
            *c *= symbol(i, grid.wavenumber(i)) * scale;
        }
        grid.ifft(&mut buf);
        Field {
            grid: Arc::clone(grid),
            values: buf,
            t: self.t,
        }
    }

    /// Discrete `H^s` norm with weight `⟨ξ⟩^{2s}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.weighted_spectral_norm(|xi| (1.0 + xi * xi).powf(s))
    }

    /// Discrete `Ḣ^s` norm with weight `|ξ|^{2s}`; the zero mode contributes
    /// nothing.
    pub fn homogeneous_sobolev_norm(&self, s: f64) -> f64 {
        self.weighted_spectral_norm(|xi| if xi == 0.0 { 0.0 } else { xi.abs().powf(2.0 * s) })
    }

    fn weighted_spectral_norm(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let grid = &self.grid;
        let mut buf = self.values.clone();
        grid.fft(&mut buf);
        let dx = grid.dx();
        let sum: f64 = buf
            .iter()
            .enumerate()
            .map(|(i, c)| weight(grid.wavenumber(i)) * c.norm_sqr())
            .sum();
        (sum * dx * dx / grid.length()).sqrt()
    }

    /// `(dx Σ |f|^p)^{1/p}`, or `max |f|` for infinite `p`.
    pub fn lebesgue_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "lebesgue_norm: p = {p} < 1");
        if p.is_infinite() {
            return self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let sum: f64 = if p == 2.0 {
            self.values.iter().map(|v| v.norm_sqr()).sum()
        } else {
            self.values.iter().map(|v| v.norm().powf(p)).sum()
        };
        (sum * self.grid.dx()).powf(1.0 / p)
    }

    /// Multiplier `⟨ξ⟩ = (1 + ξ²)^{1/2}`.
    pub fn bracket_derivative(&self) -> Field {
        self.apply_symbol(|_, xi| C64::new((1.0 + xi * xi).sqrt(), 0.0))
    }

    /// Spectral derivative of order 1 or 2; the Nyquist mode is dropped for
    /// odd order.
    pub fn derivative(&self, order: u32) -> Field {
        assert!(order == 1 || order == 2, "derivative: order {order} unsupported");
        let nyq = self.grid.nyquist_index();
        self.apply_symbol(|i, xi| {
            if order == 1 {
                if i == nyq {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(0.0, xi)
                }
            } else {
                C64::new(-xi * xi, 0.0)
            }
        })
    }

    /// `e^{it∂_x²}`: multiplier `e^{-itξ²}`. Advances the time tag by `t`.
    pub fn free_propagate(&self, t: f64) -> Field {
        let mut out = self.apply_symbol(|_, xi| C64::from_polar(1.0, -t * xi * xi));
        out.t = self.t + t;
        out
    }

    pub fn l2_distance(&self, other: &Field) -> f64 {
        (self - other).lebesgue_norm(2.0)
    }
}

impl Spectrum {
    pub fn new(grid: &Arc<Grid>, coeffs: Vec<C64>, t: f64) -> Result<Spectrum> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "spectrum has {} coefficients on a grid of {} points",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Spectrum {
            grid: Arc::clone(grid),
            coeffs,
            t,
        })
    }

    pub fn zeros(grid: &Arc<Grid>, t: f64) -> Spectrum {
        Spectrum {
            grid: Arc::clone(grid),
            coeffs: vec![C64::new(0.0, 0.0); grid.len()],
            t,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Coefficient at integer mode `m`, zero off the lattice.
    pub fn at_mode(&self, mode: i64) -> C64 {
        self.grid
            .index_of_mode(mode)
            .map_or(C64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Spectrum of the pointwise conjugate, `conj(f̂(-ξ))`. At the Nyquist
    /// index `-ξ` aliases back onto the lattice and picks up the factor
    /// `e^{2πi x_min/dx}` of the continuum normalization.
    pub fn conjugate_field(&self) -> Spectrum {
        let grid = &self.grid;
        let m = grid.len();
        let nyq = grid.nyquist_index();
        let alias = C64::from_polar(1.0, 2.0 * PI * grid.x_min() / grid.dx());
        let coeffs = (0..m)
            .map(|i| {
                let j = (m - i) % m;
                let c = self.coeffs[j].conj();
                if i == nyq {
                    c * alias
                } else {
                    c
                }
            })
            .collect();
        Spectrum {
            grid: Arc::clone(grid),
            coeffs,
            t: self.t,
        }
    }

    pub fn inverse_transform(&self) -> Field {
        let grid = &self.grid;
        let inv_l = 1.0 / grid.length();
        let mut buf: Vec<C64> = self
            .coeffs
            .iter()
            .zip(&grid.shift)
            .map(|(c, s)| c * s.conj() * inv_l)
            .collect();
        grid.ifft(&mut buf);
        Field {
            grid: Arc::clone(grid),
            values: buf,
            t: self.t,
        }
    }

    /// `(1/L) Σ |f̂|²`, the spectral side of Parseval.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.grid.length()
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<C64> for &Field {
    type Output = Field;
    fn mul(self, rhs: C64) -> Field {
        self.map(|a| a * rhs)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.map(|a| a * rhs)
    }
}
