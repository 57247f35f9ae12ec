//! The smooth cutoff behind every Littlewood-Paley projector.

use crate::error::{Error, Result};

/// `e^{-1/s}` for `s > 0`, zero otherwise.
pub fn psi(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth nonincreasing cutoff: 1 on `[0, 1]`, 0 on `[2, ∞)`.
pub fn phi(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let a = psi(2.0 - r);
        a / (a + psi(r - 1.0))
    }
}

/// `φ_{≤N}(r) = φ(r/N)` for any positive scale `N` (dyadic or not, since
/// `φ_{≪N}` uses `N/2^{m*}`).
pub fn phi_leq(r: f64, scale: f64) -> f64 {
    phi(r / scale)
}

/// `φ_N = φ_{≤N} - φ_{≤N/2}` for `N ≥ 2`; the lowest block is `φ_1 := φ_{≤1}`.
pub fn phi_at(r: f64, n: Dyadic) -> f64 {
    if n.exponent() == 0 {
        phi_leq(r, 1.0)
    } else {
        let s = n.value();
        phi_leq(r, s) - phi_leq(r, 0.5 * s)
    }
}

/// A dyadic number `2^e`, `e ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dyadic(u32);

impl Dyadic {
    pub const ONE: Dyadic = Dyadic(0);

    pub fn from_exponent(e: u32) -> Dyadic {
        Dyadic(e)
    }

    pub fn new(n: f64) -> Result<Dyadic> {
        if !(n >= 1.0) || !n.is_finite() {
            return Err(Error::NonDyadic(n));
        }
        let e = n.log2().round();
        if (2f64).powi(e as i32) != n {
            return Err(Error::NonDyadic(n));
        }
        Ok(Dyadic(e as u32))
    }

    pub fn exponent(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        (2f64).powi(self.0 as i32)
    }

    pub fn double(self) -> Dyadic {
        Dyadic(self.0 + 1)
    }

    /// Inclusive range `lo, 2lo, …, hi`; empty if `lo > hi`.
    pub fn range(lo: Dyadic, hi: Dyadic) -> Vec<Dyadic> {
        (lo.0..=hi.0).map(Dyadic).collect()
    }
}

impl std::fmt::Display for Dyadic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value())
    }
}
