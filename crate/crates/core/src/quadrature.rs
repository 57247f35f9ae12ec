//! Time quadrature on uniformly spaced snapshot lattices.

use crate::error::{Error, Result};
use crate::spectral_grid::{Field, Spectrum, C64};

/// Signed step of a uniform node set, checked to relative accuracy 1e-9.
pub(crate) fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Ok(0.0);
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    for (j, t) in times.iter().enumerate() {
        if (t - (times[0] + j as f64 * h)).abs() > 1e-9 * h.abs().max(1e-300) * times.len() as f64 {
            return Err(Error::InvalidParameter(
                "quadrature nodes must be uniformly spaced".into(),
            ));
        }
    }
    Ok(h)
}

/// Composite Simpson weights; the node count must be odd and at least 3.
pub(crate) fn simpson_weights(n: usize, h: f64) -> Result<Vec<f64>> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::InsufficientSnapshots {
            needed: "an odd count of at least 3".into(),
            got: n,
        });
    }
    Ok((0..n)
        .map(|j| {
            let c = if j == 0 || j == n - 1 {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect())
}

/// Weights for any node count: trapezoid for one panel, Simpson for an even
/// panel count, Simpson followed by a closing 3/8 panel triple otherwise.
pub(crate) fn flexible_weights(n: usize, h: f64) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::InsufficientSnapshots {
            needed: "at least 1".into(),
            got: 0,
        }),
        1 => Ok(vec![0.0]),
        2 => Ok(vec![0.5 * h, 0.5 * h]),
        n if n % 2 == 1 => simpson_weights(n, h),
        n => {
            let mut w = if n > 4 { simpson_weights(n - 3, h)? } else { vec![0.0] };
            w.resize(n, 0.0);
            let s = n - 4;
            for (j, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                w[s + j] += 3.0 * h / 8.0 * c;
            }
            Ok(w)
        }
    }
}

/// `Σ_j w_j e^{i(t−s_j)∂_x²} G_j` accumulated on the spectral side.
pub(crate) fn propagated_sum(sources: &[(f64, &Spectrum)], weights: &[f64], t: f64) -> Field {
    let first = sources[0].1;
    let grid = first.grid();
    let xi = grid.wavenumbers();
    let mut acc = vec![C64::new(0.0, 0.0); grid.len()];
    for ((s, g), w) in sources.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let tau = t - s;
        for ((a, c), x) in acc.iter_mut().zip(g.coeffs()).zip(&xi) {
            *a += c * C64::from_polar(*w, -tau * x * x);
        }
    }
    Spectrum::new(grid, acc, t)
        .expect("length matches grid")
        .inverse_transform()
}
