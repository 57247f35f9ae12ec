//! Littlewood-Paley projectors as Fourier multipliers.

use super::bump::{phi_at, phi_leq, Dyadic};
use super::{Field, C64};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpKind {
    /// `P_N` (with `P_1 = P_{≤1}`).
    At,
    /// `P_{≤N}`.
    Leq,
    /// `P_{≪N} = P_{≤N/2^{m*}}`.
    MuchLess { m_star: u32 },
    /// `P_{≥N} = 1 - P_{≤N/2}`.
    Geq,
    /// `P_{∼N} = P_{≤4N} - P_{≤N/8}`.
    Sim,
}

/// The radial symbol of the projector evaluated at `r = |ξ|`.
pub fn lp_symbol(r: f64, n: Dyadic, kind: LpKind) -> f64 {
    let s = n.value();
    match kind {
        LpKind::At => phi_at(r, n),
        LpKind::Leq => phi_leq(r, s),
        LpKind::MuchLess { m_star } => phi_leq(r, s / (2f64).powi(m_star as i32)),
        LpKind::Geq => 1.0 - phi_leq(r, 0.5 * s),
        LpKind::Sim => phi_leq(r, 4.0 * s) - phi_leq(r, s / 8.0),
    }
}

/// Applies the projector of the given kind at dyadic scale `n`.
pub fn lp_project(f: &Field, n: f64, kind: LpKind) -> Result<Field> {
    let n = Dyadic::new(n)?;
    Ok(f.apply_symbol(|_, xi| C64::new(lp_symbol(xi.abs(), n, kind), 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::spectral_grid::{make_grid, phi};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(m: usize, seed: u64) -> Field {
        let g = make_grid(-PI, PI, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..m)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Field::new(&g, v, 0.0).unwrap()
    }

    #[test]
    fn plane_wave_block_amplitude() {
        let g = make_grid(-PI, PI, 64).unwrap();
        let pw = Field::plane_wave(&g, 3, C64::new(1.0, 0.0));
        let p = lp_project(&pw, 2.0, LpKind::At).unwrap();
        let want = phi(1.5) - phi(3.0);
        assert_eq!(phi(3.0), 0.0);
        for (a, b) in p.values().iter().zip(pw.values()) {
            assert!((a - b * want).norm() < 1e-13);
        }
        let low = Field::plane_wave(&g, 1, C64::new(1.0, 0.0));
        let geq = lp_project(&low, 8.0, LpKind::Geq).unwrap();
        assert!(geq.lebesgue_norm(f64::INFINITY) < 1e-14);
    }

    #[test]
    fn rejects_non_dyadic() {
        let f = random_field(16, 0);
        assert!(matches!(lp_project(&f, 3.0, LpKind::At), Err(Error::NonDyadic(_))));
    }

    #[test]
    fn blocks_sum_to_identity() {
        for (m, seed) in [(16, 1), (64, 2), (512, 3)] {
            let f = random_field(m, seed);
            let mut acc = Field::zeros(f.grid(), 0.0);
            for n in f.grid().dyadics() {
                acc = &acc + &lp_project(&f, n.value(), LpKind::At).unwrap();
            }
            let err = (&acc - &f).lebesgue_norm(f64::INFINITY);
            assert!(err < 1e-12, "M = {m}: {err:e}");
        }
    }

    #[test]
    fn separated_blocks_are_orthogonal() {
        let f = random_field(512, 5);
        let dy = f.grid().dyadics();
        for &a in &dy {
            for &b in &dy {
                if a.value() >= 4.0 * b.value() || b.value() >= 4.0 * a.value() {
                    let pa = lp_project(&f, a.value(), LpKind::At).unwrap();
                    let pab = lp_project(&pa, b.value(), LpKind::At).unwrap();
                    assert!(pab.lebesgue_norm(2.0) < 1e-14, "{a} {b}");
                }
            }
        }
    }

    #[test]
    fn kinds_are_consistent() {
        let n = Dyadic::new(8.0).unwrap();
        for i in 0..400 {
            let r = i as f64 * 0.1;
            let leq = lp_symbol(r, n, LpKind::Leq);
            let geq = lp_symbol(r, n, LpKind::Geq);
            let half = lp_symbol(r, Dyadic::new(4.0).unwrap(), LpKind::Leq);
            assert!((geq - (1.0 - half)).abs() < 1e-15);
            assert!((lp_symbol(r, n, LpKind::At) - (leq - half)).abs() < 1e-15);
            let ll = lp_symbol(r, n, LpKind::MuchLess { m_star: 6 });
            assert_eq!(ll, phi(r * 8.0));
            // P_N lives inside the P_{∼N} window where that window is 1.
            if lp_symbol(r, n, LpKind::At) > 0.0 {
                assert_eq!(lp_symbol(r, n, LpKind::Sim), 1.0);
            }
        }
    }
}
