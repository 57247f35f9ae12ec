//! The nine named experiments. Each one returns its time series, Cauchy
//! history and pass/fail assertions; nothing here touches the filesystem.

use std::sync::Arc;

use anyhow::{Context, Result};
use gdnls_core::dynamics::{critical_exponent, evolve, mass, scaling_transform, Equation, SolverConfig};
use gdnls_core::gauge::{gauge_forward, gauge_inverse, GaugeParams};
use gdnls_core::normal_form::{
    duhamel_residual_for, f3_decomposition_check, multiplier_mN, normalform_residual, omega_diag, phase,
    NormalFormConfig,
};
use gdnls_core::spacetime_norms::{traj_distance, ynorm};
use gdnls_core::spectral_grid::{lp_project, make_grid, Dyadic, Field, Grid, LpKind, C64};
use gdnls_core::wave_operator::{
    ball_membership, choose_parameters, free_trajectory, picard_apply, solve_final_data, FinalDataProblem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::artifacts::{Artifacts, Assertion, CauchyRow};
use crate::config::{Experiment, ExperimentConfig, Profile};

pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::default();
    match cfg.experiment {
        Experiment::GaugeCheck => gauge_check(cfg, &mut art),
        Experiment::Conserve => conserve(cfg, &mut art),
        Experiment::LpCheck => lp_check(cfg, &mut art),
        Experiment::NormalformCheck => normalform_check(cfg, &mut art),
        Experiment::LemmaScaling => lemma_scaling(cfg, &mut art),
        Experiment::DuhamelCheck => duhamel_check(cfg, &mut art),
        Experiment::DispersiveDecay => dispersive_decay(cfg, &mut art),
        Experiment::Waveop => waveop(cfg, &mut art),
        Experiment::ScalingCheck => scaling_check(cfg, &mut art),
    }
    .with_context(|| format!("experiment {} failed", cfg.experiment))?;
    Ok(art)
}

fn grid(cfg: &ExperimentConfig) -> Result<Arc<Grid>> {
    let (a, b) = cfg.grid.bounds();
    Ok(make_grid(a, b, cfg.grid.m)?)
}

fn profile(cfg: &ExperimentConfig, g: &Arc<Grid>) -> Field {
    let p = &cfg.physics;
    let kappa = match p.profile {
        Profile::Gaussian => 0.0,
        Profile::ModulatedGaussian => p.wavenumber,
    };
    Field::from_fn(g, 0.0, |x| C64::from_polar(p.amplitude * (-(x / p.width).powi(2)).exp(), kappa * x))
}

/// Random coefficients on modes `|m| ≤ band` with envelope `amp·⟨m⟩^{-decay}`.
fn random_band_limited(g: &Arc<Grid>, band: i64, amp: f64, decay: f64, rng: &mut ChaCha8Rng) -> Field {
    let mut f = Field::zeros(g, 0.0);
    for mo in -band..=band {
        let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            * (amp * (1.0 + (mo as f64).powi(2)).powf(-0.5 * decay));
        f = &f + &Field::plane_wave(g, mo, c);
    }
    f
}

fn nf_config(cfg: &ExperimentConfig) -> Result<NormalFormConfig> {
    let s = &cfg.normal_form;
    let mut nf = NormalFormConfig::new(cfg.physics.k, s.n0)?.with_grid_cap(s.grid_cap);
    if let Some(m) = s.m_star {
        nf = nf.with_m_star(m)?;
    }
    Ok(nf)
}

fn solver(cfg: &ExperimentConfig, dt: f64, store_every: usize, eq: Equation) -> SolverConfig {
    SolverConfig::new(cfg.physics.k, dt, store_every, eq)
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

fn gauge_check(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let g = grid(cfg)?;
    let u0 = profile(cfg, &g);
    let params = GaugeParams::removing_derivative(cfg.physics.k as f64);
    let traj = evolve(
        &u0,
        0.0,
        cfg.t_end(),
        &solver(cfg, cfg.solver.dt, cfg.solver.store_every, Equation::Original),
    )?;
    let (mut worst_rt, mut worst_mod) = (0.0f64, 0.0f64);
    for u in traj.snapshots() {
        let w = gauge_forward(u, params);
        let rt = (&gauge_inverse(&w, params) - u).sobolev_norm(1.0) / u.sobolev_norm(1.0).max(f64::MIN_POSITIVE);
        let md = w
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| (a.norm() - b.norm()).abs())
            .fold(0.0, f64::max);
        art.series(u.t(), "roundtrip_h1_rel", rt);
        art.series(u.t(), "modulus_gap", md);
        worst_rt = worst_rt.max(rt);
        worst_mod = worst_mod.max(md);
    }
    art.check(Assertion::at_most("roundtrip_h1_rel", worst_rt, 1e-10));
    art.check(Assertion::at_most("modulus_gap", worst_mod, 1e-14));
    Ok(())
}

fn conserve(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let g = grid(cfg)?;
    let u0 = profile(cfg, &g);
    let m0 = mass(&u0);
    for (eq, name) in [(Equation::Original, "original"), (Equation::Gauged, "gauged")] {
        let traj = evolve(&u0, 0.0, cfg.t_end(), &solver(cfg, cfg.solver.dt, cfg.solver.store_every, eq))?;
        let mut worst = 0.0f64;
        for s in traj.snapshots() {
            let drift = (mass(s) - m0).abs() / m0.max(f64::MIN_POSITIVE);
            art.series(s.t(), format!("mass_drift_{name}"), drift);
            worst = worst.max(drift);
        }
        art.check(Assertion::at_most(format!("mass_drift_{name}"), worst, 1e-8));
    }
    let (mut unitary, mut group) = (0.0f64, 0.0f64);
    for (s, t) in [(0.3, 1.7), (2.0, -0.5), (5.0, 5.0)] {
        let a = u0.free_propagate(s);
        unitary = unitary
            .max((a.sobolev_norm(0.0) - u0.sobolev_norm(0.0)).abs())
            .max((a.sobolev_norm(1.0) - u0.sobolev_norm(1.0)).abs());
        group = group.max((&a.free_propagate(t) - &u0.free_propagate(s + t)).sobolev_norm(1.0));
    }
    art.check(Assertion::at_most("free_norm_change", unitary, 1e-12));
    art.check(Assertion::at_most("free_group_law", group, 1e-12));
    Ok(())
}

fn lp_check(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let g = grid(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut worst_sum, mut worst_disjoint) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let v = (0..g.len())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = Field::new(&g, v, 0.0)?;
        let mut sum = Field::zeros(&g, 0.0);
        let dyadics = g.dyadics();
        for &n in &dyadics {
            let b = lp_project(&f, n.value(), LpKind::At)?;
            sum = &sum + &b;
            for &m in &dyadics {
                if m.exponent().abs_diff(n.exponent()) >= 2 {
                    let pp = lp_project(&b, m.value(), LpKind::At)?;
                    worst_disjoint = worst_disjoint.max(pp.lebesgue_norm(f64::INFINITY));
                }
            }
        }
        worst_sum = worst_sum.max((&sum - &f).lebesgue_norm(f64::INFINITY));
    }
    art.check(Assertion::at_most("partition_of_unity", worst_sum, 1e-12));
    art.check(Assertion::at_most("projector_disjointness", worst_disjoint, 1e-12));

    let band = (g.len() / 4) as i64 - 1;
    let mut worst_f3 = 0.0f64;
    for n0 in [1.0, 4.0, g.xi_max()] {
        let nf = nf_config(cfg)?.with_n0(Dyadic::new(n0)?);
        let mut worst = 0.0f64;
        for _ in 0..3 {
            let w = random_band_limited(&g, band, cfg.physics.amplitude, 1.0, &mut rng);
            worst = worst.max(f3_decomposition_check(&w, &nf)?);
        }
        art.series(0.0, format!("f3_residual_N0_{}", nf.n0.value()), worst);
        worst_f3 = worst_f3.max(worst);
    }
    art.check(Assertion::at_most("f3_decomposition", worst_f3, 1e-10));
    Ok(())
}

fn lemma_scaling(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let g = grid(cfg)?;
    let nf = nf_config(cfg)?;
    nf.check_grid(&g)?;
    let k = cfg.physics.k;
    let slots = nf.slots();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut lower, mut upper, mut mult) = (0usize, 0usize, 0usize);
    for e in [3u32, 4, 5] {
        let n = Dyadic::from_exponent(e);
        let nv = n.value();
        let low = 2.0 * nv / 2f64.powi(nf.m_star as i32);
        let (mut lo, mut up, mut mu) = (0usize, 0usize, 0usize);
        let mut max_ratio = 0.0f64;
        let mut eta = vec![0.0; slots];
        for _ in 0..1_000_000 {
            for v in eta.iter_mut().take(slots - 1) {
                *v = rng.gen_range(-low..low);
            }
            let mag = rng.gen_range(0.5 * nv..2.0 * nv);
            eta[slots - 1] = if rng.gen_bool(0.5) { mag } else { -mag };
            let p = phase(&eta, k).abs();
            max_ratio = max_ratio.max(p / (nv * nv));
            lo += usize::from(p < nv * nv / 8.0);
            up += usize::from(p > 8.0 * nv * nv);
            mu += usize::from(multiplier_mN(&eta, n, &nf)?.abs() > 16.0 / nv);
        }
        art.series(nv, "phase_lower_violations", lo as f64);
        art.series(nv, "phase_upper_violations", up as f64);
        art.series(nv, "phase_max_ratio", max_ratio);
        art.series(nv, "multiplier_violations", mu as f64);
        lower += lo;
        upper += up;
        mult += mu;
    }
    art.check(Assertion::at_most("phase_lower_violations", lower as f64, 0.0));
    art.check(Assertion::at_most("phase_upper_violations", upper as f64, 0.0));
    art.check(Assertion::at_most("multiplier_violations", mult as f64, 0.0));

    let f = random_band_limited(&g, (g.len() / 4) as i64, cfg.physics.amplitude, 1.5, &mut rng);
    let n0s = [2.0, 4.0, 8.0];
    let mut norms = Vec::new();
    for &n0 in &n0s {
        let h1 = omega_diag(&f, &nf.with_n0(Dyadic::new(n0)?))?.sobolev_norm(1.0);
        art.series(n0, "omega_diag_h1", h1);
        norms.push(h1);
    }
    art.check(Assertion::at_most("omega_diag_slope", loglog_slope(&n0s, &norms), -0.35));
    Ok(())
}

fn normalform_check(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let g = grid(cfg)?;
    let nf = nf_config(cfg)?;
    nf.check_grid(&g)?;
    let k = cfg.physics.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w0 = random_band_limited(&g, (g.len() / 4) as i64 - 1, cfg.physics.amplitude, 1.0, &mut rng);
    let t_end = cfg.t_end();
    let traj = evolve(&w0, 0.0, t_end, &solver(cfg, cfg.solver.dt, cfg.solver.store_every, Equation::Gauged))?;
    let d = duhamel_residual_for(&traj, 0.0, t_end, Equation::Gauged, k)?;
    let r = normalform_residual(&traj, 0.0, t_end, &nf)?;
    art.series(t_end, "duhamel_residual", d);
    art.series(t_end, "normalform_residual", r);
    art.check(Assertion::at_most("duhamel_residual", d, 1e-6));
    art.check(Assertion::at_most("normalform_over_duhamel", r / d, 5.0));

    // Picard map on [1, 1.5] with the same data as final state.
    let (t_start, t_n) = (1.0, 1.5);
    let free = free_trajectory(&w0, t_start, t_n, 0.01)?;
    let p1 = picard_apply(&free, t_n, &w0, &nf)?;
    let p2 = picard_apply(&p1, t_n, &w0, &nf)?;
    let d1 = traj_distance(&p1, &free)?.x_norm;
    let d2 = traj_distance(&p2, &p1)?.x_norm;
    art.series(t_n, "picard_step_1", d1);
    art.series(t_n, "picard_step_2", d2);
    art.check(Assertion::at_most("picard_contraction_ratio", d2 / d1, 0.5));
    Ok(())
}

fn duhamel_check(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let g = grid(cfg)?;
    let k = cfg.physics.k;
    let u0 = profile(cfg, &g);
    let params = GaugeParams::removing_derivative(k as f64);
    let w0 = gauge_forward(&u0, params);
    let t_end = cfg.t_end();
    let (dt, every) = (cfg.solver.dt, cfg.solver.store_every);
    let defects = |dt: f64, every: usize| -> Result<Vec<(f64, f64)>> {
        let u = evolve(&u0, 0.0, t_end, &solver(cfg, dt, every, Equation::Original))?;
        let w = evolve(&w0, 0.0, t_end, &solver(cfg, dt, every, Equation::Gauged))?;
        Ok(u
            .snapshots()
            .iter()
            .zip(w.snapshots())
            .map(|(a, b)| (a.t(), (&gauge_forward(a, params) - b).sobolev_norm(1.0)))
            .collect())
    };
    let coarse = defects(dt, every)?;
    let fine = defects(0.5 * dt, 2 * every)?;
    for ((t, a), (_, b)) in coarse.iter().zip(&fine) {
        art.series(*t, "conjugacy_h1", *a);
        art.series(*t, "conjugacy_h1_half_dt", *b);
    }
    let worst = coarse.iter().map(|p| p.1).fold(0.0, f64::max);
    let last = coarse.last().expect("nonempty").1 / fine.last().expect("nonempty").1;
    art.check(Assertion::at_most("conjugacy_h1", worst, 1e-4));
    art.check(Assertion::at_least("conjugacy_dt_halving_factor", last, 8.0));

    for (eq, start, name) in [
        (Equation::Original, &u0, "duhamel_residual_original"),
        (Equation::Gauged, &w0, "duhamel_residual_gauged"),
    ] {
        let traj = evolve(start, 0.0, t_end, &solver(cfg, dt, every, eq))?;
        let r = duhamel_residual_for(&traj, 0.0, t_end, eq, k)?;
        art.series(t_end, name, r);
        art.check(Assertion::at_most(name, r, 1e-6));
    }
    Ok(())
}

fn dispersive_decay(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let g = grid(cfg)?;
    let v = profile(cfg, &g);
    let ts = [4.0, 8.0, 16.0];
    let mut ys = Vec::new();
    for &t in &ts {
        let y = ynorm(&free_trajectory(&v, t, 2.0 * t, cfg.solver.dt)?)?;
        art.series(t, "y_norm_T_2T", y);
        ys.push(y);
    }
    let decreasing = ys.windows(2).all(|w| w[1] < w[0]);
    art.check(Assertion::holds("y_norm_decreasing", decreasing));
    art.check(Assertion::at_most(
        "y_slope_deviation_from_minus_one_sixth",
        (loglog_slope(&ts, &ys) + 1.0 / 6.0).abs(),
        0.1,
    ));
    Ok(())
}

fn waveop(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let g = grid(cfg)?;
    let k = cfg.physics.k;
    let v = profile(cfg, &g);
    let w = &cfg.waveop;
    let choice = choose_parameters(&v, k, w.delta_target)?;
    log::info!("T = {}, R = {:e}, delta = {:e}", choice.t_start, choice.r_measured, choice.delta_measured);
    let mut problem = FinalDataProblem::arithmetic(
        v,
        k,
        choice.t_start,
        w.schedule_step,
        w.n_max,
        solver(cfg, cfg.solver.dt, cfg.solver.store_every, Equation::Gauged),
    );
    problem.tol_cauchy = w.tol_cauchy;
    problem.min_iterates = w.min_iterates;
    problem.n0 = Dyadic::new(cfg.normal_form.n0)?;
    let res = solve_final_data(&problem)?;

    art.series(0.0, "T", choice.t_start);
    art.series(0.0, "R", res.r_measured);
    art.series(0.0, "delta", res.delta_measured);
    for (t_n, rep) in problem.t_schedule.iter().zip(&res.iterate_reports) {
        art.series(*t_n, "iterate_x_norm", rep.x_norm);
        art.series(*t_n, "iterate_y_norm", rep.y_norm);
    }
    for (t, e) in &res.asymptotic_errors {
        art.series(*t, "asymptotic_error", *e);
    }
    for (t, tc) in &res.transfer {
        art.series(*t, "transfer_constant", tc.constant());
    }
    art.cauchy = res
        .cauchy_history
        .iter()
        .map(|c| CauchyRow {
            n: c.n,
            t_n: c.t_n,
            x_distance: c.distance.x_norm,
            y_distance: c.distance.y_norm,
        })
        .collect();

    let dists: Vec<f64> = res.cauchy_history.iter().map(|c| c.distance.x_cap_y()).collect();
    art.check(Assertion::holds("cauchy_strictly_decreasing", dists.windows(2).all(|p| p[1] < p[0])));
    art.check(Assertion::at_most(
        "final_cauchy_distance",
        dists.last().copied().unwrap_or(f64::INFINITY),
        w.tol_cauchy,
    ));
    let errs: Vec<f64> = res.asymptotic_errors.iter().map(|e| e.1).collect();
    art.check(Assertion::holds(
        "asymptotic_error_nonincreasing",
        errs.windows(2).all(|p| p[1] <= 1.1 * p[0]),
    ));
    let in_ball = res
        .iterate_reports
        .iter()
        .all(|r| ball_membership(r, res.r_measured, res.delta_measured) == (true, true));
    art.check(Assertion::holds("ball_membership", in_ball));
    let c_max = res.transfer.iter().map(|(_, t)| t.constant()).fold(0.0, f64::max);
    art.check(Assertion::at_most("transfer_constant", c_max, 4.0));
    Ok(())
}

fn scaling_check(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let lambda = 2.0;
    let sigma = cfg.physics.k as f64;
    let g = grid(cfg)?;
    let u0 = profile(cfg, &g);
    let ul0 = scaling_transform(&u0, lambda, sigma)?;
    let sc = critical_exponent(sigma);
    let gap = (u0.homogeneous_sobolev_norm(sc) - ul0.homogeneous_sobolev_norm(sc)).abs();
    art.series(0.0, "critical_norm_gap", gap);
    art.check(Assertion::at_most("critical_norm_gap", gap, 1e-10));

    let t = cfg.t_end();
    let cfg_solver = solver(cfg, cfg.solver.dt, usize::MAX, Equation::Original);
    let u = evolve(&u0, 0.0, lambda * lambda * t, &cfg_solver)?;
    let ul = evolve(&ul0, 0.0, t, &cfg_solver)?;
    let mapped = scaling_transform(u.last(), lambda, sigma)?;
    let h1 = (&mapped - ul.last()).sobolev_norm(1.0);
    art.series(t, "covariance_h1_gap", h1);
    art.check(Assertion::at_most("covariance_h1_gap", h1, 1e-5));
    Ok(())
}
