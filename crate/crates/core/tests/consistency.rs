//! Cross-route consistency: independent computational paths that must land
//! on the same numbers.

use latspace::dynamics::{
    evolve, fluct_rhs, total_number, BhParams, EvolutionState, IntegratorConfig, Method,
};
use latspace::hydro::{fluct_density_rhs, fluct_phase_rhs, fluct_to_hydro, to_density_phase};
use latspace::lattice::{Boundary, ComplexField, LatticeGrid, RealField};
use latspace::scalar::C;

fn grid_1d(extent: usize) -> LatticeGrid<f64> {
    LatticeGrid::new(1, &[extent], 1.0, Boundary::Periodic).unwrap()
}

/// After evolving a seeded fluctuation with the complex linearized equation,
/// its time derivative agrees with the density-phase equations applied to
/// the converted state. The two routes share no stencil code, so this pins
/// the conversion and both sets of coefficients at once.
#[test]
fn complex_and_density_phase_routes_agree_after_evolution() {
    let grid = grid_1d(64);
    let (j, u, n0) = (1.0_f64, 0.1, 100.0_f64);
    let p = BhParams::constant(j, u, u * n0 - 2.0 * j - 0.5 * u, 1.0).unwrap();

    let mean = ComplexField::constant(grid.clone(), C::new(n0.sqrt(), 0.0));
    let seed = ComplexField::plane_wave(grid.clone(), [3, 0, 0], C::new(1e-6, 0.0));
    let mut state = EvolutionState::new(mean, Some(seed)).unwrap();
    let cfg = IntegratorConfig::rk4(1e-3, 200);
    evolve(&mut state, &p, &cfg, |_, _| Ok(())).unwrap();

    let fluct = state.fluct.as_ref().unwrap();
    let n_field = RealField::from_fn(grid.clone(), |s| state.mean.values()[s].norm_sqr());

    // Route 1: complex equation of motion, converted afterwards. The mean
    // stays homogeneous and stationary, so dn/dt = 2 n Re(db/dt) and
    // dphi/dt = Im(db/dt).
    let rhs = fluct_rhs(&state.mean, fluct, &p, state.t).unwrap();
    let dn_dot_complex: Vec<f64> = (0..grid.site_count())
        .map(|s| 2.0 * n_field.values()[s] * rhs.values()[s].re)
        .collect();
    let dphi_dot_complex: Vec<f64> = (0..grid.site_count()).map(|s| rhs.values()[s].im).collect();

    // Route 2: convert first, then apply the density-phase equations.
    let f = fluct_to_hydro(fluct, &n_field).unwrap();
    let h = to_density_phase(&state.mean, &p).unwrap();
    let dn_dot_hydro = fluct_density_rhs(&f, &h, &p).unwrap();
    let dphi_dot_hydro = fluct_phase_rhs(&f, &h, &p).unwrap();

    let dn_scale = dn_dot_complex.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let dphi_scale = dphi_dot_complex.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    assert!(dn_scale > 0.0 && dphi_scale > 0.0, "evolved fluctuation is trivial");
    for s in 0..grid.site_count() {
        let dn_diff = (dn_dot_complex[s] - dn_dot_hydro.values()[s]).abs();
        let dphi_diff = (dphi_dot_complex[s] - dphi_dot_hydro.values()[s]).abs();
        assert!(dn_diff <= 1e-10 * dn_scale, "site {s}: dn routes differ by {dn_diff:e}");
        assert!(
            dphi_diff <= 1e-10 * dphi_scale,
            "site {s}: dphi routes differ by {dphi_diff:e}"
        );
    }
}

/// The split-step integrator converges to the RK4 reference at second order
/// and conserves particle number to roundoff.
#[test]
fn split_step_converges_to_rk4_at_second_order() {
    let grid = grid_1d(64);
    let p = BhParams::constant(1.0, 0.1, 0.0, 1.0).unwrap();
    let mean = ComplexField::from_fn(grid.clone(), |s| {
        let x = s as f64 - 32.0;
        let n = 100.0 + 5.0 * (-x * x / 18.0).exp();
        C::new(n.sqrt(), 0.0)
    });
    let n0 = total_number(&mean);
    let t_final = 0.4;

    let mut reference = EvolutionState::new(mean.clone(), None).unwrap();
    let cfg = IntegratorConfig::rk4(2.5e-4, 1600);
    evolve(&mut reference, &p, &cfg, |_, _| Ok(())).unwrap();

    let split_error = |dt: f64| -> f64 {
        let steps = (t_final / dt).round() as usize;
        let mut state = EvolutionState::new(mean.clone(), None).unwrap();
        let cfg = IntegratorConfig {
            method: Method::SemiImplicitSplit,
            dt,
            steps,
            validity_warnings: false,
        };
        evolve(&mut state, &p, &cfg, |_, _| Ok(())).unwrap();

        let drift = (total_number(&state.mean) - n0).abs() / n0;
        assert!(drift < 1e-12, "split step must conserve number, drift = {drift:e}");

        (0..grid.site_count())
            .map(|s| (state.mean.values()[s] - reference.mean.values()[s]).norm())
            .fold(0.0_f64, f64::max)
    };

    let coarse = split_error(2e-3);
    let fine = split_error(1e-3);
    let ratio = coarse / fine;
    assert!(
        (3.2..4.8).contains(&ratio),
        "expected second-order step-halving ratio near 4, got {ratio} \
         (coarse {coarse:e}, fine {fine:e})"
    );
    assert!(fine < 1e-4, "fine split solution strays from the reference: {fine:e}");
}
