//! Density-phase representation and hydrodynamic equations of motion.
//!
//! The complex mean field factors as `b = sqrt(n) e^{i phi}`. This module
//! extracts `(n, phi)` plus the derived local quantities (velocity, sound
//! speed, healing length), provides the background and fluctuation
//! right-hand sides in hydrodynamic variables, and the Mott-regime density
//! wave residual.
//!
//! Phase handling: the stored `phi` is unwrapped site-to-site from the corner
//! along a spanning tree, and every gradient-like quantity built from phase
//! uses principal-value bond steps (each step folded into `(-pi, pi]`). That
//! keeps the velocity field correct across the periodic seam of a winding
//! state, where naive differences of the unwrapped field would jump by the
//! total winding. Bond steps larger than [`PHASE_STEP_GUARD`] rad mean the
//! lattice cannot resolve the winding and raise [`Error::PhaseWinding`].
//!
//! Discretization split: variable-coefficient second-order terms in the
//! fluctuation equations use the conservative bond-flux form (coefficient
//! averaged to half steps), which collapses to the three-point Laplacian on
//! constant coefficients; exactly the reduction the complex-field path takes,
//! so the two paths agree to rounding on homogeneous backgrounds. The Mott
//! wave operator instead composes the two wide centered first differences, as
//! that equation is stated through them.

use crate::error::{Error, Result};
use crate::lattice::{
    self, ComplexField, LatticeGrid, RealField, VectorField, div_coeff_grad, gradient, laplacian,
};
use crate::scalar::{C, Real};

/// Largest tolerated phase step between neighbours, radians.
pub const PHASE_STEP_GUARD: f64 = 3.0;

/// `|b|` below this is vacuum; density-phase variables are undefined there.
pub const DENSITY_FLOOR: f64 = 1e-24;

/// Fold a phase difference into `(-pi, pi]`.
fn principal<T: Real>(x: T) -> T {
    let tau = T::of(std::f64::consts::TAU);
    x - tau * (x / tau).round()
}

/// Background in density-phase variables with the derived local fields.
#[derive(Debug, Clone)]
pub struct HydroState<T: Real> {
    /// Density `n = |b|^2`, positive everywhere.
    pub n: RealField<T>,
    /// Unwrapped phase, radians.
    pub phi: RealField<T>,
    /// Velocity `v = 2 J a^2 grad(phi)` via principal-value bond steps.
    pub v: VectorField<T>,
    /// Local excitation speed `c = a sqrt(2 J n U)`.
    pub c: RealField<T>,
    /// Healing length, computed as `2 J a^2 / c` so `c * xi = 2 J a^2` holds
    /// to rounding at every site (equivalent to `a sqrt(2J/(nU))`).
    pub xi: RealField<T>,
}

impl<T: Real> HydroState<T> {
    pub fn grid(&self) -> &LatticeGrid<T> {
        self.n.grid()
    }

    /// Assemble the derived fields from given density and (unwrapped) phase
    /// profiles. Lets tests and scenarios construct flows directly.
    pub fn from_density_phase(
        n: RealField<T>,
        phi: RealField<T>,
        p: &crate::dynamics::BhParams<T>,
    ) -> Result<Self> {
        if n.grid() != phi.grid() {
            return Err(Error::grid("density and phase on different grids"));
        }
        p.check_spacing(n.grid())?;
        let floor = T::of(DENSITY_FLOOR);
        if let Some(site) = n.values().iter().position(|&x| !(x > floor)) {
            return Err(Error::VacuumSite {
                site,
                amplitude: n.values()[site].max(T::zero()).sqrt().as_f64(),
            });
        }
        let v = phase_velocity(&phi, p)?;
        let (c, xi) = local_speeds(&n, p);
        Ok(Self { n, phi, v, c, xi })
    }
}

fn local_speeds<T: Real>(n: &RealField<T>, p: &crate::dynamics::BhParams<T>) -> (RealField<T>, RealField<T>) {
    let two = T::one() + T::one();
    let two_ja2 = two * p.j0 * p.a * p.a;
    let c = RealField::from_fn(n.grid().clone(), |s| {
        p.a * (two * p.j0 * n.values()[s] * p.u).sqrt()
    });
    let xi = RealField::from_fn(n.grid().clone(), |s| two_ja2 / c.values()[s]);
    (c, xi)
}

/// Velocity from principal-value bond steps of the phase:
/// `v_l = J a (step_plus + step_minus)`, the centered difference times `2Ja^2`.
fn phase_velocity<T: Real>(
    phi: &RealField<T>,
    p: &crate::dynamics::BhParams<T>,
) -> Result<VectorField<T>> {
    let grid = phi.grid().clone();
    let ph = phi.values();
    let guard = T::of(PHASE_STEP_GUARD);
    let ja = p.j0 * p.a;
    let d = grid.dims();
    let mut v = VectorField::zeros(grid.clone());
    let mut winding: Option<(usize, T)> = None;
    grid.for_each_neighborhood(|site, nb| {
        for axis in 0..d {
            let sp = principal(ph[nb.plus[axis]] - ph[site]);
            let sm = principal(ph[site] - ph[nb.minus[axis]]);
            if (sp.abs() > guard || sm.abs() > guard) && winding.is_none() {
                winding = Some((site, if sp.abs() > guard { sp } else { sm }));
            }
            *v.comp_mut(site, axis) = ja * (sp + sm);
        }
    });
    if let Some((site, step)) = winding {
        return Err(Error::PhaseWinding {
            site,
            step: step.as_f64(),
            guard: PHASE_STEP_GUARD,
        });
    }
    Ok(v)
}

/// Split `b` into density-phase form and populate the derived fields.
///
/// The phase is unwrapped from site 0 along a spanning tree (axis 0 first,
/// then 1, then 2), so constant-gradient states come out linear.
pub fn to_density_phase<T: Real>(
    b: &ComplexField<T>,
    p: &crate::dynamics::BhParams<T>,
) -> Result<HydroState<T>> {
    p.check_spacing(b.grid())?;
    b.ensure_finite("to_density_phase input")?;
    let grid = b.grid().clone();
    let floor = T::of(DENSITY_FLOOR);

    let mut n_vals = Vec::with_capacity(grid.site_count());
    let mut raw = Vec::with_capacity(grid.site_count());
    for (site, v) in b.values().iter().enumerate() {
        let n = v.norm_sqr();
        if !(n > floor) {
            return Err(Error::VacuumSite { site, amplitude: v.norm().as_f64() });
        }
        n_vals.push(n);
        raw.push(v.im.atan2(v.re));
    }

    let strides = grid.strides();
    let mut phi_vals = vec![T::zero(); grid.site_count()];
    phi_vals[0] = raw[0];
    for site in 1..grid.site_count() {
        let coords = grid.coords(site);
        let parent = if coords[0] > 0 {
            site - strides[0]
        } else if coords[1] > 0 {
            site - strides[1]
        } else {
            site - strides[2]
        };
        let step = principal(raw[site] - phi_vals[parent]);
        phi_vals[site] = phi_vals[parent] + step;
    }

    let n = RealField::new(grid.clone(), n_vals)?;
    let phi = RealField::new(grid.clone(), phi_vals)?;
    HydroState::from_density_phase(n, phi, p)
}

/// Soft validity warning: the hydrodynamic treatment assumes large filling.
pub fn filling_warning<T: Real>(n: &RealField<T>) -> Option<String> {
    let min = n.values().iter().copied().fold(T::infinity(), T::min);
    (min < T::of(10.0)).then(|| {
        format!("minimum filling {min} is below 10; the large-filling approximation degrades")
    })
}

/// Soft regime guard for the Mott-side wave equation.
pub fn mott_regime_warning<T: Real>(p: &crate::dynamics::BhParams<T>) -> Option<String> {
    let ratio = p.u / p.j0;
    (ratio < T::of(100.0)).then(|| {
        format!("U/J = {ratio} is below 100; the density-wave reduction assumes U/J >> 1")
    })
}

/// Fluctuations in hydrodynamic variables.
#[derive(Debug, Clone)]
pub struct FluctHydro<T: Real> {
    pub dn: RealField<T>,
    pub dphi: RealField<T>,
}

impl<T: Real> FluctHydro<T> {
    pub fn new(dn: RealField<T>, dphi: RealField<T>) -> Result<Self> {
        if dn.grid() != dphi.grid() {
            return Err(Error::grid("dn and dphi on different grids"));
        }
        Ok(Self { dn, dphi })
    }

    pub fn grid(&self) -> &LatticeGrid<T> {
        self.dn.grid()
    }
}

/// Relative complex fluctuation to hydrodynamic pair:
/// `dn = 2 n Re(db)`, `dphi = Im(db)`.
pub fn fluct_to_hydro<T: Real>(db: &ComplexField<T>, n: &RealField<T>) -> Result<FluctHydro<T>> {
    if db.grid() != n.grid() {
        return Err(Error::grid("fluctuation and density on different grids"));
    }
    let two = T::one() + T::one();
    let dn = RealField::from_fn(n.grid().clone(), |s| two * n.values()[s] * db.values()[s].re);
    let dphi = RealField::from_fn(n.grid().clone(), |s| db.values()[s].im);
    FluctHydro::new(dn, dphi)
}

/// Inverse of [`fluct_to_hydro`]: `db = dn/(2n) + i dphi`.
pub fn hydro_to_fluct<T: Real>(f: &FluctHydro<T>, n: &RealField<T>) -> Result<ComplexField<T>> {
    if f.grid() != n.grid() {
        return Err(Error::grid("fluctuation and density on different grids"));
    }
    let floor = T::of(DENSITY_FLOOR);
    if let Some(site) = n.values().iter().position(|&x| !(x > floor)) {
        return Err(Error::VacuumSite {
            site,
            amplitude: n.values()[site].max(T::zero()).sqrt().as_f64(),
        });
    }
    let two = T::one() + T::one();
    Ok(ComplexField::from_fn(n.grid().clone(), |s| {
        C::new(f.dn.values()[s] / (two * n.values()[s]), f.dphi.values()[s])
    }))
}

/// Continuity right-hand side `-div(n v)`, conservative bond-flux form with
/// the phase handled in principal values (`v_bond = 2 J a * step`).
pub fn mean_density_rhs<T: Real>(
    h: &HydroState<T>,
    p: &crate::dynamics::BhParams<T>,
) -> Result<RealField<T>> {
    p.check_spacing(h.grid())?;
    let grid = h.grid().clone();
    let n = h.n.values();
    let ph = h.phi.values();
    let two = T::one() + T::one();
    let two_ja = two * p.j0 * p.a;
    let inv_a = p.a.recip();
    let d = grid.dims();
    let mut out = RealField::zeros(grid.clone());
    grid.for_each_neighborhood(|site, nb| {
        let mut div = T::zero();
        for axis in 0..d {
            let (pi, mi) = (nb.plus[axis], nb.minus[axis]);
            let flux_p = (n[site] + n[pi]) / two * (two_ja * principal(ph[pi] - ph[site]));
            let flux_m = (n[mi] + n[site]) / two * (two_ja * principal(ph[site] - ph[mi]));
            div += (flux_p - flux_m) * inv_a;
        }
        out.values_mut()[site] = -div;
    });
    Ok(out)
}

/// Phase equation right-hand side
/// `-J a^2 [(grad phi)^2 - lap(n)/(2n) + (grad n)^2/(4 n^2)] + (2 D J + U/2 + mu) - U n`.
///
/// The constant specializes the printed 3D value `6J` to `2 dims J`. The
/// phase gradient is read back from the stored velocity so it shares the
/// principal-value treatment.
pub fn mean_phase_rhs<T: Real>(
    h: &HydroState<T>,
    p: &crate::dynamics::BhParams<T>,
) -> Result<RealField<T>> {
    p.check_spacing(h.grid())?;
    let grid = h.grid().clone();
    let two = T::one() + T::one();
    let four = two * two;
    let a2 = p.a * p.a;
    let ja2 = p.j0 * a2;
    let two_ja2 = two * ja2;
    let const_term = two * T::of(grid.dims() as f64) * p.j0 + p.u / two + p.mu;
    let lap_n = laplacian(&h.n)?;
    let grad_n = gradient(&h.n)?;
    let d = grid.dims();
    let n = h.n.values();
    let mut out = RealField::zeros(grid.clone());
    for site in 0..grid.site_count() {
        let mut grad_phi_sq = T::zero();
        let mut grad_n_sq = T::zero();
        for axis in 0..d {
            let gp = h.v.comp(site, axis) / two_ja2;
            grad_phi_sq += gp * gp;
            let gn = grad_n.comp(site, axis);
            grad_n_sq += gn * gn;
        }
        let quantum = -lap_n.values()[site] / (two * n[site])
            + grad_n_sq / (four * n[site] * n[site]);
        out.values_mut()[site] = -ja2 * (grad_phi_sq + quantum) + const_term - p.u * n[site];
    }
    Ok(out)
}

/// Which prefactor the quantum potential carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantumPotentialConvention {
    /// `V_Q = J^2 (lap sqrt n)/sqrt n`, the form as stated.
    Printed,
    /// `V_Q = J a^2 (lap sqrt n)/sqrt n`, dimensionally matched to the
    /// kinetic coefficient appearing everywhere else.
    KineticScaled,
}

/// Quantum potential under the chosen convention.
pub fn quantum_potential<T: Real>(
    n: &RealField<T>,
    p: &crate::dynamics::BhParams<T>,
    convention: QuantumPotentialConvention,
) -> Result<RealField<T>> {
    p.check_spacing(n.grid())?;
    let floor = T::of(DENSITY_FLOOR);
    if let Some(site) = n.values().iter().position(|&x| !(x > floor)) {
        return Err(Error::VacuumSite {
            site,
            amplitude: n.values()[site].max(T::zero()).sqrt().as_f64(),
        });
    }
    let sqrt_n = RealField::from_fn(n.grid().clone(), |s| n.values()[s].sqrt());
    let lap = laplacian(&sqrt_n)?;
    let pref = match convention {
        QuantumPotentialConvention::Printed => p.j0 * p.j0,
        QuantumPotentialConvention::KineticScaled => p.j0 * p.a * p.a,
    };
    Ok(RealField::from_fn(n.grid().clone(), |s| {
        pref * lap.values()[s] / sqrt_n.values()[s]
    }))
}

/// Momentum equation as the derivation defines it: since `v = 2 J a^2 grad(phi)`,
/// `dv/dt = 2 J a^2 grad(d phi/dt)`. Taking the discrete gradient of
/// [`mean_phase_rhs`] keeps that identity exact on the lattice, which the
/// as-stated form cannot do (discrete differences break the chain rule).
pub fn euler_rhs<T: Real>(
    h: &HydroState<T>,
    p: &crate::dynamics::BhParams<T>,
) -> Result<VectorField<T>> {
    let phase = mean_phase_rhs(h, p)?;
    let mut g = gradient(&phase)?;
    let two_ja2 = (T::one() + T::one()) * p.j0 * p.a * p.a;
    for x in g.values_mut() {
        *x *= two_ja2;
    }
    Ok(g)
}

/// Momentum equation in the as-stated form
/// `-(v . grad) v + J a^2 grad(2 D J + mu + U/2 + V_Q - U n)`.
///
/// Differs from [`euler_rhs`] by a factor 2 on the gradient term (and by the
/// discrete chain rule on the advection term); kept for reference against the
/// stated equation. The consistency identity only holds for [`euler_rhs`].
pub fn euler_rhs_stated<T: Real>(
    h: &HydroState<T>,
    p: &crate::dynamics::BhParams<T>,
    convention: QuantumPotentialConvention,
) -> Result<VectorField<T>> {
    p.check_spacing(h.grid())?;
    let grid = h.grid().clone();
    let two = T::one() + T::one();
    let ja2 = p.j0 * p.a * p.a;
    let const_term = two * T::of(grid.dims() as f64) * p.j0 + p.u / two + p.mu;
    let vq = quantum_potential(&h.n, p, convention)?;
    let potential = RealField::from_fn(grid.clone(), |s| {
        const_term + vq.values()[s] - p.u * h.n.values()[s]
    });
    let grad_pot = gradient(&potential)?;
    let d = grid.dims();

    // (v . grad) v: centered gradient of each velocity component
    let mut out = VectorField::zeros(grid.clone());
    let mut grad_v = Vec::with_capacity(d);
    for l in 0..d {
        let comp = RealField::from_fn(grid.clone(), |s| h.v.comp(s, l));
        grad_v.push(gradient(&comp)?);
    }
    for site in 0..grid.site_count() {
        for l in 0..d {
            let mut adv = T::zero();
            for m in 0..d {
                adv += h.v.comp(site, m) * grad_v[l].comp(site, m);
            }
            *out.comp_mut(site, l) = -adv + ja2 * grad_pot.comp(site, l);
        }
    }
    Ok(out)
}

/// Density-fluctuation right-hand side `-div(v dn + 2 J a^2 n grad(dphi))`,
/// conservative bond-flux form. On a homogeneous resting background this is
/// exactly `-2 J a^2 n lap(dphi)` with the three-point Laplacian.
pub fn fluct_density_rhs<T: Real>(
    f: &FluctHydro<T>,
    h: &HydroState<T>,
    p: &crate::dynamics::BhParams<T>,
) -> Result<RealField<T>> {
    if f.grid() != h.grid() {
        return Err(Error::grid("fluctuation and background on different grids"));
    }
    p.check_spacing(h.grid())?;
    let grid = h.grid().clone();
    let n = h.n.values();
    let ph = h.phi.values();
    let dn = f.dn.values();
    let dphi = f.dphi.values();
    let two = T::one() + T::one();
    let two_ja = two * p.j0 * p.a;
    let two_ja2 = two_ja * p.a;
    let inv_a = p.a.recip();
    let d = grid.dims();
    let mut out = RealField::zeros(grid.clone());
    grid.for_each_neighborhood(|site, nb| {
        let mut div = T::zero();
        for axis in 0..d {
            let (pi, mi) = (nb.plus[axis], nb.minus[axis]);
            let vp = two_ja * principal(ph[pi] - ph[site]);
            let vm = two_ja * principal(ph[site] - ph[mi]);
            let flux_p =
                vp * (dn[site] + dn[pi]) / two + two_ja2 * (n[site] + n[pi]) / two * (dphi[pi] - dphi[site]) * inv_a;
            let flux_m =
                vm * (dn[mi] + dn[site]) / two + two_ja2 * (n[mi] + n[site]) / two * (dphi[site] - dphi[mi]) * inv_a;
            div += (flux_p - flux_m) * inv_a;
        }
        out.values_mut()[site] = -div;
    });
    Ok(out)
}

/// Phase-fluctuation right-hand side
/// `-v . grad(dphi) - (c^2/(2 J a^2 n)) dn + (c^2 xi^2/(8 J a^2 n)) div(n grad(dn/n))`.
///
/// Coefficients are evaluated from the stored `c` and `xi` fields as written
/// rather than pre-simplified, and the last term uses the conservative
/// bond-flux form. On a homogeneous resting background the whole expression
/// collapses to `(J a^2/(2n)) lap(dn) - U dn` with the three-point Laplacian,
/// and the pair with [`fluct_density_rhs`] reproduces the Bogoliubov
/// dispersion exactly at every lattice wavevector.
pub fn fluct_phase_rhs<T: Real>(
    f: &FluctHydro<T>,
    h: &HydroState<T>,
    p: &crate::dynamics::BhParams<T>,
) -> Result<RealField<T>> {
    if f.grid() != h.grid() {
        return Err(Error::grid("fluctuation and background on different grids"));
    }
    p.check_spacing(h.grid())?;
    let grid = h.grid().clone();
    let two = T::one() + T::one();
    let eight = T::of(8.0);
    let ja2 = p.j0 * p.a * p.a;
    let n = h.n.values();
    let c = h.c.values();
    let xi = h.xi.values();

    let ratio = RealField::from_fn(grid.clone(), |s| f.dn.values()[s] / n[s]);
    let pressure = div_coeff_grad(&h.n, &ratio)?;
    let grad_dphi = gradient(&f.dphi)?;
    let d = grid.dims();

    let mut out = RealField::zeros(grid.clone());
    for site in 0..grid.site_count() {
        let mut adv = T::zero();
        for axis in 0..d {
            adv += h.v.comp(site, axis) * grad_dphi.comp(site, axis);
        }
        let c2 = c[site] * c[site];
        let restoring = c2 / (two * ja2 * n[site]) * f.dn.values()[site];
        let quantum = c2 * xi[site] * xi[site] / (eight * ja2 * n[site]) * pressure.values()[site];
        out.values_mut()[site] = -adv - restoring + quantum;
    }
    Ok(out)
}

/// Hydrodynamic-limit estimate `dn ~ -2 J a^2 n (d(dphi)/dt + v . grad dphi)/c^2`
/// with the time derivative taken centered over three stored levels.
/// Its gap from the evolved `dn` measures how far outside the hydrodynamic
/// window (`k xi << 1`) the state sits.
pub fn hydrodynamic_dn_estimate<T: Real>(
    dphi_levels: [&RealField<T>; 3],
    dt: T,
    h: &HydroState<T>,
    p: &crate::dynamics::BhParams<T>,
) -> Result<RealField<T>> {
    for lvl in dphi_levels {
        if lvl.grid() != h.grid() {
            return Err(Error::grid("history level grid differs from background"));
        }
    }
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::config("time step must be positive"));
    }
    p.check_spacing(h.grid())?;
    let grid = h.grid().clone();
    let two = T::one() + T::one();
    let two_ja2 = two * p.j0 * p.a * p.a;
    let grad_mid = gradient(dphi_levels[1])?;
    let d = grid.dims();
    let prev = dphi_levels[0].values();
    let next = dphi_levels[2].values();
    let mut out = RealField::zeros(grid.clone());
    for site in 0..grid.site_count() {
        let dphi_dt = (next[site] - prev[site]) / (two * dt);
        let mut adv = T::zero();
        for axis in 0..d {
            adv += h.v.comp(site, axis) * grad_mid.comp(site, axis);
        }
        let c2 = h.c.values()[site] * h.c.values()[site];
        out.values_mut()[site] = -two_ja2 * h.n.values()[site] * (dphi_dt + adv) / c2;
    }
    Ok(out)
}

/// Residual of the Mott-regime density wave equation
/// `d2(dn)/dt2 - div(c^2 grad dn) = 0`, centered in time, with the spatial
/// operator composed from the two wide centered first differences (its
/// plane-wave dispersion is `omega = c sin(k a)/a` on homogeneous `c`).
pub fn mott_wave_residual<T: Real>(
    dn_levels: [&RealField<T>; 3],
    dt: T,
    h: &HydroState<T>,
    p: &crate::dynamics::BhParams<T>,
) -> Result<RealField<T>> {
    for lvl in dn_levels {
        if lvl.grid() != h.grid() {
            return Err(Error::grid("history level grid differs from background"));
        }
    }
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::config("time step must be positive"));
    }
    p.check_spacing(h.grid())?;
    let grid = h.grid().clone();
    let two = T::one() + T::one();

    let mut flux = gradient(dn_levels[1])?;
    let d = grid.dims();
    for site in 0..grid.site_count() {
        let c2 = h.c.values()[site] * h.c.values()[site];
        for axis in 0..d {
            *flux.comp_mut(site, axis) *= c2;
        }
    }
    let spatial = lattice::divergence(&flux)?;

    let prev = dn_levels[0].values();
    let mid = dn_levels[1].values();
    let next = dn_levels[2].values();
    let dt2 = dt * dt;
    Ok(RealField::from_fn(grid, |s| {
        (next[s] - two * mid[s] + prev[s]) / dt2 - spatial.values()[s]
    }))
}
