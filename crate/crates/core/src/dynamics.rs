//! Mean-field lattice dynamics and linearized fluctuations.
//!
//! The mean field `b_j` evolves under the discrete Gross-Pitaevskii equation
//!
//! ```text
//! db/dt = i J(t) (a^2 lap b + 2 D b) - i (U/2) b (2|b|^2 - 1) + i mu b
//! ```
//!
//! with `lap` the three-point Laplacian and `D` the spatial dimension; the
//! hopping term is algebraically the nearest-neighbour sum, and
//! [`gpe_rhs_neighbor`] keeps that form around as a cross-check. Relative
//! fluctuations `db_j` (defined through `b_full = b (1 + db)`) obey
//!
//! ```text
//! d(db)/dt = i J a^2 [lap db + 2 (grad b / b) . grad db] - i U n (db + conj db)
//! ```
//!
//! and are co-evolved with the mean inside a single RK4 stage loop so both
//! fields see the same stage values and the same `J(t)` samples. hbar = 1
//! throughout; time is measured in inverse energy.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::lattice::{Boundary, ComplexField, LatticeGrid};
use crate::scalar::{C, Real};

/// Time dependence of the tunneling rate `J(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TunnelingSchedule<T: Real> {
    Constant,
    /// `J(t) = J0 exp(-rate * t)`; positive rate models an expanding background.
    Exponential { rate: T },
    /// `J(t) = J0 (1 - amplitude * sin(frequency * t))`, `|amplitude| < 1`.
    Sinusoidal { amplitude: T, frequency: T },
}

/// Bose-Hubbard parameters. `a` duplicates the grid spacing and is checked
/// against it wherever a grid is in play.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BhParams<T: Real> {
    pub j0: T,
    pub u: T,
    pub mu: T,
    pub a: T,
    pub schedule: TunnelingSchedule<T>,
}

impl<T: Real> BhParams<T> {
    pub fn new(j0: T, u: T, mu: T, a: T, schedule: TunnelingSchedule<T>) -> Result<Self> {
        if !(j0 > T::zero()) || !j0.is_finite() {
            return Err(Error::config(format!("J0 = {j0}, must be positive")));
        }
        if !(u > T::zero()) || !u.is_finite() {
            return Err(Error::config(format!("U = {u}, must be positive")));
        }
        if !mu.is_finite() {
            return Err(Error::config("mu must be finite"));
        }
        if !(a > T::zero()) || !a.is_finite() {
            return Err(Error::config(format!("a = {a}, must be positive")));
        }
        if let TunnelingSchedule::Sinusoidal { amplitude, .. } = schedule {
            if !(amplitude.abs() < T::one()) {
                return Err(Error::config(format!(
                    "sinusoidal amplitude {amplitude} must satisfy |amplitude| < 1"
                )));
            }
        }
        Ok(Self { j0, u, mu, a, schedule })
    }

    pub fn constant(j0: T, u: T, mu: T, a: T) -> Result<Self> {
        Self::new(j0, u, mu, a, TunnelingSchedule::Constant)
    }

    /// Tunneling rate at time `t`.
    pub fn j_at(&self, t: T) -> T {
        match self.schedule {
            TunnelingSchedule::Constant => self.j0,
            TunnelingSchedule::Exponential { rate } => self.j0 * (-rate * t).exp(),
            TunnelingSchedule::Sinusoidal { amplitude, frequency } => {
                self.j0 * (T::one() - amplitude * (frequency * t).sin())
            }
        }
    }

    /// Largest `J(t)` over `[t0, t1]`; used by the step-size guard.
    pub fn j_max(&self, t0: T, t1: T) -> T {
        match self.schedule {
            TunnelingSchedule::Constant => self.j0,
            TunnelingSchedule::Exponential { .. } => self.j_at(t0).max(self.j_at(t1)),
            TunnelingSchedule::Sinusoidal { amplitude, .. } => {
                self.j0 * (T::one() + amplitude.abs())
            }
        }
    }

    /// Chemical potential that makes a homogeneous density-`n` state stationary:
    /// `mu = U n - 2 D J0 - U/2`.
    pub fn stationary_mu(&self, dims: usize, n: T) -> T {
        let two = T::one() + T::one();
        self.u * n - two * T::of(dims as f64) * self.j0 - self.u / two
    }

    pub fn check_spacing(&self, grid: &LatticeGrid<T>) -> Result<()> {
        if grid.spacing() != self.a {
            return Err(Error::grid(format!(
                "params.a = {} but grid spacing = {}",
                self.a,
                grid.spacing()
            )));
        }
        Ok(())
    }
}

/// Sites with `|b| < 1e-12` cannot carry the relative-fluctuation equation.
pub const VACUUM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    /// Strang split step: exact local phase rotation around an exact spectral
    /// hop. Mean-field only, periodic grids only.
    SemiImplicitSplit,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig<T: Real> {
    pub method: Method,
    pub dt: T,
    pub steps: usize,
    /// Collect step-size and regime warnings during `evolve`.
    pub validity_warnings: bool,
}

impl<T: Real> IntegratorConfig<T> {
    pub fn rk4(dt: T, steps: usize) -> Self {
        Self { method: Method::Rk4, dt, steps, validity_warnings: true }
    }
}

/// One stored time level: enough to rebuild any hydrodynamic diagnostic.
#[derive(Debug, Clone)]
pub struct HistoryEntry<T: Real> {
    pub t: T,
    pub mean: ComplexField<T>,
    pub fluct: Option<ComplexField<T>>,
}

/// Mean field, optional fluctuation field, and a short ring buffer of recent
/// levels for centered time derivatives.
#[derive(Debug, Clone)]
pub struct EvolutionState<T: Real> {
    pub t: T,
    pub mean: ComplexField<T>,
    pub fluct: Option<ComplexField<T>>,
    history: VecDeque<HistoryEntry<T>>,
    history_depth: usize,
}

impl<T: Real> EvolutionState<T> {
    pub fn new(mean: ComplexField<T>, fluct: Option<ComplexField<T>>) -> Result<Self> {
        if let Some(f) = &fluct {
            if f.grid() != mean.grid() {
                return Err(Error::grid("fluctuation field grid differs from mean field grid"));
            }
        }
        Ok(Self { t: T::zero(), mean, fluct, history: VecDeque::new(), history_depth: 3 })
    }

    /// Ring-buffer depth; 3 levels suffice for centered second differences.
    pub fn set_history_depth(&mut self, depth: usize) {
        self.history_depth = depth;
        while self.history.len() > depth {
            self.history.pop_front();
        }
    }

    pub fn history(&self) -> impl ExactSizeIterator<Item = &HistoryEntry<T>> {
        self.history.iter()
    }

    pub fn record_history(&mut self) {
        if self.history_depth == 0 {
            return;
        }
        self.history.push_back(HistoryEntry {
            t: self.t,
            mean: self.mean.clone(),
            fluct: self.fluct.clone(),
        });
        while self.history.len() > self.history_depth {
            self.history.pop_front();
        }
    }

    pub fn grid(&self) -> &LatticeGrid<T> {
        self.mean.grid()
    }
}

fn hop_factor<T: Real>(grid: &LatticeGrid<T>) -> (T, T) {
    let a2 = grid.spacing() * grid.spacing();
    let two_d = T::of(2.0 * grid.dims() as f64);
    (a2, two_d)
}

/// `db/dt` at tunneling rate `j`, written exactly as the lattice equation of
/// motion: `i j (a^2 lap b + 2 D b) - i (U/2) b (2|b|^2 - 1) + i mu b`.
fn gpe_rhs_into<T: Real>(
    grid: &LatticeGrid<T>,
    b: &[C<T>],
    p: &BhParams<T>,
    j: T,
    out: &mut [C<T>],
) {
    let (a2, two_d) = hop_factor(grid);
    let inv_a2 = a2.recip();
    let two = T::one() + T::one();
    let half_u = p.u / two;
    let d = grid.dims();
    grid.for_each_neighborhood(|site, nb| {
        let bs = b[site];
        let mut lap = C::new(T::zero(), T::zero());
        for axis in 0..d {
            lap += b[nb.plus[axis]] + b[nb.minus[axis]] - bs.scale(two);
        }
        lap = lap.scale(inv_a2);
        let n = bs.norm_sqr();
        let local = p.mu - half_u * (two * n - T::one());
        let total = (lap.scale(a2) + bs.scale(two_d)).scale(j) + bs.scale(local);
        // multiply by i
        out[site] = C::new(-total.im, total.re);
    });
}

/// Public right-hand side of the mean-field equation at time `t`.
pub fn gpe_rhs<T: Real>(
    mean: &ComplexField<T>,
    p: &BhParams<T>,
    t: T,
) -> Result<ComplexField<T>> {
    p.check_spacing(mean.grid())?;
    mean.ensure_finite("gpe_rhs input")?;
    let mut out = ComplexField::constant(mean.grid().clone(), C::new(T::zero(), T::zero()));
    gpe_rhs_into(mean.grid(), mean.values(), p, p.j_at(t), out.values_mut());
    out.ensure_finite("gpe_rhs output")?;
    Ok(out)
}

/// Same physics written as the bare nearest-neighbour sum
/// `i J sum_nb b_nb - i (U/2) b (2|b|^2 - 1) + i mu b`.
///
/// Identical to [`gpe_rhs`] up to floating-point association; kept as a
/// cross-check that the stencil identity holds on the lattice.
pub fn gpe_rhs_neighbor<T: Real>(
    mean: &ComplexField<T>,
    p: &BhParams<T>,
    t: T,
) -> Result<ComplexField<T>> {
    p.check_spacing(mean.grid())?;
    mean.ensure_finite("gpe_rhs input")?;
    let grid = mean.grid().clone();
    let b = mean.values();
    let j = p.j_at(t);
    let two = T::one() + T::one();
    let half_u = p.u / two;
    let d = grid.dims();
    let mut out = ComplexField::constant(grid.clone(), C::new(T::zero(), T::zero()));
    grid.for_each_neighborhood(|site, nb| {
        let bs = b[site];
        let mut hop = C::new(T::zero(), T::zero());
        for axis in 0..d {
            // clamped ghosts replicate the edge value, matching a^2 lap + 2D b
            hop += b[nb.plus[axis]] + b[nb.minus[axis]];
        }
        let n = bs.norm_sqr();
        let local = p.mu - half_u * (two * n - T::one());
        let total = hop.scale(j) + bs.scale(local);
        out.values_mut()[site] = C::new(-total.im, total.re);
    });
    out.ensure_finite("gpe_rhs output")?;
    Ok(out)
}

/// `d(db)/dt` for the relative fluctuation field on background `b`.
fn fluct_rhs_into<T: Real>(
    grid: &LatticeGrid<T>,
    b: &[C<T>],
    db: &[C<T>],
    p: &BhParams<T>,
    j: T,
    out: &mut [C<T>],
) -> Result<()> {
    let (a2, _) = hop_factor(grid);
    let inv_a2 = a2.recip();
    let two = T::one() + T::one();
    let ja2 = j * a2;
    let floor = T::of(VACUUM_FLOOR);
    let d = grid.dims();
    let mut vacuum: Option<(usize, T)> = None;
    grid.for_each_neighborhood(|site, nb| {
        let bs = b[site];
        let amp = bs.norm();
        if amp < floor && vacuum.is_none() {
            vacuum = Some((site, amp));
            return;
        }
        let dbs = db[site];
        let mut lap = C::new(T::zero(), T::zero());
        let mut grad_dot = C::new(T::zero(), T::zero());
        for axis in 0..d {
            let (pi, mi) = (nb.plus[axis], nb.minus[axis]);
            lap += db[pi] + db[mi] - dbs.scale(two);
            // (grad b / b) . grad db, both centered over 2a; the 1/(2a)^2
            // factors combine into 1/(4 a^2)
            grad_dot += (b[pi] - b[mi]) * (db[pi] - db[mi]);
        }
        lap = lap.scale(inv_a2);
        let quarter = (two * two).recip();
        let grad_term = grad_dot.scale(quarter * inv_a2) / bs;
        let n = bs.norm_sqr();
        let restoring = (dbs + dbs.conj()).scale(p.u * n);
        let hop = (lap + grad_term.scale(two)).scale(ja2);
        let total = hop - restoring;
        // multiply by i
        out[site] = C::new(-total.im, total.re);
    });
    if let Some((site, amp)) = vacuum {
        return Err(Error::VacuumSite { site, amplitude: amp.as_f64() });
    }
    Ok(())
}

/// Public right-hand side of the fluctuation equation at time `t`.
pub fn fluct_rhs<T: Real>(
    mean: &ComplexField<T>,
    fluct: &ComplexField<T>,
    p: &BhParams<T>,
    t: T,
) -> Result<ComplexField<T>> {
    p.check_spacing(mean.grid())?;
    if mean.grid() != fluct.grid() {
        return Err(Error::grid("fluctuation and mean fields on different grids"));
    }
    mean.ensure_finite("fluct_rhs mean input")?;
    fluct.ensure_finite("fluct_rhs fluct input")?;
    let mut out = ComplexField::constant(mean.grid().clone(), C::new(T::zero(), T::zero()));
    fluct_rhs_into(mean.grid(), mean.values(), fluct.values(), p, p.j_at(t), out.values_mut())?;
    out.ensure_finite("fluct_rhs output")?;
    Ok(out)
}

/// Total particle number `sum |b|^2`.
pub fn total_number<T: Real>(mean: &ComplexField<T>) -> T {
    mean.norm_sqr_sum()
}

/// Lattice energy at time `t`:
/// `-J(t) sum_bonds (conj(b_i) b_j + c.c.) + (U/2) sum n^2 - mu sum n`.
/// Each nearest-neighbour bond is counted once; fixed-value boundaries carry
/// no bond through the wall.
pub fn energy<T: Real>(mean: &ComplexField<T>, p: &BhParams<T>, t: T) -> Result<T> {
    p.check_spacing(mean.grid())?;
    let grid = mean.grid();
    let b = mean.values();
    let j = p.j_at(t);
    let two = T::one() + T::one();
    let d = grid.dims();
    let mut hop = T::zero();
    let mut local = T::zero();
    grid.for_each_neighborhood(|site, nb| {
        let bs = b[site];
        for axis in 0..d {
            let pi = nb.plus[axis];
            if pi != site {
                hop += two * (bs.conj() * b[pi]).re;
            }
        }
        let n = bs.norm_sqr();
        local += p.u / two * n * n - p.mu * n;
    });
    Ok(-j * hop + local)
}

/// Step-size guard: warn when `dt >= C / (2 D J_max + U n_max)` with `C = 0.5`.
pub fn stability_warning<T: Real>(
    state: &EvolutionState<T>,
    p: &BhParams<T>,
    cfg: &IntegratorConfig<T>,
) -> Option<String> {
    let t1 = state.t + cfg.dt * T::of(cfg.steps as f64);
    let j_max = p.j_max(state.t, t1);
    let n_max = state.mean.values().iter().fold(T::zero(), |acc, v| acc.max(v.norm_sqr()));
    let two_d = T::of(2.0 * state.grid().dims() as f64);
    let denom = two_d * j_max + p.u * n_max;
    let bound = T::of(0.5) / denom;
    (cfg.dt >= bound).then(|| {
        format!(
            "dt = {} exceeds the stability guard {} (= 0.5 / (2 D J_max + U n_max))",
            cfg.dt, bound
        )
    })
}

struct Rk4Workspace<T: Real> {
    stage_mean: Vec<C<T>>,
    acc_mean: Vec<C<T>>,
    k_mean: Vec<C<T>>,
    stage_fluct: Vec<C<T>>,
    acc_fluct: Vec<C<T>>,
    k_fluct: Vec<C<T>>,
}

impl<T: Real> Rk4Workspace<T> {
    fn new(n: usize, with_fluct: bool) -> Self {
        let zero = C::new(T::zero(), T::zero());
        let f = if with_fluct { n } else { 0 };
        Self {
            stage_mean: vec![zero; n],
            acc_mean: vec![zero; n],
            k_mean: vec![zero; n],
            stage_fluct: vec![zero; f],
            acc_fluct: vec![zero; f],
            k_fluct: vec![zero; f],
        }
    }
}

const RK4_STAGE_OFFSETS: [f64; 4] = [0.0, 0.5, 0.5, 1.0];
const RK4_WEIGHTS: [f64; 4] = [1.0, 2.0, 2.0, 1.0];

fn rk4_step<T: Real>(
    state: &mut EvolutionState<T>,
    p: &BhParams<T>,
    dt: T,
    ws: &mut Rk4Workspace<T>,
    step_index: usize,
) -> Result<()> {
    let grid = state.grid().clone();
    let n = grid.site_count();
    let with_fluct = state.fluct.is_some();
    let b0 = state.mean.values();
    let f0 = state.fluct.as_ref().map(|f| f.values());

    let sixth = T::of(6.0).recip();
    ws.acc_mean.copy_from_slice(b0);
    ws.stage_mean.copy_from_slice(b0);
    if let Some(f0) = f0 {
        ws.acc_fluct.copy_from_slice(f0);
        ws.stage_fluct.copy_from_slice(f0);
    }

    for stage in 0..4 {
        let ts = state.t + dt * T::of(RK4_STAGE_OFFSETS[stage]);
        let j = p.j_at(ts);
        if stage > 0 {
            // stage offsets: 0, dt/2, dt/2, dt
            let c = dt * T::of(RK4_STAGE_OFFSETS[stage]);
            for i in 0..n {
                ws.stage_mean[i] = b0[i] + ws.k_mean[i].scale(c);
            }
            if let Some(f0) = f0 {
                for i in 0..n {
                    ws.stage_fluct[i] = f0[i] + ws.k_fluct[i].scale(c);
                }
            }
        }
        if with_fluct {
            // fluct rhs reads the stage mean; evaluate it before overwriting k_mean
            fluct_rhs_into(&grid, &ws.stage_mean, &ws.stage_fluct, p, j, &mut ws.k_fluct)
                .map_err(|e| match e {
                    Error::VacuumSite { site, amplitude } => Error::NumericAbort {
                        step: step_index,
                        t: state.t.as_f64(),
                        context: format!("vacuum site {site} (|b| = {amplitude:e}) during stage"),
                    },
                    other => other,
                })?;
        }
        gpe_rhs_into(&grid, &ws.stage_mean, p, j, &mut ws.k_mean);

        let w = T::of(RK4_WEIGHTS[stage]) * dt * sixth;
        for i in 0..n {
            ws.acc_mean[i] += ws.k_mean[i].scale(w);
        }
        if with_fluct {
            for i in 0..n {
                ws.acc_fluct[i] += ws.k_fluct[i].scale(w);
            }
        }
    }

    commit(state, &ws.acc_mean, with_fluct.then_some(&ws.acc_fluct), dt, step_index)
}

/// Validate a tentative step and commit it; on failure the state is untouched.
fn commit<T: Real>(
    state: &mut EvolutionState<T>,
    mean: &[C<T>],
    fluct: Option<&Vec<C<T>>>,
    dt: T,
    step_index: usize,
) -> Result<()> {
    let bad_mean = mean.iter().position(|v| !v.re.is_finite() || !v.im.is_finite());
    let bad_fluct = fluct
        .and_then(|f| f.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()));
    if let Some(site) = bad_mean.or(bad_fluct) {
        return Err(Error::NumericAbort {
            step: step_index,
            t: state.t.as_f64(),
            context: format!("non-finite value at site {site}; state rolled back to last step"),
        });
    }
    state.mean.values_mut().copy_from_slice(mean);
    if let (Some(dst), Some(src)) = (state.fluct.as_mut(), fluct) {
        dst.values_mut().copy_from_slice(src);
    }
    state.t = state.t + dt;
    state.record_history();
    Ok(())
}

/// Advance one step with the configured method.
pub fn step<T: Real + rustfft::FftNum>(
    state: &mut EvolutionState<T>,
    p: &BhParams<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<()> {
    p.check_spacing(state.grid())?;
    match cfg.method {
        Method::Rk4 => {
            let mut ws = Rk4Workspace::new(state.grid().site_count(), state.fluct.is_some());
            rk4_step(state, p, cfg.dt, &mut ws, 0)
        }
        Method::SemiImplicitSplit => {
            let mut split = SplitStepper::new(state, p)?;
            split.advance(state, p, cfg.dt, 0)
        }
    }
}

/// Evolve `cfg.steps` steps. The observer runs on the initial state and then
/// after every step; returns any validity warnings that were collected.
///
/// On numeric failure the state keeps the last finite step so callers can
/// persist it.
pub fn evolve<T: Real + rustfft::FftNum>(
    state: &mut EvolutionState<T>,
    p: &BhParams<T>,
    cfg: &IntegratorConfig<T>,
    mut observer: impl FnMut(usize, &EvolutionState<T>) -> Result<()>,
) -> Result<Vec<String>> {
    p.check_spacing(state.grid())?;
    let mut warnings = Vec::new();
    if cfg.validity_warnings {
        if let Some(w) = stability_warning(state, p, cfg) {
            warnings.push(w);
        }
    }
    state.record_history();
    observer(0, state)?;

    let t0 = state.t;
    match cfg.method {
        Method::Rk4 => {
            let mut ws = Rk4Workspace::new(state.grid().site_count(), state.fluct.is_some());
            for i in 0..cfg.steps {
                rk4_step(state, p, cfg.dt, &mut ws, i)?;
                // recompute t from the step count so it cannot drift
                state.t = t0 + cfg.dt * T::of((i + 1) as f64);
                observer(i + 1, state)?;
            }
        }
        Method::SemiImplicitSplit => {
            let mut split = SplitStepper::new(state, p)?;
            for i in 0..cfg.steps {
                split.advance(state, p, cfg.dt, i)?;
                state.t = t0 + cfg.dt * T::of((i + 1) as f64);
                observer(i + 1, state)?;
            }
        }
    }
    Ok(warnings)
}

/// Strang splitting with an exact spectral hop. Restricted to mean-field-only
/// runs on periodic grids, where the hop operator diagonalizes in k-space.
struct SplitStepper<T: Real + rustfft::FftNum> {
    fft: crate::spectra::AxisFft<T>,
    /// `2 D - 4 sum_l sin^2(k_l a / 2)` per site in k-ordering.
    hop_eigs: Vec<T>,
    khat: Vec<C<T>>,
}

impl<T: Real + rustfft::FftNum> SplitStepper<T> {
    fn new(state: &EvolutionState<T>, _p: &BhParams<T>) -> Result<Self> {
        if state.fluct.is_some() {
            return Err(Error::Unsupported {
                context: "semi-implicit split cannot co-evolve fluctuations; use RK4".into(),
            });
        }
        let grid = state.grid();
        if grid.boundary() != Boundary::Periodic {
            return Err(Error::Unsupported {
                context: "semi-implicit split needs a periodic grid".into(),
            });
        }
        let n = grid.site_count();
        let mut hop_eigs = vec![T::zero(); n];
        let two_d = T::of(2.0 * grid.dims() as f64);
        let four = T::of(4.0);
        let pi = T::PI();
        for (site, eig) in hop_eigs.iter_mut().enumerate() {
            let coords = grid.coords(site);
            let mut s = T::zero();
            for axis in 0..grid.dims() {
                let ext = grid.extent(axis);
                let half = T::of(coords[axis] as f64) * pi / T::of(ext as f64);
                s += half.sin() * half.sin();
            }
            *eig = two_d - four * s;
        }
        Ok(Self {
            fft: crate::spectra::AxisFft::new(grid.clone()),
            hop_eigs,
            khat: vec![C::new(T::zero(), T::zero()); n],
        })
    }

    fn advance(
        &mut self,
        state: &mut EvolutionState<T>,
        p: &BhParams<T>,
        dt: T,
        step_index: usize,
    ) -> Result<()> {
        let two = T::one() + T::one();
        let half_dt = dt / two;
        let j_mid = p.j_at(state.t + half_dt);
        self.khat.copy_from_slice(state.mean.values());

        let kick = |buf: &mut [C<T>]| {
            for v in buf.iter_mut() {
                let n = v.norm_sqr();
                let phase = half_dt * (p.mu - p.u / two * (two * n - T::one()));
                *v = *v * C::new(phase.cos(), phase.sin());
            }
        };

        kick(&mut self.khat);
        self.fft.forward(&mut self.khat);
        for (v, &eig) in self.khat.iter_mut().zip(&self.hop_eigs) {
            let phase = dt * j_mid * eig;
            *v = *v * C::new(phase.cos(), phase.sin());
        }
        self.fft.inverse(&mut self.khat);
        kick(&mut self.khat);

        let khat = std::mem::take(&mut self.khat);
        let result = commit(state, &khat, None, dt, step_index);
        self.khat = khat;
        result
    }
}
