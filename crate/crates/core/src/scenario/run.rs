//! Scenario execution: build the initial state, evolve, emit artifacts.

use super::output::{Emitter, FileFormat, RunManifest, SeriesTable};
use super::{
    DispersionSpec, FluctuationSeed, InitialState, MethodSpec, Observable, Regime, Scenario,
    ScheduleSpec,
};
use crate::dynamics::{
    energy, evolve, total_number, BhParams, EvolutionState, IntegratorConfig, Method,
};
use crate::error::{Error, Result};
use crate::geometry::{
    gw_metric, homogeneous_metric, horizon_scan, linearization_warning, minkowski_metric,
    perturbation_metric, superfluid_metric, flrw_metric, MetricField, MetricKind,
};
use crate::hydro::{filling_warning, fluct_to_hydro, to_density_phase, HydroState};
use crate::lattice::{Boundary, ComplexField, LatticeGrid, RealField};
use crate::scalar::C;
use crate::spectra::{DispersionPoint, DispersionRun};
use std::path::PathBuf;

/// Where and how to write a run's artifacts.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Output directory; one run owns one directory.
    pub out_dir: PathBuf,
    /// Overrides the scenario's output format when set.
    pub format: Option<FileFormat>,
    /// Recorded in the manifest for provenance; shipped scenarios are
    /// deterministic and do not consume it.
    pub seed: Option<u64>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions { out_dir: out_dir.into(), format: None, seed: None }
    }
}

/// Execute a scenario and write every requested artifact plus the manifest.
///
/// The manifest lands last through an atomic rename. On numeric failure the
/// last finite state and the series collected so far are persisted together
/// with a manifest marked `aborted`, and the abort error is returned so
/// callers can map it to an exit status.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunManifest> {
    scenario.check()?;
    let grid = scenario.grid.build()?;
    let params = scenario.params.build(scenario.grid.spacing)?;
    let mut warnings = scenario.warnings();

    let mean = build_mean(&grid, &params, &scenario.initial_state);
    if let Some(w) = filling_warning(&density_field(&mean)) {
        if !warnings.iter().any(|x| x.contains("filling")) {
            warnings.push(w);
        }
    }
    let fluct = build_fluct(&grid, &scenario.fluctuation, &mean, scenario.dispersion.as_ref())?;
    let mut state = EvolutionState::new(mean, fluct)?;

    let dt = match scenario.integrator.dt {
        Some(dt) => dt,
        None => default_dt(&state, &params, scenario.integrator.steps),
    };
    let method = match scenario.integrator.method {
        MethodSpec::Rk4 => Method::Rk4,
        MethodSpec::SemiImplicitSplit => Method::SemiImplicitSplit,
    };
    // Validity warnings are collected here rather than inside `evolve` so an
    // aborted run still records them in its manifest.
    let cfg =
        IntegratorConfig { method, dt, steps: scenario.integrator.steps, validity_warnings: false };
    if let Some(w) = crate::dynamics::stability_warning(&state, &params, &cfg) {
        warnings.push(w);
    }

    let format = opts.format.unwrap_or(scenario.output.format);
    let mut emitter = Emitter::new(&opts.out_dir)?;

    if scenario.output.observables.contains(&Observable::MetricSnapshot) {
        let initial = metric_for(scenario, &params, &state)?;
        emitter.write_table(&metric_dump("metric_initial", &initial), format)?;
    }

    let mut sampler = Sampler::new(scenario, &params, cfg.steps)?;
    let evolved = evolve(&mut state, &params, &cfg, |step, s| sampler.observe(step, s));

    let aborted = match evolved {
        Ok(ws) => {
            warnings.extend(ws);
            None
        }
        Err(Error::NumericAbort { step, t, context }) => Some((step, t, context)),
        Err(e) => return Err(e),
    };

    sampler.emit_series(&mut emitter, format)?;
    if aborted.is_some() {
        // Persist the last finite state regardless of the output plan.
        emit_state(&mut emitter, format, &state)?;
    } else {
        emit_final_artifacts(scenario, &params, &state, &sampler, &mut emitter, format, &mut warnings)?;
    }

    let manifest = RunManifest {
        schema_version: super::SCHEMA_VERSION,
        name: scenario.name.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: if aborted.is_some() { "aborted" } else { "completed" }.to_string(),
        abort: aborted.as_ref().map(|(step, t, context)| {
            format!("numeric abort at step {step}, t = {t}: {context}")
        }),
        seed: opts.seed,
        created_unix_ms: now_unix_ms(),
        warnings,
        scenario: scenario.clone(),
        artifacts: emitter.into_artifacts(),
    };
    manifest.write_atomic(&opts.out_dir)?;

    match aborted {
        Some((step, t, context)) => Err(Error::NumericAbort { step, t, context }),
        None => Ok(manifest),
    }
}

fn now_unix_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Quarter of the stability guard `0.5 / (2 D J_max + U n_max)`; the window
/// for `J_max` is estimated with a first pass at the guard itself.
fn default_dt(state: &EvolutionState<f64>, p: &BhParams<f64>, steps: usize) -> f64 {
    let n_max = state
        .mean
        .values()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.norm_sqr()));
    let two_d = 2.0 * state.grid().dims() as f64;
    let guard = |j_max: f64| 0.5 / (two_d * j_max + p.u * n_max);
    let first = guard(p.j_max(0.0, 0.0));
    let horizon = first * steps.max(1) as f64;
    0.25 * guard(p.j_max(0.0, horizon))
}

fn density_field(mean: &ComplexField<f64>) -> RealField<f64> {
    RealField::from_fn(mean.grid().clone(), |site| mean.values()[site].norm_sqr())
}

/// Squared distance from `site` to `center` (position units), minimum-image
/// on periodic grids.
fn distance_sq(grid: &LatticeGrid<f64>, site: usize, center: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for axis in 0..grid.dims() {
        let mut dx = grid.position(site, axis) - center[axis];
        if grid.boundary() == Boundary::Periodic {
            let span = grid.extent(axis) as f64 * grid.spacing();
            dx -= span * (dx / span).round();
        }
        r2 += dx * dx;
    }
    r2
}

fn grid_center(grid: &LatticeGrid<f64>) -> Vec<f64> {
    (0..grid.dims())
        .map(|axis| 0.5 * grid.extent(axis) as f64 * grid.spacing())
        .collect()
}

fn build_mean(
    grid: &LatticeGrid<f64>,
    p: &BhParams<f64>,
    init: &InitialState,
) -> ComplexField<f64> {
    match *init {
        InitialState::Homogeneous { n } => {
            ComplexField::constant(grid.clone(), C::new(n.sqrt(), 0.0))
        }
        InitialState::PhaseRamp { n, step } => {
            let amp = n.sqrt();
            ComplexField::from_fn(grid.clone(), |site| {
                C::from_polar(amp, step * grid.coords(site)[0] as f64)
            })
        }
        InitialState::StepFlow { n, v_up, v_down, ramp_width } => {
            // Phase accumulated bond by bond; each bond carries the step
            // v(midpoint) / (2 J a), the inverse of the velocity read-back.
            let ext = grid.extent(0);
            let a = grid.spacing();
            let x_mid = 0.5 * ext as f64 * a;
            let w = ramp_width * a;
            let v = |x: f64| v_up + (v_down - v_up) / (1.0 + (-(x - x_mid) / w).exp());
            let mut phi = vec![0.0_f64; ext];
            for j in 1..ext {
                phi[j] = phi[j - 1] + v((j as f64 - 0.5) * a) * a / (2.0 * p.j0 * a * a);
            }
            let amp = n.sqrt();
            ComplexField::from_fn(grid.clone(), |site| C::from_polar(amp, phi[site]))
        }
        InitialState::GaussianBump { n_ref, amplitude, width } => {
            let center = grid_center(grid);
            ComplexField::from_fn(grid.clone(), |site| {
                let r2 = distance_sq(grid, site, &center);
                let n = n_ref + amplitude * (-r2 / (2.0 * width * width)).exp();
                C::new(n.sqrt(), 0.0)
            })
        }
    }
}

fn build_fluct(
    grid: &LatticeGrid<f64>,
    seed: &FluctuationSeed,
    mean: &ComplexField<f64>,
    dispersion: Option<&DispersionSpec>,
) -> Result<Option<ComplexField<f64>>> {
    let mut field = match seed {
        FluctuationSeed::None => None,
        FluctuationSeed::PlaneWave { modes, amplitude } => Some(ComplexField::plane_wave(
            grid.clone(),
            *modes,
            C::new(*amplitude, 0.0),
        )),
        FluctuationSeed::GaussianPulse { amplitude, width, center } => {
            let center = center.clone().unwrap_or_else(|| grid_center(grid));
            let w2 = 2.0 * width * width;
            // Density pulse converted to the relative fluctuation dn/(2n).
            Some(ComplexField::from_fn(grid.clone(), |site| {
                let dn = amplitude * (-distance_sq(grid, site, &center) / w2).exp();
                C::new(dn / (2.0 * mean.values()[site].norm_sqr()), 0.0)
            }))
        }
    };
    if let Some(spec) = dispersion {
        let mut sum = field
            .unwrap_or_else(|| ComplexField::constant(grid.clone(), C::new(0.0, 0.0)));
        for &modes in &spec.modes {
            let wave = ComplexField::plane_wave(grid.clone(), modes, C::new(spec.amplitude, 0.0));
            for (dst, src) in sum.values_mut().iter_mut().zip(wave.values()) {
                *dst += *src;
            }
        }
        field = Some(sum);
    }
    Ok(field)
}

/// Metric construction appropriate to the scenario's schedule and regime.
fn metric_for(
    scenario: &Scenario,
    p: &BhParams<f64>,
    state: &EvolutionState<f64>,
) -> Result<MetricField<f64>> {
    match scenario.params.schedule {
        ScheduleSpec::Exponential { rate } => {
            let h = to_density_phase(&state.mean, p)?;
            flrw_metric(&h, p, state.t, rate)
        }
        ScheduleSpec::Sinusoidal { amplitude, frequency } => {
            let n0 = state.mean.values()[0].norm_sqr();
            gw_metric(state.grid(), p, state.t, amplitude, frequency, n0)
        }
        ScheduleSpec::Constant => {
            if scenario.regime == Regime::Mott {
                homogeneous_metric(&density_field(&state.mean), p, MetricKind::Mott)
            } else {
                let h = to_density_phase(&state.mean, p)?;
                superfluid_metric(&h, p)
            }
        }
    }
}

fn position_columns(dims: usize) -> Vec<&'static str> {
    ["x", "y", "z"][..dims].to_vec()
}

fn push_positions(row: &mut Vec<f64>, grid: &LatticeGrid<f64>, site: usize) {
    for axis in 0..grid.dims() {
        row.push(grid.position(site, axis));
    }
}

/// Upper-triangle metric entries at one site, preceded by the conformal
/// factor: omega, g_00, g_01, .., g_DD.
fn metric_columns(dims: usize) -> Vec<String> {
    let mut cols = vec!["omega".to_string()];
    for mu in 0..=dims {
        for nu in mu..=dims {
            cols.push(format!("g_{mu}{nu}"));
        }
    }
    cols
}

fn push_metric_entries(row: &mut Vec<f64>, m: &MetricField<f64>, site: usize) {
    row.push(m.conformal(site));
    let d = m.dims_spacetime();
    for mu in 0..d {
        for nu in mu..d {
            row.push(m.entry(site, mu, nu));
        }
    }
}

fn metric_dump(name: &str, m: &MetricField<f64>) -> SeriesTable {
    let grid = m.grid();
    let dims = grid.dims();
    let mut columns: Vec<String> = vec!["site".to_string()];
    columns.extend(position_columns(dims).iter().map(|c| c.to_string()));
    columns.extend(metric_columns(dims));
    let mut table = SeriesTable {
        name: name.to_string(),
        columns,
        rows: Vec::with_capacity(grid.site_count()),
    };
    for site in 0..grid.site_count() {
        let mut row = vec![site as f64];
        push_positions(&mut row, grid, site);
        push_metric_entries(&mut row, m, site);
        table.push_row(row);
    }
    table
}

/// Collects the time series requested by the output plan during evolution.
struct Sampler<'a> {
    scenario: &'a Scenario,
    params: &'a BhParams<f64>,
    stride: usize,
    steps: usize,
    conservation: Option<SeriesTable>,
    metric_series: Option<SeriesTable>,
    fluct_series: Option<SeriesTable>,
    dispersion: Option<(DispersionRun<f64>, usize)>,
}

impl<'a> Sampler<'a> {
    fn new(scenario: &'a Scenario, params: &'a BhParams<f64>, steps: usize) -> Result<Self> {
        let grid = scenario.grid.build()?;
        let dims = grid.dims();
        let wants = |o: Observable| scenario.output.observables.contains(&o);

        let conservation = wants(Observable::Conservation)
            .then(|| SeriesTable::new("conservation", &["step", "t", "total_number", "energy"]));

        let metric_series = wants(Observable::MetricSeries).then(|| {
            let mut cols = vec!["step".to_string(), "t".to_string()];
            cols.extend(metric_columns(dims));
            SeriesTable { name: "metric_series".to_string(), columns: cols, rows: Vec::new() }
        });

        let fluct_series = wants(Observable::FluctSeries).then(|| {
            let mut cols = vec!["step", "t", "site"];
            cols.extend(position_columns(dims));
            cols.extend(["dn", "dphi"]);
            SeriesTable::new("fluct_series", &cols)
        });

        let dispersion = match (&scenario.dispersion, wants(Observable::Dispersion)) {
            (Some(spec), true) => {
                let dt = scenario
                    .integrator
                    .dt
                    .expect("checked scenarios with dispersion carry an explicit dt");
                let run = DispersionRun::new(
                    grid,
                    &spec.modes,
                    dt * spec.sample_stride as f64,
                )?;
                Some((run, spec.sample_stride))
            }
            _ => None,
        };

        Ok(Sampler {
            scenario,
            params,
            stride: scenario.output.stride,
            steps,
            conservation,
            metric_series,
            fluct_series,
            dispersion,
        })
    }

    fn on_series_step(&self, step: usize) -> bool {
        step % self.stride == 0 || step == self.steps
    }

    fn observe(&mut self, step: usize, state: &EvolutionState<f64>) -> Result<()> {
        if let Some((run, sample_stride)) = self.dispersion.as_mut() {
            if step % *sample_stride == 0 {
                let fluct = state
                    .fluct
                    .as_ref()
                    .ok_or_else(|| Error::config("dispersion needs a fluctuation field"))?;
                run.record(fluct)?;
            }
        }
        if !self.on_series_step(step) {
            return Ok(());
        }
        if let Some(table) = self.conservation.as_mut() {
            let number = total_number(&state.mean);
            let e = energy(&state.mean, self.params, state.t)?;
            table.push_row(vec![step as f64, state.t, number, e]);
        }
        if let Some(table) = self.metric_series.as_mut() {
            let m = metric_for(self.scenario, self.params, state)?;
            let mut row = vec![step as f64, state.t];
            push_metric_entries(&mut row, &m, 0);
            table.push_row(row);
        }
        if let Some(table) = self.fluct_series.as_mut() {
            let fluct = state
                .fluct
                .as_ref()
                .ok_or_else(|| Error::config("fluct-series needs a fluctuation field"))?;
            let n = density_field(&state.mean);
            let f = fluct_to_hydro(fluct, &n)?;
            let grid = state.grid();
            for site in 0..grid.site_count() {
                let mut row = vec![step as f64, state.t, site as f64];
                push_positions(&mut row, grid, site);
                row.push(f.dn.values()[site]);
                row.push(f.dphi.values()[site]);
                table.push_row(row);
            }
        }
        Ok(())
    }

    fn emit_series(&mut self, emitter: &mut Emitter, format: FileFormat) -> Result<()> {
        for table in [&self.conservation, &self.metric_series, &self.fluct_series]
            .into_iter()
            .flatten()
        {
            emitter.write_table(table, format)?;
        }
        Ok(())
    }

    fn finish_dispersion(&self, n0: f64) -> Result<Option<Vec<DispersionPoint<f64>>>> {
        match &self.dispersion {
            Some((run, _)) => {
                let points = run.finish(self.params.j0, self.params.u, n0)?;
                Ok(Some(points))
            }
            None => Ok(None),
        }
    }
}

fn emit_state(
    emitter: &mut Emitter,
    format: FileFormat,
    state: &EvolutionState<f64>,
) -> Result<()> {
    let grid = state.grid();
    let mut cols = vec!["site"];
    cols.extend(position_columns(grid.dims()));
    cols.extend(["re", "im"]);
    if state.fluct.is_some() {
        cols.extend(["fluct_re", "fluct_im"]);
    }
    let mut table = SeriesTable::new("state_final", &cols);
    for site in 0..grid.site_count() {
        let mut row = vec![site as f64];
        push_positions(&mut row, grid, site);
        let b = state.mean.values()[site];
        row.push(b.re);
        row.push(b.im);
        if let Some(f) = &state.fluct {
            row.push(f.values()[site].re);
            row.push(f.values()[site].im);
        }
        table.push_row(row);
    }
    emitter.write_table(&table, format)
}

fn emit_hydro_profile(
    emitter: &mut Emitter,
    format: FileFormat,
    h: &HydroState<f64>,
) -> Result<()> {
    let grid = h.grid();
    let dims = grid.dims();
    let mut cols = vec!["site".to_string()];
    cols.extend(position_columns(dims).iter().map(|c| c.to_string()));
    cols.extend(["n", "phi"].iter().map(|c| c.to_string()));
    for axis in 0..dims {
        cols.push(format!("v_{}", ["x", "y", "z"][axis]));
    }
    cols.extend(["c", "xi", "mach"].iter().map(|c| c.to_string()));
    let mut table = SeriesTable { name: "hydro_final".to_string(), columns: cols, rows: Vec::new() };
    for site in 0..grid.site_count() {
        let mut row = vec![site as f64];
        push_positions(&mut row, grid, site);
        row.push(h.n.values()[site]);
        row.push(h.phi.values()[site]);
        for axis in 0..dims {
            row.push(h.v.comp(site, axis));
        }
        let c = h.c.values()[site];
        row.push(c);
        row.push(h.xi.values()[site]);
        row.push(h.v.magnitude(site) / c);
        table.push_row(row);
    }
    emitter.write_table(&table, format)
}

#[allow(clippy::too_many_arguments)]
fn emit_final_artifacts(
    scenario: &Scenario,
    params: &BhParams<f64>,
    state: &EvolutionState<f64>,
    sampler: &Sampler<'_>,
    emitter: &mut Emitter,
    format: FileFormat,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let wants = |o: Observable| scenario.output.observables.contains(&o);

    if wants(Observable::FinalState) {
        emit_state(emitter, format, state)?;
    }

    let needs_hydro = wants(Observable::HydroProfile) || wants(Observable::Horizon);
    let hydro = if needs_hydro {
        Some(to_density_phase(&state.mean, params)?)
    } else {
        None
    };

    if let Some(h) = hydro.as_ref().filter(|_| wants(Observable::HydroProfile)) {
        emit_hydro_profile(emitter, format, h)?;
    }

    if let Some(h) = hydro.as_ref().filter(|_| wants(Observable::Horizon)) {
        let report = horizon_scan(h, params)?;
        let grid = h.grid();
        let dims = grid.dims();
        let mut cols = vec!["site".to_string()];
        cols.extend(position_columns(dims).iter().map(|c| c.to_string()));
        cols.extend(["mach", "condition", "acoustic"].iter().map(|c| c.to_string()));
        let mut table =
            SeriesTable { name: "mach_profile".to_string(), columns: cols, rows: Vec::new() };
        for site in 0..grid.site_count() {
            let mut row = vec![site as f64];
            push_positions(&mut row, grid, site);
            row.push(report.mach.values()[site]);
            row.push(report.condition.values()[site]);
            row.push(report.acoustic.values()[site]);
            table.push_row(row);
        }
        emitter.write_table(&table, format)?;
        let pairs: Vec<_> = report
            .pairs
            .iter()
            .map(|p| {
                serde_json::json!({
                    "site": p.site,
                    "neighbor": p.neighbor,
                    "axis": p.axis,
                })
            })
            .collect();
        emitter.write_json(
            "horizon.json",
            &serde_json::json!({ "pair_count": pairs.len(), "pairs": pairs }),
        )?;
    }

    if wants(Observable::MetricSnapshot) {
        let m = metric_for(scenario, params, state)?;
        emitter.write_table(&metric_dump("metric_final", &m), format)?;
    }

    if wants(Observable::PerturbationMetric) {
        let n_ref = match scenario.initial_state {
            InitialState::GaussianBump { n_ref, .. } => n_ref,
            _ => unreachable!("validated in Scenario::check"),
        };
        let n = density_field(&state.mean);
        if let Some(w) = linearization_warning(&n, n_ref) {
            warnings.push(w);
        }
        let h_pert = perturbation_metric(&n, params, n_ref)?;
        let flat = minkowski_metric(state.grid(), params, n_ref)?;
        let sum = flat.sum_with(&h_pert, MetricKind::MinkowskiPlusH)?;
        let exact = {
            let hydro = to_density_phase(&state.mean, params)?;
            superfluid_metric(&hydro, params)?
        };
        emitter.write_table(&metric_dump("perturbation_h", &h_pert), format)?;
        emitter.write_table(&metric_dump("metric_sum", &sum), format)?;
        let mut max_dev = 0.0_f64;
        let d = sum.dims_spacetime();
        for site in 0..state.grid().site_count() {
            for mu in 0..d {
                for nu in mu..d {
                    let dev = (sum.entry(site, mu, nu) - exact.entry(site, mu, nu)).abs();
                    max_dev = max_dev.max(dev);
                }
            }
        }
        emitter.write_json(
            "perturbation_check.json",
            &serde_json::json!({
                "reference_density": n_ref,
                "max_entry_deviation": max_dev,
                "note": "largest |(flat + h) - exact| metric entry; shrinks \
                         quadratically with the bump amplitude",
            }),
        )?;
    }

    if let Some(points) = sampler.finish_dispersion(scenario.initial_state.reference_density())? {
        let mut table = SeriesTable::new(
            "dispersion",
            &["k_x", "k_y", "k_z", "omega_measured", "omega_oracle", "v_lattice", "v_bogoliubov"],
        );
        for p in &points {
            table.push_row(vec![
                p.k[0],
                p.k[1],
                p.k[2],
                p.omega_measured,
                p.omega_oracle,
                p.v_lattice,
                p.v_bogoliubov,
            ]);
        }
        emitter.write_table(&table, format)?;
        emitter.write_json(
            "dispersion_notes.json",
            &serde_json::json!({
                "omega_measured": "angular frequency from the dominant spectral line",
                "omega_oracle": "angular frequency of the two-branch lattice prediction",
                "v_lattice": "squared angular frequency, site-basis form; compare against omega_measured^2",
                "v_bogoliubov": "squared angular frequency, long-wavelength form; compare against omega_measured^2",
            }),
        )?;
    }

    Ok(())
}
