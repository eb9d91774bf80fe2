//! Shipped scenario presets.
//!
//! Each preset is a complete, warning-free [`Scenario`] that runs on desk
//! hardware in well under a minute. Presets are built in code so every
//! derived number (speeds, chemical potentials, step counts) is exact and
//! identical on every machine.

use super::{
    DispersionSpec, FluctuationSeed, GridSpec, InitialState, IntegratorSpec, MethodSpec,
    Observable, OutputPlan, ParamSpec, Regime, Scenario, ScheduleSpec, SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::lattice::Boundary;
use crate::scenario::FileFormat;

/// Preset names with one-line descriptions, in listing order.
pub fn catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "homogeneous-superfluid",
            "resting uniform superfluid; number and energy drift benchmark",
        ),
        (
            "blackhole-1d",
            "one-dimensional step flow with a single sonic crossing; horizon diagnostics",
        ),
        (
            "mott-pulse",
            "deep-lattice density pulse propagating at the sound speed",
        ),
        (
            "flrw",
            "exponential tunneling ramp; uniformly expanding spatial metric",
        ),
        (
            "minkowski-bump",
            "small density bump split into a flat background plus a linear perturbation",
        ),
        (
            "gw-1d",
            "oscillating tunneling rate; wave-like strain in the spatial metric entry",
        ),
        (
            "dispersion-sweep",
            "seeded plane-wave modes; measured frequencies against the two-branch prediction",
        ),
    ]
}

/// Build a preset by name.
pub fn preset(name: &str) -> Result<Scenario> {
    let scenario = match name {
        "homogeneous-superfluid" => homogeneous_superfluid(),
        "blackhole-1d" => blackhole_1d(),
        "mott-pulse" => mott_pulse(),
        "flrw" => flrw(),
        "minkowski-bump" => minkowski_bump(),
        "gw-1d" => gw_1d(),
        "dispersion-sweep" => dispersion_sweep(),
        other => {
            return Err(Error::config(format!(
                "unknown preset '{other}'; available: {}",
                catalog()
                    .iter()
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
    };
    debug_assert!(scenario.check().is_ok());
    Ok(scenario)
}

/// Stationary chemical potential `U n - 2 D J - U/2` for a resting
/// homogeneous mean field.
fn stationary_mu(dims: usize, j: f64, u: f64, n: f64) -> f64 {
    u * n - 2.0 * dims as f64 * j - 0.5 * u
}

fn homogeneous_superfluid() -> Scenario {
    let (j, u, n) = (1.0, 0.1, 100.0);
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "homogeneous-superfluid".into(),
        grid: GridSpec {
            dims: 1,
            extents: vec![256],
            spacing: 1.0,
            boundary: Boundary::Periodic,
        },
        params: ParamSpec { j, u, mu: 0.0, schedule: ScheduleSpec::Constant },
        initial_state: InitialState::Homogeneous { n },
        fluctuation: FluctuationSeed::None,
        integrator: IntegratorSpec { method: MethodSpec::Rk4, dt: Some(1e-3), steps: 10_000 },
        output: OutputPlan {
            observables: vec![Observable::Conservation, Observable::FinalState],
            stride: 100,
            format: FileFormat::Csv,
        },
        regime: Regime::Superfluid,
        dispersion: None,
    }
}

fn blackhole_1d() -> Scenario {
    let (j, u, n) = (1.0_f64, 0.1, 100.0);
    // Sound speed of the uniform background; the flow crosses it once.
    let c = (2.0 * j * n * u).sqrt();
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "blackhole-1d".into(),
        grid: GridSpec {
            dims: 1,
            extents: vec![256],
            spacing: 1.0,
            boundary: Boundary::FixedValue,
        },
        params: ParamSpec { j, u, mu: 0.0, schedule: ScheduleSpec::Constant },
        // Subsonic upstream, supersonic downstream; the diagnostics run on
        // the constructed profile, so no integration steps are needed.
        initial_state: InitialState::StepFlow {
            n,
            v_up: 0.5 * c,
            v_down: 1.25 * c,
            ramp_width: 8.0,
        },
        fluctuation: FluctuationSeed::None,
        integrator: IntegratorSpec { method: MethodSpec::Rk4, dt: Some(5e-3), steps: 0 },
        output: OutputPlan {
            observables: vec![
                Observable::HydroProfile,
                Observable::Horizon,
                Observable::FinalState,
            ],
            stride: 1,
            format: FileFormat::Csv,
        },
        regime: Regime::Superfluid,
        dispersion: None,
    }
}

fn mott_pulse() -> Scenario {
    let (j, u, n) = (1.0, 400.0, 100.0);
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "mott-pulse".into(),
        grid: GridSpec {
            dims: 1,
            extents: vec![512],
            spacing: 1.0,
            boundary: Boundary::Periodic,
        },
        params: ParamSpec {
            j,
            u,
            mu: stationary_mu(1, j, u, n),
            schedule: ScheduleSpec::Constant,
        },
        initial_state: InitialState::Homogeneous { n },
        // Narrow density pulse on the fluctuation field; it splits into two
        // counter-propagating sound pulses.
        fluctuation: FluctuationSeed::GaussianPulse {
            amplitude: 0.5,
            width: 6.0,
            center: Some(vec![128.0]),
        },
        integrator: IntegratorSpec { method: MethodSpec::Rk4, dt: Some(1e-5), steps: 35_000 },
        output: OutputPlan {
            observables: vec![Observable::FluctSeries, Observable::Conservation],
            stride: 1_750,
            format: FileFormat::Csv,
        },
        regime: Regime::Mott,
        dispersion: None,
    }
}

fn flrw() -> Scenario {
    let (j, u, n) = (1.0, 0.1, 100.0);
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "flrw".into(),
        grid: GridSpec {
            dims: 3,
            extents: vec![32, 32, 32],
            spacing: 1.0,
            boundary: Boundary::Periodic,
        },
        // Rate times total time is exactly 1: the spatial metric entries
        // grow by a factor e over the run.
        params: ParamSpec {
            j,
            u,
            mu: stationary_mu(3, j, u, n),
            schedule: ScheduleSpec::Exponential { rate: 0.01 },
        },
        initial_state: InitialState::Homogeneous { n },
        fluctuation: FluctuationSeed::None,
        // The mean picks up a global rotation as the tunneling decays; the
        // small step keeps the integrator's amplitude drift (and with it the
        // conformal factor) well below 1e-6 over the run.
        integrator: IntegratorSpec { method: MethodSpec::Rk4, dt: Some(5e-3), steps: 20_000 },
        output: OutputPlan {
            observables: vec![Observable::MetricSeries, Observable::Conservation],
            stride: 200,
            format: FileFormat::Csv,
        },
        regime: Regime::Superfluid,
        dispersion: None,
    }
}

fn minkowski_bump() -> Scenario {
    let (j, u, n_ref) = (1.0, 0.1, 100.0);
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "minkowski-bump".into(),
        grid: GridSpec {
            dims: 3,
            extents: vec![32, 32, 32],
            spacing: 1.0,
            boundary: Boundary::Periodic,
        },
        params: ParamSpec {
            j,
            u,
            mu: stationary_mu(3, j, u, n_ref),
            schedule: ScheduleSpec::Constant,
        },
        initial_state: InitialState::GaussianBump { n_ref, amplitude: 5.0, width: 3.0 },
        fluctuation: FluctuationSeed::None,
        integrator: IntegratorSpec { method: MethodSpec::Rk4, dt: Some(0.01), steps: 100 },
        output: OutputPlan {
            observables: vec![Observable::HydroProfile, Observable::PerturbationMetric],
            stride: 100,
            format: FileFormat::Csv,
        },
        regime: Regime::Superfluid,
        dispersion: None,
    }
}

fn gw_1d() -> Scenario {
    let (j, u, n) = (1.0, 0.1, 100.0);
    // 5027 steps of 0.005 cover just over two strain periods (4 pi / 0.5).
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "gw-1d".into(),
        grid: GridSpec {
            dims: 1,
            extents: vec![256],
            spacing: 1.0,
            boundary: Boundary::Periodic,
        },
        params: ParamSpec {
            j,
            u,
            mu: stationary_mu(1, j, u, n),
            schedule: ScheduleSpec::Sinusoidal { amplitude: 0.01, frequency: 0.5 },
        },
        initial_state: InitialState::Homogeneous { n },
        fluctuation: FluctuationSeed::None,
        integrator: IntegratorSpec { method: MethodSpec::Rk4, dt: Some(5e-3), steps: 5_027 },
        output: OutputPlan {
            observables: vec![Observable::MetricSeries, Observable::Conservation],
            stride: 25,
            format: FileFormat::Csv,
        },
        regime: Regime::Superfluid,
        dispersion: None,
    }
}

fn dispersion_sweep() -> Scenario {
    let (j, u, n) = (1.0, 0.1, 100.0);
    // Eight of these modes fall in k a = 0.05 .. 1.0 on 512 sites; the rest
    // probe the long-wave anchor below and the lattice-bent tail above.
    let modes: Vec<[i64; 3]> = [4, 5, 8, 13, 21, 34, 55, 70, 81, 90, 100, 110, 120, 130, 140, 150]
        .iter()
        .map(|&m| [m, 0, 0])
        .collect();
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "dispersion-sweep".into(),
        grid: GridSpec {
            dims: 1,
            extents: vec![512],
            spacing: 1.0,
            boundary: Boundary::Periodic,
        },
        params: ParamSpec {
            j,
            u,
            mu: stationary_mu(1, j, u, n),
            schedule: ScheduleSpec::Constant,
        },
        initial_state: InitialState::Homogeneous { n },
        fluctuation: FluctuationSeed::None,
        integrator: IntegratorSpec { method: MethodSpec::Rk4, dt: Some(0.02), steps: 65_536 },
        output: OutputPlan {
            observables: vec![Observable::Dispersion],
            stride: 4_096,
            format: FileFormat::Csv,
        },
        regime: Regime::Superfluid,
        dispersion: Some(DispersionSpec { modes, amplitude: 1e-6, sample_stride: 16 }),
    }
}
