//! Scenario configuration, presets, and run orchestration.
//!
//! A [`Scenario`] is a JSON-serializable description of one simulation:
//! grid, physical parameters, initial state, optional fluctuation seed,
//! integrator settings, and an output plan. [`run`] drives the dynamics and
//! writes every requested artifact plus a checksummed manifest. Everything
//! here is `f64`; the generic layers live in the sibling modules.
//!
//! Determinism contract: identical scenarios produce byte-identical data
//! files. All reductions run in fixed site order, every float is written in
//! shortest round-trip form, and wall-clock metadata appears only in the
//! manifest, never in data files.

mod output;
mod presets;
mod run;

pub use output::{ArtifactRecord, FileFormat, RunManifest};
pub use presets::{catalog, preset};
pub use run::{run, RunOptions};

use crate::dynamics::{BhParams, TunnelingSchedule};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, LatticeGrid};
use serde::{Deserialize, Serialize};

/// Current configuration schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// Lattice geometry as configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dims: usize,
    pub extents: Vec<usize>,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

fn default_spacing() -> f64 {
    1.0
}

fn default_boundary() -> Boundary {
    Boundary::Periodic
}

impl GridSpec {
    pub fn build(&self) -> Result<LatticeGrid<f64>> {
        LatticeGrid::new(self.dims, &self.extents, self.spacing, self.boundary)
    }
}

/// Physical parameters as configured; field names follow the conventional
/// symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub schedule: ScheduleSpec,
}

/// Time dependence of the tunneling rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    #[default]
    Constant,
    /// `J(t) = J exp(-rate t)`.
    Exponential { rate: f64 },
    /// `J(t) = J (1 - amplitude sin(frequency t))`.
    Sinusoidal { amplitude: f64, frequency: f64 },
}

impl ScheduleSpec {
    fn to_schedule(self) -> TunnelingSchedule<f64> {
        match self {
            ScheduleSpec::Constant => TunnelingSchedule::Constant,
            ScheduleSpec::Exponential { rate } => TunnelingSchedule::Exponential { rate },
            ScheduleSpec::Sinusoidal { amplitude, frequency } => {
                TunnelingSchedule::Sinusoidal { amplitude, frequency }
            }
        }
    }
}

impl ParamSpec {
    pub fn build(&self, spacing: f64) -> Result<BhParams<f64>> {
        BhParams::new(self.j, self.u, self.mu, spacing, self.schedule.to_schedule())
    }
}

/// Mean-field initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    /// Uniform density, zero phase.
    Homogeneous { n: f64 },
    /// Uniform density with a constant phase step per site along axis 0
    /// (a uniform flow).
    PhaseRamp { n: f64, step: f64 },
    /// One-dimensional flow whose velocity ramps from `v_up` to `v_down`
    /// across `ramp_width` lattice spacings around the grid midpoint.
    StepFlow { n: f64, v_up: f64, v_down: f64, ramp_width: f64 },
    /// Resting density bump `n_ref + amplitude exp(-r^2 / (2 width^2))`
    /// centered in the grid (`width` in length units).
    GaussianBump { n_ref: f64, amplitude: f64, width: f64 },
}

impl InitialState {
    /// Reference density for validity warnings.
    pub fn reference_density(&self) -> f64 {
        match *self {
            InitialState::Homogeneous { n }
            | InitialState::PhaseRamp { n, .. }
            | InitialState::StepFlow { n, .. } => n,
            InitialState::GaussianBump { n_ref, .. } => n_ref,
        }
    }
}

/// Seed for the linearized fluctuation field (relative to the mean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FluctuationSeed {
    #[default]
    None,
    /// `db = amplitude exp(i k.x)` with `k` given as integer mode numbers.
    PlaneWave { modes: [i64; 3], amplitude: f64 },
    /// Density pulse `dn = amplitude exp(-r^2/(2 width^2))` at `center`
    /// (lattice coordinates; grid midpoint when omitted), converted to the
    /// relative fluctuation `db = dn/(2n)`.
    GaussianPulse {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
}

/// Integration settings; `dt` falls back to a quarter of the stability bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default)]
    pub method: MethodSpec,
    #[serde(default)]
    pub dt: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MethodSpec {
    #[default]
    Rk4,
    SemiImplicitSplit,
}

/// What the run writes, and how often time series are sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPlan {
    #[serde(default)]
    pub observables: Vec<Observable>,
    /// Record series every `stride` steps (step 0 included).
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub format: FileFormat,
}

fn default_stride() -> usize {
    1
}

impl Default for OutputPlan {
    fn default() -> Self {
        OutputPlan { observables: Vec::new(), stride: default_stride(), format: FileFormat::default() }
    }
}

/// Artifacts the run can emit. Profile and horizon observables evaluate the
/// state as it stands at the end of the run (a zero-step run diagnoses the
/// constructed initial state).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// `conservation.*`: step, t, total number, energy.
    Conservation,
    /// `state_final.*`: the complex mean (and fluctuation when present).
    FinalState,
    /// `hydro_final.*`: density, phase, velocity, speeds, Mach number.
    HydroProfile,
    /// `horizon.json` + `mach_profile.*` on the end-of-run state.
    Horizon,
    /// `metric_series.*`: metric entries at site 0 per sample.
    MetricSeries,
    /// `metric_initial.*` and `metric_final.*` full-grid dumps.
    MetricSnapshot,
    /// `perturbation_h.*`, `metric_sum.*`, `perturbation_check.json`:
    /// first-order split of a density bump against the flat reference.
    PerturbationMetric,
    /// `fluct_series.*`: sampled fluctuation field in density-phase form.
    FluctSeries,
    /// `dispersion.*`: measured vs predicted mode frequencies
    /// (requires the `dispersion` section).
    Dispersion,
}

/// Mode-projection settings for dispersion extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSpec {
    /// Integer mode triples to seed and track.
    pub modes: Vec<[i64; 3]>,
    /// Seed amplitude per mode.
    pub amplitude: f64,
    /// Record a projection sample every this many steps.
    pub sample_stride: usize,
}

/// Physical regime the scenario claims to sit in; drives validity warnings
/// and the metric kind tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Superfluid,
    Mott,
}

/// One complete simulation description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub grid: GridSpec,
    pub params: ParamSpec,
    pub initial_state: InitialState,
    #[serde(default)]
    pub fluctuation: FluctuationSeed,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub output: OutputPlan,
    pub regime: Regime,
    #[serde(default)]
    pub dispersion: Option<DispersionSpec>,
}

impl Scenario {
    /// Parse and validate a JSON configuration.
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("cannot parse scenario: {e}")))?;
        scenario.check()?;
        Ok(scenario)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("scenario serializes");
        text.push('\n');
        text
    }

    /// Hard validation: anything that makes the scenario unrunnable.
    pub fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} not supported (current: {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.is_empty() {
            return Err(Error::config("scenario name must not be empty"));
        }
        let grid = self.grid.build()?;
        self.params.build(self.grid.spacing)?;
        if let Some(dt) = self.integrator.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::config(format!("dt = {dt}, must be positive")));
            }
        }
        if self.output.stride == 0 {
            return Err(Error::config("output stride must be at least 1"));
        }
        match self.initial_state {
            InitialState::Homogeneous { n }
            | InitialState::PhaseRamp { n, .. }
            | InitialState::StepFlow { n, .. } => {
                if !(n > 0.0) {
                    return Err(Error::config(format!("filling n = {n}, must be positive")));
                }
            }
            InitialState::GaussianBump { n_ref, amplitude, width } => {
                if !(n_ref > 0.0) {
                    return Err(Error::config(format!("n_ref = {n_ref}, must be positive")));
                }
                if n_ref + amplitude <= 0.0 {
                    return Err(Error::config("bump amplitude empties the density"));
                }
                if !(width > 0.0) {
                    return Err(Error::config(format!("width = {width}, must be positive")));
                }
            }
        }
        if matches!(self.initial_state, InitialState::StepFlow { .. }) && grid.dims() != 1 {
            return Err(Error::config("step-flow initial state is one-dimensional"));
        }
        if let FluctuationSeed::GaussianPulse { center: Some(c), .. } = &self.fluctuation {
            if c.len() != grid.dims() {
                return Err(Error::config(format!(
                    "pulse center has {} coordinates for a {}-dimensional grid",
                    c.len(),
                    grid.dims()
                )));
            }
        }
        let wants_dispersion = self.output.observables.contains(&Observable::Dispersion);
        match (&self.dispersion, wants_dispersion) {
            (None, true) => {
                return Err(Error::config(
                    "dispersion observable requested without a dispersion section",
                ));
            }
            (Some(spec), _) => {
                if spec.modes.is_empty() {
                    return Err(Error::config("dispersion needs at least one mode"));
                }
                if spec.sample_stride == 0 {
                    return Err(Error::config("dispersion sample_stride must be at least 1"));
                }
                if !(spec.amplitude > 0.0) {
                    return Err(Error::config("dispersion amplitude must be positive"));
                }
            }
            _ => {}
        }
        let metricky = self
            .output
            .observables
            .iter()
            .any(|o| matches!(o, Observable::MetricSeries | Observable::MetricSnapshot));
        if metricky
            && matches!(self.params.schedule, ScheduleSpec::Sinusoidal { .. })
            && grid.dims() != 1
        {
            return Err(Error::config(
                "the oscillating-schedule metric is one-dimensional",
            ));
        }
        if self.output.observables.contains(&Observable::PerturbationMetric)
            && !matches!(self.initial_state, InitialState::GaussianBump { .. })
        {
            return Err(Error::config(
                "perturbation-metric observable needs the gaussian-bump initial state",
            ));
        }
        Ok(())
    }

    /// Soft validation: collect every regime and resolution warning.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ratio = self.params.u / self.params.j;
        match self.regime {
            Regime::Superfluid if ratio > 1.0 => out.push(format!(
                "regime superfluid expects U/J << 1, got U/J = {ratio}"
            )),
            Regime::Mott if ratio < 100.0 => {
                out.push(format!("regime mott expects U/J >> 1, got U/J = {ratio}"))
            }
            _ => {}
        }
        let n = self.initial_state.reference_density();
        if n < 10.0 {
            out.push(format!(
                "filling n = {n} is below 10; the large-filling limit degrades"
            ));
        }
        if let InitialState::PhaseRamp { step, .. } = self.initial_state {
            if self.grid.boundary == Boundary::Periodic {
                let total = step * self.grid.extents[0] as f64;
                let winding = total / std::f64::consts::TAU;
                if (winding - winding.round()).abs() > 1e-9 {
                    out.push(format!(
                        "phase ramp winds {winding} turns around the periodic axis; \
                         non-integer winding leaves a seam"
                    ));
                }
            }
        }
        if matches!(self.initial_state, InitialState::StepFlow { .. })
            && self.grid.boundary == Boundary::Periodic
        {
            out.push(
                "step-flow on a periodic grid has no return ramp; the seam will wind"
                    .to_string(),
            );
        }
        out
    }
}

/// Apply one `path=value` override to a scenario's JSON form. Paths use dots
/// for nesting and numeric segments for array indices
/// (`integrator.steps=500`, `grid.extents.0=128`). Values parse as JSON when
/// possible and fall back to strings.
pub fn apply_override(config: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{spec}' is not of the form key=value")))?;
    if path.is_empty() {
        return Err(Error::config("override path is empty"));
    }
    let new_value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));

    let mut cursor = config;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        match cursor {
            serde_json::Value::Object(map) => {
                if last {
                    map.insert((*seg).to_string(), new_value);
                    return Ok(());
                }
                cursor = map.get_mut(*seg).ok_or_else(|| {
                    Error::config(format!("override path '{path}' has no field '{seg}'"))
                })?;
            }
            serde_json::Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| {
                    Error::config(format!("override segment '{seg}' is not an array index"))
                })?;
                let slot = items.get_mut(idx).ok_or_else(|| {
                    Error::config(format!("override index {idx} is out of bounds in '{path}'"))
                })?;
                if last {
                    *slot = new_value;
                    return Ok(());
                }
                cursor = slot;
            }
            _ => {
                return Err(Error::config(format!(
                    "override path '{path}' descends into a scalar at '{seg}'"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "schema_version": 1,
            "name": "minimal",
            "grid": {"dims": 1, "extents": [64]},
            "params": {"J": 1.0, "U": 0.1},
            "initial_state": {"kind": "homogeneous", "n": 100.0},
            "integrator": {"steps": 10},
            "regime": "superfluid"
        }"#
        .to_string()
    }

    #[test]
    fn minimal_config_loads_with_defaults_and_no_warnings() {
        let s = Scenario::from_json(&minimal_json()).unwrap();
        assert_eq!(s.grid.spacing, 1.0);
        assert_eq!(s.grid.boundary, Boundary::Periodic);
        assert_eq!(s.params.mu, 0.0);
        assert_eq!(s.fluctuation, FluctuationSeed::None);
        assert!(s.integrator.dt.is_none());
        assert!(s.warnings().is_empty());
    }

    #[test]
    fn missing_interaction_strength_names_the_field() {
        let bad = minimal_json().replace(r#""U": 0.1"#, r#""mu": 0.0"#);
        let err = Scenario::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains('U'), "error was: {err}");
    }

    #[test]
    fn regime_mismatch_warns_but_loads() {
        let cfg = minimal_json().replace(r#""U": 0.1"#, r#""U": 50.0"#);
        let s = Scenario::from_json(&cfg).unwrap();
        let warnings = s.warnings();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("U/J"), "warning was: {}", warnings[0]);
    }

    #[test]
    fn low_filling_and_seam_configurations_warn() {
        let low = minimal_json().replace(r#""n": 100.0"#, r#""n": 5.0"#);
        let s = Scenario::from_json(&low).unwrap();
        assert!(s.warnings().iter().any(|w| w.contains("filling")));

        let ramp = minimal_json().replace(
            r#"{"kind": "homogeneous", "n": 100.0}"#,
            r#"{"kind": "phase-ramp", "n": 100.0, "step": 0.1}"#,
        );
        let s = Scenario::from_json(&ramp).unwrap();
        assert!(s.warnings().iter().any(|w| w.contains("seam")));
    }

    #[test]
    fn structural_errors_are_rejected() {
        let bad_version = minimal_json().replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(Scenario::from_json(&bad_version).is_err());

        let unknown_field = minimal_json().replace(r#""name""#, r#""unknown_knob": 1, "name""#);
        assert!(Scenario::from_json(&unknown_field).is_err());

        let zero_stride = {
            let mut s = Scenario::from_json(&minimal_json()).unwrap();
            s.output.stride = 0;
            s
        };
        assert!(zero_stride.check().is_err());

        let mut dispersionless = Scenario::from_json(&minimal_json()).unwrap();
        dispersionless.output.observables.push(Observable::Dispersion);
        assert!(dispersionless.check().is_err());
    }

    #[test]
    fn overrides_replace_nested_and_indexed_values() {
        let s = Scenario::from_json(&minimal_json()).unwrap();
        let mut v = serde_json::to_value(&s).unwrap();
        apply_override(&mut v, "integrator.steps=250").unwrap();
        apply_override(&mut v, "grid.extents.0=128").unwrap();
        apply_override(&mut v, "params.U=0.2").unwrap();
        let s2: Scenario = serde_json::from_value(v).unwrap();
        assert_eq!(s2.integrator.steps, 250);
        assert_eq!(s2.grid.extents, vec![128]);
        assert_eq!(s2.params.u, 0.2);

        let mut v = serde_json::to_value(&s).unwrap();
        assert!(apply_override(&mut v, "no_equals_sign").is_err());
        assert!(apply_override(&mut v, "grid.extents.7=1").is_err());
        assert!(apply_override(&mut v, "params.J.deep=1").is_err());
    }
}
