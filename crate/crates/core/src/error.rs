//! Crate-wide error type. Variants map one-to-one onto the failure modes of
//! the public operations; sites are reported as flat indices.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Two fields (or a field and a grid) disagree on shape, spacing, or boundary.
    #[error("grid mismatch: {context}")]
    GridMismatch { context: String },

    #[error("grid is invalid: {context}")]
    BadGrid { context: String },

    /// A field value is NaN or infinite; `site` is the first offending flat index.
    #[error("non-finite value in {what} at site {site}")]
    NonFinite { what: &'static str, site: usize },

    /// Density-phase decomposition hit an (almost) empty site.
    #[error("vacuum site {site}: |b| = {amplitude:e} below the 1e-12 floor")]
    VacuumSite { site: usize, amplitude: f64 },

    /// Neighbouring phases differ by more than the unwrap guard; the winding
    /// is too fast for the lattice to represent without aliasing.
    #[error("phase step {step} rad at site {site} exceeds the unwrap guard {guard}")]
    PhaseWinding { site: usize, step: f64, guard: f64 },

    /// A time-derivative diagnostic needs more stored history levels.
    #[error("history holds {available} levels, {needed} needed")]
    InsufficientHistory { needed: usize, available: usize },

    /// Integration aborted: state became non-finite. The caller keeps the
    /// last good state (step functions only commit finite results).
    #[error("numeric abort at step {step}, t = {t}: {context}")]
    NumericAbort { step: usize, t: f64, context: String },

    /// Metric constructor called under the wrong tunneling schedule.
    #[error("schedule mismatch: {context}")]
    ScheduleMismatch { context: String },

    /// Metric block cannot be inverted at this site.
    #[error("degenerate metric at site {site}: det = {det:e}")]
    Degenerate { site: usize, det: f64 },

    #[error("unsupported configuration: {context}")]
    Unsupported { context: String },

    /// Spectral fit could not isolate a dominant peak.
    #[error("dispersion extraction failed: {context}")]
    Extraction { context: String },

    /// Scenario file or parameter set rejected during validation.
    #[error("configuration error: {context}")]
    Config { context: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn grid(context: impl Into<String>) -> Self {
        Error::GridMismatch { context: context.into() }
    }

    /// Configuration error with a free-form context line.
    pub fn config(context: impl Into<String>) -> Self {
        Error::Config { context: context.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
