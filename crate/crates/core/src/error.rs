use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad error classes, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Input rejected before any computation started.
    Validation,
    /// A numerical guard refused to run (aliasing, wrap-around, degenerate data).
    Numerical,
    /// File system or field-file decoding failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    #[error("ring of outer radius {needed_m:.4e} m (R + 3w) does not fit in a window of half-width {half_window_m:.4e} m")]
    RingTooLarge { needed_m: f64, half_window_m: f64 },

    #[error("rings {inner} and {outer} are {spacing_m:.4e} m apart, need more than {required_m:.4e} m (set waive_spacing to allow)")]
    SpacingViolation {
        inner: usize,
        outer: usize,
        spacing_m: f64,
        required_m: f64,
    },

    #[error("equal vortex charges ({charge}) give no isolated singularities")]
    EqualCharge { charge: i32 },

    #[error("fringe period {period_m:.4e} m is under-sampled (minimum {min_period_m:.4e} m = 4 dx)")]
    Aliasing { period_m: f64, min_period_m: f64 },

    #[error("diffusion length {length_m:.4e} m exceeds a quarter of the {window_m:.4e} m window")]
    WrapAround { length_m: f64, window_m: f64 },

    #[error("storage time {time_s:.4e} s: {source}")]
    AtTime {
        time_s: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("grids differ: {0}")]
    GridMismatch(String),

    #[error("center ({x_m:.4e}, {y_m:.4e}) m lies outside the field window")]
    CenterOutsideWindow { x_m: f64, y_m: f64 },

    #[error("circle of radius {radius_m:.4e} m does not fit inside the field window")]
    CircleOutsideWindow { radius_m: f64 },

    #[error("profile has no unique interior maximum")]
    NoUniquePeak,

    #[error("profile does not cross half maximum on the {side} side of the peak")]
    HalfMaxNotCrossed { side: &'static str },

    #[error("circle of radius {radius_m:.4e} m passes through a near-zero of the field")]
    CircleThroughZero { radius_m: f64 },

    #[error("field has zero power")]
    ZeroPower,

    #[error("angular-spectrum band limit violated: {0}")]
    BandLimit(String),

    #[error("image has no dominant lobe: {0}")]
    NoDominantLobe(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("not an MPOVF1 field file (magic {found:?})")]
    BadMagic { found: [u8; 8] },

    #[error("field file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("field file holds a non-finite value at sample {index}")]
    NonFinite { index: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn validation(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            what,
            reason: reason.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Validation { .. }
            | Error::RingTooLarge { .. }
            | Error::SpacingViolation { .. }
            | Error::EqualCharge { .. }
            | Error::GridMismatch(_)
            | Error::CenterOutsideWindow { .. }
            | Error::CircleOutsideWindow { .. } => ErrorClass::Validation,
            Error::Aliasing { .. }
            | Error::WrapAround { .. }
            | Error::NoUniquePeak
            | Error::HalfMaxNotCrossed { .. }
            | Error::CircleThroughZero { .. }
            | Error::ZeroPower
            | Error::BandLimit(_)
            | Error::NoDominantLobe(_)
            | Error::DegenerateInput(_) => ErrorClass::Numerical,
            Error::AtTime { source, .. } => source.class(),
            Error::BadMagic { .. } | Error::Truncated { .. } | Error::NonFinite { .. } | Error::Io(_) => {
                ErrorClass::Io
            }
        }
    }
}
