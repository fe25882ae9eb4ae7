use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The supply voltage does not exceed the (temperature-adjusted) threshold.
    #[error("supply {volts} V is not above threshold {v_th} V at {temperature_c} °C")]
    VoltageBelowThreshold {
        volts: f64,
        v_th: f64,
        temperature_c: f64,
    },

    #[error("temperature {temperature_c} °C drives the delay coefficient non-positive")]
    TemperatureOutOfRange { temperature_c: f64 },

    #[error("invalid technology parameters: {0}")]
    InvalidTechnology(String),

    #[error("invalid variation model: {0}")]
    InvalidVariation(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    /// Two supply levels are closer than the half-sum of their ripple.
    #[error(
        "voltage spacing violated: |Vdd_{i} - Vdd_{j}| = {spacing:.4} V must exceed (VAR_{i} + VAR_{j})/2 = {required:.4} V"
    )]
    LevelSpacing {
        i: usize,
        j: usize,
        spacing: f64,
        required: f64,
    },

    #[error("invalid measurement settings: {0}")]
    InvalidMeasurement(String),

    #[error("malformed challenge {input:?}: {reason}")]
    ChallengeParse { input: String, reason: String },

    #[error("{what} index {index} out of range (must be < {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("pair {a}-{b} is not canonical (first index must be smaller)")]
    NonCanonicalPair { a: usize, b: usize },

    #[error("configuration has {found} columns, topology has {expected}")]
    ConfigLength { expected: usize, found: usize },

    #[error("topology mismatch: expected {expected}, found {found}")]
    TopologyMismatch { expected: String, found: String },

    #[error("packed table has {found} bits, expected {expected}")]
    TableLength { expected: u64, found: u64 },

    #[error("config table is incomplete: {missing} pair(s) missing")]
    IncompleteTable { missing: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error comes from malformed input text rather than a
    /// violated domain invariant.
    pub fn is_parse_error(&self) -> bool {
        matches!(self, Error::ChallengeParse { .. } | Error::Json(_))
    }
}
