//! Simulation and metrics for multi-voltage ring-oscillator PUFs.
//!
//! Virtual chips are sampled with hierarchical Gaussian process variation
//! ([`device`]), ring-oscillator delays follow the alpha power law under a
//! per-column supply configuration ([`puf`]), and the response bit compares
//! two oscillation counts. On top of that sit inter-chip uniqueness and
//! reliability metrics ([`metrics`]), the temperature-aware configuration
//! memory ([`temp_aware`]) and a gate-equivalent area model ([`area`]).

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod area;
pub mod device;
pub mod error;
pub mod metrics;
pub mod puf;
pub mod temp_aware;

pub use area::{AreaConstants, AreaReport, PufVariant, SweepGrid};
pub use device::{
    alpha_law_delay, sample_chip, voltage_scale_factor, ChipInstance, InverterDevice,
    TechnologyParams, VariationModel,
};
pub use error::{Error, Result};
pub use metrics::{DeltaSweep, UniquenessReport};
pub use puf::{
    enumerate_challenges, enumerate_configs, respond, ro_delay, Challenge, MeasurementSettings,
    PufTopology, Response, VoltageConfiguration,
};
pub use temp_aware::{BitString, ConfigTable, StabilityProfile};
