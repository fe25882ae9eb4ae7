//! Gate-equivalent area accounting for original and multi-voltage RO-PUFs.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::challenge_space;
use crate::puf::PufTopology;

/// Per-cell area constants in gate equivalents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaConstants {
    pub ge_inverter: f64,
    pub ge_counter_per_bit: f64,
    pub ge_comparator_per_bit: f64,
    pub ge_mux_per_input: f64,
    /// One PMOS supply switch.
    pub ge_switch: f64,
    pub buffer_inverters_per_ro: usize,
    pub counter_bits: usize,
}

impl Default for AreaConstants {
    fn default() -> Self {
        Self {
            ge_inverter: 0.75,
            ge_counter_per_bit: 2.0,
            ge_comparator_per_bit: 0.75,
            ge_mux_per_input: 0.5,
            ge_switch: 0.5,
            buffer_inverters_per_ro: 2,
            counter_bits: 8,
        }
    }
}

impl AreaConstants {
    pub fn zero() -> Self {
        Self {
            ge_inverter: 0.0,
            ge_counter_per_bit: 0.0,
            ge_comparator_per_bit: 0.0,
            ge_mux_per_input: 0.0,
            ge_switch: 0.0,
            buffer_inverters_per_ro: 0,
            counter_bits: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PufVariant {
    /// Single supply, no switches; one bit per RO pair.
    Original,
    /// Per-column selectable supplies; L^C bits per RO pair.
    MultiVoltage,
}

/// Ring oscillators (with output buffers), two counters, the comparator and,
/// for R > 2, the two R-input multiplexers.
pub fn base_area(topology: &PufTopology, constants: &AreaConstants, has_muxes: bool) -> f64 {
    let r = topology.r_oscillators() as f64;
    let i = topology.inverters_per_ro() as f64;
    let bits = constants.counter_bits as f64;
    let mut ge = r * i * constants.ge_inverter
        + r * constants.buffer_inverters_per_ro as f64 * constants.ge_inverter
        + 2.0 * bits * constants.ge_counter_per_bit
        + bits * constants.ge_comparator_per_bit;
    if has_muxes && topology.r_oscillators() > 2 {
        ge += 2.0 * r * constants.ge_mux_per_input;
    }
    ge
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchOverhead {
    pub switch_ge: f64,
    pub overhead_percent: f64,
}

/// One switch per level per global column: `L·C·ge_switch`, relative to the
/// base area (multiplexers included when R > 2).
pub fn switch_overhead(topology: &PufTopology, constants: &AreaConstants) -> SwitchOverhead {
    let switch_ge = (topology.l_levels() * topology.c_columns()) as f64 * constants.ge_switch;
    let base = base_area(topology, constants, true);
    SwitchOverhead {
        switch_ge,
        overhead_percent: switch_ge / base * 100.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub variant: PufVariant,
    pub r_oscillators: usize,
    pub inverters_per_ro: usize,
    pub c_columns: usize,
    pub l_levels: usize,
    pub base_ge: f64,
    pub switch_ge: f64,
    pub total_ge: f64,
    pub overhead_percent: f64,
    #[serde(with = "biguint_string")]
    pub max_output_bits: BigUint,
    pub bits_per_ge: f64,
    pub constants: AreaConstants,
}

mod biguint_string {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Area, switch overhead and maximum output bits per GE.
///
/// The original variant ignores the topology's columns and levels: it has
/// no switches and yields R(R−1)/2 bits.
pub fn bits_per_area(
    topology: &PufTopology,
    constants: &AreaConstants,
    variant: PufVariant,
) -> AreaReport {
    let base_ge = base_area(topology, constants, true);
    let (switch_ge, max_output_bits, c, l) = match variant {
        PufVariant::Original => (0.0, BigUint::from(topology.pair_count()), 1, 1),
        PufVariant::MultiVoltage => (
            switch_overhead(topology, constants).switch_ge,
            challenge_space(topology),
            topology.c_columns(),
            topology.l_levels(),
        ),
    };
    let total_ge = base_ge + switch_ge;
    let bits_f = max_output_bits.to_f64().unwrap_or(f64::INFINITY);
    AreaReport {
        variant,
        r_oscillators: topology.r_oscillators(),
        inverters_per_ro: topology.inverters_per_ro(),
        c_columns: c,
        l_levels: l,
        base_ge,
        switch_ge,
        total_ge,
        overhead_percent: switch_ge / base_ge * 100.0,
        max_output_bits,
        bits_per_ge: bits_f / total_ge,
        constants: *constants,
    }
}

/// Parameter grids for area and bit-count sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepGrid {
    /// Original RO-PUF, 11 inverters per RO, 2 ≤ R ≤ 30.
    OriginalByR,
    /// Multi-voltage, I = C = 11, L = 3, 2 ≤ R ≤ 30.
    MultiByR,
    /// Original RO-PUF, R = 20, I ∈ {3, 5, …, 19}.
    OriginalByI,
    /// Multi-voltage, R = 20, L = 3, I = C ∈ {3, 5, …, 19}.
    MultiByI,
    /// Multi-voltage, L = 3, 2 ≤ R ≤ 30, I = C ∈ {3, 5, …, 19}.
    Overhead,
    /// Same grid as `Overhead`, used for bits per GE. L = 3 is an assumption here.
    BitsPerArea,
}

impl SweepGrid {
    pub const ALL: [SweepGrid; 6] = [
        SweepGrid::OriginalByR,
        SweepGrid::MultiByR,
        SweepGrid::OriginalByI,
        SweepGrid::MultiByI,
        SweepGrid::Overhead,
        SweepGrid::BitsPerArea,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepGrid::OriginalByR => "original-by-r",
            SweepGrid::MultiByR => "multi-by-r",
            SweepGrid::OriginalByI => "original-by-i",
            SweepGrid::MultiByI => "multi-by-i",
            SweepGrid::Overhead => "overhead",
            SweepGrid::BitsPerArea => "bits-per-area",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }

    /// `(variant, R, I, C, L)` points in output order.
    pub fn points(self) -> Vec<(PufVariant, usize, usize, usize, usize)> {
        use PufVariant::*;
        let odd_i = (3..=19).step_by(2);
        match self {
            SweepGrid::OriginalByR => (2..=30).map(|r| (Original, r, 11, 1, 1)).collect(),
            SweepGrid::MultiByR => (2..=30).map(|r| (MultiVoltage, r, 11, 11, 3)).collect(),
            SweepGrid::OriginalByI => odd_i.map(|i| (Original, 20, i, 1, 1)).collect(),
            SweepGrid::MultiByI => odd_i.map(|i| (MultiVoltage, 20, i, i, 3)).collect(),
            SweepGrid::Overhead | SweepGrid::BitsPerArea => (2..=30)
                .flat_map(|r| (3..=19).step_by(2).map(move |i| (MultiVoltage, r, i, i, 3)))
                .collect(),
        }
    }

    pub fn note(self) -> Option<&'static str> {
        match self {
            SweepGrid::BitsPerArea => Some("L = 3 assumed (not stated for this sweep)"),
            _ => None,
        }
    }
}

pub fn sweep(grid: SweepGrid, constants: &AreaConstants) -> Result<Vec<AreaReport>> {
    grid.points()
        .into_iter()
        .map(|(variant, r, i, c, l)| {
            let topo = PufTopology::with_default_levels(r, i, c, l)?;
            Ok(bits_per_area(&topo, constants, variant))
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "R,I,C,L,base_ge,switch_ge,overhead_pct,max_bits,bits_per_ge";

pub fn sweep_csv(reports: &[AreaReport]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.r_oscillators,
            r.inverters_per_ro,
            r.c_columns,
            r.l_levels,
            r.base_ge,
            r.switch_ge,
            r.overhead_percent,
            r.max_output_bits,
            r.bits_per_ge
        );
    }
    out
}

/// Aligned text table, preceded by the constants used.
pub fn text_table(reports: &[AreaReport], constants: &AreaConstants) -> String {
    let mut out = format!(
        "# constants: inverter {} GE, counter {} GE/bit x {} bits, comparator {} GE/bit, mux {} GE/input, switch {} GE, {} buffer inverters/RO\n",
        constants.ge_inverter,
        constants.ge_counter_per_bit,
        constants.counter_bits,
        constants.ge_comparator_per_bit,
        constants.ge_mux_per_input,
        constants.ge_switch,
        constants.buffer_inverters_per_ro
    );
    let _ = writeln!(
        out,
        "{:<13} {:>4} {:>4} {:>4} {:>3} {:>10} {:>10} {:>10} {:>10} {:>22} {:>12}",
        "variant",
        "R",
        "I",
        "C",
        "L",
        "base_ge",
        "switch_ge",
        "total_ge",
        "overhead%",
        "max_bits",
        "bits/GE"
    );
    for r in reports {
        let variant = match r.variant {
            PufVariant::Original => "original",
            PufVariant::MultiVoltage => "multi-voltage",
        };
        let _ = writeln!(
            out,
            "{:<13} {:>4} {:>4} {:>4} {:>3} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>22} {:>12.4e}",
            variant,
            r.r_oscillators,
            r.inverters_per_ro,
            r.c_columns,
            r.l_levels,
            r.base_ge,
            r.switch_ge,
            r.total_ge,
            r.overhead_percent,
            r.max_output_bits,
            r.bits_per_ge
        );
    }
    out
}
