//! Multi-voltage RO-PUF structure, ring-oscillator delays, the
//! counter/comparator measurement and response bits.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::device::{alpha_law_delay, ChipInstance, TechnologyParams};
use crate::error::{Error, Result};

/// Symbols used for level indices in the text form of a configuration.
const LEVEL_DIGITS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// Default supply ripple per level, in volts.
pub const DEFAULT_LEVEL_VARIATION: f64 = 0.05;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyRecord {
    r_oscillators: usize,
    inverters_per_ro: usize,
    c_columns: usize,
    #[serde(default)]
    column_of_inverter: Option<Vec<usize>>,
    voltage_levels: Vec<f64>,
    level_variation: Vec<f64>,
}

/// R ring oscillators of I inverters each, split into C global columns that
/// can each be switched to one of L supply levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyRecord", into = "TopologyRecord")]
pub struct PufTopology {
    r_oscillators: usize,
    inverters_per_ro: usize,
    c_columns: usize,
    column_of_inverter: Vec<usize>,
    voltage_levels: Vec<f64>,
    level_variation: Vec<f64>,
    default_assignment: bool,
}

impl TryFrom<TopologyRecord> for PufTopology {
    type Error = Error;

    fn try_from(r: TopologyRecord) -> Result<Self> {
        PufTopology::new(
            r.r_oscillators,
            r.inverters_per_ro,
            r.c_columns,
            r.column_of_inverter,
            r.voltage_levels,
            r.level_variation,
        )
    }
}

impl From<PufTopology> for TopologyRecord {
    fn from(t: PufTopology) -> Self {
        TopologyRecord {
            r_oscillators: t.r_oscillators,
            inverters_per_ro: t.inverters_per_ro,
            c_columns: t.c_columns,
            column_of_inverter: (!t.default_assignment).then_some(t.column_of_inverter),
            voltage_levels: t.voltage_levels,
            level_variation: t.level_variation,
        }
    }
}

/// Supply levels spaced 120 mV apart around 1.2 V.
///
/// L = 2 gives {1.2, 1.32}, L = 3 gives {1.08, 1.2, 1.32}, L = 4 adds 1.44.
pub fn default_levels(levels: usize) -> Vec<f64> {
    let nominal = levels.saturating_sub(1) / 2;
    (0..levels)
        .map(|j| (1200 + 120 * (j as i64 - nominal as i64)) as f64 / 1000.0)
        .collect()
}

impl PufTopology {
    /// Validates and builds a topology. When `column_of_inverter` is `None`
    /// inverter position `j` goes to column `j mod C`.
    pub fn new(
        r_oscillators: usize,
        inverters_per_ro: usize,
        c_columns: usize,
        column_of_inverter: Option<Vec<usize>>,
        voltage_levels: Vec<f64>,
        level_variation: Vec<f64>,
    ) -> Result<Self> {
        if r_oscillators < 2 {
            return Err(Error::InvalidTopology(format!(
                "need at least 2 ring oscillators, got {r_oscillators}"
            )));
        }
        if inverters_per_ro.is_multiple_of(2) {
            return Err(Error::InvalidTopology(format!(
                "inverters per RO must be odd, got {inverters_per_ro}"
            )));
        }
        if c_columns == 0 || c_columns > inverters_per_ro {
            return Err(Error::InvalidTopology(format!(
                "columns must satisfy 1 <= C <= I, got C = {c_columns}, I = {inverters_per_ro}"
            )));
        }
        let default_assignment = column_of_inverter.is_none();
        let column_of_inverter = column_of_inverter
            .unwrap_or_else(|| (0..inverters_per_ro).map(|j| j % c_columns).collect());
        if column_of_inverter.len() != inverters_per_ro {
            return Err(Error::InvalidTopology(format!(
                "column map has {} entries for {} inverters",
                column_of_inverter.len(),
                inverters_per_ro
            )));
        }
        let mut sizes = vec![0usize; c_columns];
        for &col in &column_of_inverter {
            if col >= c_columns {
                return Err(Error::IndexOutOfRange {
                    what: "column",
                    index: col,
                    bound: c_columns,
                });
            }
            sizes[col] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidTopology(format!(
                "column {empty} has no inverters"
            )));
        }

        if voltage_levels.is_empty() {
            return Err(Error::InvalidTopology(
                "need at least one voltage level".into(),
            ));
        }
        if voltage_levels.len() > LEVEL_DIGITS.len() {
            return Err(Error::InvalidTopology(format!(
                "at most {} voltage levels are supported",
                LEVEL_DIGITS.len()
            )));
        }
        if level_variation.len() != voltage_levels.len() {
            return Err(Error::InvalidTopology(format!(
                "{} level variations for {} levels",
                level_variation.len(),
                voltage_levels.len()
            )));
        }
        if voltage_levels.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidTopology(
                "voltage levels must be positive".into(),
            ));
        }
        if level_variation
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::InvalidTopology(
                "level variations must be >= 0".into(),
            ));
        }
        if voltage_levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTopology(
                "voltage levels must be strictly increasing".into(),
            ));
        }
        for i in 0..voltage_levels.len() {
            for j in i + 1..voltage_levels.len() {
                let spacing = (voltage_levels[i] - voltage_levels[j]).abs();
                let required = (level_variation[i] + level_variation[j]) / 2.0;
                if !(spacing > required) {
                    return Err(Error::LevelSpacing {
                        i: i + 1,
                        j: j + 1,
                        spacing,
                        required,
                    });
                }
            }
        }

        Ok(Self {
            r_oscillators,
            inverters_per_ro,
            c_columns,
            column_of_inverter,
            voltage_levels,
            level_variation,
            default_assignment,
        })
    }

    /// Default column assignment, [`default_levels`] and 50 mV ripple.
    pub fn with_default_levels(
        r_oscillators: usize,
        inverters_per_ro: usize,
        c_columns: usize,
        levels: usize,
    ) -> Result<Self> {
        Self::new(
            r_oscillators,
            inverters_per_ro,
            c_columns,
            None,
            default_levels(levels),
            vec![DEFAULT_LEVEL_VARIATION; levels],
        )
    }

    pub fn r_oscillators(&self) -> usize {
        self.r_oscillators
    }

    pub fn inverters_per_ro(&self) -> usize {
        self.inverters_per_ro
    }

    pub fn c_columns(&self) -> usize {
        self.c_columns
    }

    pub fn l_levels(&self) -> usize {
        self.voltage_levels.len()
    }

    pub fn voltage_levels(&self) -> &[f64] {
        &self.voltage_levels
    }

    pub fn level_variation(&self) -> &[f64] {
        &self.level_variation
    }

    pub fn column_of(&self, inverter: usize) -> usize {
        self.column_of_inverter[inverter]
    }

    pub fn column_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.c_columns];
        for &c in &self.column_of_inverter {
            sizes[c] += 1;
        }
        sizes
    }

    /// Number of unordered RO pairs, R(R−1)/2.
    pub fn pair_count(&self) -> usize {
        self.r_oscillators * (self.r_oscillators - 1) / 2
    }

    /// All canonical pairs `(a, b)` with `a < b`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let r = self.r_oscillators;
        (0..r).flat_map(move |a| (a + 1..r).map(move |b| (a, b)))
    }

    /// Identifier stored in chip files so chips can be matched to topologies.
    pub fn reference(&self) -> String {
        let mv: Vec<String> = self
            .voltage_levels
            .iter()
            .map(|v| format!("{}", (v * 1000.0).round() as i64))
            .collect();
        let mut s = format!(
            "R{}xI{}-C{}-L{}@{}mV",
            self.r_oscillators,
            self.inverters_per_ro,
            self.c_columns,
            self.voltage_levels.len(),
            mv.join(",")
        );
        if !self.default_assignment {
            let map: Vec<String> = self
                .column_of_inverter
                .iter()
                .map(|c| c.to_string())
                .collect();
            s.push_str(&format!("-map{}", map.join(".")));
        }
        s
    }

    /// Index of the level closest to `v_nominal` (ties go to the lower one).
    pub fn nominal_level(&self, v_nominal: f64) -> usize {
        let mut best = 0;
        for (i, v) in self.voltage_levels.iter().enumerate() {
            if (v - v_nominal).abs() < (self.voltage_levels[best] - v_nominal).abs() {
                best = i;
            }
        }
        best
    }

    /// Configuration with every column on `level`.
    pub fn uniform_config(&self, level: usize) -> VoltageConfiguration {
        VoltageConfiguration::new(vec![level; self.c_columns])
    }

    /// The exact number of configurations, L^C.
    pub fn config_count(&self) -> BigUint {
        BigUint::from(self.l_levels()).pow(self.c_columns as u32)
    }

    pub fn check_ro(&self, ro: usize) -> Result<()> {
        if ro >= self.r_oscillators {
            return Err(Error::IndexOutOfRange {
                what: "ring oscillator",
                index: ro,
                bound: self.r_oscillators,
            });
        }
        Ok(())
    }

    pub fn check_config(&self, config: &VoltageConfiguration) -> Result<()> {
        if config.len() != self.c_columns {
            return Err(Error::ConfigLength {
                expected: self.c_columns,
                found: config.len(),
            });
        }
        if let Some(&bad) = config.levels().iter().find(|&&l| l >= self.l_levels()) {
            return Err(Error::IndexOutOfRange {
                what: "voltage level",
                index: bad,
                bound: self.l_levels(),
            });
        }
        Ok(())
    }
}

/// One level index per column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoltageConfiguration(Vec<usize>);

impl VoltageConfiguration {
    pub fn new(level_index_per_column: Vec<usize>) -> Self {
        Self(level_index_per_column)
    }

    pub fn levels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn level(&self, column: usize) -> usize {
        self.0[column]
    }
}

impl fmt::Display for VoltageConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &l in &self.0 {
            let ch = LEVEL_DIGITS.get(l).copied().unwrap_or(b'?');
            write!(f, "{}", ch as char)?;
        }
        Ok(())
    }
}

impl FromStr for VoltageConfiguration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |reason: String| Error::ChallengeParse {
            input: s.to_string(),
            reason,
        };
        if s.is_empty() {
            return Err(parse_err("empty voltage configuration".into()));
        }
        s.bytes()
            .map(|b| {
                let lower = b.to_ascii_lowercase();
                LEVEL_DIGITS
                    .iter()
                    .position(|&d| d == lower)
                    .ok_or_else(|| parse_err(format!("invalid level symbol {:?}", b as char)))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl Serialize for VoltageConfiguration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VoltageConfiguration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A pair of ROs plus a voltage configuration, text form `a-b:v1v2…vC`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Challenge {
    pub ro_a: usize,
    pub ro_b: usize,
    pub config: VoltageConfiguration,
}

impl Challenge {
    pub fn new(ro_a: usize, ro_b: usize, config: VoltageConfiguration) -> Result<Self> {
        if ro_a >= ro_b {
            return Err(Error::NonCanonicalPair { a: ro_a, b: ro_b });
        }
        Ok(Self { ro_a, ro_b, config })
    }

    pub fn validate(&self, topology: &PufTopology) -> Result<()> {
        if self.ro_a >= self.ro_b {
            return Err(Error::NonCanonicalPair {
                a: self.ro_a,
                b: self.ro_b,
            });
        }
        topology.check_ro(self.ro_b)?;
        topology.check_config(&self.config)
    }
}

impl fmt::Display for Challenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}:{}", self.ro_a, self.ro_b, self.config)
    }
}

/// Parses `a-b` into two indices.
pub fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let err = |reason: &str| Error::ChallengeParse {
        input: s.to_string(),
        reason: reason.to_string(),
    };
    let (a, b) = s
        .trim()
        .split_once('-')
        .ok_or_else(|| err("expected 'a-b'"))?;
    let a = a
        .parse()
        .map_err(|_| err("first RO index is not a number"))?;
    let b = b
        .parse()
        .map_err(|_| err("second RO index is not a number"))?;
    Ok((a, b))
}

impl FromStr for Challenge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (pair, config) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::ChallengeParse {
                input: s.to_string(),
                reason: "expected 'a-b:levels'".into(),
            })?;
        let (a, b) = parse_pair(pair)?;
        Challenge::new(a, b, config.parse()?)
    }
}

impl Serialize for Challenge {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Challenge {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Counter/comparator measurement parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    /// Comparison interval in seconds.
    pub compare_time: f64,
    pub counter_bits: u32,
    /// Relative per-measurement delay noise.
    pub jitter_sigma: f64,
    pub temperature: f64,
}

impl Default for MeasurementSettings {
    fn default() -> Self {
        Self {
            compare_time: 10e-6,
            counter_bits: 16,
            jitter_sigma: 1e-3,
            temperature: 25.0,
        }
    }
}

impl MeasurementSettings {
    /// Default settings with the jitter switched off.
    pub fn noise_free() -> Self {
        Self {
            jitter_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn at_temperature(self, temperature: f64) -> Self {
        Self {
            temperature,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.compare_time > 0.0 && self.compare_time.is_finite()) {
            return Err(Error::InvalidMeasurement("compare_time must be > 0".into()));
        }
        if self.counter_bits == 0 {
            return Err(Error::InvalidMeasurement(
                "counter_bits must be >= 1".into(),
            ));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::InvalidMeasurement(
                "jitter_sigma must be >= 0".into(),
            ));
        }
        if !self.temperature.is_finite() {
            return Err(Error::InvalidMeasurement(
                "temperature must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn counter_max(&self) -> u64 {
        if self.counter_bits >= 64 {
            u64::MAX
        } else {
            (1u64 << self.counter_bits) - 1
        }
    }
}

/// Result of one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub bit: u8,
    /// Set when both counters ended on the same value.
    pub unstable: bool,
    pub count_a: u64,
    pub count_b: u64,
}

/// Total loop delay of one RO under `config`: the sum of its inverter delays.
pub fn ro_delay(
    chip: &ChipInstance,
    ro: usize,
    config: &VoltageConfiguration,
    topology: &PufTopology,
    tech: &TechnologyParams,
    temperature: f64,
) -> Result<f64> {
    topology.check_ro(ro)?;
    topology.check_config(config)?;
    let devices = chip.devices.get(ro).ok_or(Error::IndexOutOfRange {
        what: "ring oscillator",
        index: ro,
        bound: chip.devices.len(),
    })?;
    if devices.len() != topology.inverters_per_ro() {
        return Err(Error::TopologyMismatch {
            expected: format!("{} inverters", topology.inverters_per_ro()),
            found: format!("{} inverters", devices.len()),
        });
    }
    let mut total = 0.0;
    for (j, dev) in devices.iter().enumerate() {
        let volts = topology.voltage_levels[config.level(topology.column_of(j))];
        total += alpha_law_delay(dev.d_base, volts, temperature, tech, dev.kappa)?;
    }
    Ok(total)
}

/// Counts full oscillation periods within the comparison interval.
pub fn count_oscillations<R: Rng + ?Sized>(
    delay: f64,
    settings: &MeasurementSettings,
    rng: &mut R,
) -> u64 {
    debug_assert!(delay > 0.0);
    let mut effective = delay;
    if settings.jitter_sigma > 0.0 {
        let noise = Normal::new(0.0, settings.jitter_sigma).expect("validated sigma");
        effective = loop {
            let d = delay * (1.0 + noise.sample(rng));
            if d > 0.0 {
                break d;
            }
        };
    }
    // Absorb the last-ulp error of the division so exact multiples are counted.
    let periods = (settings.compare_time / effective) * (1.0 + 4.0 * f64::EPSILON);
    let max = settings.counter_max();
    if periods >= max as f64 {
        max
    } else {
        periods.floor() as u64
    }
}

fn decide(count_a: u64, count_b: u64) -> Response {
    let (bit, unstable) = match count_a.cmp(&count_b) {
        std::cmp::Ordering::Greater => (0, false),
        std::cmp::Ordering::Less => (1, false),
        std::cmp::Ordering::Equal => (1, true),
    };
    Response {
        bit,
        unstable,
        count_a,
        count_b,
    }
}

/// Compares two ROs without enforcing the canonical `a < b` ordering.
#[allow(clippy::too_many_arguments)]
pub fn respond_pair<R: Rng + ?Sized>(
    chip: &ChipInstance,
    ro_a: usize,
    ro_b: usize,
    config: &VoltageConfiguration,
    topology: &PufTopology,
    tech: &TechnologyParams,
    settings: &MeasurementSettings,
    rng: &mut R,
) -> Result<Response> {
    settings.validate()?;
    let d_a = ro_delay(chip, ro_a, config, topology, tech, settings.temperature)?;
    let d_b = ro_delay(chip, ro_b, config, topology, tech, settings.temperature)?;
    let count_a = count_oscillations(d_a, settings, rng);
    let count_b = count_oscillations(d_b, settings, rng);
    Ok(decide(count_a, count_b))
}

/// 0 when the first RO counts more (is faster), 1 when it counts fewer.
/// Equal counts give 1 with `unstable` set.
pub fn respond<R: Rng + ?Sized>(
    chip: &ChipInstance,
    challenge: &Challenge,
    topology: &PufTopology,
    tech: &TechnologyParams,
    settings: &MeasurementSettings,
    rng: &mut R,
) -> Result<Response> {
    challenge.validate(topology)?;
    respond_pair(
        chip,
        challenge.ro_a,
        challenge.ro_b,
        &challenge.config,
        topology,
        tech,
        settings,
        rng,
    )
}

/// [`respond`] with a generator derived from the chip seed, the challenge and
/// the measurement index, so results do not depend on evaluation order.
pub fn respond_seeded(
    chip: &ChipInstance,
    challenge: &Challenge,
    topology: &PufTopology,
    tech: &TechnologyParams,
    settings: &MeasurementSettings,
    measurement: u64,
) -> Result<Response> {
    let mut rng = ChaCha8Rng::seed_from_u64(measurement_seed(chip.seed, challenge, measurement));
    respond(chip, challenge, topology, tech, settings, &mut rng)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed for one measurement of one challenge on one chip.
pub fn measurement_seed(chip_seed: u64, challenge: &Challenge, measurement: u64) -> u64 {
    let mut h = splitmix64(chip_seed);
    let mut absorb = |x: u64| h = splitmix64(h ^ x);
    absorb(challenge.ro_a as u64);
    absorb(challenge.ro_b as u64);
    absorb(challenge.config.len() as u64);
    for &l in challenge.config.levels() {
        absorb(l as u64);
    }
    absorb(measurement);
    h
}

/// Noise-free comparison of two loop delays; `None` on an exact tie.
pub fn ideal_bit(delay_a: f64, delay_b: f64) -> Option<u8> {
    if delay_a < delay_b {
        Some(0)
    } else if delay_a > delay_b {
        Some(1)
    } else {
        None
    }
}

/// Lexicographic iterator over all L^C configurations.
#[derive(Debug, Clone)]
pub struct ConfigIter {
    levels: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for ConfigIter {
    type Item = VoltageConfiguration;

    fn next(&mut self) -> Option<Self::Item> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut col = succ.len();
        let mut carried = true;
        while carried && col > 0 {
            col -= 1;
            succ[col] += 1;
            if succ[col] == self.levels {
                succ[col] = 0;
            } else {
                carried = false;
            }
        }
        if !carried {
            self.next = Some(succ);
        }
        Some(VoltageConfiguration(current))
    }
}

/// All voltage configurations of `topology` in lexicographic order.
pub fn enumerate_configs(topology: &PufTopology) -> ConfigIter {
    ConfigIter {
        levels: topology.l_levels(),
        next: Some(vec![0; topology.c_columns()]),
    }
}

/// Every canonical challenge: pairs in lexicographic order, configurations
/// in lexicographic order within each pair.
pub fn enumerate_challenges(topology: &PufTopology) -> impl Iterator<Item = Challenge> + '_ {
    topology.pairs().flat_map(move |(a, b)| {
        enumerate_configs(topology).map(move |config| Challenge {
            ro_a: a,
            ro_b: b,
            config,
        })
    })
}
