//! Temperature-aware operation: for each RO pair, find a voltage
//! configuration whose response bit stays constant over the whole
//! temperature range, and store the choices in a packed configuration memory.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{ChipInstance, TechnologyParams};
use crate::error::{Error, Result};
use crate::puf::{
    enumerate_configs, ideal_bit, parse_pair, ro_delay, PufTopology, VoltageConfiguration,
};

/// Inclusive grid `min, min + step, …, max`; `max` is always included.
pub fn temperature_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) || !min.is_finite() || !max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bad temperature grid {min}..{max} step {step}"
        )));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| min + i as f64 * step).collect();
    if (grid[n] - max).abs() > 1e-9 {
        grid.push(max);
    } else {
        grid[n] = max;
    }
    Ok(grid)
}

/// −25 °C to 125 °C in 10 °C steps.
pub fn default_temp_samples() -> Vec<f64> {
    temperature_grid(-25.0, 125.0, 10.0).expect("static grid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub config: VoltageConfiguration,
    /// Noise-free bit at each sampled temperature (1 on a tie).
    pub bits: Vec<u8>,
    /// Some temperature produced exactly equal delays.
    pub tie: bool,
}

impl ProfileRow {
    pub fn is_stable(&self) -> bool {
        !self.tie && self.bits.windows(2).all(|w| w[0] == w[1])
    }
}

/// Bits of one RO pair for every configuration and sampled temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityProfile {
    pub pair: (usize, usize),
    pub temperatures: Vec<f64>,
    /// The all-nominal configuration, preferred when stable.
    pub nominal: VoltageConfiguration,
    pub rows: Vec<ProfileRow>,
}

impl StabilityProfile {
    pub fn new(
        pair: (usize, usize),
        temperatures: Vec<f64>,
        nominal: VoltageConfiguration,
        rows: Vec<ProfileRow>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("profile has no rows".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.bits.len() != temperatures.len()) {
            return Err(Error::InvalidArgument(format!(
                "row {} has {} bits for {} temperatures",
                r.config,
                r.bits.len(),
                temperatures.len()
            )));
        }
        Ok(Self {
            pair,
            temperatures,
            nominal,
            rows,
        })
    }

    pub fn stable_configs(&self) -> impl Iterator<Item = &VoltageConfiguration> {
        self.rows
            .iter()
            .filter(|r| r.is_stable())
            .map(|r| &r.config)
    }
}

/// Noise-free bit of `pair` for every configuration at every temperature.
pub fn stability_profile(
    chip: &ChipInstance,
    pair: (usize, usize),
    topology: &PufTopology,
    tech: &TechnologyParams,
    temp_samples: &[f64],
) -> Result<StabilityProfile> {
    let (a, b) = pair;
    if a == b {
        return Err(Error::InvalidArgument(format!(
            "pair {a}-{b} uses the same RO twice"
        )));
    }
    topology.check_ro(a)?;
    topology.check_ro(b)?;
    if temp_samples.is_empty() {
        return Err(Error::InvalidArgument("no temperature samples".into()));
    }
    let rows = enumerate_configs(topology)
        .map(|config| {
            let mut bits = Vec::with_capacity(temp_samples.len());
            let mut tie = false;
            for &t in temp_samples {
                let d_a = ro_delay(chip, a, &config, topology, tech, t)?;
                let d_b = ro_delay(chip, b, &config, topology, tech, t)?;
                match ideal_bit(d_a, d_b) {
                    Some(bit) => bits.push(bit),
                    None => {
                        tie = true;
                        bits.push(1);
                    }
                }
            }
            Ok(ProfileRow { config, bits, tie })
        })
        .collect::<Result<Vec<_>>>()?;
    let nominal = topology.uniform_config(topology.nominal_level(tech.v_nominal));
    StabilityProfile::new(pair, temp_samples.to_vec(), nominal, rows)
}

/// The all-nominal configuration if stable, else the first stable
/// configuration in lexicographic order, else `None`.
pub fn find_reliable_config(profile: &StabilityProfile) -> Option<VoltageConfiguration> {
    let nominal_stable = profile
        .rows
        .iter()
        .any(|r| r.config == profile.nominal && r.is_stable());
    if nominal_stable {
        return Some(profile.nominal.clone());
    }
    profile.stable_configs().min().cloned()
}

/// Per-pair configuration memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigTable {
    pub topology_ref: String,
    pub entries: BTreeMap<(usize, usize), VoltageConfiguration>,
}

#[derive(Serialize, Deserialize)]
struct TableEntryRecord {
    pair: String,
    config: VoltageConfiguration,
}

#[derive(Serialize, Deserialize)]
struct TableRecord {
    topology_ref: String,
    entries: Vec<TableEntryRecord>,
}

impl Serialize for ConfigTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableRecord {
            topology_ref: self.topology_ref.clone(),
            entries: self
                .entries
                .iter()
                .map(|(&(a, b), c)| TableEntryRecord {
                    pair: format!("{a}-{b}"),
                    config: c.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConfigTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = TableRecord::deserialize(d)?;
        let mut entries = BTreeMap::new();
        for e in rec.entries {
            let (a, b) = parse_pair(&e.pair).map_err(serde::de::Error::custom)?;
            if a >= b {
                return Err(serde::de::Error::custom(Error::NonCanonicalPair { a, b }));
            }
            if entries.insert((a, b), e.config).is_some() {
                return Err(serde::de::Error::custom(format!("duplicate pair {a}-{b}")));
            }
        }
        Ok(ConfigTable {
            topology_ref: rec.topology_ref,
            entries,
        })
    }
}

impl ConfigTable {
    pub fn new(topology: &PufTopology) -> Self {
        Self {
            topology_ref: topology.reference(),
            entries: BTreeMap::new(),
        }
    }

    pub fn is_complete(&self, topology: &PufTopology) -> bool {
        self.entries.len() == topology.pair_count()
            && topology.pairs().all(|p| self.entries.contains_key(&p))
    }
}

/// Profiles every pair and keeps a reliable configuration where one exists.
/// Returns the table and the pairs that had no stable configuration.
pub fn build_config_table(
    chip: &ChipInstance,
    topology: &PufTopology,
    tech: &TechnologyParams,
    temp_samples: &[f64],
) -> Result<(ConfigTable, Vec<(usize, usize)>)> {
    chip.check_against(topology)?;
    let pairs: Vec<_> = topology.pairs().collect();
    let found = pairs
        .par_iter()
        .map(|&pair| {
            stability_profile(chip, pair, topology, tech, temp_samples)
                .map(|p| (pair, find_reliable_config(&p)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ConfigTable::new(topology);
    let mut unresolved = Vec::new();
    for (pair, config) in found {
        match config {
            Some(c) => {
                table.entries.insert(pair, c);
            }
            None => unresolved.push(pair),
        }
    }
    Ok((table, unresolved))
}

/// Bits needed to store one level index, ⌈log₂ L⌉.
pub fn bits_per_level(levels: usize) -> u32 {
    if levels <= 1 {
        0
    } else {
        usize::BITS - (levels - 1).leading_zeros()
    }
}

/// Configuration memory size, ⌈log₂ L⌉ · C · R(R−1)/2.
pub fn memory_bits(topology: &PufTopology) -> u64 {
    bits_per_level(topology.l_levels()) as u64
        * topology.c_columns() as u64
        * topology.pair_count() as u64
}

/// A sequence of bits, written MSB-first as `0`/`1` characters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Packs into bytes MSB-first, zero-padding the last byte, as hex.
    pub fn to_hex(&self) -> String {
        self.0
            .chunks(8)
            .map(|chunk| {
                let byte = chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)));
                format!("{byte:02x}")
            })
            .collect()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidArgument(format!(
                    "bit string contains {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// Concatenates each pair's level indices, pairs in lexicographic order,
/// each index in ⌈log₂ L⌉ bits MSB-first.
pub fn encode_table(table: &ConfigTable, topology: &PufTopology) -> Result<BitString> {
    if !table.is_complete(topology) {
        let missing = topology
            .pairs()
            .filter(|p| !table.entries.contains_key(p))
            .count();
        return Err(Error::IncompleteTable { missing });
    }
    let width = bits_per_level(topology.l_levels());
    let mut bits = Vec::with_capacity(memory_bits(topology) as usize);
    for pair in topology.pairs() {
        let config = &table.entries[&pair];
        topology.check_config(config)?;
        for &level in config.levels() {
            for shift in (0..width).rev() {
                bits.push((level >> shift) & 1 == 1);
            }
        }
    }
    Ok(BitString(bits))
}

/// Inverse of [`encode_table`]; rejects strings of the wrong length and
/// level codes that do not name a level.
pub fn decode_table(bits: &BitString, topology: &PufTopology) -> Result<ConfigTable> {
    let expected = memory_bits(topology);
    if bits.len() as u64 != expected {
        return Err(Error::TableLength {
            expected,
            found: bits.len() as u64,
        });
    }
    let width = bits_per_level(topology.l_levels()) as usize;
    let mut table = ConfigTable::new(topology);
    let mut cursor = bits.bits().iter();
    for pair in topology.pairs() {
        let levels = (0..topology.c_columns())
            .map(|_| {
                (0..width).fold(0usize, |acc, _| {
                    (acc << 1) | (*cursor.next().expect("length checked") as usize)
                })
            })
            .collect();
        let config = VoltageConfiguration::new(levels);
        topology.check_config(&config)?;
        table.entries.insert(pair, config);
    }
    Ok(table)
}
