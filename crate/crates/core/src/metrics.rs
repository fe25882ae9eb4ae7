//! Inter-chip uniqueness, temperature reliability, challenge-space size,
//! valid-challenge filtering and per-pair delta sweeps.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{ChipInstance, TechnologyParams};
use crate::error::{Error, Result};
use crate::puf::{
    enumerate_challenges, enumerate_configs, ideal_bit, respond_seeded, ro_delay, Challenge,
    MeasurementSettings, PufTopology, VoltageConfiguration,
};

/// Default minimum relative frequency gap for a challenge to count as valid.
pub const DEFAULT_VALIDITY_MARGIN: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub k_chips: usize,
    pub n_challenges: usize,
    pub uniqueness_percent: f64,
    /// Pairwise Hamming distances in percent; symmetric, zero diagonal.
    pub pairwise_hd_matrix: Vec<Vec<f64>>,
}

/// Fractional Hamming distance between two equal-length bit vectors.
pub fn hamming_distance(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Builds the report from per-chip response vectors.
pub fn uniqueness_from_bits(outputs: &[Vec<u8>]) -> Result<UniquenessReport> {
    let k = outputs.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "uniqueness needs at least 2 chips, got {k}"
        )));
    }
    let n = outputs[0].len();
    if n == 0 || outputs.iter().any(|o| o.len() != n) {
        return Err(Error::InvalidArgument(
            "all chips need the same non-empty number of responses".into(),
        ));
    }
    let mut matrix = vec![vec![0.0; k]; k];
    let mut total_hd: u64 = 0;
    for i in 0..k {
        for j in i + 1..k {
            let hd = hamming_distance(&outputs[i], &outputs[j]);
            total_hd += hd as u64;
            let pct = hd as f64 / n as f64 * 100.0;
            matrix[i][j] = pct;
            matrix[j][i] = pct;
        }
    }
    // Integer accumulation keeps the result independent of evaluation order.
    let pairs = (k * (k - 1) / 2) as f64;
    let uniqueness_percent = total_hd as f64 / (pairs * n as f64) * 100.0;
    Ok(UniquenessReport {
        k_chips: k,
        n_challenges: n,
        uniqueness_percent,
        pairwise_hd_matrix: matrix,
    })
}

/// Response bits of `chip` for each challenge, one measurement each.
pub fn response_vector(
    chip: &ChipInstance,
    challenges: &[Challenge],
    topology: &PufTopology,
    tech: &TechnologyParams,
    settings: &MeasurementSettings,
) -> Result<Vec<u8>> {
    challenges
        .iter()
        .map(|c| respond_seeded(chip, c, topology, tech, settings, 0).map(|r| r.bit))
        .collect()
}

/// Average pairwise inter-chip Hamming distance over a shared challenge list.
///
/// Pass [`MeasurementSettings::noise_free`] for the jitter-free figure.
pub fn uniqueness(
    chips: &[ChipInstance],
    challenges: &[Challenge],
    topology: &PufTopology,
    tech: &TechnologyParams,
    settings: &MeasurementSettings,
) -> Result<UniquenessReport> {
    if chips.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "uniqueness needs at least 2 chips, got {}",
            chips.len()
        )));
    }
    for chip in chips {
        chip.check_against(topology)?;
    }
    let outputs = chips
        .par_iter()
        .map(|chip| response_vector(chip, challenges, topology, tech, settings))
        .collect::<Result<Vec<_>>>()?;
    uniqueness_from_bits(&outputs)
}

/// Element of `temps` closest to 25 °C.
pub fn reference_temperature(temps: &[f64]) -> Option<f64> {
    temps
        .iter()
        .copied()
        .min_by(|a, b| (a - 25.0).abs().total_cmp(&(b - 25.0).abs()))
}

/// Percentage of measurements that agree with the jitter-free response at
/// the reference temperature, over challenges × temperatures × repeats.
pub fn reliability(
    chip: &ChipInstance,
    challenges: &[Challenge],
    topology: &PufTopology,
    tech: &TechnologyParams,
    settings: &MeasurementSettings,
    temp_sweep: &[f64],
    repeats: usize,
) -> Result<f64> {
    let t_ref = reference_temperature(temp_sweep)
        .ok_or_else(|| Error::InvalidArgument("temperature sweep is empty".into()))?;
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    if challenges.is_empty() {
        return Err(Error::InvalidArgument("no challenges given".into()));
    }
    chip.check_against(topology)?;
    let golden_settings = MeasurementSettings {
        jitter_sigma: 0.0,
        temperature: t_ref,
        ..*settings
    };

    let flips = challenges
        .par_iter()
        .map(|ch| -> Result<u64> {
            let golden = respond_seeded(chip, ch, topology, tech, &golden_settings, 0)?.bit;
            let mut flips = 0u64;
            for (ti, &t) in temp_sweep.iter().enumerate() {
                let s = settings.at_temperature(t);
                for rep in 0..repeats {
                    let idx = (ti * repeats + rep) as u64 + 1;
                    if respond_seeded(chip, ch, topology, tech, &s, idx)?.bit != golden {
                        flips += 1;
                    }
                }
            }
            Ok(flips)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<u64>();
    let total = (challenges.len() * temp_sweep.len() * repeats) as f64;
    Ok(100.0 - flips as f64 / total * 100.0)
}

/// Maximum number of challenge/response pairs, R(R−1)/2 · L^C.
pub fn challenge_space(topology: &PufTopology) -> BigUint {
    BigUint::from(topology.pair_count()) * topology.config_count()
}

/// Challenges whose noise-free relative gap `|d_A − d_B| / min(d_A, d_B)`
/// exceeds `margin` at every temperature and whose bit never changes.
pub fn valid_challenges(
    chip: &ChipInstance,
    topology: &PufTopology,
    tech: &TechnologyParams,
    margin: f64,
    temp_sweep: &[f64],
) -> Result<Vec<Challenge>> {
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "margin must be >= 0, got {margin}"
        )));
    }
    if temp_sweep.is_empty() {
        return Err(Error::InvalidArgument("temperature sweep is empty".into()));
    }
    chip.check_against(topology)?;
    let all: Vec<Challenge> = enumerate_challenges(topology).collect();
    let keep = all
        .par_iter()
        .map(|ch| -> Result<bool> {
            let mut bit = None;
            for &t in temp_sweep {
                let d_a = ro_delay(chip, ch.ro_a, &ch.config, topology, tech, t)?;
                let d_b = ro_delay(chip, ch.ro_b, &ch.config, topology, tech, t)?;
                let gap = (d_a - d_b).abs() / d_a.min(d_b);
                if !(gap > margin) {
                    return Ok(false);
                }
                let b = ideal_bit(d_a, d_b);
                if bit.is_some() && bit != b {
                    return Ok(false);
                }
                bit = b;
            }
            Ok(true)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(all
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub config: VoltageConfiguration,
    /// `d_ROA − d_ROB` in seconds; negative when RO A is faster.
    pub delta_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweep {
    pub pair: (usize, usize),
    pub temperature_c: f64,
    pub entries: Vec<DeltaEntry>,
}

impl DeltaSweep {
    /// `(#negative, #positive)` deltas; exact zeros are in neither.
    pub fn sign_split(&self) -> (usize, usize) {
        let neg = self
            .entries
            .iter()
            .filter(|e| e.delta_seconds < 0.0)
            .count();
        let pos = self
            .entries
            .iter()
            .filter(|e| e.delta_seconds > 0.0)
            .count();
        (neg, pos)
    }

    /// `config_string,delta_ps` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config_string,delta_ps\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.config, e.delta_seconds * 1e12));
        }
        out
    }
}

/// Noise-free `d_ROA − d_ROB` for every configuration of the pair.
pub fn delta_sweep(
    chip: &ChipInstance,
    pair: (usize, usize),
    topology: &PufTopology,
    tech: &TechnologyParams,
    temperature: f64,
) -> Result<DeltaSweep> {
    let (a, b) = pair;
    topology.check_ro(a)?;
    topology.check_ro(b)?;
    if a == b {
        return Err(Error::InvalidArgument(format!(
            "pair {a}-{b} uses the same RO twice"
        )));
    }
    let entries = enumerate_configs(topology)
        .map(|config| {
            let d_a = ro_delay(chip, a, &config, topology, tech, temperature)?;
            let d_b = ro_delay(chip, b, &config, topology, tech, temperature)?;
            Ok(DeltaEntry {
                config,
                delta_seconds: d_a - d_b,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DeltaSweep {
        pair,
        temperature_c: temperature,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{sample_chip, InverterDevice, VariationModel};
    use crate::puf::enumerate_challenges;

    fn tech() -> TechnologyParams {
        TechnologyParams::umc90()
    }

    #[test]
    fn hand_crafted_outputs() {
        // 000, 011, 101: every pair differs in 2 of 3 bits
        let outs = vec![vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 1]];
        let r = uniqueness_from_bits(&outs).unwrap();
        assert!((r.uniqueness_percent - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(r.pairwise_hd_matrix[0][0], 0.0);
        assert_eq!(r.pairwise_hd_matrix[1][2], r.pairwise_hd_matrix[2][1]);
    }

    #[test]
    fn uniqueness_input_checks() {
        assert!(uniqueness_from_bits(&[vec![0, 1]]).is_err());
        assert!(uniqueness_from_bits(&[vec![0, 1], vec![0]]).is_err());
        assert!(uniqueness_from_bits(&[vec![], vec![]]).is_err());
    }

    #[test]
    fn identical_chips_have_zero_uniqueness() {
        let topo = PufTopology::with_default_levels(2, 13, 3, 2).unwrap();
        let v = VariationModel::default();
        let chips = vec![
            sample_chip(&tech(), &v, &topo, 7).unwrap(),
            sample_chip(&tech(), &v, &topo, 7).unwrap(),
        ];
        let ch: Vec<_> = enumerate_challenges(&topo).collect();
        let r = uniqueness(
            &chips,
            &ch,
            &topo,
            &tech(),
            &MeasurementSettings::noise_free(),
        )
        .unwrap();
        assert_eq!(r.uniqueness_percent, 0.0);
    }

    #[test]
    fn mismatched_topology_is_rejected() {
        let topo = PufTopology::with_default_levels(2, 13, 3, 2).unwrap();
        let other = PufTopology::with_default_levels(2, 11, 3, 2).unwrap();
        let v = VariationModel::default();
        let chips = vec![
            sample_chip(&tech(), &v, &topo, 1).unwrap(),
            sample_chip(&tech(), &v, &other, 2).unwrap(),
        ];
        let ch: Vec<_> = enumerate_challenges(&topo).collect();
        assert!(matches!(
            uniqueness(
                &chips,
                &ch,
                &topo,
                &tech(),
                &MeasurementSettings::noise_free()
            ),
            Err(Error::TopologyMismatch { .. })
        ));
    }

    #[test]
    fn challenge_space_examples() {
        let t = PufTopology::with_default_levels(20, 11, 11, 3).unwrap();
        assert_eq!(challenge_space(&t), BigUint::from(33_657_930u64));
        let t = PufTopology::with_default_levels(2, 1, 1, 1).unwrap();
        assert_eq!(challenge_space(&t), BigUint::from(1u32));
        let t = PufTopology::with_default_levels(4, 3, 3, 2).unwrap();
        assert_eq!(challenge_space(&t), BigUint::from(48u32));
        assert_eq!(enumerate_challenges(&t).count(), 48);
        // 2^161 configurations do not fit in a machine word
        let t = PufTopology::with_default_levels(2, 161, 161, 2).unwrap();
        assert_eq!(challenge_space(&t), BigUint::from(1u32) << 161);
    }

    #[test]
    fn reliability_trivial_cases() {
        let topo = PufTopology::with_default_levels(6, 13, 3, 2).unwrap();
        let v = VariationModel {
            sigma_kappa: 0.0,
            ..Default::default()
        };
        let chip = sample_chip(&tech(), &v, &topo, 21).unwrap();
        let uniform: Vec<Challenge> = topo
            .pairs()
            .map(|(a, b)| Challenge::new(a, b, topo.uniform_config(0)).unwrap())
            .collect();
        let s = MeasurementSettings::noise_free();
        let sweep: Vec<f64> = (-1..=5).map(|i| i as f64 * 25.0).collect();
        assert_eq!(
            reliability(&chip, &uniform, &topo, &tech(), &s, &sweep, 2).unwrap(),
            100.0
        );
        let all: Vec<_> = enumerate_challenges(&topo).collect();
        assert_eq!(
            reliability(&chip, &all, &topo, &tech(), &s, &[25.0], 1).unwrap(),
            100.0
        );
        assert!(reliability(&chip, &all, &topo, &tech(), &s, &[], 1).is_err());
    }

    #[test]
    fn reference_temperature_is_closest_to_room() {
        assert_eq!(
            reference_temperature(&[-25.0, 15.0, 35.0, 125.0]),
            Some(15.0)
        );
        assert_eq!(reference_temperature(&[100.0]), Some(100.0));
        assert_eq!(reference_temperature(&[]), None);
    }

    #[test]
    fn validity_filter_extremes() {
        let topo = PufTopology::with_default_levels(4, 13, 3, 2).unwrap();
        let chip = sample_chip(&tech(), &VariationModel::default(), &topo, 4).unwrap();
        let all = valid_challenges(&chip, &topo, &tech(), 0.0, &[25.0]).unwrap();
        assert_eq!(all.len(), 48);
        let none = valid_challenges(&chip, &topo, &tech(), 1e9, &[25.0]).unwrap();
        assert!(none.is_empty());
        assert!(valid_challenges(&chip, &topo, &tech(), -1.0, &[25.0]).is_err());
    }

    #[test]
    fn delta_sweep_shapes() {
        let topo = PufTopology::with_default_levels(2, 3, 3, 3).unwrap();
        let same = vec![
            InverterDevice {
                d_base: 4e-11,
                kappa: 0.0,
            },
            InverterDevice {
                d_base: 5e-11,
                kappa: 0.0,
            },
            InverterDevice {
                d_base: 6e-11,
                kappa: 0.0,
            },
        ];
        let chip =
            ChipInstance::from_devices("twin", 0, &topo, vec![same.clone(), same.clone()]).unwrap();
        let sweep = delta_sweep(&chip, (0, 1), &topo, &tech(), 25.0).unwrap();
        assert_eq!(sweep.entries.len(), 27);
        assert!(sweep.entries.iter().all(|e| e.delta_seconds == 0.0));
        assert_eq!(sweep.sign_split(), (0, 0));

        let slower: Vec<_> = same
            .iter()
            .map(|d| InverterDevice {
                d_base: d.d_base * 1.01,
                ..*d
            })
            .collect();
        let chip = ChipInstance::from_devices("slow-a", 0, &topo, vec![slower, same]).unwrap();
        let sweep = delta_sweep(&chip, (0, 1), &topo, &tech(), 25.0).unwrap();
        assert_eq!(sweep.sign_split(), (0, 27));

        let csv = sweep.to_csv();
        assert!(csv.starts_with("config_string,delta_ps\n000,"));
        assert_eq!(csv.lines().count(), 28);
        assert!(delta_sweep(&chip, (0, 0), &topo, &tech(), 25.0).is_err());
        assert!(delta_sweep(&chip, (0, 2), &topo, &tech(), 25.0).is_err());
    }
}
