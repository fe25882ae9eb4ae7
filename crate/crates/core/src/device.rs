//! Process technology, device variation and the alpha-power-law delay model.
//!
//! Inverter delay follows
//!
//! ```text
//! d(V, T) = d_base · (1 + κ·(T − T_ref)) · K · V / (V − V_th(T))^α
//! K       = (V_M − V_th0)^α / V_M
//! V_th(T) = V_th0 + k_vth · (T − T_ref)
//! ```
//!
//! so that `d(V_M, T_ref) = d_base`. The threshold drift makes the ratio of
//! delays at two supply voltages depend on temperature, which is what lets a
//! voltage configuration be temperature-robust or not.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::puf::PufTopology;

/// Alpha-law constants and temperature coefficients of a process node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TechnologyParams {
    /// Typical supply voltage `V_M` in volts.
    pub v_nominal: f64,
    /// Threshold voltage at the reference temperature, in volts.
    pub v_th0: f64,
    /// Velocity saturation index.
    pub alpha: f64,
    /// Typical single-inverter delay at `V_M` and `t_ref`, in seconds.
    pub d_inv_nominal: f64,
    /// Linear threshold drift in volts per °C.
    pub k_vth_temp: f64,
    /// Reference temperature in °C.
    pub t_ref: f64,
}

impl TechnologyParams {
    /// UMC 90 nm constants: V_M = 1.2 V, V_th = 0.6 V, α = 1.54.
    pub fn umc90() -> Self {
        Self {
            v_nominal: 1.2,
            v_th0: 0.6,
            alpha: 1.54,
            d_inv_nominal: 50e-12,
            k_vth_temp: -0.7e-3,
            t_ref: 25.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.v_nominal,
            self.v_th0,
            self.alpha,
            self.d_inv_nominal,
            self.k_vth_temp,
            self.t_ref,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidTechnology(
                "all parameters must be finite".into(),
            ));
        }
        if !(self.v_th0 > 0.0) {
            return Err(Error::InvalidTechnology("v_th0 must be > 0".into()));
        }
        if !(self.v_nominal > self.v_th0) {
            return Err(Error::InvalidTechnology(
                "v_nominal must exceed v_th0".into(),
            ));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidTechnology("alpha must be > 0".into()));
        }
        if !(self.d_inv_nominal > 0.0) {
            return Err(Error::InvalidTechnology("d_inv_nominal must be > 0".into()));
        }
        Ok(())
    }

    /// The scaling factor `K = (V_M − V_th0)^α / V_M`.
    pub fn k_factor(&self) -> f64 {
        (self.v_nominal - self.v_th0).powf(self.alpha) / self.v_nominal
    }

    /// Threshold voltage at `temperature_c`.
    pub fn v_th(&self, temperature_c: f64) -> f64 {
        self.v_th0 + self.k_vth_temp * (temperature_c - self.t_ref)
    }

    /// Delay multiplier `K·V/(V − V_th(T))^α` relative to the nominal point.
    ///
    /// Evaluated as `(V/V_M)·((V_M − V_th0)/(V − V_th(T)))^α`, which is the
    /// same quantity but returns exactly 1.0 at `(V_M, T_ref)`.
    pub fn voltage_factor(&self, volts: f64, temperature_c: f64) -> Result<f64> {
        let v_th = self.v_th(temperature_c);
        if !(volts > v_th) {
            return Err(Error::VoltageBelowThreshold {
                volts,
                v_th,
                temperature_c,
            });
        }
        Ok((volts / self.v_nominal)
            * ((self.v_nominal - self.v_th0) / (volts - v_th)).powf(self.alpha))
    }
}

impl Default for TechnologyParams {
    fn default() -> Self {
        Self::umc90()
    }
}

/// Delay of one inverter at supply `volts` and `temperature_c`.
pub fn alpha_law_delay(
    d_base: f64,
    volts: f64,
    temperature_c: f64,
    tech: &TechnologyParams,
    kappa: f64,
) -> Result<f64> {
    if !(d_base > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "base delay must be positive, got {d_base}"
        )));
    }
    let thermal = 1.0 + kappa * (temperature_c - tech.t_ref);
    if !(thermal > 0.0) {
        return Err(Error::TemperatureOutOfRange { temperature_c });
    }
    Ok(d_base * thermal * tech.voltage_factor(volts, temperature_c)?)
}

/// Factor that converts a delay at `v_from` into the delay at `v_to`.
pub fn voltage_scale_factor(
    v_from: f64,
    v_to: f64,
    temperature_c: f64,
    tech: &TechnologyParams,
) -> Result<f64> {
    let from = tech.voltage_factor(v_from, temperature_c)?;
    let to = tech.voltage_factor(v_to, temperature_c)?;
    Ok(to / from)
}

/// Statistical model of manufacturing and measurement variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationModel {
    /// Chip-level multiplicative delay shift, relative std-dev.
    pub sigma_inter: f64,
    /// Per-inverter delay deviation, relative std-dev.
    pub sigma_intra: f64,
    /// Mean linear temperature coefficient of the base delay, per °C.
    pub kappa_mean: f64,
    /// Per-inverter spread of the temperature coefficient, per °C.
    pub sigma_kappa: f64,
    /// Per-measurement delay noise, relative std-dev.
    pub sigma_jitter: f64,
}

impl Default for VariationModel {
    fn default() -> Self {
        Self {
            sigma_inter: 0.05,
            sigma_intra: 0.03,
            kappa_mean: 5e-4,
            sigma_kappa: 3e-5,
            sigma_jitter: 1e-3,
        }
    }
}

impl VariationModel {
    /// No variation at all: every inverter is nominal.
    pub fn zero() -> Self {
        Self {
            sigma_inter: 0.0,
            sigma_intra: 0.0,
            kappa_mean: 0.0,
            sigma_kappa: 0.0,
            sigma_jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            ("sigma_inter", self.sigma_inter),
            ("sigma_intra", self.sigma_intra),
            ("sigma_kappa", self.sigma_kappa),
            ("sigma_jitter", self.sigma_jitter),
        ];
        for (name, value) in sigmas {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidVariation(format!(
                    "{name} must be finite and >= 0, got {value}"
                )));
            }
        }
        if !self.kappa_mean.is_finite() {
            return Err(Error::InvalidVariation("kappa_mean must be finite".into()));
        }
        Ok(())
    }
}

/// One inverter of a manufactured chip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "DeviceRecord", into = "DeviceRecord")]
pub struct InverterDevice {
    /// Delay at `V_M` and `t_ref`, in seconds.
    pub d_base: f64,
    /// Temperature coefficient of `d_base`, per °C.
    pub kappa: f64,
}

#[derive(Serialize, Deserialize)]
struct DeviceRecord {
    d_base_ps: f64,
    kappa_per_c: f64,
}

impl From<DeviceRecord> for InverterDevice {
    fn from(r: DeviceRecord) -> Self {
        Self {
            d_base: r.d_base_ps * 1e-12,
            kappa: r.kappa_per_c,
        }
    }
}

impl From<InverterDevice> for DeviceRecord {
    fn from(d: InverterDevice) -> Self {
        Self {
            d_base_ps: d.d_base * 1e12,
            kappa_per_c: d.kappa,
        }
    }
}

/// One manufactured chip: sampled devices indexed `[ro][inverter]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipInstance {
    pub chip_id: String,
    pub seed: u64,
    pub topology_ref: String,
    pub devices: Vec<Vec<InverterDevice>>,
}

impl ChipInstance {
    /// Builds a chip from explicit devices, checking shape and positivity.
    pub fn from_devices(
        chip_id: impl Into<String>,
        seed: u64,
        topology: &PufTopology,
        devices: Vec<Vec<InverterDevice>>,
    ) -> Result<Self> {
        let chip = Self {
            chip_id: chip_id.into(),
            seed,
            topology_ref: topology.reference(),
            devices,
        };
        chip.check_against(topology)?;
        Ok(chip)
    }

    pub fn ro(&self, index: usize) -> &[InverterDevice] {
        &self.devices[index]
    }

    pub fn num_oscillators(&self) -> usize {
        self.devices.len()
    }

    /// Verifies that this chip was sampled for `topology`.
    pub fn check_against(&self, topology: &PufTopology) -> Result<()> {
        let expected = topology.reference();
        if self.topology_ref != expected {
            return Err(Error::TopologyMismatch {
                expected,
                found: self.topology_ref.clone(),
            });
        }
        let shape_ok = self.devices.len() == topology.r_oscillators()
            && self
                .devices
                .iter()
                .all(|ro| ro.len() == topology.inverters_per_ro());
        if !shape_ok {
            return Err(Error::TopologyMismatch {
                expected: format!(
                    "{}x{} devices",
                    topology.r_oscillators(),
                    topology.inverters_per_ro()
                ),
                found: format!(
                    "{}x{:?} devices",
                    self.devices.len(),
                    self.devices.first().map(Vec::len)
                ),
            });
        }
        if let Some(bad) = self
            .devices
            .iter()
            .flatten()
            .find(|d| !(d.d_base > 0.0 && d.d_base.is_finite() && d.kappa.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "device with d_base = {} s, kappa = {} is not physical",
                bad.d_base, bad.kappa
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a chip file; the shape is checked once a topology is known.
    pub fn from_json(text: &str) -> Result<Self> {
        let chip: Self = serde_json::from_str(text)?;
        if let Some(bad) = chip.devices.iter().flatten().find(|d| !(d.d_base > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "device base delay must be positive, got {} s",
                bad.d_base
            )));
        }
        Ok(chip)
    }
}

/// Draws from `Normal(mean, sd)` until the sample is strictly positive.
fn positive_normal<R: Rng + ?Sized>(rng: &mut R, dist: &Normal<f64>) -> f64 {
    loop {
        let x = dist.sample(rng);
        if x > 0.0 {
            return x;
        }
    }
}

fn normal(mean: f64, sd: f64) -> Result<Normal<f64>> {
    Normal::new(mean, sd).map_err(|e| Error::InvalidVariation(e.to_string()))
}

/// Samples one virtual chip for `topology`.
///
/// A single chip-level shift `s ~ N(1, σ_inter)` is drawn first, then for
/// each RO and each inverter in order `d_base = d_M · s · N(1, σ_intra)` and
/// `κ ~ N(κ_mean, σ_κ)`. Non-positive delay factors are redrawn.
pub fn sample_chip(
    tech: &TechnologyParams,
    var: &VariationModel,
    topology: &PufTopology,
    seed: u64,
) -> Result<ChipInstance> {
    tech.validate()?;
    var.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inter = normal(1.0, var.sigma_inter)?;
    let intra = normal(1.0, var.sigma_intra)?;
    let kappa = normal(var.kappa_mean, var.sigma_kappa)?;

    let shift = positive_normal(&mut rng, &inter);
    let devices = (0..topology.r_oscillators())
        .map(|_| {
            (0..topology.inverters_per_ro())
                .map(|_| {
                    let d_base = tech.d_inv_nominal * shift * positive_normal(&mut rng, &intra);
                    InverterDevice {
                        d_base,
                        kappa: kappa.sample(&mut rng),
                    }
                })
                .collect()
        })
        .collect();

    Ok(ChipInstance {
        chip_id: format!("chip-{seed:016x}"),
        seed,
        topology_ref: topology.reference(),
        devices,
    })
}
