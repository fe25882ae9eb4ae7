//! TOML run configuration. Every physical quantity carries its unit in the
//! key name; missing sections and keys fall back to the built-in defaults.

use std::path::Path;

use mvpuf::puf::{default_levels, DEFAULT_LEVEL_VARIATION};
use mvpuf::{MeasurementSettings, PufTopology, TechnologyParams, VariationModel};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TechnologySection {
    pub v_nominal_v: f64,
    pub v_th0_v: f64,
    pub alpha: f64,
    pub d_inv_nominal_ps: f64,
    pub k_vth_mv_per_c: f64,
    pub t_ref_c: f64,
}

impl Default for TechnologySection {
    fn default() -> Self {
        let t = TechnologyParams::umc90();
        Self {
            v_nominal_v: t.v_nominal,
            v_th0_v: t.v_th0,
            alpha: t.alpha,
            d_inv_nominal_ps: t.d_inv_nominal * 1e12,
            k_vth_mv_per_c: t.k_vth_temp * 1e3,
            t_ref_c: t.t_ref,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationSection {
    pub sigma_inter: f64,
    pub sigma_intra: f64,
    pub kappa_mean_per_c: f64,
    pub sigma_kappa_per_c: f64,
    pub sigma_jitter: f64,
}

impl Default for VariationSection {
    fn default() -> Self {
        let v = VariationModel::default();
        Self {
            sigma_inter: v.sigma_inter,
            sigma_intra: v.sigma_intra,
            kappa_mean_per_c: v.kappa_mean,
            sigma_kappa_per_c: v.sigma_kappa,
            sigma_jitter: v.sigma_jitter,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    pub ros: usize,
    pub inverters_per_ro: usize,
    pub columns: usize,
    /// Used only when `levels_v` is absent.
    pub level_count: usize,
    pub levels_v: Option<Vec<f64>>,
    pub level_variation_v: Option<Vec<f64>>,
    pub column_map: Option<Vec<usize>>,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            ros: 2,
            inverters_per_ro: 13,
            columns: 3,
            level_count: 2,
            levels_v: None,
            level_variation_v: None,
            column_map: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementSection {
    pub compare_time_us: f64,
    pub counter_bits: u32,
    /// Relative period jitter; falls back to `variation.sigma_jitter`.
    pub jitter_sigma: Option<f64>,
    pub temperature_c: f64,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        let m = MeasurementSettings::default();
        Self {
            compare_time_us: m.compare_time * 1e6,
            counter_bits: m.counter_bits,
            jitter_sigma: None,
            temperature_c: m.temperature,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub output_format: OutputFormat,
    pub chips: usize,
    pub temp_min_c: f64,
    pub temp_max_c: f64,
    pub temp_step_c: f64,
    pub repeats: usize,
    pub validity_margin: f64,
    pub area_grid: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            output_format: OutputFormat::Json,
            chips: 20,
            temp_min_c: -25.0,
            temp_max_c: 125.0,
            temp_step_c: 10.0,
            repeats: 10,
            validity_margin: mvpuf::metrics::DEFAULT_VALIDITY_MARGIN,
            area_grid: "overhead".into(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub technology: TechnologySection,
    pub variation: VariationSection,
    pub topology: TopologySection,
    pub measurement: MeasurementSection,
    pub run: RunSection,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Parse(format!("config {}: {e}", path.display())))
    }
}

/// Fully validated configuration.
#[derive(Debug)]
pub struct RunConfig {
    pub technology: TechnologyParams,
    pub variation: VariationModel,
    pub topology: PufTopology,
    pub measurement: MeasurementSettings,
    pub seeds: Vec<u64>,
    pub output_format: OutputFormat,
    pub run: RunSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
    pub ros: Option<usize>,
    pub inverters: Option<usize>,
    pub columns: Option<usize>,
    pub levels: Option<usize>,
}

impl RunConfig {
    pub fn build(file: ConfigFile, ov: &Overrides) -> Result<Self, CliError> {
        let t = &file.technology;
        let technology = TechnologyParams {
            v_nominal: t.v_nominal_v,
            v_th0: t.v_th0_v,
            alpha: t.alpha,
            d_inv_nominal: t.d_inv_nominal_ps * 1e-12,
            k_vth_temp: t.k_vth_mv_per_c * 1e-3,
            t_ref: t.t_ref_c,
        };
        technology.validate()?;

        let v = &file.variation;
        let variation = VariationModel {
            sigma_inter: v.sigma_inter,
            sigma_intra: v.sigma_intra,
            kappa_mean: v.kappa_mean_per_c,
            sigma_kappa: v.sigma_kappa_per_c,
            sigma_jitter: v.sigma_jitter,
        };
        variation.validate()?;

        let topo = file.topology;
        let inverters = ov.inverters.unwrap_or(topo.inverters_per_ro);
        let levels = match (ov.levels, topo.levels_v) {
            (Some(n), _) => default_levels(n),
            (None, Some(levels)) => levels,
            (None, None) => default_levels(topo.level_count),
        };
        let variation_v = match topo.level_variation_v {
            Some(var) if ov.levels.is_none() => var,
            _ => vec![DEFAULT_LEVEL_VARIATION; levels.len()],
        };
        let column_map = if ov.inverters.is_some() || ov.columns.is_some() {
            None
        } else {
            topo.column_map
        };
        let topology = PufTopology::new(
            ov.ros.unwrap_or(topo.ros),
            inverters,
            ov.columns.unwrap_or(topo.columns),
            column_map,
            levels,
            variation_v,
        )?;

        let m = &file.measurement;
        let measurement = MeasurementSettings {
            compare_time: m.compare_time_us * 1e-6,
            counter_bits: m.counter_bits,
            jitter_sigma: m.jitter_sigma.unwrap_or(variation.sigma_jitter),
            temperature: m.temperature_c,
        };
        measurement.validate()?;

        let mut seeds = file.run.seeds.clone();
        if let Some(seed) = ov.seed {
            seeds = vec![seed];
        }
        if seeds.is_empty() {
            return Err(CliError::Usage(
                "run.seeds must list at least one seed".into(),
            ));
        }
        Ok(Self {
            technology,
            variation,
            topology,
            measurement,
            seeds,
            output_format: ov.format.unwrap_or(file.run.output_format),
            run: file.run,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seeds[0]
    }
}
