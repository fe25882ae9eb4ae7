use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use mvpuf::area::{
    bits_per_area, sweep, sweep_csv, text_table, AreaConstants, PufVariant, SweepGrid,
};
use mvpuf::metrics::{self, challenge_space as space_of, valid_challenges};
use mvpuf::puf::{parse_pair, respond_seeded};
use mvpuf::temp_aware::{build_config_table, encode_table, memory_bits, temperature_grid};
use mvpuf::{enumerate_challenges, sample_chip, Challenge, ChipInstance};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{OutputFormat, RunConfig};
use crate::{CliError, TempArgs};

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub timestamp: Option<u64>,
    pub out: Option<&'a Path>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// The three renderings of one report. Only the requested one is emitted.
struct Report {
    json: Value,
    csv: String,
    text: String,
}

impl Context<'_> {
    fn write(&self, content: &str) -> Result<(), CliError> {
        match self.out {
            Some(path) => std::fs::write(path, content)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
            None => {
                print!("{content}");
                Ok(())
            }
        }
    }

    fn emit(&self, report: Report) -> Result<(), CliError> {
        let rendered = match self.cfg.output_format {
            OutputFormat::Json => {
                let mut value = report.json;
                if let (Some(ts), Value::Object(map)) = (self.timestamp, &mut value) {
                    map.insert("generated_at_unix".into(), ts.into());
                }
                serde_json::to_string_pretty(&value).map_err(mvpuf::Error::from)? + "\n"
            }
            OutputFormat::Csv => match self.timestamp {
                Some(ts) => format!("# generated_at_unix={ts}\n{}", report.csv),
                None => report.csv,
            },
            OutputFormat::Text => match self.timestamp {
                Some(ts) => format!("{}generated_at_unix: {ts}\n", report.text),
                None => report.text,
            },
        };
        self.write(&rendered)
    }

    fn chip(&self, path: Option<&Path>) -> Result<ChipInstance, CliError> {
        let cfg = self.cfg;
        let chip = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("cannot read chip {}: {e}", path.display()))
                })?;
                ChipInstance::from_json(&text)?
            }
            None => sample_chip(&cfg.technology, &cfg.variation, &cfg.topology, cfg.seed())?,
        };
        chip.check_against(&cfg.topology)?;
        Ok(chip)
    }

    fn temps(&self, args: &TempArgs) -> Result<Vec<f64>, CliError> {
        let run = &self.cfg.run;
        Ok(temperature_grid(
            args.temp_min_c.unwrap_or(run.temp_min_c),
            args.temp_max_c.unwrap_or(run.temp_max_c),
            args.temp_step_c.unwrap_or(run.temp_step_c),
        )?)
    }

    fn challenges(&self, limit: Option<usize>) -> Vec<Challenge> {
        let all = enumerate_challenges(&self.cfg.topology);
        match limit {
            Some(n) => all.take(n).collect(),
            None => all.collect(),
        }
    }
}

pub fn gen_chip(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let chip = sample_chip(&cfg.technology, &cfg.variation, &cfg.topology, cfg.seed())?;
    ctx.write(&(chip.to_json()? + "\n"))?;
    let summary = format!("chip_id={} seed={}", chip.chip_id, chip.seed);
    if ctx.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

pub fn respond(
    ctx: &Context,
    chip_path: Option<&Path>,
    challenge: &str,
    temperature: Option<f64>,
    repeats: usize,
) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    if repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let challenge: Challenge = challenge.parse()?;
    challenge.validate(&cfg.topology)?;
    let chip = ctx.chip(chip_path)?;
    let t = temperature.unwrap_or(cfg.measurement.temperature);
    let settings = cfg.measurement.at_temperature(t);
    let responses = (0..repeats as u64)
        .map(|m| {
            respond_seeded(
                &chip,
                &challenge,
                &cfg.topology,
                &cfg.technology,
                &settings,
                m,
            )
        })
        .collect::<mvpuf::Result<Vec<_>>>()?;

    let mut csv = String::from("chip_id,challenge,temperature_c,bit,unstable\n");
    let mut text = String::new();
    let mut rows = Vec::new();
    for r in &responses {
        let _ = writeln!(
            csv,
            "{},{challenge},{t},{},{}",
            chip.chip_id, r.bit, r.unstable
        );
        let _ = writeln!(
            text,
            "{challenge} @ {t} °C -> {}{} (counts {} / {})",
            r.bit,
            if r.unstable { " (tie)" } else { "" },
            r.count_a,
            r.count_b
        );
        rows.push(json!({
            "chip_id": chip.chip_id,
            "challenge": challenge.to_string(),
            "temperature_c": t,
            "bit": r.bit,
            "unstable": r.unstable,
            "count_a": r.count_a,
            "count_b": r.count_b,
        }));
    }
    ctx.emit(Report {
        json: json!({ "responses": rows }),
        csv,
        text,
    })
}

pub fn uniqueness(
    ctx: &Context,
    k: Option<usize>,
    chip_seeds: Option<&[u64]>,
    limit: Option<usize>,
) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let seeds: Vec<u64> = match chip_seeds {
        Some(seeds) => seeds.to_vec(),
        None if k.is_none() && cfg.seeds.len() > 1 => cfg.seeds.clone(),
        None => {
            let base = cfg.seed();
            (0..k.unwrap_or(cfg.run.chips) as u64)
                .map(|i| base.wrapping_add(i))
                .collect()
        }
    };
    let chips = seeds
        .par_iter()
        .map(|&s| sample_chip(&cfg.technology, &cfg.variation, &cfg.topology, s))
        .collect::<mvpuf::Result<Vec<_>>>()?;
    let challenges = ctx.challenges(limit);
    let report = metrics::uniqueness(
        &chips,
        &challenges,
        &cfg.topology,
        &cfg.technology,
        &cfg.measurement,
    )?;

    let mut csv = String::from("chip_i,chip_j,hd_percent\n");
    for i in 0..report.k_chips {
        for j in i + 1..report.k_chips {
            let _ = writeln!(csv, "{i},{j},{}", report.pairwise_hd_matrix[i][j]);
        }
    }
    let text = format!(
        "uniqueness: {:.2}% (k = {} chips, n = {} challenges, topology {})\n",
        report.uniqueness_percent,
        report.k_chips,
        report.n_challenges,
        cfg.topology.reference()
    );
    let json = json!({
        "topology_ref": cfg.topology.reference(),
        "chip_seeds": seeds,
        "report": report,
    });
    ctx.emit(Report { json, csv, text })
}

pub fn reliability(
    ctx: &Context,
    chip_path: Option<&Path>,
    temps: &TempArgs,
    repeats: Option<usize>,
    limit: Option<usize>,
) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let chip = ctx.chip(chip_path)?;
    let temps = ctx.temps(temps)?;
    let repeats = repeats.unwrap_or(cfg.run.repeats);
    let challenges = ctx.challenges(limit);
    let percent = metrics::reliability(
        &chip,
        &challenges,
        &cfg.topology,
        &cfg.technology,
        &cfg.measurement,
        &temps,
        repeats,
    )?;
    let valid = valid_challenges(
        &chip,
        &cfg.topology,
        &cfg.technology,
        cfg.run.validity_margin,
        &temps,
    )?;
    let total = space_of(&cfg.topology);

    let csv = format!(
        "chip_id,reliability_percent,challenges,temperatures,repeats,valid_challenges,challenge_space\n{},{percent},{},{},{repeats},{},{total}\n",
        chip.chip_id,
        challenges.len(),
        temps.len(),
        valid.len()
    );
    let text = format!(
        "reliability: {percent:.3}% over {} challenges x {} temperatures x {repeats} repeats\nvalid challenges (margin {}): {} of {total}\n",
        challenges.len(),
        temps.len(),
        cfg.run.validity_margin,
        valid.len()
    );
    let json = json!({
        "chip_id": chip.chip_id,
        "topology_ref": cfg.topology.reference(),
        "temperatures_c": temps,
        "repeats": repeats,
        "n_challenges": challenges.len(),
        "reliability_percent": percent,
        "validity_margin": cfg.run.validity_margin,
        "valid_challenges": valid,
        "challenge_space": total.to_string(),
    });
    ctx.emit(Report { json, csv, text })
}

pub fn delta_sweep(
    ctx: &Context,
    chip_path: Option<&Path>,
    pair: &str,
    temperature: Option<f64>,
) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let chip = ctx.chip(chip_path)?;
    let pair = parse_pair(pair)?;
    let t = temperature.unwrap_or(cfg.measurement.temperature);
    let sweep = metrics::delta_sweep(&chip, pair, &cfg.topology, &cfg.technology, t)?;
    let (positive, negative) = sweep.sign_split();

    let mut text = format!(
        "pair {}-{} at {t} °C: {positive} configurations with d_A > d_B, {negative} with d_A < d_B\n",
        pair.0, pair.1
    );
    for e in &sweep.entries {
        let _ = writeln!(text, "  {}  {:+.4} ps", e.config, e.delta_seconds * 1e12);
    }
    let json = json!({
        "chip_id": chip.chip_id,
        "positive": positive,
        "negative": negative,
        "sweep": sweep,
    });
    ctx.emit(Report {
        json,
        csv: sweep.to_csv(),
        text,
    })
}

pub fn challenge_space(ctx: &Context) -> Result<(), CliError> {
    let topo = &ctx.cfg.topology;
    let count = space_of(topo);
    let (r, c, l) = (topo.r_oscillators(), topo.c_columns(), topo.l_levels());
    let json = json!({
        "topology_ref": topo.reference(),
        "pairs": topo.pair_count(),
        "configurations": topo.config_count().to_string(),
        "challenge_space": count.to_string(),
    });
    let csv = format!("R,C,L,challenge_space\n{r},{c},{l},{count}\n");
    let text = format!("{count}\n");
    ctx.emit(Report { json, csv, text })
}

pub fn temp_table(
    ctx: &Context,
    chip_path: Option<&Path>,
    temps: &TempArgs,
) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let chip = ctx.chip(chip_path)?;
    let temps = ctx.temps(temps)?;
    let (table, unresolved) = build_config_table(&chip, &cfg.topology, &cfg.technology, &temps)?;
    let mem = memory_bits(&cfg.topology);
    let packed = if unresolved.is_empty() {
        Some(encode_table(&table, &cfg.topology)?)
    } else {
        None
    };
    let unresolved_text: Vec<String> = unresolved.iter().map(|(a, b)| format!("{a}-{b}")).collect();

    let mut csv = String::from("pair,config\n");
    for ((a, b), config) in &table.entries {
        let _ = writeln!(csv, "{a}-{b},{config}");
    }
    let mut text = format!(
        "{} of {} pairs resolved over {} temperatures ({} .. {} °C)\n",
        table.entries.len(),
        cfg.topology.pair_count(),
        temps.len(),
        temps[0],
        temps[temps.len() - 1]
    );
    for ((a, b), config) in &table.entries {
        let _ = writeln!(text, "  {a}-{b}: {config}");
    }
    if !unresolved.is_empty() {
        let _ = writeln!(text, "unresolved: {}", unresolved_text.join(", "));
    }
    let _ = writeln!(text, "memory_bits: {mem}");
    match &packed {
        Some(bits) => {
            let _ = writeln!(
                text,
                "packed: {bits}\nhex: {}\nlength: {}",
                bits.to_hex(),
                bits.len()
            );
        }
        None => {
            let _ = writeln!(text, "packed: (table incomplete, nothing to pack)");
        }
    }
    let json = json!({
        "chip_id": chip.chip_id,
        "temperatures_c": temps,
        "table": table,
        "unresolved": unresolved_text,
        "memory_bits": mem,
        "packed_bits": packed.as_ref().map(|b| b.to_string()),
        "packed_hex": packed.as_ref().map(|b| b.to_hex()),
        "packed_length": packed.as_ref().map(|b| b.len()),
    });
    ctx.emit(Report { json, csv, text })
}

pub fn area(ctx: &Context, grid: Option<&str>, topology_only: bool) -> Result<(), CliError> {
    let constants = AreaConstants::default();
    if topology_only {
        let topo = &ctx.cfg.topology;
        let reports = vec![
            bits_per_area(topo, &constants, PufVariant::Original),
            bits_per_area(topo, &constants, PufVariant::MultiVoltage),
        ];
        let json = json!({ "topology_ref": topo.reference(), "reports": reports });
        return ctx.emit(Report {
            json,
            csv: sweep_csv(&reports),
            text: text_table(&reports, &constants),
        });
    }
    let name = grid.unwrap_or(&ctx.cfg.run.area_grid);
    let grid = SweepGrid::from_name(name).ok_or_else(|| {
        let names: Vec<_> = SweepGrid::ALL.iter().map(|g| g.name()).collect();
        CliError::Usage(format!(
            "unknown grid {name:?}; expected one of {}",
            names.join(", ")
        ))
    })?;
    let reports = sweep(grid, &constants)?;
    let mut text = String::new();
    if let Some(note) = grid.note() {
        let _ = writeln!(text, "# note: {note}");
    }
    text.push_str(&text_table(&reports, &constants));
    let json = json!({
        "grid": grid.name(),
        "note": grid.note(),
        "constants": constants,
        "reports": reports,
    });
    ctx.emit(Report {
        json,
        csv: sweep_csv(&reports),
        text,
    })
}
