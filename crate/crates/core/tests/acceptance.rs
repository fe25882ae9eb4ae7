//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use mvpuf::area::{bits_per_area, switch_overhead, AreaConstants, PufVariant, SweepGrid};
use mvpuf::metrics::{
    challenge_space, delta_sweep, reliability, uniqueness, uniqueness_from_bits, valid_challenges,
};
use mvpuf::puf::{ideal_bit, respond_pair, respond_seeded};
use mvpuf::temp_aware::{
    build_config_table, decode_table, default_temp_samples, encode_table, memory_bits, ConfigTable,
};
use mvpuf::*;
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;

fn tech() -> TechnologyParams {
    TechnologyParams::umc90()
}

fn check(cond: bool, msg: String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn alpha_law_constants() -> Outcome {
    let k = tech().k_factor();
    check((k - 0.379).abs() <= 0.001, format!("K = {k:.6}"))?;
    Ok(format!("K = {k:.6} (target 0.379 ± 0.001)"))
}

fn voltage_scaling() -> Outcome {
    let f = voltage_scale_factor(1.2, 1.32, 25.0, &tech()).map_err(|e| e.to_string())?;
    check((f - 0.83).abs() <= 0.005, format!("factor = {f:.5}"))?;
    Ok(format!(
        "1.2 V -> 1.32 V factor = {f:.5} (target 0.83 ± 0.005)"
    ))
}

fn worked_example() -> Outcome {
    let topo = PufTopology::with_default_levels(2, 3, 3, 3).map_err(|e| e.to_string())?;
    let ro = |w: [f64; 3]| -> Vec<InverterDevice> {
        w.iter()
            .map(|&x| InverterDevice {
                d_base: x / 6.0 * 1e-9,
                kappa: 0.0,
            })
            .collect()
    };
    let chip = ChipInstance::from_devices(
        "worked",
        0,
        &topo,
        vec![ro([2.0, 3.0, 1.0]), ro([1.0, 1.0, 4.0])],
    )
    .map_err(|e| e.to_string())?;
    let factor = |ro_idx: usize, cfg: &str| -> std::result::Result<f64, String> {
        let cfg: VoltageConfiguration = cfg.parse().map_err(|e: Error| e.to_string())?;
        let nominal = ro_delay(&chip, ro_idx, &topo.uniform_config(1), &topo, &tech(), 25.0)
            .map_err(|e| e.to_string())?;
        Ok(
            ro_delay(&chip, ro_idx, &cfg, &topo, &tech(), 25.0).map_err(|e| e.to_string())?
                / nominal,
        )
    };
    let a1 = factor(0, "211")?;
    let b1 = factor(1, "211")?;
    let a3 = factor(0, "222")?;
    let b3 = factor(1, "222")?;
    let ok = (a1 - 0.94).abs() <= 0.005
        && (b1 - 0.97).abs() <= 0.005
        && (a3 - 0.83).abs() <= 0.005
        && (b3 - 0.83).abs() <= 0.005;
    let msg = format!("column 1 raised: A {a1:.4}, B {b1:.4}; all raised: A {a3:.4}, B {b3:.4}");
    check(ok, msg.clone())?;
    Ok(msg)
}

fn global_voltage_invariance() -> Outcome {
    let topo = PufTopology::with_default_levels(2, 13, 13, 3).map_err(|e| e.to_string())?;
    let var = VariationModel {
        sigma_kappa: 0.0,
        sigma_jitter: 0.0,
        ..Default::default()
    };
    let settings = MeasurementSettings::noise_free();
    let mut ideal_flips = 0;
    let mut counter_flips = 0;
    let mut ties = 0;
    for seed in 0..100u64 {
        let chip = sample_chip(&tech(), &var, &topo, seed).map_err(|e| e.to_string())?;
        let mut ideal = Vec::new();
        let mut counted = Vec::new();
        for level in 0..3 {
            let cfg = topo.uniform_config(level);
            let da = ro_delay(&chip, 0, &cfg, &topo, &tech(), 25.0).map_err(|e| e.to_string())?;
            let db = ro_delay(&chip, 1, &cfg, &topo, &tech(), 25.0).map_err(|e| e.to_string())?;
            ideal.push(ideal_bit(da, db));
            let ch = Challenge::new(0, 1, cfg).map_err(|e| e.to_string())?;
            let r = respond_seeded(&chip, &ch, &topo, &tech(), &settings, 0)
                .map_err(|e| e.to_string())?;
            if r.unstable {
                ties += 1;
            } else {
                counted.push(r.bit);
            }
        }
        ideal_flips += ideal.iter().any(|b| *b != ideal[0]) as usize;
        counter_flips += counted.iter().any(|b| *b != counted[0]) as usize;
    }
    let msg = format!(
        "100 chips: {ideal_flips} delay-order flips, {counter_flips} counter flips, {ties} counter ties"
    );
    check(ideal_flips == 0 && counter_flips == 0, msg.clone())?;
    Ok(msg)
}

fn uniqueness_cohorts() -> Outcome {
    let topo = PufTopology::with_default_levels(2, 13, 3, 2).map_err(|e| e.to_string())?;
    let var = VariationModel::default();
    let challenges: Vec<_> = enumerate_challenges(&topo).collect();
    if challenges.len() != 8 {
        return Err(format!("n = {} challenges", challenges.len()));
    }
    let settings = MeasurementSettings::noise_free();
    let mut per_cohort = Vec::new();
    let mut pooled_bits = Vec::new();
    for cohort in 0..30u64 {
        let chips = (0..20u64)
            .map(|i| sample_chip(&tech(), &var, &topo, 10_000 + cohort * 20 + i))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let report = uniqueness(&chips, &challenges, &topo, &tech(), &settings)
            .map_err(|e| e.to_string())?;
        per_cohort.push(report.uniqueness_percent);
        for chip in &chips {
            pooled_bits.push(
                mvpuf::metrics::response_vector(chip, &challenges, &topo, &tech(), &settings)
                    .map_err(|e| e.to_string())?,
            );
        }
    }
    let cohort_mean = per_cohort.iter().sum::<f64>() / per_cohort.len() as f64;
    let grand = uniqueness_from_bits(&pooled_bits)
        .map_err(|e| e.to_string())?
        .uniqueness_percent;
    let lo = per_cohort.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = per_cohort.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let msg = format!(
        "mean of 30 cohort U = {cohort_mean:.2}% (band 46..54), pooled 600-chip U = {grand:.2}% (band 48..52); single cohorts ranged {lo:.1}..{hi:.1}%"
    );
    check(
        (46.0..=54.0).contains(&cohort_mean) && (48.0..=52.0).contains(&grand),
        msg.clone(),
    )?;
    Ok(msg)
}

fn challenge_space_count() -> Outcome {
    let small = PufTopology::with_default_levels(4, 3, 3, 2).map_err(|e| e.to_string())?;
    let formula = challenge_space(&small);
    let enumerated = enumerate_challenges(&small).count();
    let big = PufTopology::with_default_levels(20, 11, 11, 3).map_err(|e| e.to_string())?;
    let big_count = challenge_space(&big);
    let msg = format!(
        "R=4,L=2,C=3: formula {formula}, enumeration {enumerated}; R=20,L=3,C=11: {big_count}"
    );
    check(
        formula == BigUint::from(48u32)
            && enumerated == 48
            && big_count == BigUint::from(33_657_930u64),
        msg.clone(),
    )?;
    Ok(msg)
}

fn memory_size() -> Outcome {
    let topo = PufTopology::with_default_levels(4, 5, 5, 2).map_err(|e| e.to_string())?;
    let bits = memory_bits(&topo);
    let mut table = ConfigTable::new(&topo);
    for (pair, cfg) in [
        ((0, 1), "01001"),
        ((0, 2), "01100"),
        ((0, 3), "10010"),
        ((1, 2), "01110"),
        ((1, 3), "11000"),
        ((2, 3), "00110"),
    ] {
        table
            .entries
            .insert(pair, cfg.parse().map_err(|e: Error| e.to_string())?);
    }
    let packed = encode_table(&table, &topo).map_err(|e| e.to_string())?;
    let back = decode_table(&packed, &topo).map_err(|e| e.to_string())?;

    // A table built from a sampled chip packs to the same length.
    let chip =
        sample_chip(&tech(), &VariationModel::default(), &topo, 0).map_err(|e| e.to_string())?;
    let (built, unresolved) = build_config_table(&chip, &topo, &tech(), &default_temp_samples())
        .map_err(|e| e.to_string())?;
    let built_len = if unresolved.is_empty() {
        Some(
            encode_table(&built, &topo)
                .map_err(|e| e.to_string())?
                .len(),
        )
    } else {
        None
    };
    let msg = format!(
        "memory_bits = {bits}, packed reference table = {} bits ({}), sampled-chip table = {built_len:?} bits",
        packed.len(),
        packed
    );
    check(
        bits == 30 && packed.len() == 30 && back == table && built_len.is_none_or(|n| n == 30),
        msg.clone(),
    )?;
    Ok(msg)
}

fn temperature_aware_search() -> Outcome {
    let topo = PufTopology::with_default_levels(2, 13, 3, 2).map_err(|e| e.to_string())?;
    let var = VariationModel::default();
    let temps = default_temp_samples();
    let mut resolved = 0;
    let mut nominal_used = 0;
    let mut reverify_flips = 0;
    for seed in 0..100u64 {
        let chip = sample_chip(&tech(), &var, &topo, 20_000 + seed).map_err(|e| e.to_string())?;
        let (table, _) =
            build_config_table(&chip, &topo, &tech(), &temps).map_err(|e| e.to_string())?;
        for (&(a, b), cfg) in &table.entries {
            resolved += 1;
            nominal_used += (*cfg == topo.uniform_config(0)) as usize;
            let bits = temps
                .iter()
                .map(|&t| -> std::result::Result<Option<u8>, String> {
                    let da =
                        ro_delay(&chip, a, cfg, &topo, &tech(), t).map_err(|e| e.to_string())?;
                    let db =
                        ro_delay(&chip, b, cfg, &topo, &tech(), t).map_err(|e| e.to_string())?;
                    Ok(ideal_bit(da, db))
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if bits.iter().any(|x| x.is_none() || *x != bits[0]) {
                reverify_flips += 1;
            }
        }
    }
    let msg = format!(
        "{resolved}/100 pairs resolvable ({nominal_used} at all-nominal), {reverify_flips} stored configs flip on re-verification"
    );
    check(resolved >= 95 && reverify_flips == 0, msg.clone())?;
    Ok(msg)
}

fn switch_overhead_check() -> Outcome {
    let k = AreaConstants::default();
    let worst = PufTopology::with_default_levels(2, 19, 19, 3).map_err(|e| e.to_string())?;
    let oh = switch_overhead(&worst, &k).overhead_percent;
    let mut violations = 0;
    let mut checked = 0;
    let topo = |r, c, l| PufTopology::with_default_levels(r, c, c, l).map_err(|e| e.to_string());
    for r in 2..=10 {
        for c in (3..=19).step_by(2) {
            for l in 2..=4 {
                let here = switch_overhead(&topo(r, c, l)?, &k).overhead_percent;
                if l < 4 {
                    checked += 1;
                    violations += (switch_overhead(&topo(r, c, l + 1)?, &k).overhead_percent
                        <= here) as usize;
                }
                if c < 19 {
                    checked += 1;
                    violations += (switch_overhead(&topo(r, c + 2, l)?, &k).overhead_percent
                        <= here) as usize;
                }
                if r < 10 {
                    checked += 1;
                    violations += (switch_overhead(&topo(r + 1, c, l)?, &k).overhead_percent
                        >= here) as usize;
                }
            }
        }
    }
    let msg = format!(
        "R=2, I=C=19, L=3 overhead = {oh:.2}% (target 42 ± 3); {checked} monotonicity comparisons, {violations} violations"
    );
    check((oh - 42.0).abs() <= 3.0 && violations == 0, msg.clone())?;
    Ok(msg)
}

fn bit_count_dominance() -> Outcome {
    let k = AreaConstants::default();
    let mut compared = 0;
    let pairs_of = [
        (SweepGrid::OriginalByR, SweepGrid::MultiByR),
        (SweepGrid::OriginalByI, SweepGrid::MultiByI),
    ];
    for (orig_grid, multi_grid) in pairs_of {
        for (o, m) in orig_grid.points().into_iter().zip(multi_grid.points()) {
            let (_, r, i, _, _) = o;
            let (_, r2, i2, c, l) = m;
            if (r, i) != (r2, i2) {
                return Err(format!("grids misaligned at R={r}, I={i}"));
            }
            let orig = bits_per_area(
                &PufTopology::with_default_levels(r, i, 1, 1).map_err(|e| e.to_string())?,
                &k,
                PufVariant::Original,
            );
            let multi = bits_per_area(
                &PufTopology::with_default_levels(r, i, c, l).map_err(|e| e.to_string())?,
                &k,
                PufVariant::MultiVoltage,
            );
            let factor = BigUint::from(l).pow(c as u32);
            if multi.max_output_bits != orig.max_output_bits * factor {
                return Err(format!("R={r}, I={i}: {} bits", multi.max_output_bits));
            }
            compared += 1;
        }
    }
    Ok(format!(
        "{compared} grid points: multi-voltage bits = original bits x L^C exactly"
    ))
}

fn property_suite() -> Outcome {
    let t = tech();
    let var = VariationModel::default();
    let topo = PufTopology::with_default_levels(6, 13, 3, 2).map_err(|e| e.to_string())?;
    let err = |e: Error| e.to_string();

    // additivity
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let chip = sample_chip(&t, &var, &topo, seed).map_err(err)?;
        for cfg in enumerate_configs(&topo) {
            for ro in 0..6 {
                let total = ro_delay(&chip, ro, &cfg, &topo, &t, 85.0).map_err(err)?;
                let sum: f64 = chip
                    .ro(ro)
                    .iter()
                    .enumerate()
                    .map(|(j, d)| {
                        alpha_law_delay(
                            d.d_base,
                            topo.voltage_levels()[cfg.level(topo.column_of(j))],
                            85.0,
                            &t,
                            d.kappa,
                        )
                        .unwrap()
                    })
                    .sum();
                worst = worst.max(((total - sum) / sum).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("additivity error {worst:e}"))?;

    // antisymmetry
    let settings = MeasurementSettings::noise_free();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut antisym_checked = 0;
    for seed in 0..20u64 {
        let chip = sample_chip(&t, &var, &topo, seed).map_err(err)?;
        for (a, b) in topo.pairs() {
            for cfg in enumerate_configs(&topo) {
                let ab =
                    respond_pair(&chip, a, b, &cfg, &topo, &t, &settings, &mut rng).map_err(err)?;
                let ba =
                    respond_pair(&chip, b, a, &cfg, &topo, &t, &settings, &mut rng).map_err(err)?;
                if !ab.unstable {
                    check(
                        ab.bit != ba.bit,
                        format!("antisymmetry fails at {a}-{b}:{cfg}"),
                    )?;
                    antisym_checked += 1;
                }
            }
        }
    }

    // enumeration
    for l in 1..=4 {
        for c in 1..=5 {
            let tp = PufTopology::with_default_levels(2, c | 1, c, l).map_err(err)?;
            let all: Vec<_> = enumerate_configs(&tp).collect();
            let unique: HashSet<_> = all.iter().collect();
            check(
                all.len() == l.pow(c as u32) && unique.len() == all.len(),
                format!("enumeration L={l} C={c}"),
            )?;
        }
    }

    // sampling determinism
    for seed in [0u64, 1, 42, u64::MAX] {
        let a = sample_chip(&t, &var, &topo, seed)
            .map_err(err)?
            .to_json()
            .map_err(err)?;
        let b = sample_chip(&t, &var, &topo, seed)
            .map_err(err)?
            .to_json()
            .map_err(err)?;
        check(
            a == b,
            format!("sampling not deterministic for seed {seed}"),
        )?;
    }

    // packed table round trip
    let table_topo = PufTopology::with_default_levels(5, 7, 4, 3).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let mut table = ConfigTable::new(&table_topo);
        for p in table_topo.pairs() {
            let levels = (0..4)
                .map(|_| rand::Rng::random_range(&mut rng, 0..3))
                .collect();
            table.entries.insert(p, VoltageConfiguration::new(levels));
        }
        let bits = encode_table(&table, &table_topo).map_err(err)?;
        check(
            bits.len() as u64 == memory_bits(&table_topo)
                && decode_table(&bits, &table_topo).map_err(err)? == table,
            "table round trip".into(),
        )?;
    }

    // parallelism independence
    let reports = |threads: usize| -> std::result::Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| {
            let chips = (0..12u64)
                .map(|s| sample_chip(&t, &var, &topo, s))
                .collect::<Result<Vec<_>>>()?;
            let challenges: Vec<_> = enumerate_challenges(&topo).collect();
            let u = uniqueness(&chips, &challenges, &topo, &t, &settings)?;
            let uj = uniqueness(
                &chips,
                &challenges,
                &topo,
                &t,
                &MeasurementSettings::default(),
            )?;
            let d = delta_sweep(&chips[0], (0, 5), &topo, &t, 25.0)?;
            let (table, unresolved) =
                build_config_table(&chips[1], &topo, &t, &default_temp_samples())?;
            let valid = valid_challenges(&chips[2], &topo, &t, 0.005, &default_temp_samples())?;
            let rel = reliability(
                &chips[3],
                &challenges,
                &topo,
                &t,
                &MeasurementSettings::default(),
                &default_temp_samples(),
                3,
            )?;
            Ok::<_, Error>(serde_json::to_string(&(
                u, uj, d, table, unresolved, valid, rel,
            ))?)
        })
        .map_err(|e| e.to_string())
    };
    let serial = reports(1)?;
    let parallel = reports(4)?;
    check(
        serial == parallel,
        "reports differ between 1 and 4 threads".into(),
    )?;

    Ok(format!(
        "additivity max rel err {worst:.1e}; {antisym_checked} antisymmetric pairs; enumeration, determinism, round trip ok; reports identical at 1 and 4 threads"
    ))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        ("1 alpha-law constant K", alpha_law_constants),
        ("2 voltage scale factor", voltage_scaling),
        ("3 worked three-inverter example", worked_example),
        ("4 global-voltage invariance", global_voltage_invariance),
        ("5 uniqueness over 30 cohorts", uniqueness_cohorts),
        ("6 challenge-space count", challenge_space_count),
        ("7 configuration memory size", memory_size),
        ("8 temperature-aware search", temperature_aware_search),
        ("9 switch overhead", switch_overhead_check),
        ("10 bit-count dominance", bit_count_dominance),
        ("11 property suite", property_suite),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{name}] {detail} ({secs:.2}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{name}] {detail} ({secs:.2}s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
