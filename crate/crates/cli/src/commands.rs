use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mman_core::config::parse_map;
use mman_core::data::{load_dataset, synth_set, write_dataset, Sample};
use mman_core::metrics::ConvergenceTrace;
use mman_core::report::{architecture_table, curves_svg, run_variant_study};
use mman_core::training::{checkpoint, evaluate, Precision, Profile, TrainConfig, Trainer};
use mman_core::{Error, Real, Result};

use crate::Common;

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Everything needed to rerun a command exactly.
fn run_manifest(command: &str, config: Option<&TrainConfig>, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command = {command}");
    let _ = writeln!(s, "version = {VERSION}");
    if let Some(c) = config {
        let _ = writeln!(s, "seed = {}", c.seed);
        let _ = writeln!(s, "config_digest = {}", c.digest_hex());
    }
    for (k, v) in extra {
        let _ = writeln!(s, "{k} = {v}");
    }
    if let Some(c) = config {
        s.push_str("\n[config]\n");
        s.push_str(&c.to_text());
    }
    s
}

/// Config file, then command-line flags, then validation.
pub fn resolve_config(common: &Common) -> Result<TrainConfig> {
    let mut map: BTreeMap<String, String> = match &common.config {
        Some(p) => parse_map(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => BTreeMap::new(),
    };
    let flags = [
        ("seed", common.seed.map(|s| s.to_string())),
        ("variant", common.variant.clone()),
        ("scales", common.scales.clone()),
        ("profile", common.profile.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    TrainConfig::from_map(&map)
}

fn training_data(config: &mut TrainConfig, data: Option<&Path>) -> Result<Vec<Sample>> {
    match data {
        Some(manifest) => {
            let samples = load_dataset(manifest, config.classes)?;
            if samples.len() != config.samples {
                log::info!(
                    "training set has {} samples; config said {}",
                    samples.len(),
                    config.samples
                );
                config.samples = samples.len();
                config.validate()?;
            }
            Ok(samples)
        }
        None => config.training_set(),
    }
}

pub fn train(
    common: &Common,
    out: &Path,
    data: Option<&Path>,
    iterations: Option<usize>,
    resume: Option<&Path>,
) -> Result<()> {
    let precision = match resume {
        Some(ckpt) => checkpoint::stored_precision(ckpt)?.parse()?,
        None => resolve_config(common)?.precision,
    };
    match precision {
        Precision::F32 => train_as::<f32>(common, out, data, iterations, resume),
        Precision::F64 => train_as::<f64>(common, out, data, iterations, resume),
    }
}

fn train_as<T: Real>(
    common: &Common,
    out: &Path,
    data: Option<&Path>,
    iterations: Option<usize>,
    resume: Option<&Path>,
) -> Result<()> {
    let (mut trainer, samples) = match resume {
        Some(ckpt) => {
            if common.config.is_some()
                || common.seed.is_some()
                || common.variant.is_some()
                || common.profile.is_some()
            {
                log::warn!("resuming: the checkpoint's config wins over --config/--seed/--variant/--profile");
            }
            let trainer = Trainer::<T>::load(ckpt)?;
            let mut config = trainer.config().clone();
            let samples = training_data(&mut config, data)?;
            if config != *trainer.config() {
                return Err(Error::config(
                    "samples",
                    "training set differs from the checkpoint's",
                ));
            }
            (trainer, samples)
        }
        None => {
            let mut config = resolve_config(common)?;
            let samples = training_data(&mut config, data)?;
            (Trainer::<T>::new(config)?, samples)
        }
    };
    let config = trainer.config().clone();
    log::info!(
        "training {} ({} profile, {}) for {} iterations, starting at {}",
        config.variant,
        config.profile,
        config.precision,
        trainer.total_iterations(),
        trainer.iteration()
    );
    trainer.run(&samples, iterations)?;

    write(&out.join("architecture.txt"), trainer.models().manifest())?;
    trainer.save(&out.join("checkpoint.bin"))?;
    trainer.trace().save(&out.join("trace.csv"))?;
    write(
        &out.join("curves.svg"),
        curves_svg(
            trainer.trace(),
            &format!("{} ({} profile)", config.variant, config.profile),
        ),
    )?;
    let report = evaluate(
        &trainer.models().generator,
        &samples,
        &config.scales,
        config.low_res_rule,
    )?;
    write(&out.join("report.csv"), report.to_csv())?;
    write(&out.join("report.txt"), report.to_table())?;
    let mut extra = vec![
        ("iterations_done", trainer.iteration().to_string()),
        ("finished", trainer.is_finished().to_string()),
    ];
    if let Some(d) = data {
        extra.push(("data", d.display().to_string()));
    }
    if let Some(r) = resume {
        extra.push(("resumed_from", r.display().to_string()));
    }
    write(
        &out.join("run.txt"),
        run_manifest("train", Some(&config), &extra),
    )?;
    println!("{}", report.to_table());
    println!("wrote {}", out.display());
    Ok(())
}

pub fn eval(ckpt: &Path, data: Option<&Path>, scales: Option<&str>, out: &Path) -> Result<()> {
    match checkpoint::stored_precision(ckpt)?.parse()? {
        Precision::F32 => eval_as::<f32>(ckpt, data, scales, out),
        Precision::F64 => eval_as::<f64>(ckpt, data, scales, out),
    }
}

fn eval_as<T: Real>(
    ckpt: &Path,
    data: Option<&Path>,
    scales: Option<&str>,
    out: &Path,
) -> Result<()> {
    let trainer = Trainer::<T>::load(ckpt)?;
    let mut config = trainer.config().clone();
    if let Some(s) = scales {
        let mut map = BTreeMap::new();
        map.insert("scales".to_string(), s.to_string());
        config = config.apply_map(&map)?;
        config.validate()?;
    }
    let samples = match data {
        Some(m) => load_dataset(m, config.classes)?,
        None => config.training_set()?,
    };
    let report = evaluate(
        &trainer.models().generator,
        &samples,
        &config.scales,
        config.low_res_rule,
    )?;
    write(&out.join("metrics.csv"), report.to_csv())?;
    write(&out.join("metrics.txt"), report.to_table())?;
    let mut extra = vec![("checkpoint", ckpt.display().to_string())];
    if let Some(d) = data {
        extra.push(("data", d.display().to_string()));
    }
    write(
        &out.join("run.txt"),
        run_manifest("eval", Some(&config), &extra),
    )?;
    println!("{}", report.to_table());
    Ok(())
}

pub fn gen_data(seed: u64, count: usize, size: usize, out: &Path) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidArgument("--count must be positive".into()));
    }
    let samples = synth_set(seed, count, size)?;
    let manifest = write_dataset(out, &samples)?;
    write(
        &out.join("run.txt"),
        run_manifest(
            "gen-data",
            None,
            &[
                ("seed", seed.to_string()),
                ("count", count.to_string()),
                ("size", size.to_string()),
            ],
        ),
    )?;
    println!("wrote {count} samples; manifest {}", manifest.display());
    Ok(())
}

pub fn variants(common: &Common, out: &Path, test_count: usize, no_train: bool) -> Result<()> {
    let config = resolve_config(common)?;
    let mut full = config.clone();
    full.profile = Profile::Full;
    let arch = architecture_table(&full)?;
    let mut text = format!(
        "architecture, full profile ({0}×{0} input, {1} classes)\n",
        full.profile.extent(),
        full.classes
    );
    text.push_str(&arch.to_table());
    if config.profile != Profile::Full {
        let desk = architecture_table(&config)?;
        let _ = write!(
            text,
            "\narchitecture, {0} profile ({1}×{1} input)\n{2}",
            config.profile,
            config.profile.extent(),
            desk.to_table()
        );
    }
    write(&out.join("architecture.txt"), &text)?;
    print!("{text}");

    let mut extra = vec![("test_count", test_count.to_string())];
    if !no_train {
        if test_count == 0 {
            return Err(Error::InvalidArgument(
                "--test-count must be positive".into(),
            ));
        }
        let train = config.training_set()?;
        let test = config.held_out_set(test_count)?;
        let study = match config.precision {
            Precision::F32 => run_variant_study::<f32>(&config, &train, &test)?,
            Precision::F64 => run_variant_study::<f64>(&config, &train, &test)?,
        };
        for (row, trace) in study.rows.iter().zip(&study.traces) {
            trace.save(&out.join(format!("trace_{}.csv", row.variant)))?;
            write(
                &out.join(format!("curves_{}.svg", row.variant)),
                curves_svg(
                    trace,
                    &format!("{} ({} profile)", row.variant, config.profile),
                ),
            )?;
        }
        write(&out.join("variants.csv"), study.to_csv())?;
        let table = study.to_table();
        write(&out.join("variants.txt"), &table)?;
        println!(
            "\ntrained comparison ({} held-out figures)\n{table}",
            test_count
        );
    } else {
        extra.push(("trained", "false".into()));
    }
    write(
        &out.join("run.txt"),
        run_manifest("variants", Some(&config), &extra),
    )?;
    Ok(())
}

pub fn export_curves(trace_path: &Path, out: &Path, title: Option<&str>) -> Result<()> {
    let trace = ConvergenceTrace::load(trace_path)?;
    let title = title.map(str::to_string).unwrap_or_else(|| {
        trace_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    write(&out.join("curves.csv"), csv)?;
    write(&out.join("curves.svg"), curves_svg(&trace, &title))?;
    write(
        &out.join("run.txt"),
        run_manifest(
            "export-curves",
            None,
            &[("trace", trace_path.display().to_string())],
        ),
    )?;
    println!("wrote {}", out.display());
    Ok(())
}
