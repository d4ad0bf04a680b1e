use std::fs;
use std::path::{Path, PathBuf};

use somno::autodiff::checkpoint;
use somno::data::{load_recording, make_dataset, save_recording, ManifestEntry, Recording, Split, ECG_CHANNEL, PPG_CHANNEL};
use somno::eval::{render_report, EvalReport};
use somno::experiment::{augment_recording, run, RunSpec};
use somno::kv::KvMap;
use somno::model::build_model;
use somno::sigproc::{preprocess_ecg, preprocess_ppg, Rate};
use somno::train::{evaluate_pooled, prepare};

use crate::config::RunConfig;
use crate::error::CliError;

pub const RECORDING_EXT: &str = "psg";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const MANIFEST_CSV: &str = "manifest.csv";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const RUN_CONFIG: &str = "config.txt";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Ppg,
    Ecg,
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(CliError::io(path))
}

fn recording_path(dir: &Path, subject_id: &str) -> PathBuf {
    dir.join(format!("{subject_id}.{RECORDING_EXT}"))
}

/// A single recording file, or every recording in a directory in name order.
fn input_files(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .map_err(CliError::io(input))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == RECORDING_EXT))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("no .{RECORDING_EXT} files in {}", input.display())));
    }
    Ok(files)
}

/// Carries the manifest along when a command maps one directory onto another.
fn copy_manifest(input: &Path, out: &Path) -> Result<(), CliError> {
    if input.is_dir() && input != out {
        for name in [MANIFEST_JSON, MANIFEST_CSV] {
            let src = input.join(name);
            if src.is_file() {
                fs::copy(&src, out.join(name)).map_err(CliError::io(&src))?;
            }
        }
    }
    Ok(())
}

fn read_manifest(dir: &Path) -> Result<Option<Vec<ManifestEntry>>, CliError> {
    let path = dir.join(MANIFEST_JSON);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    serde_json::from_str(&text).map(Some).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_split(dir: &Path, manifest: &[ManifestEntry], split: Split) -> Result<Vec<Recording>, CliError> {
    manifest
        .iter()
        .filter(|e| e.split == split)
        .map(|e| Ok(load_recording(&recording_path(dir, &e.subject_id))?))
        .collect()
}

fn manifest_csv(entries: &[ManifestEntry]) -> String {
    let mut out = String::from("subject_id,seed,n_epochs,split\n");
    for e in entries {
        let split = match e.split {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        };
        out.push_str(&format!("{},{},{},{split}\n", e.subject_id, e.seed, e.n_epochs));
    }
    out
}

/// Writes `n_subjects` synthetic recordings and a JSON and CSV manifest.
pub fn synth(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    create_dir(out)?;
    let ds = make_dataset(cfg.n_subjects, &cfg.synth, &cfg.ratios, cfg.synth.seed)?;
    for rec in ds.train.iter().chain(&ds.val).chain(&ds.test) {
        save_recording(rec, &recording_path(out, &rec.subject_id))?;
    }
    let json = serde_json::to_string_pretty(&ds.manifest).expect("manifest serialises");
    write(&out.join(MANIFEST_JSON), json)?;
    write(&out.join(MANIFEST_CSV), manifest_csv(&ds.manifest))?;
    log::info!("wrote {} recordings to {}", ds.manifest.len(), out.display());
    Ok(())
}

/// Runs the `kind` pipeline on every channel not already at the model rate.
pub fn preprocess(input: &Path, out: &Path, kind: Kind) -> Result<(), CliError> {
    create_dir(out)?;
    let (own, other) = match kind {
        Kind::Ppg => (PPG_CHANNEL, ECG_CHANNEL),
        Kind::Ecg => (ECG_CHANNEL, PPG_CHANNEL),
    };
    for path in input_files(input)? {
        let mut rec = load_recording(&path)?;
        if rec.channel(own).is_none() {
            log::warn!("{}: no `{own}` channel; applying the {own} pipeline to {:?}", path.display(), rec.channel_names());
        }
        if rec.channel(other).is_some() {
            log::warn!("{}: `{other}` channel will go through the {own} pipeline", path.display());
        }
        if rec.rate() == Rate::MODEL {
            log::info!("{}: already at the model rate, unchanged", path.display());
        } else {
            for ch in &mut rec.channels {
                ch.signal = match kind {
                    Kind::Ppg => preprocess_ppg(&ch.signal)?,
                    Kind::Ecg => preprocess_ecg(&ch.signal)?,
                };
            }
            rec.validate()?;
        }
        save_recording(&rec, &out.join(path.file_name().expect("file path")))?;
    }
    copy_manifest(input, out)
}

/// Adds the augmented channel next to `ppg` in every recording.
pub fn augment(cfg: &RunConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    create_dir(out)?;
    for path in input_files(input)? {
        let mut rec = load_recording(&path)?;
        augment_recording(&mut rec, &cfg.augment)?;
        save_recording(&rec, &out.join(path.file_name().expect("file path")))?;
    }
    copy_manifest(input, out)
}

/// Trains on the manifest's train split with early stopping on its val
/// split. Writes the log, the best checkpoint and the resolved config.
pub fn train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<(), CliError> {
    let manifest = read_manifest(data)?
        .ok_or_else(|| CliError::Data(format!("{} has no {MANIFEST_JSON}", data.display())))?;
    let train = load_split(data, &manifest, Split::Train)?;
    let val = load_split(data, &manifest, Split::Val)?;
    create_dir(out)?;
    write(&out.join(RUN_CONFIG), cfg.to_kv().to_text())?;
    let spec = RunSpec {
        strategy: &cfg.strategy,
        model: &cfg.model,
        train: &cfg.train,
        augment: &cfg.augment,
        model_seed: cfg.train.seed,
    };
    let result = run(&spec, &train, &val, &[])?;
    write(&out.join(TRAIN_LOG), &result.log)?;
    write(&out.join(CHECKPOINT), checkpoint::encode(&result.outcome.best))?;
    let st = &result.outcome.state;
    log::info!("best val kappa {:.4} at epoch {} of {}", st.best_val_kappa, st.best_epoch, st.history.len());
    Ok(())
}

/// Scores a trained run on `data`: its test split when a manifest is
/// present, otherwise every recording. Returns the report text.
pub fn eval(run_dir: &Path, data: &Path, out: &Path) -> Result<String, CliError> {
    let cfg_path = run_dir.join(RUN_CONFIG);
    let text = fs::read_to_string(&cfg_path).map_err(CliError::io(&cfg_path))?;
    let cfg = RunConfig::resolve(&KvMap::parse(&text)?)?;
    let model = build_model(&cfg.model, cfg.train.seed)?;
    let ckpt = run_dir.join(CHECKPOINT);
    checkpoint::restore(&model.parameters(), &checkpoint::load(&ckpt)?)?;

    let recordings = match read_manifest(data)? {
        Some(m) => load_split(data, &m, Split::Test)?,
        None => input_files(data)?.iter().map(|p| load_recording(p)).collect::<Result<_, _>>()?,
    };
    if recordings.is_empty() {
        return Err(CliError::Data(format!("no test recordings in {}", data.display())));
    }
    let prepared = recordings
        .into_iter()
        .map(|mut rec| {
            cfg.strategy.attach_aux(&mut rec, &cfg.augment)?;
            Ok(prepare(&rec, &cfg.strategy.channels(), &model)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let report = EvalReport::from_confusion(evaluate_pooled(&model, &prepared)?)?;
    let (text, json) = render_report(&report);
    create_dir(out)?;
    write(&out.join(REPORT_TXT), &text)?;
    write(&out.join(REPORT_JSON), json)?;
    Ok(text)
}
