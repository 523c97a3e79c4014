use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lymphnet::dataset::{
    build_split, extract_patches, ingest_raster, read_record, record_path, select, synth_corpus,
    write_corpus, Diagnosis, Manifest, ManifestRow, PatchRecord, RecordId, Sample, SplitAssignment,
    SplitCounts, SplitKind, MANIFEST_FILE, PATCHES_PER_SET, RECORDS_DIR, SETS_PER_CASE,
};
use lymphnet::eval::{evaluate, predict_image};
use lymphnet::model::gradcheck::grad_check;
use lymphnet::model::io::{load_model_file, save_model_file};
use lymphnet::model::{train, Precision, StepDecay, TrainConfig};
use lymphnet::Error;

use crate::args::{
    Command, EvalArgs, ExtractArgs, GradcheckArgs, Invocation, PredictArgs, SplitArgs, SynthArgs,
    TrainArgs,
};
use crate::CliError;

pub const RUN_CONFIG: &str = "run.cfg";
pub const MODEL_FILE: &str = "model.lymf";
pub const HISTORY_FILE: &str = "history.tsv";
pub const GRADCHECK_FILE: &str = "gradcheck.tsv";
pub const PREDICTION_FILE: &str = "prediction.txt";

type Result<T> = std::result::Result<T, CliError>;

/// Run the parsed command and return its one-line summary.
pub fn run(inv: &Invocation) -> Result<String> {
    let cli = &inv.cli;
    let cfg = inv.resolved.as_str();
    match &cli.command {
        Command::Synth(a) => synth(a, cli.seed, cfg),
        Command::Extract(a) => extract(a, cli.seed, cfg),
        Command::Split(a) => split(a, cli.seed, cfg),
        Command::Train(a) => train_cmd(a, cli.seed, cli.precision, cfg),
        Command::Gradcheck(a) => gradcheck(a, cli.seed, cfg),
        Command::Eval(a) => eval(a, cli.precision, cfg),
        Command::Predict(a) => predict(a, cli.precision, cfg),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    }
    fs::write(path, contents).map_err(|e| Error::from(e).in_file(path))?;
    Ok(())
}

fn synth(a: &SynthArgs, seed: u64, cfg: &str) -> Result<String> {
    let samples = synth_corpus(a.cases, seed)?;
    let manifest = write_corpus(&a.out, &samples)?;
    write_file(&a.out.join(RUN_CONFIG), cfg)?;
    let per_class = manifest.cases_per_label();
    Ok(format!(
        "synth: {} records from {} cases ({} per class) in {}",
        manifest.len(),
        a.cases,
        per_class[0],
        a.out.display()
    ))
}

fn extract(a: &ExtractArgs, seed: u64, cfg: &str) -> Result<String> {
    let label = Diagnosis::from_code(a.label.into())?;
    let file = fs::File::open(&a.image).map_err(|e| Error::from(e).in_file(&a.image))?;
    let image = ingest_raster(std::io::BufReader::new(file)).map_err(|e| e.in_file(&a.image))?;
    let case_id = match &a.case {
        Some(c) => c.clone(),
        None => a
            .image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::Failed("cannot derive a case id; pass --case".into()))?,
    };
    if case_id.is_empty() || case_id.contains(['\t', '\n', '/']) {
        return Err(CliError::Failed(format!("invalid case id {case_id:?}")));
    }
    let ids: Vec<RecordId> = (0..a.n)
        .map(|i| {
            let set = a.set as usize + i / PATCHES_PER_SET as usize;
            if set >= SETS_PER_CASE as usize {
                return Err(CliError::Failed(format!(
                    "{} patches from set {} overflow the {SETS_PER_CASE} sets of a case",
                    a.n, a.set
                )));
            }
            Ok(RecordId::new(case_id.clone(), set as u8, (i % PATCHES_PER_SET as usize) as u8))
        })
        .collect::<Result<_>>()?;

    let manifest_path = a.out.join(MANIFEST_FILE);
    let mut manifest = if manifest_path.exists() {
        Manifest::load(&manifest_path)?
    } else {
        Manifest::default()
    };
    if let Some(dup) = ids.iter().find(|id| manifest.rows.iter().any(|r| &r.id == *id)) {
        return Err(CliError::Failed(format!(
            "{dup} is already in {}",
            manifest_path.display()
        )));
    }
    let patches = extract_patches(&image, a.n, seed, a.reject_background.then_some(a.background_threshold))?;
    fs::create_dir_all(a.out.join(RECORDS_DIR)).map_err(|e| Error::from(e).in_file(&a.out))?;
    for (id, pixels) in ids.into_iter().zip(patches) {
        let path = record_path(&id);
        write_file(&a.out.join(&path), PatchRecord::new(label, pixels).to_line())?;
        manifest.rows.push(ManifestRow { path, id, label });
    }
    manifest.save(&manifest_path)?;
    write_file(&a.out.join(format!("extract-{case_id}-s{}.cfg", a.set)), cfg)?;
    Ok(format!(
        "extract: {} {} patches from {} as case {case_id}; manifest now {} rows",
        a.n,
        label.short_name(),
        a.image.display(),
        manifest.len()
    ))
}

fn split(a: &SplitArgs, seed: u64, cfg: &str) -> Result<String> {
    let manifest = Manifest::load(&a.corpus.join(MANIFEST_FILE))?;
    let mut counts = SplitCounts::proportional(manifest.len());
    counts.train = a.train.unwrap_or(counts.train);
    counts.val = a.val.unwrap_or(counts.val);
    counts.test_sets = a.test_sets.unwrap_or(counts.test_sets);
    let split = build_split(&manifest, counts, seed, a.case_disjoint)?;
    split.save(&a.out)?;
    write_file(&sidecar(&a.out), cfg)?;
    Ok(format!(
        "split: train={} val={} test={} ({} sets) -> {}",
        split.count(SplitKind::Train),
        split.count(SplitKind::Val),
        split.count(SplitKind::Test),
        counts.test_sets,
        a.out.display()
    ))
}

/// `<file>.cfg` beside a single-file output.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".cfg");
    path.with_file_name(name)
}

fn load_split_samples(corpus: &Path, split_path: &Path) -> Result<(Vec<Sample>, SplitAssignment)> {
    let manifest = Manifest::load(&corpus.join(MANIFEST_FILE))?;
    let split = SplitAssignment::load(split_path)?;
    split.check_against(&manifest).map_err(|e| e.in_file(split_path))?;
    Ok((manifest.load_samples(corpus)?, split))
}

fn train_cmd(a: &TrainArgs, seed: u64, precision: Precision, cfg: &str) -> Result<String> {
    let (samples, split) = load_split_samples(&a.corpus, &a.split)?;
    let config = TrainConfig {
        learning_rate: a.learning_rate,
        momentum: a.momentum,
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed,
        lr_decay: (a.lr_decay_every > 0).then_some(StepDecay {
            factor: a.lr_decay_factor,
            every: a.lr_decay_every,
        }),
        precision,
    };
    let outcome = train(
        &a.arch,
        &config,
        &select(&samples, &split, SplitKind::Train),
        &select(&samples, &split, SplitKind::Val),
        &mut |e| {
            eprintln!(
                "epoch {:>3}  lr {:.6}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
                e.epoch, e.learning_rate, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
            )
        },
    )?;
    fs::create_dir_all(&a.out).map_err(|e| Error::from(e).in_file(&a.out))?;
    save_model_file(&outcome.network, &a.out.join(MODEL_FILE))?;
    let mut history = Vec::new();
    outcome.history.write_tsv(&mut history)?;
    write_file(&a.out.join(HISTORY_FILE), history)?;
    write_file(&a.out.join(RUN_CONFIG), cfg)?;
    let best = &outcome.history.epochs[outcome.best_epoch - 1];
    Ok(format!(
        "train: {} epochs, best epoch {} val_acc={:.6} train_acc={:.6} -> {}",
        outcome.history.epochs.len(),
        best.epoch,
        best.val_accuracy,
        best.train_accuracy,
        a.out.join(MODEL_FILE).display()
    ))
}

fn gradcheck(a: &GradcheckArgs, seed: u64, cfg: &str) -> Result<String> {
    let report = grad_check(&a.arch, seed, a.epsilon, a.tolerance)?;
    if let Some(out) = &a.out {
        write_file(&out.join(GRADCHECK_FILE), report.to_string())?;
        write_file(&out.join(RUN_CONFIG), cfg)?;
    }
    let line = format!(
        "gradcheck: max_rel_error={:.3e} tolerance={:e} {}",
        report.max_rel_error(),
        a.tolerance,
        if report.passed() { "PASS" } else { "FAIL" }
    );
    if report.passed() {
        Ok(line)
    } else {
        println!("{line}");
        Err(report.ensure_passed().unwrap_err().into())
    }
}

fn eval(a: &EvalArgs, precision: Precision, cfg: &str) -> Result<String> {
    let net = load_model_file(&a.model)?;
    let (samples, split) = load_split_samples(&a.corpus, &a.split)?;
    let test = select(&samples, &split, SplitKind::Test);
    let report = match precision {
        Precision::F32 => evaluate(&net, &test)?,
        Precision::F64 => evaluate(&net.cast::<f64>(), &test)?,
    };
    report.write_dir(&a.out)?;
    write_file(&a.out.join(RUN_CONFIG), cfg)?;
    Ok(report.summary())
}

fn predict(a: &PredictArgs, precision: Precision, cfg: &str) -> Result<String> {
    let net = load_model_file(&a.model)?;
    let file = fs::File::open(&a.record).map_err(|e| Error::from(e).in_file(&a.record))?;
    let record = read_record(file).map_err(|e| e.in_file(&a.record))?;
    let sample = Sample {
        id: RecordId::new(a.record.display().to_string(), 0, 0),
        record,
    };
    let p = match precision {
        Precision::F32 => predict_image(&net, &sample)?,
        Precision::F64 => predict_image(&net.cast::<f64>(), &sample)?,
    };
    let probs: Vec<String> = p.probabilities.iter().map(|v| format!("{v:.6}")).collect();
    let line = format!(
        "predict: {} predicted={} probabilities={} record_label={}",
        a.record.display(),
        p.predicted.short_name(),
        probs.join(","),
        p.observed.short_name()
    );
    if let Some(out) = &a.out {
        let mut f = Vec::new();
        writeln!(f, "{line}").expect("in-memory write");
        write_file(&out.join(PREDICTION_FILE), f)?;
        write_file(&out.join(RUN_CONFIG), cfg)?;
    }
    Ok(line)
}
