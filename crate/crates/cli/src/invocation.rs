//! Fully resolved commands and their execution.
//!
//! An [`Invocation`] carries every parameter after flags, environment and
//! config file have been merged, so the copy stored in a run manifest is
//! enough to rerun the command.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use morale_core::agreement::{model_annotator_agreement, ShiftConfig};
use morale_core::data::{generate_synthetic, parse_corpus, to_jsonl, ScenarioRecord, SynthConfig};
use morale_core::exec::Exec;
use morale_core::experiment::{ablate, ablation_csv, corpus_groups, split_for, training_subset, AblationAxis};
use morale_core::features::Featurizer;
use morale_core::metrics::{report_from_scored, score_groups};
use morale_core::model::{featurize_groups, train_featurized, Checkpoint, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::manifest::{manifest_path, InputHash, RunManifest};
use crate::report::{agreement_report, metrics_header, metrics_row};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Invocation {
    GenSynth {
        config: SynthConfig,
        out: PathBuf,
    },
    Train {
        corpus: PathBuf,
        config: TrainConfig,
        truncate_oversized: bool,
        out: PathBuf,
    },
    Eval {
        corpus: PathBuf,
        checkpoints: Vec<PathBuf>,
        truncate_oversized: bool,
        per_group: bool,
        out: PathBuf,
    },
    Ablate {
        corpus: PathBuf,
        base: TrainConfig,
        axis: AblationAxis,
        values: Vec<f64>,
        seeds: Vec<u64>,
        truncate_oversized: bool,
        out: PathBuf,
    },
    Agree {
        corpus: PathBuf,
        checkpoint: Option<PathBuf>,
        stdev_max: f64,
        mad_max: f64,
        shift: ShiftConfig,
        truncate_oversized: bool,
        out: PathBuf,
    },
}

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub stdout: String,
    pub outputs: Vec<PathBuf>,
    pub inputs: Vec<InputHash>,
    pub warnings: Vec<String>,
    pub manifest: PathBuf,
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::GenSynth { .. } => "gen-synth",
            Invocation::Train { .. } => "train",
            Invocation::Eval { .. } => "eval",
            Invocation::Ablate { .. } => "ablate",
            Invocation::Agree { .. } => "agree",
        }
    }

    pub fn out(&self) -> &Path {
        match self {
            Invocation::GenSynth { out, .. }
            | Invocation::Train { out, .. }
            | Invocation::Eval { out, .. }
            | Invocation::Ablate { out, .. }
            | Invocation::Agree { out, .. } => out,
        }
    }

    pub fn with_out(mut self, new: PathBuf) -> Self {
        match &mut self {
            Invocation::GenSynth { out, .. }
            | Invocation::Train { out, .. }
            | Invocation::Eval { out, .. }
            | Invocation::Ablate { out, .. }
            | Invocation::Agree { out, .. } => *out = new,
        }
        self
    }

    fn out_is_dir(&self) -> bool {
        !matches!(self, Invocation::GenSynth { .. })
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Invocation::GenSynth { config, .. } => vec![config.seed],
            Invocation::Train { config, .. } => vec![config.seed],
            Invocation::Ablate { seeds, .. } => seeds.clone(),
            Invocation::Eval { .. } | Invocation::Agree { .. } => Vec::new(),
        }
    }

    /// Runs the command, writes its outputs and exactly one manifest.
    pub fn execute(&self, exec: Exec) -> CliResult<Outcome> {
        let started = Instant::now();
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        let out = self.out();
        if self.out_is_dir() {
            create_dir(out)?;
        } else if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        let mut outcome = match self {
            Invocation::GenSynth { config, out } => gen_synth(config, out)?,
            Invocation::Train {
                corpus,
                config,
                truncate_oversized,
                out,
            } => train(corpus, config, *truncate_oversized, out, exec)?,
            Invocation::Eval {
                corpus,
                checkpoints,
                truncate_oversized,
                per_group,
                out,
            } => eval(corpus, checkpoints, *truncate_oversized, *per_group, out, exec)?,
            Invocation::Ablate {
                corpus,
                base,
                axis,
                values,
                seeds,
                truncate_oversized,
                out,
            } => run_ablation(corpus, base, *axis, values, seeds, *truncate_oversized, out, exec)?,
            Invocation::Agree {
                corpus,
                checkpoint,
                stdev_max,
                mad_max,
                shift,
                truncate_oversized,
                out,
            } => agree(corpus, checkpoint.as_deref(), *stdev_max, *mad_max, *shift, *truncate_oversized, out, exec)?,
        };
        let manifest = RunManifest {
            tool: "morale".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.name().into(),
            invocation: self.clone(),
            seeds: self.seeds(),
            inputs: outcome.inputs.clone(),
            outputs: outcome.outputs.clone(),
            warnings: outcome.warnings.clone(),
            started_unix_ms,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        };
        outcome.manifest = manifest_path(out, self.out_is_dir());
        manifest.write(&outcome.manifest)?;
        Ok(outcome)
    }
}

fn create_dir(p: &Path) -> CliResult<()> {
    std::fs::create_dir_all(p).map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))
}

fn write(path: &Path, contents: &str, outputs: &mut Vec<PathBuf>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    outputs.push(path.to_path_buf());
    Ok(())
}

fn read_input(path: &Path) -> CliResult<(Vec<u8>, InputHash)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let hash = InputHash::of(path, &bytes);
    Ok((bytes, hash))
}

fn read_corpus(path: &Path) -> CliResult<(Vec<ScenarioRecord>, InputHash)> {
    let (bytes, hash) = read_input(path)?;
    let records = parse_corpus(bytes.as_slice()).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok((records, hash))
}

fn read_checkpoint(path: &Path) -> CliResult<(Checkpoint, InputHash)> {
    let (bytes, hash) = read_input(path)?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let ck = Checkpoint::from_json(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok((ck, hash))
}

fn json_pretty<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::runtime(e.to_string()))
}

fn gen_synth(config: &SynthConfig, out: &Path) -> CliResult<Outcome> {
    let corpus = generate_synthetic(config)?;
    let mut o = Outcome::default();
    write(out, &to_jsonl(&corpus.records), &mut o.outputs)?;
    o.stdout = format!(
        "wrote {} scenarios over {} images to {}\n",
        corpus.records.len(),
        config.n_groups,
        out.display()
    );
    Ok(o)
}

fn train(corpus: &Path, config: &TrainConfig, truncate: bool, out: &Path, exec: Exec) -> CliResult<Outcome> {
    config.validate()?;
    let (records, input) = read_corpus(corpus)?;
    let groups = corpus_groups(&records, truncate, config.seed)?;
    let split = split_for(&groups, config)?;
    let subset = training_subset(&split.train, config)?;
    let featurizer = Featurizer::new(config.feature_dim);
    let data = featurize_groups(&subset, &featurizer, exec)?;
    let outcome = train_featurized(config, &data, featurizer.input_dim())?;

    let mut o = Outcome::default();
    for e in &outcome.history {
        let _ = writeln!(o.stdout, "epoch {:>3}  loss {:.6}  steps {}", e.epoch, e.mean_loss, e.steps);
    }
    let ck = Checkpoint::new(outcome.params, config.clone(), input.sha256.clone(), outcome.history.clone());
    write(&out.join("checkpoint.json"), &ck.to_json()?, &mut o.outputs)?;
    write(&out.join("loss.csv"), &Checkpoint::loss_csv(&outcome.history), &mut o.outputs)?;
    let _ = writeln!(
        o.stdout,
        "{}: {} train lists ({} used), {} test lists, {} steps",
        config.loss.display_name(),
        split.train.len(),
        subset.len(),
        split.test.len(),
        outcome.steps
    );
    o.inputs.push(input);
    Ok(o)
}

fn eval(corpus: &Path, checkpoints: &[PathBuf], truncate: bool, per_group: bool, out: &Path, exec: Exec) -> CliResult<Outcome> {
    if checkpoints.is_empty() {
        return Err(CliError::usage("eval needs at least one --checkpoint"));
    }
    let (records, input) = read_corpus(corpus)?;
    let mut o = Outcome::default();
    o.stdout = metrics_header();
    for (i, path) in checkpoints.iter().enumerate() {
        let (ck, ck_hash) = read_checkpoint(path)?;
        if ck.corpus_sha256 != input.sha256 {
            let w = format!(
                "{}: trained on corpus {} but evaluating {} ({})",
                path.display(),
                short(&ck.corpus_sha256),
                short(&input.sha256),
                corpus.display()
            );
            log::warn!("{w}");
            o.warnings.push(w);
        }
        let groups = corpus_groups(&records, truncate, ck.config.seed)?;
        let split = split_for(&groups, &ck.config)?;
        if split.test.is_empty() {
            return Err(CliError::data("test split is empty; corpus too small"));
        }
        let featurizer = Featurizer::new(ck.config.feature_dim);
        let scored = score_groups(&ck.params, &split.test, &featurizer, ck.config.loss, exec)?;
        let report = report_from_scored(&scored, per_group)?;
        o.stdout += &metrics_row(ck.config.loss.display_name(), &report);
        let name = if checkpoints.len() == 1 {
            "metrics.json".to_string()
        } else {
            format!("metrics-{i}.json")
        };
        write(&out.join(name), &json_pretty(&report)?, &mut o.outputs)?;
        o.inputs.push(ck_hash);
    }
    for w in &o.warnings {
        let _ = writeln!(o.stdout, "WARNING: {w}");
    }
    o.inputs.insert(0, input);
    Ok(o)
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

#[allow(clippy::too_many_arguments)]
fn run_ablation(
    corpus: &Path,
    base: &TrainConfig,
    axis: AblationAxis,
    values: &[f64],
    seeds: &[u64],
    truncate: bool,
    out: &Path,
    exec: Exec,
) -> CliResult<Outcome> {
    if values.is_empty() || seeds.is_empty() {
        return Err(CliError::usage("ablate needs at least one value and one seed"));
    }
    base.validate()?;
    let (records, input) = read_corpus(corpus)?;
    let groups = corpus_groups(&records, truncate, base.seed)?;
    let featurizer = Featurizer::new(base.feature_dim);
    let rows = ablate(&groups, base, axis, values, seeds, &featurizer, exec)?;
    let csv = ablation_csv(&rows);
    let mut o = Outcome::default();
    write(&out.join("ablation.csv"), &csv, &mut o.outputs)?;
    let _ = writeln!(o.stdout, "{:<10}{:>10}{:>10}", axis.as_str(), "NDCG@5", "Unsafe");
    for v in values {
        let sel: Vec<_> = rows.iter().filter(|r| r.value == *v).collect();
        let n = sel.len() as f64;
        let _ = writeln!(
            o.stdout,
            "{:<10}{:>10.4}{:>10.4}",
            v,
            sel.iter().map(|r| r.ndcg5).sum::<f64>() / n,
            sel.iter().map(|r| r.unsafe_rate).sum::<f64>() / n
        );
    }
    o.inputs.push(input);
    Ok(o)
}

#[allow(clippy::too_many_arguments)]
fn agree(
    corpus: &Path,
    checkpoint: Option<&Path>,
    stdev_max: f64,
    mad_max: f64,
    shift: ShiftConfig,
    truncate: bool,
    out: &Path,
    exec: Exec,
) -> CliResult<Outcome> {
    let (records, input) = read_corpus(corpus)?;
    let mut o = Outcome::default();
    let model = match checkpoint {
        None => None,
        Some(p) => {
            let (ck, hash) = read_checkpoint(p)?;
            o.inputs.push(hash);
            let groups = corpus_groups(&records, truncate, ck.config.seed)?;
            let split = split_for(&groups, &ck.config)?;
            let featurizer = Featurizer::new(ck.config.feature_dim);
            Some(model_annotator_agreement(&ck.params, &split.test, &featurizer, ck.config.loss, exec)?)
        }
    };
    let report = agreement_report(&records, stdev_max, mad_max, shift, model)?;
    write(&out.join("agreement.json"), &json_pretty(&report)?, &mut o.outputs)?;
    write(&out.join("shift.csv"), &report.shift.to_csv(), &mut o.outputs)?;
    write(&out.join("modality.csv"), &report.modality.to_csv(), &mut o.outputs)?;
    o.stdout = report.to_text();
    o.inputs.insert(0, input);
    Ok(o)
}
