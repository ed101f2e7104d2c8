//! Merges flags, environment and config file into an [`Invocation`].
//! Precedence: flag, then environment, then config file, then defaults.

use morale_core::agreement::{ShiftConfig, DEFAULT_MAD_MAX, DEFAULT_STDEV_MAX};
use morale_core::data::SynthConfig;
use morale_core::experiment::AblationAxis;
use morale_core::model::{LossType, TrainConfig};

use crate::args::{AblateArgs, AgreeArgs, EvalArgs, GenSynthArgs, TrainArgs, TrainFlags};
use crate::config::{overlay, ConfigFile};
use crate::error::{CliError, CliResult};
use crate::invocation::Invocation;

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

pub fn train_config(file: &ConfigFile, flags: &TrainFlags) -> CliResult<TrainConfig> {
    let file_loss = match file.train.get("loss") {
        None => None,
        Some(v) => Some(
            v.as_str()
                .ok_or_else(|| CliError::data("config [train] loss must be a string"))?
                .parse::<LossType>()?,
        ),
    };
    let loss = flags.loss.or(file_loss).unwrap_or(LossType::ListMle);
    let mut table = file.train.clone();
    table.remove("loss");
    let mut c = overlay(&TrainConfig::for_loss(loss), &table, "train")?;
    if let Some(s) = flags.seed {
        c.seed = s;
    }
    if let Some(e) = flags.epochs {
        c.epochs = e;
    }
    if let Some(lr) = flags.lr {
        c.lr = lr;
    }
    if let Some(m) = flags.list_size {
        c.list_size = m;
    }
    if let Some(f) = flags.fraction {
        c.fraction = f;
    }
    c.validate()?;
    Ok(c)
}

pub fn gen_synth(a: GenSynthArgs) -> CliResult<Invocation> {
    let file = ConfigFile::load(a.config.as_deref())?;
    let mut config = overlay(&SynthConfig::default(), &file.synth, "synth")?;
    if let Some(s) = a.seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(Invocation::GenSynth { config, out: a.out })
}

pub fn train(a: TrainArgs) -> CliResult<Invocation> {
    let file = ConfigFile::load(a.config.as_deref())?;
    Ok(Invocation::Train {
        config: train_config(&file, &a.train)?,
        corpus: a.corpus.corpus,
        truncate_oversized: a.corpus.truncate_oversized,
        out: a.corpus.out,
    })
}

pub fn eval(a: EvalArgs) -> CliResult<Invocation> {
    Ok(Invocation::Eval {
        corpus: a.corpus.corpus,
        checkpoints: a.checkpoints,
        truncate_oversized: a.corpus.truncate_oversized,
        per_group: a.per_group,
        out: a.corpus.out,
    })
}

pub fn ablate(a: AblateArgs) -> CliResult<Invocation> {
    let file = ConfigFile::load(a.config.as_deref())?;
    let base = train_config(&file, &a.train)?;
    let axis = match (a.axis, &file.ablate.axis) {
        (Some(x), _) => x,
        (None, Some(s)) => s.parse()?,
        (None, None) => AblationAxis::ListSize,
    };
    let values = a
        .values
        .or_else(|| file.ablate.values.clone())
        .unwrap_or_else(|| axis.default_values());
    for v in &values {
        axis.validate(*v)?;
    }
    let seeds = a
        .seeds
        .or_else(|| file.ablate.seeds.clone())
        .unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
    if values.is_empty() || seeds.is_empty() {
        return Err(CliError::usage("ablate needs at least one value and one seed"));
    }
    Ok(Invocation::Ablate {
        corpus: a.corpus.corpus,
        base,
        axis,
        values,
        seeds,
        truncate_oversized: a.corpus.truncate_oversized,
        out: a.corpus.out,
    })
}

pub fn agree(a: AgreeArgs) -> CliResult<Invocation> {
    let file = ConfigFile::load(a.config.as_deref())?;
    let shift = match &file.agree.shift {
        Some(t) => overlay(&ShiftConfig::default(), t, "agree.shift")?,
        None => ShiftConfig::default(),
    };
    let stdev_max = a.stdev_max.or(file.agree.stdev_max).unwrap_or(DEFAULT_STDEV_MAX);
    let mad_max = a.mad_max.or(file.agree.mad_max).unwrap_or(DEFAULT_MAD_MAX);
    if !(stdev_max >= 0.0) || !(mad_max >= 0.0) {
        return Err(CliError::data("stdev_max and mad_max must be >= 0"));
    }
    Ok(Invocation::Agree {
        corpus: a.corpus.corpus,
        checkpoint: a.checkpoint,
        stdev_max,
        mad_max,
        shift,
        truncate_oversized: a.corpus.truncate_oversized,
        out: a.corpus.out,
    })
}
