//! End-to-end runs: group, split, subset, train, evaluate; plus grids of
//! such runs over seeds, objectives and ablation axes.

use serde::{Deserialize, Serialize};

use crate::data::{
    group_by_image, group_by_image_unbounded, split_corpus, subsample_fraction, training_records,
    truncate_lists, AggregationRule, CorpusSplit, ListGroup, ScenarioRecord, MAX_LIST_SIZE,
};
use crate::exec::Exec;
use crate::features::Featurizer;
use crate::metrics::{evaluate, MetricReport};
use crate::model::{featurize_groups, train_featurized, TrainConfig, TrainOutcome};
use crate::{Error, Result};

/// Rated, non-canary records grouped by image. With `truncate_oversized`
/// longer lists are cut to five items instead of rejected.
pub fn corpus_groups(
    records: &[ScenarioRecord],
    truncate_oversized: bool,
    seed: u64,
) -> Result<Vec<ListGroup>> {
    let usable = training_records(records);
    if truncate_oversized {
        let groups = group_by_image_unbounded(&usable, AggregationRule::Mean)?;
        Ok(truncate_lists(&groups, MAX_LIST_SIZE, seed))
    } else {
        group_by_image(&usable, AggregationRule::Mean)
    }
}

pub fn split_for(groups: &[ListGroup], config: &TrainConfig) -> Result<CorpusSplit> {
    split_corpus(groups, config.split_ratio, config.seed)
}

/// Training lists after the fraction subsample and list-size truncation.
pub fn training_subset(train: &[ListGroup], config: &TrainConfig) -> Result<Vec<ListGroup>> {
    let kept = subsample_fraction(train, config.fraction, config.seed)?;
    Ok(truncate_lists(&kept, config.list_size, config.seed))
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub split: CorpusSplit,
    pub outcome: TrainOutcome,
    pub report: MetricReport,
}

/// Trains on the training side of the seeded split and evaluates on the
/// full-length test lists.
pub fn run(
    groups: &[ListGroup],
    config: &TrainConfig,
    featurizer: &Featurizer,
    exec: Exec,
) -> Result<RunResult> {
    config.validate()?;
    if featurizer.dim != config.feature_dim {
        return Err(Error::Config(format!(
            "featurizer dim {} differs from feature_dim {}",
            featurizer.dim, config.feature_dim
        )));
    }
    let split = split_for(groups, config)?;
    if split.test.is_empty() {
        return Err(Error::Invalid("test split is empty; corpus too small".into()));
    }
    let train_groups = training_subset(&split.train, config)?;
    let data = featurize_groups(&train_groups, featurizer, exec)?;
    let outcome = train_featurized(config, &data, featurizer.input_dim())?;
    let report = evaluate(&outcome.params, &split.test, featurizer, config.loss, exec)?;
    Ok(RunResult {
        split,
        outcome,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: TrainConfig,
    pub report: MetricReport,
    pub final_loss: f64,
    pub steps: usize,
}

/// Runs every config independently. Results come back in input order
/// whatever the execution mode.
pub fn run_configs(
    groups: &[ListGroup],
    configs: &[TrainConfig],
    featurizer: &Featurizer,
    exec: Exec,
) -> Result<Vec<RunSummary>> {
    exec.map(configs, |c| {
        let r = run(groups, c, featurizer, Exec::Sequential)?;
        Ok(RunSummary {
            config: c.clone(),
            final_loss: r.outcome.history.last().map_or(f64::NAN, |e| e.mean_loss),
            steps: r.outcome.steps,
            report: r.report,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    ListSize,
    Fraction,
}

impl AblationAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationAxis::ListSize => "list_size",
            AblationAxis::Fraction => "fraction",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            AblationAxis::ListSize => vec![1.0, 2.0, 3.0, 4.0, 5.0],
            AblationAxis::Fraction => vec![0.10, 0.25, 0.50, 1.00],
        }
    }

    pub fn validate(self, value: f64) -> Result<()> {
        let ok = match self {
            AblationAxis::ListSize => value.fract() == 0.0 && (1.0..=5.0).contains(&value),
            AblationAxis::Fraction => [0.10, 0.25, 0.50, 1.00].contains(&value),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{} value {value} not in the supported grid",
                self.as_str()
            )))
        }
    }

    pub fn apply(self, config: &TrainConfig, value: f64) -> TrainConfig {
        let mut c = config.clone();
        match self {
            AblationAxis::ListSize => c.list_size = value as usize,
            AblationAxis::Fraction => c.fraction = value,
        }
        c
    }
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "list_size" | "m" => Ok(AblationAxis::ListSize),
            "fraction" | "f" => Ok(AblationAxis::Fraction),
            other => Err(Error::Config(format!("unknown ablation axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: AblationAxis,
    pub value: f64,
    pub seed: u64,
    pub ndcg5: f64,
    pub unsafe_rate: f64,
}

/// Trains and evaluates every (value, seed) pair, value-major.
pub fn ablate(
    groups: &[ListGroup],
    base: &TrainConfig,
    axis: AblationAxis,
    values: &[f64],
    seeds: &[u64],
    featurizer: &Featurizer,
    exec: Exec,
) -> Result<Vec<AblationRow>> {
    for v in values {
        axis.validate(*v)?;
    }
    let mut configs = Vec::with_capacity(values.len() * seeds.len());
    for v in values {
        for s in seeds {
            let mut c = axis.apply(base, *v);
            c.seed = *s;
            configs.push(c);
        }
    }
    let runs = run_configs(groups, &configs, featurizer, exec)?;
    Ok(runs
        .into_iter()
        .zip(values.iter().flat_map(|v| seeds.iter().map(move |s| (*v, *s))))
        .map(|(r, (value, seed))| AblationRow {
            axis,
            value,
            seed,
            ndcg5: r.report.ndcg_at_5,
            unsafe_rate: r.report.unsafe_rate,
        })
        .collect())
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("axis,value,seed,ndcg5,unsafe_rate\n");
    for r in rows {
        s += &format!(
            "{},{},{},{},{}\n",
            r.axis.as_str(),
            r.value,
            r.seed,
            r.ndcg5,
            r.unsafe_rate
        );
    }
    s
}

/// Mean of `f` over the runs, in order.
pub fn mean_of<T>(items: &[T], f: impl Fn(&T) -> f64) -> f64 {
    if items.is_empty() {
        return f64::NAN;
    }
    items.iter().map(f).sum::<f64>() / items.len() as f64
}
