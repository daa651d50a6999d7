//! Learning-assisted optimization: datasets labeled by classical solvers,
//! supervised and unsupervised power-control networks, and the decomposed
//! assignment classifier.

pub mod dataset;
mod fit;
pub mod lsap;
pub mod power;

use std::fmt::Write as _;

pub use dataset::{
    gen_lsap_dataset, gen_power_dataset, parse_dataset, regenerate, GainModel, LabeledDataset, PowerProblem,
    Provenance, DATASET_MAGIC,
};
pub use fit::NetConfig;
pub use lsap::{eval_lsap, greedy_assignment, lsap_infer, lsap_train, train_lsap_classifiers, LsapConfig, LsapEval, LsapModels};
pub use power::{
    eval_power_model, model_powers, split_indices, train_supervised, train_unsupervised_power, window_trend,
    PowerModelEval, PowerObjective, SupervisedConfig, SupervisedModel, UnsupervisedConfig, UnsupervisedModel,
};

/// One `pipeline,metric,value` row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub pipeline: String,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(pipeline: &str, metric: &str, value: f64) -> Self {
        Self {
            pipeline: pipeline.into(),
            metric: metric.into(),
            value,
        }
    }
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from("pipeline,metric,value\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.pipeline, r.metric, r.value);
    }
    out
}
