//! The labeled-data protocol shared by head training, evaluation and
//! transfer: relabel for the task, split 80/20 by class, thin the training
//! part to the label fraction.

use serde::{Deserialize, Serialize};

use crate::dataio::{stratified_split, stratified_subsample, EncodedSample, SplitRole, SplitSpec, Task};
use crate::error::{Error, Result};
use crate::eval::{confusion, metrics, MetricsReport};
use crate::model::{ClassificationHead, EncoderBlock, ProjectionHead};

use super::head::{labels_of, predict, train_head, HeadConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub task: Task,
    /// Share of each class used for head training; the rest is the test split.
    pub train_fraction: f64,
    /// Share of the training split that keeps its label.
    pub label_fraction: f64,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            task: Task::Binary,
            train_fraction: 0.8,
            label_fraction: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadSplits {
    pub class_names: Vec<String>,
    pub train: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
}

fn counts(samples: &[EncodedSample], classes: usize) -> Vec<usize> {
    let mut c = vec![0; classes];
    for l in samples.iter().filter_map(|s| s.label) {
        c[l] += 1;
    }
    c
}

impl HeadSplits {
    pub fn train_counts(&self) -> Vec<usize> {
        counts(&self.train, self.class_names.len())
    }

    pub fn test_counts(&self) -> Vec<usize> {
        counts(&self.test, self.class_names.len())
    }
}

pub fn head_splits(
    samples: &[EncodedSample],
    class_names: &[String],
    normal_class: Option<&str>,
    plan: &SplitPlan,
) -> Result<HeadSplits> {
    let (relabelled, names) = plan.task.apply(samples, class_names, normal_class)?;
    if relabelled.is_empty() {
        return Err(Error::InsufficientData(
            "no samples belong to the task's classes".into(),
        ));
    }
    let (train, test) = stratified_split(&relabelled, plan.train_fraction, plan.seed)?;
    let train = if plan.label_fraction < 1.0 {
        let spec = SplitSpec {
            role: SplitRole::HeadSet,
            fraction: plan.label_fraction,
            seed: plan.seed,
        };
        stratified_subsample(&train, &spec)?
    } else {
        train
    };
    let splits = HeadSplits {
        class_names: names,
        train,
        test,
    };
    for ((name, tr), te) in splits
        .class_names
        .iter()
        .zip(splits.train_counts())
        .zip(splits.test_counts())
    {
        log::info!("{name}: {tr} training, {te} test samples");
    }
    Ok(splits)
}

pub fn evaluate_head(
    encoder: &EncoderBlock,
    projector: &ProjectionHead,
    head: &ClassificationHead,
    test: &[EncodedSample],
    class_names: &[String],
) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let labels = labels_of(test, class_names.len())?;
    let preds = predict(encoder, projector, head, test)?;
    let cm = confusion(&preds, &labels, class_names.len())?;
    Ok(metrics(&cm)?.with_class_names(class_names))
}

/// Train a head on `splits.train` and score it on `splits.test`.
pub fn run_downstream(
    encoder: &EncoderBlock,
    projector: &ProjectionHead,
    splits: &HeadSplits,
    cfg: &HeadConfig,
) -> Result<(ClassificationHead, MetricsReport)> {
    let head = train_head(encoder, projector, &splits.train, splits.class_names.len(), cfg)?;
    let report = evaluate_head(encoder, projector, &head, &splits.test, &splits.class_names)?;
    Ok((head, report))
}
