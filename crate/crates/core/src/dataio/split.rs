use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::preprocess::EncodedSample;
use super::schema::eq_ci;

/// The six classes used for the multi-class label-efficiency task.
pub const SIX_CLASS: [&str; 6] = ["Normal", "Fuzzers", "Dos", "Exploits", "Generic", "Reconnaissance"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRole {
    EncoderSet,
    HeadSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub role: SplitRole,
    pub fraction: f64,
    pub seed: u64,
}

fn labels_of(samples: &[EncodedSample]) -> Result<Vec<usize>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| s.label.ok_or(Error::MissingLabel(i)))
        .collect()
}

fn by_class(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    groups
}

/// Number kept from a class of `n` at `fraction`: `round(fraction·n)`, at least 1.
pub fn stratified_count(n: usize, fraction: f64) -> usize {
    if n == 0 {
        return 0;
    }
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

/// Per-class uniform subsample without replacement. Output keeps input order.
pub fn stratified_subsample(samples: &[EncodedSample], spec: &SplitSpec) -> Result<Vec<EncodedSample>> {
    if !(spec.fraction > 0.0 && spec.fraction <= 1.0) {
        return Err(Error::Config(format!(
            "subsample fraction must lie in (0, 1], got {}",
            spec.fraction
        )));
    }
    let labels = labels_of(samples)?;
    let mut rng = rng::stream(spec.seed, rng::SUBSAMPLE);
    let mut keep = Vec::new();
    for members in by_class(&labels).values() {
        let k = stratified_count(members.len(), spec.fraction);
        keep.extend(
            index::sample(&mut rng, members.len(), k)
                .into_iter()
                .map(|j| members[j]),
        );
    }
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| samples[i].clone()).collect())
}

/// Per-class shuffled split; each class contributes `round(train_fraction·n)`
/// samples to the first part. Both parts keep input order.
pub fn stratified_split(
    samples: &[EncodedSample],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<EncodedSample>, Vec<EncodedSample>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let labels = labels_of(samples)?;
    let mut rng = rng::stream(seed, rng::SPLIT);
    let mut in_train = vec![false; samples.len()];
    for members in by_class(&labels).values() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        let k = (train_fraction * members.len() as f64).round() as usize;
        for &i in &shuffled[..k] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) = samples.iter().cloned().zip(in_train).partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(s, _)| s).collect(),
        test.into_iter().map(|(s, _)| s).collect(),
    ))
}

/// Label-free shuffled split used for the encoder set.
pub fn holdout_split(
    samples: &[EncodedSample],
    train_fraction: f64,
    seed: u64,
) -> (Vec<EncodedSample>, Vec<EncodedSample>) {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng::stream(seed, rng::HOLDOUT));
    let k = (train_fraction.clamp(0.0, 1.0) * samples.len() as f64).round() as usize;
    let (a, b) = order.split_at(k);
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (
        a.into_iter().map(|i| samples[i].clone()).collect(),
        b.into_iter().map(|i| samples[i].clone()).collect(),
    )
}

/// Keep only the named classes and relabel them `0..K` in `keep` order.
pub fn filter_classes(
    samples: &[EncodedSample],
    class_names: &[String],
    keep: &[String],
) -> Result<Vec<EncodedSample>> {
    let mut remap = vec![None; class_names.len()];
    for (new, name) in keep.iter().enumerate() {
        let old = class_names
            .iter()
            .position(|c| eq_ci(c, name))
            .ok_or_else(|| Error::UnknownClass(name.clone()))?;
        remap[old] = Some(new);
    }
    let labels = labels_of(samples)?;
    Ok(samples
        .iter()
        .zip(labels)
        .filter_map(|(s, l)| {
            remap
                .get(l)
                .copied()
                .flatten()
                .map(|new| EncodedSample::new(s.features.clone(), Some(new)))
        })
        .collect())
}

/// Which downstream classification problem to build from a labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Normal class vs the union of every other class.
    Binary,
    SixClass,
    All,
    Classes(Vec<String>),
}

impl Task {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "six-class" => Ok(Task::SixClass),
            "all" => Ok(Task::All),
            other if other.contains(',') => Ok(Task::Classes(
                other
                    .split(',')
                    .map(|c| c.trim().to_owned())
                    .filter(|c| !c.is_empty())
                    .collect(),
            )),
            other => Err(Error::Config(format!(
                "task must be binary, six-class, all or a comma-separated class list; got {other:?}"
            ))),
        }
    }

    /// Relabel `samples` for this task; returns the task's class names.
    pub fn apply(
        &self,
        samples: &[EncodedSample],
        class_names: &[String],
        normal_class: Option<&str>,
    ) -> Result<(Vec<EncodedSample>, Vec<String>)> {
        match self {
            Task::Binary => {
                let normal =
                    normal_class.ok_or_else(|| Error::Config("binary task needs the schema's normal_class".into()))?;
                let normal_idx = class_names
                    .iter()
                    .position(|c| eq_ci(c, normal))
                    .ok_or_else(|| Error::UnknownClass(normal.to_owned()))?;
                let labels = labels_of(samples)?;
                let out = samples
                    .iter()
                    .zip(labels)
                    .map(|(s, l)| EncodedSample::new(s.features.clone(), Some(usize::from(l != normal_idx))))
                    .collect();
                Ok((out, vec![class_names[normal_idx].clone(), "Attack".to_owned()]))
            }
            Task::SixClass => {
                let keep: Vec<String> = SIX_CLASS.iter().map(|s| s.to_string()).collect();
                Ok((filter_classes(samples, class_names, &keep)?, keep))
            }
            Task::All => {
                labels_of(samples)?;
                Ok((samples.to_vec(), class_names.to_vec()))
            }
            Task::Classes(keep) => Ok((filter_classes(samples, class_names, keep)?, keep.clone())),
        }
    }
}
