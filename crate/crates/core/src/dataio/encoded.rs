use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgrad::{Tensor, TensorArchive};

use super::preprocess::EncodedSample;

const KIND: &str = "encoded-dataset";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema: String,
    pub schema_fingerprint: String,
    pub class_names: Vec<String>,
    pub normal_class: Option<String>,
    pub width: usize,
}

/// Encoded samples plus the class vocabulary their labels index into.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub meta: DatasetMeta,
    pub samples: Vec<EncodedSample>,
}

impl EncodedDataset {
    pub fn class_counts(&self) -> Vec<(String, usize)> {
        let mut counts = vec![0; self.meta.class_names.len()];
        for s in &self.samples {
            if let Some(l) = s.label {
                counts[l] += 1;
            }
        }
        self.meta.class_names.iter().cloned().zip(counts).collect()
    }

    pub fn to_archive(&self) -> Result<TensorArchive> {
        if self.samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let features = Tensor::from_rows(&self.samples.iter().map(|s| &s.features[..]).collect::<Vec<_>>())?;
        let labels = Tensor::vector(
            self.samples
                .iter()
                .map(|s| s.label.map_or(-1.0, |l| l as f64))
                .collect(),
        );
        let mut archive = TensorArchive::new(KIND, serde_json::to_value(&self.meta).expect("meta"));
        archive.push("features", features);
        archive.push("labels", labels);
        Ok(archive)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let archive = TensorArchive::load(path)?;
        if archive.kind != KIND {
            return Err(Error::format(path, format!("expected {KIND}, found {}", archive.kind)));
        }
        let meta: DatasetMeta =
            serde_json::from_value(archive.metadata.clone()).map_err(|e| Error::format(path, e.to_string()))?;
        let (Some(features), Some(labels)) = (archive.get("features"), archive.get("labels")) else {
            return Err(Error::format(path, "missing features or labels"));
        };
        if features.shape() != [labels.len(), meta.width] {
            return Err(Error::format(path, "feature matrix does not match metadata"));
        }
        let samples = labels
            .data()
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let label = (l >= 0.0).then_some(l as usize);
                EncodedSample::new(features.row(i).to_vec(), label)
            })
            .collect();
        Ok(Self { meta, samples })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let ds = EncodedDataset {
            meta: DatasetMeta {
                schema: "s".into(),
                schema_fingerprint: "f".into(),
                class_names: vec!["a".into(), "b".into()],
                normal_class: Some("a".into()),
                width: 3,
            },
            samples: vec![
                EncodedSample::new(vec![0.1, 0.2, 0.3], Some(1)),
                EncodedSample::new(vec![1.0, 0.0, 0.5], None),
            ],
        };
        ds.save(&path).unwrap();
        assert_eq!(EncodedDataset::load(&path).unwrap(), ds);
        assert_eq!(ds.class_counts()[1], ("b".to_string(), 1));
    }
}
