//! Two-blob labeled data in `[0, 1]^d` for desk-scale runs of the pipeline.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataio::schema::SCHEMA_VERSION;
use crate::dataio::{DatasetSchema, EncodedSample, FeatureDescriptor};
use crate::error::{Error, Result};
use crate::io;
use crate::rng;

pub const CLASS_NAMES: [&str; 2] = ["Normal", "Attack"];
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub features: usize,
    /// Per-dimension distance between the two blob centres.
    pub separation: f64,
    /// Per-dimension standard deviation around each centre.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            samples: 2000,
            features: 16,
            separation: 0.4,
            noise: 0.08,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

/// Balanced classes, alternating in row order. Values are clipped to `[0, 1]`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.samples < 2 || spec.features == 0 {
        return Err(Error::Config(
            "synthetic data needs at least 2 samples and 1 feature".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.separation) {
        return Err(Error::Config("separation must lie in [0, 1]".into()));
    }
    let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(format!("invalid noise level: {e}")))?;
    let mut r = rng::stream(spec.seed, "synthetic");
    let signs: Vec<f64> = (0..spec.features)
        .map(|_| if r.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let centre = |class: usize, d: usize| {
        let side = if class == 0 { -0.5 } else { 0.5 };
        0.5 + side * spec.separation * signs[d]
    };
    let mut rows = Vec::with_capacity(spec.samples);
    let mut labels = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let class = i % 2;
        rows.push(
            (0..spec.features)
                .map(|d| (centre(class, d) + normal.sample(&mut r)).clamp(0.0, 1.0))
                .collect(),
        );
        labels.push(class);
    }
    Ok(SyntheticData {
        feature_names: (0..spec.features).map(|d| format!("f{d}")).collect(),
        rows,
        labels,
    })
}

impl SyntheticData {
    pub fn schema(&self, name: &str) -> DatasetSchema {
        DatasetSchema {
            version: SCHEMA_VERSION,
            name: name.to_owned(),
            label_column: LABEL_COLUMN.to_owned(),
            class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            normal_class: Some(CLASS_NAMES[0].to_owned()),
            label_aliases: BTreeMap::new(),
            csv_columns: None,
            features: self.feature_names.iter().map(FeatureDescriptor::numeric).collect(),
        }
    }

    /// Copy without the named features.
    pub fn without(&self, drop: &[String]) -> Self {
        let keep: Vec<usize> = (0..self.feature_names.len())
            .filter(|&d| !drop.contains(&self.feature_names[d]))
            .collect();
        Self {
            feature_names: keep.iter().map(|&d| self.feature_names[d].clone()).collect(),
            rows: self.rows.iter().map(|r| keep.iter().map(|&d| r[d]).collect()).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn renamed(&self, from: &str, to: &str) -> Self {
        let mut out = self.clone();
        for n in &mut out.feature_names {
            if n == from {
                *n = to.to_owned();
            }
        }
        out
    }

    /// The rows as already-scaled samples, bypassing CSV and preprocessing.
    pub fn samples(&self) -> Vec<EncodedSample> {
        self.rows
            .iter()
            .zip(&self.labels)
            .map(|(r, &l)| EncodedSample::new(r.clone(), Some(l)))
            .collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Config(format!("csv encoding failed: {e}"));
        let mut header = self.feature_names.clone();
        header.push(LABEL_COLUMN.to_owned());
        w.write_record(&header).map_err(csv_err)?;
        for (row, &l) in self.rows.iter().zip(&self.labels) {
            let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            fields.push(CLASS_NAMES[l].to_owned());
            w.write_record(&fields).map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| Error::Config(format!("csv encoding failed: {e}")))
    }

    /// Write `<stem>.csv` and `<stem>.schema.toml` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        io::write_atomic(&dir.join(format!("{stem}.csv")), &self.to_csv()?)?;
        io::write_atomic(
            &dir.join(format!("{stem}.schema.toml")),
            self.schema(stem).to_toml().as_bytes(),
        )
    }
}
