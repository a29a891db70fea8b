//! Min-max scaling of numeric features and one-hot encoding of categorical
//! ones. Ranges come from the training records only; vocabularies come from
//! the schema, so the encoded width never depends on the data.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

use super::csv::{RawRecord, RawValue};
use super::schema::{eq_ci, DatasetSchema, FeatureKind, MISSING_TOKEN};

pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedFeature {
    Numeric { name: String, min: f64, max: f64 },
    Categorical { name: String, vocabulary: Vec<String> },
}

impl FittedFeature {
    pub fn name(&self) -> &str {
        match self {
            FittedFeature::Numeric { name, .. } | FittedFeature::Categorical { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            FittedFeature::Numeric { .. } => 1,
            FittedFeature::Categorical { vocabulary, .. } => vocabulary.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessorState {
    pub version: u32,
    pub schema_fingerprint: String,
    pub features: Vec<FittedFeature>,
}

/// A preprocessed fixed-width feature vector with an optional class index.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub features: Vec<f64>,
    pub label: Option<usize>,
}

impl EncodedSample {
    pub fn new(features: Vec<f64>, label: Option<usize>) -> Self {
        Self { features, label }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransformStats {
    /// Categorical cells whose value was outside the vocabulary.
    pub unseen_categories: usize,
    /// Categorical cells holding the missing-value token.
    pub masked_missing: usize,
}

pub fn fit_preprocessor(records: &[RawRecord], schema: &DatasetSchema) -> Result<PreprocessorState> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut features = Vec::with_capacity(schema.features.len());
    for (i, desc) in schema.features.iter().enumerate() {
        let fitted = match desc.kind {
            FeatureKind::Numeric => {
                let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
                for (row, rec) in records.iter().enumerate() {
                    match rec.values.get(i) {
                        Some(RawValue::Numeric(v)) => {
                            min = min.min(*v);
                            max = max.max(*v);
                        }
                        _ => {
                            return Err(Error::SchemaMismatch(format!(
                                "record {row} lacks numeric value for {:?}",
                                desc.name
                            )))
                        }
                    }
                }
                FittedFeature::Numeric {
                    name: desc.name.clone(),
                    min,
                    max,
                }
            }
            FeatureKind::Categorical => FittedFeature::Categorical {
                name: desc.name.clone(),
                vocabulary: desc.vocabulary.clone(),
            },
        };
        features.push(fitted);
    }
    Ok(PreprocessorState {
        version: STATE_VERSION,
        schema_fingerprint: schema.fingerprint(),
        features,
    })
}

impl PreprocessorState {
    pub fn width(&self) -> usize {
        self.features.iter().map(FittedFeature::width).sum()
    }

    /// Numeric features whose fitted range is a single point.
    pub fn degenerate_features(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter_map(|f| match f {
                FittedFeature::Numeric { name, min, max } if min == max => Some(name.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn range_of(&self, name: &str) -> Option<(f64, f64)> {
        self.features.iter().find_map(|f| match f {
            FittedFeature::Numeric { name: n, min, max } if eq_ci(n, name) => Some((*min, *max)),
            _ => None,
        })
    }

    pub fn check_schema(&self, schema: &DatasetSchema) -> Result<()> {
        if self.schema_fingerprint != schema.fingerprint() {
            return Err(Error::SchemaMismatch(format!(
                "preprocessor was fitted for a different schema than {:?}",
                schema.name
            )));
        }
        Ok(())
    }

    pub fn transform(&self, record: &RawRecord) -> EncodedSample {
        self.transform_counting(record, &mut TransformStats::default())
    }

    pub fn transform_counting(&self, record: &RawRecord, stats: &mut TransformStats) -> EncodedSample {
        let mut out = Vec::with_capacity(self.width());
        for (feature, value) in self.features.iter().zip(&record.values) {
            match (feature, value) {
                (FittedFeature::Numeric { min, max, .. }, RawValue::Numeric(x)) => {
                    out.push(scale(*x, *min, *max));
                }
                (FittedFeature::Categorical { vocabulary, .. }, RawValue::Categorical(s)) => {
                    let start = out.len();
                    out.resize(start + vocabulary.len(), 0.0);
                    if s.trim() == MISSING_TOKEN {
                        stats.masked_missing += 1;
                    } else if let Some(p) = vocabulary.iter().position(|v| eq_ci(v, s)) {
                        out[start + p] = 1.0;
                    } else {
                        stats.unseen_categories += 1;
                    }
                }
                // Kind mismatch cannot come out of load_csv with the same schema;
                // treat it like a missing value.
                (f, _) => out.resize(out.len() + f.width(), 0.0),
            }
        }
        EncodedSample::new(out, record.label)
    }

    pub fn transform_all(&self, records: &[RawRecord]) -> (Vec<EncodedSample>, TransformStats) {
        let mut stats = TransformStats::default();
        let samples = records.iter().map(|r| self.transform_counting(r, &mut stats)).collect();
        if stats.unseen_categories > 0 {
            log::warn!(
                "{} categorical values outside the schema vocabulary were encoded as all-zero",
                stats.unseen_categories
            );
        }
        (samples, stats)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serialises")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let state: Self = serde_json::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        if state.version != STATE_VERSION {
            return Err(Error::format(
                origin,
                format!("unsupported preprocessor version {}", state.version),
            ));
        }
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&io::read_string(path)?, path)
    }
}

/// `(x − min)/(max − min)` clipped to `[0, 1]`; a degenerate range maps to 0.
pub fn scale(x: f64, min: f64, max: f64) -> f64 {
    if max <= min {
        return 0.0;
    }
    ((x - min) / (max - min)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::schema::FeatureDescriptor;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn schema() -> DatasetSchema {
        DatasetSchema {
            version: 1,
            name: "t".into(),
            label_column: "cls".into(),
            class_names: vec!["Normal".into(), "Attack".into()],
            normal_class: Some("Normal".into()),
            label_aliases: BTreeMap::new(),
            csv_columns: None,
            features: vec![
                FeatureDescriptor::numeric("a"),
                FeatureDescriptor::categorical("svc", &["-", "http", "dns"]),
                FeatureDescriptor::numeric("b"),
            ],
        }
    }

    fn rec(a: f64, svc: &str, b: f64) -> RawRecord {
        RawRecord {
            values: vec![
                RawValue::Numeric(a),
                RawValue::Categorical(svc.into()),
                RawValue::Numeric(b),
            ],
            label: Some(0),
        }
    }

    #[test]
    fn fit_scans_min_max() {
        let recs = [rec(2.0, "http", 5.0), rec(4.0, "dns", 5.0), rec(10.0, "-", 5.0)];
        let state = fit_preprocessor(&recs, &schema()).unwrap();
        assert_eq!(state.range_of("a"), Some((2.0, 10.0)));
        assert_eq!(state.range_of("b"), Some((5.0, 5.0)));
        assert_eq!(state.degenerate_features(), vec!["b"]);
        assert_eq!(state.width(), 5);
    }

    #[test]
    fn single_record_is_degenerate_everywhere() {
        let state = fit_preprocessor(&[rec(3.0, "http", 1.0)], &schema()).unwrap();
        assert_eq!(state.degenerate_features(), vec!["a", "b"]);
        assert_eq!(
            state.transform(&rec(3.0, "http", 1.0)).features,
            vec![0.0, 0.0, 1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(fit_preprocessor(&[], &schema()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn scaling_endpoints_and_midpoint() {
        assert_eq!(scale(2.0, 2.0, 10.0), 0.0);
        assert_eq!(scale(10.0, 2.0, 10.0), 1.0);
        assert_eq!(scale(6.0, 2.0, 10.0), 0.5);
        assert_eq!(scale(-5.0, 2.0, 10.0), 0.0);
        assert_eq!(scale(50.0, 2.0, 10.0), 1.0);
    }

    #[test]
    fn missing_token_and_unseen_categories_zero_the_block() {
        let state = fit_preprocessor(&[rec(0.0, "http", 0.0), rec(1.0, "dns", 1.0)], &schema()).unwrap();
        let mut stats = TransformStats::default();
        let masked = state.transform_counting(&rec(0.5, "-", 0.5), &mut stats);
        assert_eq!(masked.features, vec![0.5, 0.0, 0.0, 0.0, 0.5]);
        let unseen = state.transform_counting(&rec(0.5, "smtp", 0.5), &mut stats);
        assert_eq!(unseen.features, vec![0.5, 0.0, 0.0, 0.0, 0.5]);
        assert_eq!(
            stats,
            TransformStats {
                unseen_categories: 1,
                masked_missing: 1
            }
        );
        let hot = state.transform(&rec(0.5, "DNS", 0.5));
        assert_eq!(hot.features, vec![0.5, 0.0, 0.0, 1.0, 0.5]);
    }

    #[test]
    fn unsw_service_dash_is_thirteen_zeros() {
        let s = DatasetSchema::builtin("unsw-nb15-smaller").unwrap();
        let values = s
            .features
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Numeric => RawValue::Numeric(1.0),
                FeatureKind::Categorical => {
                    RawValue::Categorical(if f.name == "service" { "-" } else { &f.vocabulary[0] }.to_string())
                }
            })
            .collect();
        let r = RawRecord { values, label: Some(0) };
        let state = fit_preprocessor(std::slice::from_ref(&r), &s).unwrap();
        let enc = state.transform(&r);
        assert_eq!(enc.features.len(), 196);
        let (idx, _) = s.feature("service").unwrap();
        let span = s.feature_spans()[idx].clone();
        assert_eq!(span.len(), 13);
        assert!(enc.features[span].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn state_json_round_trip_is_exact() {
        let recs = [rec(0.1, "http", 1.0 / 3.0), rec(7.0e-300, "dns", 2.5e10)];
        let state = fit_preprocessor(&recs, &schema()).unwrap();
        let back = PreprocessorState::from_json(&state.to_json(), Path::new("mem")).unwrap();
        assert_eq!(state, back);
    }

    proptest! {
        #[test]
        fn output_in_unit_box_and_fixed_width(
            train in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..20),
            probe in (-1e7f64..1e7, -1e7f64..1e7, 0usize..4),
        ) {
            let svc = ["-", "http", "dns", "ftp"];
            let recs: Vec<_> = train.iter().map(|&(a, b)| rec(a, "http", b)).collect();
            let state = fit_preprocessor(&recs, &schema()).unwrap();
            let out = state.transform(&rec(probe.0, svc[probe.2], probe.1));
            prop_assert_eq!(out.features.len(), 5);
            prop_assert!(out.features.iter().all(|v| (0.0..=1.0).contains(v)));
            let block = &out.features[1..4];
            let ones = block.iter().filter(|&&v| v == 1.0).count();
            prop_assert!(ones <= 1);
            prop_assert_eq!(state.transform(&rec(probe.0, svc[probe.2], probe.1)), out);
        }

        #[test]
        fn refit_data_spans_unit_interval(values in prop::collection::vec(-1e3f64..1e3, 2..30)) {
            let recs: Vec<_> = values.iter().map(|&a| rec(a, "dns", 0.0)).collect();
            let state = fit_preprocessor(&recs, &schema()).unwrap();
            let scaled: Vec<f64> = recs.iter().map(|r| state.transform(r).features[0]).collect();
            let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if state.degenerate_features().contains(&"a") {
                prop_assert_eq!(hi, 0.0);
            } else {
                prop_assert_eq!(lo, 0.0);
                prop_assert_eq!(hi, 1.0);
            }
        }
    }
}
