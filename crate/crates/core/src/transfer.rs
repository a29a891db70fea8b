//! Reusing a frozen encoder on a dataset with a different feature set.
//! Target features the encoder never saw are dropped; encoder inputs the
//! target lacks are zeroed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::schema::eq_ci;
use crate::dataio::{
    fit_preprocessor, DatasetSchema, EncodedSample, FeatureKind, FittedFeature, PreprocessorState, RawRecord,
};
use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::io;
use crate::model::{ClassificationHead, EncoderBlock, ProjectionHead};
use crate::sscl::{head_splits, run_downstream, HeadConfig, SplitPlan};

/// Feature renames between datasets, one `original = target` per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    pairs: Vec<(String, String)>,
}

impl AliasTable {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((a, b)) = line.split_once('=') else {
                return Err(Error::format(
                    origin,
                    format!("line {}: expected `original = target`", n + 1),
                ));
            };
            let (a, b) = (a.trim(), b.trim());
            if a.is_empty() || b.is_empty() {
                return Err(Error::format(origin, format!("line {}: empty feature name", n + 1)));
            }
            if pairs.iter().any(|(o, _): &(String, String)| eq_ci(o, a)) {
                return Err(Error::format(origin, format!("line {}: {a:?} aliased twice", n + 1)));
            }
            pairs.push((a.to_owned(), b.to_owned()));
        }
        Ok(Self { pairs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_string(path)?, path)
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, S)>) -> Self {
        Self {
            pairs: pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
        }
    }

    /// Name the target dataset uses for `original`.
    pub fn target_name<'a>(&'a self, original: &'a str) -> &'a str {
        self.pairs
            .iter()
            .find(|(o, _)| eq_ci(o, original))
            .map_or(original, |(_, t)| t.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentStats {
    /// Encoder inputs copied from a target position.
    pub mapped: usize,
    /// Encoder inputs fed zero.
    pub masked: usize,
    /// Target positions not used.
    pub omitted: usize,
}

/// For each encoder input position, the target position it reads, if any.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureAlignmentMap {
    pub sources: Vec<Option<usize>>,
    pub target_width: usize,
}

impl FeatureAlignmentMap {
    pub fn identity(width: usize) -> Self {
        Self {
            sources: (0..width).map(Some).collect(),
            target_width: width,
        }
    }

    pub fn output_width(&self) -> usize {
        self.sources.len()
    }

    pub fn stats(&self) -> AlignmentStats {
        let mapped = self.sources.iter().flatten().count();
        let mut used = vec![false; self.target_width];
        for &t in self.sources.iter().flatten() {
            used[t] = true;
        }
        AlignmentStats {
            mapped,
            masked: self.sources.len() - mapped,
            omitted: used.iter().filter(|u| !**u).count(),
        }
    }
}

/// Match encoded positions by feature name (through `aliases`) and, for
/// one-hot blocks, by category string. Matching is case-insensitive.
pub fn build_alignment(
    original: &DatasetSchema,
    target: &DatasetSchema,
    aliases: &AliasTable,
) -> Result<FeatureAlignmentMap> {
    let target_spans = target.feature_spans();
    let mut sources = Vec::with_capacity(original.encoded_width());
    for feature in &original.features {
        let wanted = aliases.target_name(&feature.name);
        let found = target
            .features
            .iter()
            .position(|t| eq_ci(&t.name, wanted))
            .map(|i| (&target.features[i], target_spans[i].start));
        match (feature.kind, found) {
            (FeatureKind::Numeric, Some((t, start))) if t.kind == FeatureKind::Numeric => {
                sources.push(Some(start));
            }
            (FeatureKind::Categorical, Some((t, start))) if t.kind == FeatureKind::Categorical => {
                for category in &feature.vocabulary {
                    sources.push(t.vocabulary.iter().position(|c| eq_ci(c, category)).map(|p| start + p));
                }
            }
            (_, found) => {
                if let Some((t, _)) = found {
                    log::warn!("feature {:?} changes kind in the target schema; masking it", t.name);
                }
                sources.extend(std::iter::repeat_n(None, feature.encoded_width()));
            }
        }
    }
    let map = FeatureAlignmentMap {
        sources,
        target_width: target.encoded_width(),
    };
    if map.stats().mapped == 0 {
        return Err(Error::NoSharedFeatures);
    }
    Ok(map)
}

/// Rearrange a target-encoded sample into the encoder's input layout.
pub fn align_sample(sample: &EncodedSample, map: &FeatureAlignmentMap) -> Result<EncodedSample> {
    if sample.features.len() != map.target_width {
        return Err(Error::shape(format!(
            "target sample has width {}, alignment expects {}",
            sample.features.len(),
            map.target_width
        )));
    }
    let features = map
        .sources
        .iter()
        .map(|s| s.map_or(0.0, |t| sample.features[t]))
        .collect();
    Ok(EncodedSample::new(features, sample.label))
}

/// Fit a preprocessor on target records, then give every numeric feature
/// shared with the original dataset the original's fitted range, which is
/// the scale the encoder was trained on.
pub fn target_preprocessor(
    records: &[RawRecord],
    target: &DatasetSchema,
    original: &DatasetSchema,
    original_state: &PreprocessorState,
    aliases: &AliasTable,
) -> Result<PreprocessorState> {
    let mut state = fit_preprocessor(records, target)?;
    for feature in original.features.iter().filter(|f| f.kind == FeatureKind::Numeric) {
        let Some((lo, hi)) = original_state.range_of(&feature.name) else {
            continue;
        };
        let wanted = aliases.target_name(&feature.name);
        for fitted in &mut state.features {
            if let FittedFeature::Numeric { name, min, max } = fitted {
                if eq_ci(name, wanted) {
                    (*min, *max) = (lo, hi);
                }
            }
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub metrics: MetricsReport,
    pub alignment: AlignmentStats,
}

impl TransferReport {
    pub fn to_json(&self) -> String {
        let rounded = TransferReport {
            metrics: self.metrics.rounded(),
            alignment: self.alignment,
        };
        serde_json::to_string_pretty(&rounded).expect("report serialises")
    }
}

/// Align target samples, train a head on the target training split and
/// score it on the target test split.
#[allow(clippy::too_many_arguments)]
pub fn transfer_evaluate(
    encoder: &EncoderBlock,
    projector: &ProjectionHead,
    map: &FeatureAlignmentMap,
    samples: &[EncodedSample],
    class_names: &[String],
    normal_class: Option<&str>,
    plan: &SplitPlan,
    head: &HeadConfig,
) -> Result<(ClassificationHead, TransferReport)> {
    if map.output_width() != encoder.input_width() {
        return Err(Error::shape(format!(
            "alignment produces width {}, encoder expects {}",
            map.output_width(),
            encoder.input_width()
        )));
    }
    let aligned = samples
        .iter()
        .map(|s| align_sample(s, map))
        .collect::<Result<Vec<_>>>()?;
    let splits = head_splits(&aligned, class_names, normal_class, plan)?;
    let (trained, metrics) = run_downstream(encoder, projector, &splits, head)?;
    Ok((
        trained,
        TransferReport {
            metrics,
            alignment: map.stats(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::FeatureDescriptor;
    use crate::synthetic::{generate, SyntheticSpec};
    use proptest::prelude::*;

    fn synth(features: usize) -> crate::synthetic::SyntheticData {
        generate(&SyntheticSpec {
            samples: 6,
            features,
            ..SyntheticSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn identical_schemas_map_everything() {
        let s = synth(8).schema("a");
        let map = build_alignment(&s, &s, &AliasTable::default()).unwrap();
        assert_eq!(map, FeatureAlignmentMap::identity(8));
        assert_eq!(
            map.stats(),
            AlignmentStats {
                mapped: 8,
                masked: 0,
                omitted: 0
            }
        );
    }

    #[test]
    fn missing_and_extra_features() {
        let d = synth(10);
        let original = d.schema("o");
        let missing = d.without(&["f4".into()]).schema("t");
        let map = build_alignment(&original, &missing, &AliasTable::default()).unwrap();
        assert_eq!(map.sources[4], None);
        assert_eq!(map.stats().masked, 1);

        let mut extra = original.clone();
        for n in ["x1", "x2", "x3"] {
            extra.features.push(FeatureDescriptor::numeric(n));
        }
        let map = build_alignment(&original, &extra, &AliasTable::default()).unwrap();
        assert_eq!(
            map.stats(),
            AlignmentStats {
                mapped: 10,
                masked: 0,
                omitted: 3
            }
        );
    }

    #[test]
    fn alias_counts_as_mapped() {
        let d = synth(4);
        let target = d.renamed("f2", "renamed").schema("t");
        let plain = build_alignment(&d.schema("o"), &target, &AliasTable::default()).unwrap();
        assert_eq!(plain.stats().masked, 1);
        let aliases = AliasTable::parse("# comment\nF2 = renamed\n", Path::new("a.txt")).unwrap();
        let aliased = build_alignment(&d.schema("o"), &target, &aliases).unwrap();
        assert_eq!(aliased.stats().masked, 0);
        assert_eq!(aliased.sources[2], Some(2));
    }

    #[test]
    fn categories_match_per_value() {
        let mut a = synth(1).schema("a");
        a.features
            .push(FeatureDescriptor::categorical("proto", &["tcp", "udp", "icmp"]));
        let mut b = synth(1).schema("b");
        b.features
            .push(FeatureDescriptor::categorical("PROTO", &["ICMP", "sctp", "TCP"]));
        let map = build_alignment(&a, &b, &AliasTable::default()).unwrap();
        assert_eq!(map.sources, vec![Some(0), Some(3), None, Some(1)]);
        assert_eq!(map.stats().omitted, 1);
    }

    #[test]
    fn disjoint_schemas_are_refused() {
        let a = synth(3).schema("a");
        let mut b = a.clone();
        for (i, f) in b.features.iter_mut().enumerate() {
            f.name = format!("other{i}");
        }
        assert!(matches!(
            build_alignment(&a, &b, &AliasTable::default()),
            Err(Error::NoSharedFeatures)
        ));
    }

    #[test]
    fn half_overlap_copies_first_half() {
        let d = synth(6);
        let target = d.without(&["f3".into(), "f4".into(), "f5".into()]);
        let map = build_alignment(&d.schema("o"), &target.schema("t"), &AliasTable::default()).unwrap();
        let s = EncodedSample::new(vec![0.1, 0.2, 0.3], Some(1));
        let out = align_sample(&s, &map).unwrap();
        assert_eq!(out.features, vec![0.1, 0.2, 0.3, 0.0, 0.0, 0.0]);
        assert_eq!(out.label, Some(1));
        assert!(align_sample(&EncodedSample::new(vec![0.0; 4], None), &map).is_err());
        let all_masked = FeatureAlignmentMap {
            sources: vec![None; 3],
            target_width: 2,
        };
        assert_eq!(
            align_sample(&EncodedSample::new(vec![0.5, 0.7], None), &all_masked)
                .unwrap()
                .features,
            vec![0.0; 3]
        );
    }

    #[test]
    fn malformed_alias_lines() {
        assert!(AliasTable::parse("a b\n", Path::new("x")).is_err());
        assert!(AliasTable::parse("a = \n", Path::new("x")).is_err());
        assert!(AliasTable::parse("a = b\nA = c\n", Path::new("x")).is_err());
    }

    #[test]
    fn shipped_alias_tables_parse() {
        for text in [
            include_str!("../schemas/aliases/unsw-smaller-to-larger.txt"),
            include_str!("../schemas/aliases/unsw-to-cidds-001.txt"),
            include_str!("../schemas/aliases/unsw-to-bot-iot.txt"),
        ] {
            AliasTable::parse(text, Path::new("shipped")).unwrap();
        }
    }

    #[test]
    fn unsw_transfers_share_features() {
        let original = DatasetSchema::builtin("unsw-nb15-smaller").unwrap();
        for (target, aliases) in [
            (
                "unsw-nb15-larger",
                include_str!("../schemas/aliases/unsw-smaller-to-larger.txt"),
            ),
            ("cidds-001", include_str!("../schemas/aliases/unsw-to-cidds-001.txt")),
            ("bot-iot", include_str!("../schemas/aliases/unsw-to-bot-iot.txt")),
        ] {
            let t = DatasetSchema::builtin(target).unwrap();
            let a = AliasTable::parse(aliases, Path::new(target)).unwrap();
            let map = build_alignment(&original, &t, &a).unwrap();
            let s = map.stats();
            assert_eq!(s.mapped + s.masked, original.encoded_width());
            assert!(s.mapped > 0);
        }
    }

    proptest! {
        #[test]
        fn alignment_never_invents_values(
            x in prop::collection::vec(0.0f64..1.0, 8),
            drop in prop::collection::btree_set(0usize..8, 0..7),
        ) {
            let d = synth(8);
            let names: Vec<String> = drop.iter().map(|i| format!("f{i}")).collect();
            let target = d.without(&names);
            let map = build_alignment(&d.schema("o"), &target.schema("t"), &AliasTable::default()).unwrap();
            prop_assert_eq!(map.stats().masked, drop.len());
            let kept: Vec<f64> = (0..8).filter(|i| !drop.contains(i)).map(|i| x[i]).collect();
            let out = align_sample(&EncodedSample::new(kept, None), &map).unwrap();
            for (i, v) in out.features.iter().enumerate() {
                let expected = if drop.contains(&i) { 0.0 } else { x[i] };
                prop_assert_eq!(*v, expected);
            }
        }
    }
}
