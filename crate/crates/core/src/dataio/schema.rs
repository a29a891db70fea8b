use std::collections::{BTreeMap, HashSet};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const SCHEMA_VERSION: u32 = 1;

/// Categorical value that marks a missing entry; it encodes to an all-zero block.
pub const MISSING_TOKEN: &str = "-";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vocabulary: Vec<String>,
    /// Value used when a numeric cell is empty; without it an empty cell is a parse error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill: Option<f64>,
}

impl FeatureDescriptor {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric,
            vocabulary: Vec::new(),
            fill: None,
        }
    }

    pub fn categorical(name: impl Into<String>, vocabulary: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
            vocabulary: vocabulary.iter().map(|s| s.to_string()).collect(),
            fill: None,
        }
    }

    pub fn encoded_width(&self) -> usize {
        match self.kind {
            FeatureKind::Numeric => 1,
            FeatureKind::Categorical => self.vocabulary.len(),
        }
    }
}

/// Declarative description of one flow-record dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSchema {
    pub version: u32,
    pub name: String,
    pub label_column: String,
    pub class_names: Vec<String>,
    /// Class treated as benign in the binary task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_class: Option<String>,
    /// Raw label spellings mapped onto `class_names` entries.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub label_aliases: BTreeMap<String, String>,
    /// Positional column names for files without a header row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_columns: Option<Vec<String>>,
    pub features: Vec<FeatureDescriptor>,
}

const BUILTIN: &[(&str, &str)] = &[
    (
        "unsw-nb15-smaller",
        include_str!("../../schemas/unsw-nb15-smaller.toml"),
    ),
    ("unsw-nb15-larger", include_str!("../../schemas/unsw-nb15-larger.toml")),
    ("cic-ids2017", include_str!("../../schemas/cic-ids2017.toml")),
    ("cidds-001", include_str!("../../schemas/cidds-001.toml")),
    ("bot-iot", include_str!("../../schemas/bot-iot.toml")),
];

pub(crate) fn eq_ci(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

impl DatasetSchema {
    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(n, _)| *n)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Config(format!("no built-in schema named {name:?}")))?;
        Self::from_toml(text, Path::new(name))
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let schema: Self = toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serialises")
    }

    /// Load a schema file, or a built-in schema when `path` is `builtin:<name>`.
    pub fn load(path: &Path) -> Result<Self> {
        if let Some(name) = path.to_str().and_then(|s| s.strip_prefix("builtin:")) {
            return Self::builtin(name);
        }
        Self::from_toml(&io::read_string(path)?, path)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SchemaMismatch(m));
        if self.version != SCHEMA_VERSION {
            return bad(format!("unsupported schema version {}", self.version));
        }
        if self.features.is_empty() {
            return bad("schema lists no features".into());
        }
        let mut seen = HashSet::new();
        for f in &self.features {
            if !seen.insert(f.name.to_ascii_lowercase()) {
                return bad(format!("duplicate feature name {:?}", f.name));
            }
            match f.kind {
                FeatureKind::Numeric if !f.vocabulary.is_empty() => {
                    return bad(format!("numeric feature {:?} has a vocabulary", f.name));
                }
                FeatureKind::Categorical => {
                    if f.vocabulary.is_empty() {
                        return bad(format!("categorical feature {:?} has no vocabulary", f.name));
                    }
                    let mut v = HashSet::new();
                    if let Some(dup) = f.vocabulary.iter().find(|c| !v.insert(c.to_ascii_lowercase())) {
                        return bad(format!("duplicate category {dup:?} in {:?}", f.name));
                    }
                }
                _ => {}
            }
        }
        if self.class_names.is_empty() {
            return bad("schema lists no classes".into());
        }
        let mut classes = HashSet::new();
        if let Some(dup) = self
            .class_names
            .iter()
            .find(|c| !classes.insert(c.to_ascii_lowercase()))
        {
            return bad(format!("duplicate class {dup:?}"));
        }
        if let Some(normal) = &self.normal_class {
            if self.class_position(normal).is_none() {
                return bad(format!("normal class {normal:?} not among class names"));
            }
        }
        for target in self.label_aliases.values() {
            if self.class_position(target).is_none() {
                return bad(format!("label alias targets unknown class {target:?}"));
            }
        }
        if let Some(cols) = &self.csv_columns {
            for needed in self.features.iter().map(|f| &f.name).chain([&self.label_column]) {
                if !cols.iter().any(|c| eq_ci(c, needed)) {
                    return bad(format!("csv_columns lacks {needed:?}"));
                }
            }
        }
        Ok(())
    }

    pub fn encoded_width(&self) -> usize {
        self.features.iter().map(FeatureDescriptor::encoded_width).sum()
    }

    /// Encoded position range of every feature, in schema order.
    pub fn feature_spans(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.features
            .iter()
            .map(|f| {
                let r = start..start + f.encoded_width();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn feature(&self, name: &str) -> Option<(usize, &FeatureDescriptor)> {
        self.features.iter().enumerate().find(|(_, f)| eq_ci(&f.name, name))
    }

    pub fn class_position(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| eq_ci(c, name))
    }

    /// Resolve a raw label cell to a class index, honouring aliases.
    pub fn resolve_label(&self, raw: &str) -> Option<usize> {
        let raw = raw.trim();
        self.class_position(raw).or_else(|| {
            self.label_aliases
                .iter()
                .find(|(k, _)| eq_ci(k, raw))
                .and_then(|(_, v)| self.class_position(v))
        })
    }

    pub fn normal_index(&self) -> Option<usize> {
        self.normal_class.as_deref().and_then(|n| self.class_position(n))
    }

    /// Identity of the encoded layout (features, vocabularies, classes).
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::json!({
            "features": self.features,
            "class_names": self.class_names,
            "label_column": self.label_column,
        });
        io::sha256_hex(canonical.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unsw_smaller_pack_width() {
        let s = DatasetSchema::builtin("unsw-nb15-smaller").unwrap();
        let numeric = s.features.iter().filter(|f| f.kind == FeatureKind::Numeric).count();
        assert_eq!(numeric, 39);
        let (_, service) = s.feature("service").unwrap();
        assert_eq!(service.vocabulary.len(), 13);
        assert!(service.vocabulary.iter().any(|v| v == MISSING_TOKEN));
        assert_eq!(s.feature("proto").unwrap().1.vocabulary.len(), 133);
        assert_eq!(s.feature("state").unwrap().1.vocabulary.len(), 11);
        assert_eq!(s.encoded_width(), 196);
        assert_eq!(s.class_names.len(), 10);
    }

    #[test]
    fn every_builtin_schema_validates() {
        for name in DatasetSchema::builtin_names() {
            let s = DatasetSchema::builtin(name).unwrap();
            assert!(s.encoded_width() > 0, "{name}");
            let spans = s.feature_spans();
            assert_eq!(spans.last().unwrap().end, s.encoded_width());
        }
    }

    #[test]
    fn labels_resolve_through_aliases() {
        let s = DatasetSchema::builtin("unsw-nb15-larger").unwrap();
        assert_eq!(s.resolve_label("DoS"), s.class_position("Dos"));
        assert_eq!(s.resolve_label(" Backdoor"), s.class_position("Backdoors"));
        assert_eq!(s.resolve_label(""), s.class_position("Normal"));
        assert_eq!(s.resolve_label("nonsense"), None);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = DatasetSchema::builtin("cidds-001").unwrap();
        s.features.push(s.features[0].clone());
        assert!(matches!(s.validate(), Err(Error::SchemaMismatch(_))));
        let mut s = DatasetSchema::builtin("cidds-001").unwrap();
        s.features[1] = FeatureDescriptor::categorical("proto", &["TCP", "tcp"]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let s = DatasetSchema::builtin("bot-iot").unwrap();
        let back = DatasetSchema::from_toml(&s.to_toml(), Path::new("mem")).unwrap();
        assert_eq!(s, back);
        assert_eq!(s.fingerprint(), back.fingerprint());
    }
}
