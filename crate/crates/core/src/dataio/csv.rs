use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

use super::schema::{eq_ci, DatasetSchema, FeatureKind};

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Numeric(f64),
    Categorical(String),
}

/// One parsed row: feature values in schema order plus the resolved class.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub values: Vec<RawValue>,
    pub label: Option<usize>,
}

pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<Vec<RawRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parse flow records from any reader. Columns are located by name
/// (case-insensitive, order-free); columns the schema does not name are ignored.
pub fn read_csv<R: Read>(reader: R, schema: &DatasetSchema) -> Result<Vec<RawRecord>> {
    let headerless = schema.csv_columns.is_some();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(!headerless)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let columns: Vec<String> = match &schema.csv_columns {
        Some(cols) => cols.clone(),
        None => rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 0,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_owned)
            .collect(),
    };
    let locate = |name: &str| {
        columns
            .iter()
            .position(|c| eq_ci(c, name))
            .ok_or_else(|| Error::SchemaMismatch(format!("column {name:?} not found")))
    };
    let feature_cols = schema
        .features
        .iter()
        .map(|f| locate(&f.name))
        .collect::<Result<Vec<_>>>()?;
    let label_col = locate(&schema.label_column)?;

    let mut records = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let rec = result.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != columns.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", columns.len(), rec.len()),
            });
        }
        let mut values = Vec::with_capacity(feature_cols.len());
        for (feature, &col) in schema.features.iter().zip(&feature_cols) {
            let cell = &rec[col];
            let value = match feature.kind {
                FeatureKind::Categorical => RawValue::Categorical(cell.to_owned()),
                FeatureKind::Numeric => {
                    let parsed = cell.parse::<f64>().ok().filter(|v| v.is_finite());
                    match (parsed, feature.fill) {
                        (Some(v), _) => RawValue::Numeric(v),
                        (None, Some(fill)) => RawValue::Numeric(fill),
                        (None, None) => {
                            return Err(Error::Parse {
                                row,
                                message: format!("column {:?}: {cell:?} is not a finite number", feature.name),
                            })
                        }
                    }
                }
            };
            values.push(value);
        }
        let raw_label = &rec[label_col];
        let label = schema.resolve_label(raw_label).ok_or_else(|| Error::Parse {
            row,
            message: format!("label {raw_label:?} is not a known class"),
        })?;
        records.push(RawRecord {
            values,
            label: Some(label),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::schema::FeatureDescriptor;
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
                FeatureDescriptor::categorical("svc", &["http", "dns"]),
            ],
        }
    }

    #[test]
    fn reads_well_formed_rows() {
        let text = "svc,a,extra,cls\nhttp,1.5,x,Normal\n\"dns\",2,y,Attack\n-,3,z,normal\n";
        let recs = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].values[0], RawValue::Numeric(1.5));
        assert_eq!(recs[1].values[1], RawValue::Categorical("dns".into()));
        assert_eq!(recs[2].label, Some(0));
    }

    #[test]
    fn missing_label_column_is_schema_mismatch() {
        let text = "a,svc\n1,http\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &schema()),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn bad_numeric_reports_row() {
        let text = "a,svc,cls\n1,http,Normal\nabc,dns,Normal\n";
        match read_csv(text.as_bytes(), &schema()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fill_covers_empty_cells() {
        let mut s = schema();
        s.features[0].fill = Some(0.0);
        let recs = read_csv("a,svc,cls\n,http,Normal\n".as_bytes(), &s).unwrap();
        assert_eq!(recs[0].values[0], RawValue::Numeric(0.0));
    }

    #[test]
    fn headerless_files_use_positional_columns() {
        let mut s = schema();
        s.csv_columns = Some(vec!["a".into(), "svc".into(), "cls".into()]);
        let recs = read_csv("4,dns,Attack\n".as_bytes(), &s).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].label, Some(1));
    }
}
