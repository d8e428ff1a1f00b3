//! CSV ingestion and dataset-level accuracy.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::predict;
use crate::netlist::Netlist;
use crate::schema::{Binning, Feature, FeatureKind, FeatureSchema, FeatureValue};

/// One raw cell as read from a CSV file.
pub type RawValue<'a> = &'a str;

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub values: Vec<FeatureValue>,
    /// Zero-based class index.
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub num_classes: usize,
    pub rows: Vec<Row>,
    /// Free-form origin note, e.g. the source path.
    pub provenance: String,
}

/// How the label column maps to class indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelSpec {
    /// Integer labels; `base` is subtracted (use 1 for labels `1..=C`).
    Integer { base: usize },
    /// Label strings in class order.
    Names(Vec<String>),
}

impl Default for LabelSpec {
    fn default() -> Self {
        LabelSpec::Integer { base: 0 }
    }
}

impl LabelSpec {
    fn class_of(&self, raw: &str, num_classes: usize) -> Result<usize> {
        let raw = raw.trim();
        let class = match self {
            LabelSpec::Integer { base } => raw
                .parse::<usize>()
                .ok()
                .and_then(|v| v.checked_sub(*base))
                .ok_or_else(|| Error::Value(format!("label `{raw}` is not an integer ≥ {base}")))?,
            LabelSpec::Names(names) => names
                .iter()
                .position(|n| n == raw)
                .ok_or_else(|| Error::Value(format!("unknown label `{raw}`")))?,
        };
        if class >= num_classes {
            return Err(Error::Value(format!(
                "label `{raw}` is outside {num_classes} classes"
            )));
        }
        Ok(class)
    }
}

fn value_of(feature: &Feature, raw: &str) -> Result<FeatureValue> {
    let raw = raw.trim();
    if raw.is_empty()
        || raw == "?"
        || raw.eq_ignore_ascii_case("na")
        || raw.eq_ignore_ascii_case("nan")
    {
        return Err(Error::Value(format!(
            "missing value for feature `{}`",
            feature.name
        )));
    }
    match &feature.kind {
        FeatureKind::Numerical { binning, .. } => {
            let x: f64 = raw.parse().map_err(|_| {
                Error::Value(format!(
                    "feature `{}`: `{raw}` is not a number",
                    feature.name
                ))
            })?;
            if !x.is_finite() {
                return Err(Error::Value(format!(
                    "feature `{}`: `{raw}` is not finite",
                    feature.name
                )));
            }
            if let Binning::Range { lo, hi } = binning {
                if x < *lo || x > *hi {
                    return Err(Error::Value(format!(
                        "feature `{}`: {x} outside [{lo}, {hi}]",
                        feature.name
                    )));
                }
            }
            let cuts = feature.thresholds().unwrap_or_default();
            Ok(FeatureValue::Bucket(
                cuts.iter().filter(|&&t| t <= x).count(),
            ))
        }
        FeatureKind::Categorical { arity, labels, .. } => {
            let idx = if labels.is_empty() {
                raw.parse::<usize>().ok().filter(|&c| c < *arity)
            } else {
                labels.iter().position(|l| l == raw)
            };
            idx.map(FeatureValue::Category).ok_or_else(|| {
                Error::Value(format!(
                    "feature `{}`: unknown category `{raw}`",
                    feature.name
                ))
            })
        }
    }
}

/// Bucketizes/one-hot-codes raw feature values, one per schema feature.
pub fn row_values(schema: &FeatureSchema, raw: &[RawValue<'_>]) -> Result<Vec<FeatureValue>> {
    if raw.len() != schema.features.len() {
        return Err(Error::Value(format!(
            "{} values for {} features",
            raw.len(),
            schema.features.len()
        )));
    }
    schema
        .features
        .iter()
        .zip(raw)
        .map(|(f, r)| value_of(f, r))
        .collect()
}

/// Raw values to input bits.
pub fn encode_row(schema: &FeatureSchema, raw: &[RawValue<'_>]) -> Result<Vec<bool>> {
    schema.encode(&row_values(schema, raw)?)
}

/// Input bits back to bucket indices and categories.
pub fn decode_bits(schema: &FeatureSchema, bits: &[bool]) -> Result<Vec<FeatureValue>> {
    schema.decode(bits)
}

/// Half-open value interval `[lower, upper)` covered by a bucket, with
/// infinite ends for the outer buckets.
pub fn bucket_interval(feature: &Feature, bucket: usize) -> Option<(f64, f64)> {
    let cuts = feature.thresholds()?;
    if bucket > cuts.len() {
        return None;
    }
    let lower = if bucket == 0 {
        f64::NEG_INFINITY
    } else {
        cuts[bucket - 1]
    };
    let upper = cuts.get(bucket).copied().unwrap_or(f64::INFINITY);
    Some((lower, upper))
}

impl Dataset {
    /// Reads a headered CSV. Feature columns are looked up by schema
    /// feature name; `label_column` names the class column. Extra columns
    /// are ignored.
    pub fn from_csv_reader<R: Read>(
        reader: R,
        schema: FeatureSchema,
        num_classes: usize,
        label_column: &str,
        labels: &LabelSpec,
        provenance: impl Into<String>,
    ) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: HashMap<String, usize> = rdr
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        let column = |name: &str| {
            header
                .get(name)
                .copied()
                .ok_or_else(|| Error::Value(format!("CSV has no column `{name}`")))
        };
        let feature_cols: Vec<usize> = schema
            .features
            .iter()
            .map(|f| column(&f.name))
            .collect::<Result<_>>()?;
        let label_col = column(label_column)?;

        let mut rows = Vec::new();
        for (n, record) in rdr.records().enumerate() {
            let record = record?;
            let line = n + 2;
            let at = |e: Error| Error::Value(format!("row {line}: {e}"));
            let raw: Vec<&str> = feature_cols
                .iter()
                .map(|&c| record.get(c).unwrap_or(""))
                .collect();
            let values = row_values(&schema, &raw).map_err(at)?;
            let label = labels
                .class_of(record.get(label_col).unwrap_or(""), num_classes)
                .map_err(at)?;
            rows.push(Row { values, label });
        }
        Ok(Dataset {
            schema,
            num_classes,
            rows,
            provenance: provenance.into(),
        })
    }

    pub fn from_csv_path(
        path: &Path,
        schema: FeatureSchema,
        num_classes: usize,
        label_column: &str,
        labels: &LabelSpec,
    ) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(
            file,
            schema,
            num_classes,
            label_column,
            labels,
            path.display().to_string(),
        )
    }

    pub fn encoded_rows(&self) -> impl Iterator<Item = Result<Vec<bool>>> + '_ {
        self.rows.iter().map(|r| self.schema.encode(&r.values))
    }
}

/// Fraction of rows whose predicted class equals the label.
pub fn accuracy(netlist: &Netlist, dataset: &Dataset) -> Result<f64> {
    if dataset.rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if netlist.input_width != dataset.schema.width() {
        return Err(Error::Width {
            expected: netlist.input_width,
            got: dataset.schema.width(),
        });
    }
    let mut correct = 0usize;
    for (row, bits) in dataset.rows.iter().zip(dataset.encoded_rows()) {
        if predict(netlist, &bits?)?.class == row.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<bool> {
        s.bytes().map(|b| b == b'1').collect()
    }

    fn small_schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            Feature::numerical_auto("age", 0.0, 4.0, true, 20),
            Feature::categorical("sex", 2, true).with_labels(vec!["f".into(), "m".into()]),
        ])
    }

    #[test]
    fn integer_range_collapses_to_its_cardinality() {
        let s = small_schema();
        assert_eq!(s.features[0].width(), 4);
        assert_eq!(encode_row(&s, &["0", "f"]).unwrap(), bits("000010"));
        assert_eq!(encode_row(&s, &["4", "m"]).unwrap(), bits("111101"));
        assert_eq!(encode_row(&s, &["2", "m"]).unwrap(), bits("110001"));
    }

    #[test]
    fn rejects_bad_cells() {
        let s = small_schema();
        assert!(encode_row(&s, &["5", "f"]).is_err());
        assert!(encode_row(&s, &["1", "x"]).is_err());
        assert!(encode_row(&s, &["", "f"]).is_err());
        assert!(encode_row(&s, &["?", "f"]).is_err());
        assert!(encode_row(&s, &["1"]).is_err());
    }

    #[test]
    fn decode_examples() {
        let s = FeatureSchema::new(vec![Feature::numerical("n", 3, 0.0, 1.0)]);
        assert_eq!(
            decode_bits(&s, &bits("110")).unwrap(),
            vec![FeatureValue::Bucket(2)]
        );
        assert!(matches!(
            decode_bits(&s, &bits("010")),
            Err(Error::IllFormed(_))
        ));
        let c = FeatureSchema::new(vec![Feature::categorical("c", 4, false)]);
        assert_eq!(
            decode_bits(&c, &bits("0100")).unwrap(),
            vec![FeatureValue::Category(1)]
        );
    }

    #[test]
    fn bucket_intervals() {
        let f = Feature::numerical("n", 3, 0.0, 4.0);
        assert_eq!(bucket_interval(&f, 0), Some((f64::NEG_INFINITY, 1.0)));
        assert_eq!(bucket_interval(&f, 2), Some((2.0, 3.0)));
        assert_eq!(bucket_interval(&f, 3), Some((3.0, f64::INFINITY)));
        assert_eq!(bucket_interval(&f, 4), None);
    }

    #[test]
    fn csv_loading_and_accuracy() {
        let csv = "age,sex,y\n0,f,1\n1,m,1\n2,f,0\n3,m,1\n4,f,0\n";
        let ds = Dataset::from_csv_reader(
            csv.as_bytes(),
            small_schema(),
            2,
            "y",
            &LabelSpec::default(),
            "inline",
        )
        .unwrap();
        assert_eq!(ds.rows.len(), 5);
        // Always predicts class 1: three of five labels are 1.
        let net = crate::eval::fixtures::constant_net(6, false, true);
        assert!((accuracy(&net, &ds).unwrap() - 0.6).abs() < 1e-12);

        let empty = Dataset {
            rows: vec![],
            ..ds.clone()
        };
        assert!(matches!(accuracy(&net, &empty), Err(Error::EmptyDataset)));
        let narrow = crate::eval::fixtures::constant_net(3, false, true);
        assert!(matches!(accuracy(&narrow, &ds), Err(Error::Width { .. })));
    }

    #[test]
    fn csv_errors_name_the_row() {
        let csv = "age,sex,y\n0,f,1\n9,m,1\n";
        let err = Dataset::from_csv_reader(
            csv.as_bytes(),
            small_schema(),
            2,
            "y",
            &LabelSpec::default(),
            "",
        )
        .unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        let csv = "age,y\n0,1\n";
        assert!(Dataset::from_csv_reader(
            csv.as_bytes(),
            small_schema(),
            2,
            "y",
            &LabelSpec::default(),
            ""
        )
        .is_err());
    }

    #[test]
    fn named_and_based_labels() {
        let s = LabelSpec::Names(vec!["no".into(), "yes".into()]);
        assert_eq!(s.class_of("yes", 2).unwrap(), 1);
        assert!(s.class_of("maybe", 2).is_err());
        let one = LabelSpec::Integer { base: 1 };
        assert_eq!(one.class_of("1", 2).unwrap(), 0);
        assert!(one.class_of("0", 2).is_err());
        assert!(one.class_of("3", 2).is_err());
    }
}
