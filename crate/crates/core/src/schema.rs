//! Feature binarization plan shared by the evaluator, the property encoder
//! and data ingestion.
//!
//! Numerical features are thermometer coded: a bucket index `v` in `0..=B`
//! sets the first `v` of `B` bits. Categorical features are one-hot over
//! their `m` categories.

use std::cmp::Ordering;
use std::fmt::{self, Write};
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::netlist::Violation;

#[derive(Clone, Debug, PartialEq)]
pub enum Binning {
    /// Equal-width buckets over `[lo, hi]`.
    Range { lo: f64, hi: f64 },
    /// Explicit ascending cut points, one per thermometer bit.
    Thresholds(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureKind {
    Numerical {
        bits: usize,
        binning: Binning,
    },
    Categorical {
        arity: usize,
        sensitive: bool,
        /// Optional category labels used by CSV ingestion.
        labels: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    pub fn numerical(name: impl Into<String>, bits: usize, lo: f64, hi: f64) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Numerical {
                bits,
                binning: Binning::Range { lo, hi },
            },
        }
    }

    /// Numerical feature sized from its value range: at most `max_buckets`
    /// representable values, fewer when an integer range is narrower.
    pub fn numerical_auto(
        name: impl Into<String>,
        lo: f64,
        hi: f64,
        integer: bool,
        max_buckets: usize,
    ) -> Self {
        let mut buckets = max_buckets.max(2);
        if integer {
            let card = (hi.floor() - lo.ceil()) as i64 + 1;
            buckets = buckets.min(card.max(2) as usize);
        }
        Feature::numerical(name, buckets - 1, lo, hi)
    }

    pub fn categorical(name: impl Into<String>, arity: usize, sensitive: bool) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Categorical {
                arity,
                sensitive,
                labels: Vec::new(),
            },
        }
    }

    pub fn with_labels(mut self, new_labels: Vec<String>) -> Self {
        if let FeatureKind::Categorical { labels, .. } = &mut self.kind {
            *labels = new_labels;
        }
        self
    }

    /// Number of input bits the feature occupies.
    pub fn width(&self) -> usize {
        match &self.kind {
            FeatureKind::Numerical { bits, .. } => *bits,
            FeatureKind::Categorical { arity, .. } => *arity,
        }
    }

    /// Number of distinct well-formed values (B+1 buckets or m categories).
    pub fn cardinality(&self) -> usize {
        match &self.kind {
            FeatureKind::Numerical { bits, .. } => bits + 1,
            FeatureKind::Categorical { arity, .. } => *arity,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self.kind, FeatureKind::Numerical { .. })
    }

    pub fn is_sensitive(&self) -> bool {
        matches!(
            self.kind,
            FeatureKind::Categorical {
                sensitive: true,
                ..
            }
        )
    }

    /// Bucket cut points; value `x` falls in bucket `#{t : t <= x}`.
    pub fn thresholds(&self) -> Option<Vec<f64>> {
        match &self.kind {
            FeatureKind::Numerical { bits, binning } => Some(match binning {
                Binning::Thresholds(t) => t.clone(),
                Binning::Range { lo, hi } => {
                    let step = (hi - lo) / (*bits as f64 + 1.0);
                    (1..=*bits).map(|k| lo + step * k as f64).collect()
                }
            }),
            FeatureKind::Categorical { .. } => None,
        }
    }
}

/// Decoded value of one feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureValue {
    Bucket(usize),
    Category(usize),
}

impl FeatureValue {
    pub fn index(self) -> usize {
        match self {
            FeatureValue::Bucket(v) | FeatureValue::Category(v) => v,
        }
    }
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Bucket(v) => write!(f, "bucket {v}"),
            FeatureValue::Category(c) => write!(f, "category {c}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureSchema {
    pub features: Vec<Feature>,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Self {
        FeatureSchema { features }
    }

    pub fn width(&self) -> usize {
        self.features.iter().map(Feature::width).sum()
    }

    /// Bit range of every feature, in order; the ranges tile `0..width()`.
    pub fn ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.features
            .iter()
            .map(|f| {
                let r = start..start + f.width();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn num_sensitive(&self) -> usize {
        self.features.iter().filter(|f| f.is_sensitive()).count()
    }

    /// Number of well-formed inputs, saturating.
    pub fn input_count(&self) -> u128 {
        self.features
            .iter()
            .fold(1u128, |acc, f| acc.saturating_mul(f.cardinality() as u128))
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.features.is_empty() {
            out.push(Violation {
                location: "schema".into(),
                message: "schema has no features".into(),
            });
        }
        let mut push = |name: &str, msg: String| {
            out.push(Violation {
                location: format!("feature `{name}`"),
                message: msg,
            })
        };
        for f in &self.features {
            match &f.kind {
                FeatureKind::Numerical { bits, binning } => {
                    if *bits < 1 {
                        push(&f.name, "thermometer width must be at least 1".into());
                    }
                    match binning {
                        Binning::Range { lo, hi } if lo.partial_cmp(hi) != Some(Ordering::Less) => {
                            push(&f.name, format!("lo {lo} must be below hi {hi}"))
                        }
                        Binning::Thresholds(t) => {
                            if t.len() != *bits {
                                push(&f.name, format!("{} thresholds for {bits} bits", t.len()));
                            }
                            if t.windows(2)
                                .any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less))
                            {
                                push(&f.name, "thresholds must be strictly ascending".into());
                            }
                        }
                        _ => {}
                    }
                }
                FeatureKind::Categorical { arity, labels, .. } => {
                    if *arity < 2 {
                        push(&f.name, "categorical arity must be at least 2".into());
                    }
                    if !labels.is_empty() && labels.len() != *arity {
                        push(
                            &f.name,
                            format!("{} labels for arity {arity}", labels.len()),
                        );
                    }
                }
            }
        }
        out
    }

    /// Decodes a bit vector into feature values, rejecting any bits that
    /// are not a monotone thermometer or an exact one-hot block.
    pub fn decode(&self, bits: &[bool]) -> Result<Vec<FeatureValue>> {
        if bits.len() != self.width() {
            return Err(Error::Width {
                expected: self.width(),
                got: bits.len(),
            });
        }
        self.features
            .iter()
            .zip(self.ranges())
            .map(|(f, r)| {
                let block = &bits[r];
                match f.kind {
                    FeatureKind::Numerical { .. } => {
                        let v = block.iter().take_while(|&&b| b).count();
                        if block[v..].iter().any(|&b| b) {
                            return Err(Error::IllFormed(format!(
                                "feature `{}`: thermometer bits {} are not monotone",
                                f.name,
                                bit_string(block)
                            )));
                        }
                        Ok(FeatureValue::Bucket(v))
                    }
                    FeatureKind::Categorical { .. } => {
                        let hot: Vec<usize> = block
                            .iter()
                            .enumerate()
                            .filter(|(_, &b)| b)
                            .map(|(i, _)| i)
                            .collect();
                        if hot.len() != 1 {
                            return Err(Error::IllFormed(format!(
                                "feature `{}`: one-hot bits {} have {} set",
                                f.name,
                                bit_string(block),
                                hot.len()
                            )));
                        }
                        Ok(FeatureValue::Category(hot[0]))
                    }
                }
            })
            .collect()
    }

    pub fn is_well_formed(&self, bits: &[bool]) -> bool {
        self.decode(bits).is_ok()
    }

    /// Bit vector for the given feature values.
    pub fn encode(&self, values: &[FeatureValue]) -> Result<Vec<bool>> {
        if values.len() != self.features.len() {
            return Err(Error::Value(format!(
                "{} values for {} features",
                values.len(),
                self.features.len()
            )));
        }
        let mut bits = Vec::with_capacity(self.width());
        for (f, v) in self.features.iter().zip(values) {
            match (&f.kind, *v) {
                (FeatureKind::Numerical { bits: b, .. }, FeatureValue::Bucket(k)) if k <= *b => {
                    bits.extend((0..*b).map(|i| i < k));
                }
                (FeatureKind::Categorical { arity, .. }, FeatureValue::Category(c))
                    if c < *arity =>
                {
                    bits.extend((0..*arity).map(|i| i == c));
                }
                _ => {
                    return Err(Error::Value(format!(
                        "value {v} out of range for feature `{}`",
                        f.name
                    )))
                }
            }
        }
        Ok(bits)
    }

    /// Feature values for the `index`-th well-formed input in mixed-radix
    /// order (last feature varies fastest).
    pub fn nth_values(&self, mut index: u128) -> Vec<FeatureValue> {
        let mut values = vec![FeatureValue::Bucket(0); self.features.len()];
        for (slot, f) in values.iter_mut().zip(&self.features).rev() {
            let card = f.cardinality() as u128;
            let digit = (index % card) as usize;
            index /= card;
            *slot = if f.is_numerical() {
                FeatureValue::Bucket(digit)
            } else {
                FeatureValue::Category(digit)
            };
        }
        values
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut features = Vec::new();
        let mut offset = 0;
        for raw in text.split_inclusive('\n') {
            let line_off = offset;
            offset += raw.len();
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            features.push(parse_feature(line, line_off)?);
        }
        let schema = FeatureSchema { features };
        let violations = schema.violations();
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        Ok(schema)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.features {
            match &f.kind {
                FeatureKind::Numerical { bits, binning } => {
                    let _ = write!(out, "num {} bits={bits}", f.name);
                    match binning {
                        Binning::Range { lo, hi } => {
                            let _ = writeln!(out, " lo={lo} hi={hi}");
                        }
                        Binning::Thresholds(t) => {
                            let _ = writeln!(out, " thresholds={}", join_f64(t));
                        }
                    }
                }
                FeatureKind::Categorical {
                    arity,
                    sensitive,
                    labels,
                } => {
                    let _ = write!(
                        out,
                        "cat {} arity={arity} sensitive={}",
                        f.name, *sensitive as u8
                    );
                    if !labels.is_empty() {
                        let _ = write!(out, " values={}", labels.join(","));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub(crate) fn bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_feature(line: &str, off: usize) -> Result<Feature> {
    let syntax = |message: String| Error::Syntax {
        offset: off,
        message,
    };
    let mut toks = line.split_whitespace();
    let kind = toks.next().unwrap_or_default();
    let name = toks
        .next()
        .ok_or_else(|| syntax(format!("missing feature name in `{line}`")))?
        .to_string();
    let mut bits = None;
    let mut lo = None;
    let mut hi = None;
    let mut thresholds = None;
    let mut arity = None;
    let mut sensitive = None;
    let mut labels = Vec::new();
    for tok in toks {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| syntax(format!("expected key=value, found `{tok}`")))?;
        let int = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| syntax(format!("invalid integer `{v}` for {key}")))
        };
        let float = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| syntax(format!("invalid number `{v}` for {key}")))
        };
        match (kind, key) {
            ("num", "bits") => bits = Some(int(value)?),
            ("num", "lo") => lo = Some(float(value)?),
            ("num", "hi") => hi = Some(float(value)?),
            ("num", "thresholds") => {
                thresholds = Some(value.split(',').map(float).collect::<Result<Vec<_>>>()?)
            }
            ("cat", "arity") => arity = Some(int(value)?),
            ("cat", "sensitive") => {
                sensitive = Some(match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(syntax(format!("sensitive must be 0 or 1, found `{value}`"))),
                })
            }
            ("cat", "values") => labels = value.split(',').map(str::to_string).collect(),
            ("num" | "cat", _) => return Err(syntax(format!("unknown key `{key}` for `{kind}`"))),
            _ => return Err(syntax(format!("unknown feature kind `{kind}`"))),
        }
    }
    let feature = match kind {
        "num" => {
            let bits = bits.ok_or_else(|| syntax("missing bits=".into()))?;
            let binning = match (thresholds, lo, hi) {
                (Some(t), None, None) => Binning::Thresholds(t),
                (None, Some(lo), Some(hi)) => Binning::Range { lo, hi },
                _ => {
                    return Err(syntax(
                        "numerical feature needs lo= and hi=, or thresholds=".into(),
                    ))
                }
            };
            Feature {
                name,
                kind: FeatureKind::Numerical { bits, binning },
            }
        }
        "cat" => Feature {
            name,
            kind: FeatureKind::Categorical {
                arity: arity.ok_or_else(|| syntax("missing arity=".into()))?,
                sensitive: sensitive.unwrap_or(false),
                labels,
            },
        },
        _ => return Err(syntax(format!("unknown feature kind `{kind}`"))),
    };
    Ok(feature)
}
