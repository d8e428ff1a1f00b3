//! Concrete semantics: forward evaluation, prediction and confidence, the
//! similarity predicate, and exhaustive oracles for small instances.
//!
//! The winner among tied classes is the highest-indexed one. This is the
//! class singled out by the winning-flag constraints in the CNF encoding
//! (non-strict against lower classes, strict against higher ones), so the
//! concrete and symbolic semantics agree on every output, including the
//! all-zero one.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kappa::Kappa;
use crate::netlist::{gate_truth, Netlist, NodeRef};
use crate::schema::{FeatureKind, FeatureSchema, FeatureValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fair,
    Robust,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fair" => Ok(Mode::Fair),
            "robust" => Ok(Mode::Robust),
            _ => Err(Error::Usage(format!("unknown mode `{s}` (fair|robust)"))),
        }
    }
}

/// Evaluates the network on `input`, returning the final-layer bits in
/// block order.
pub fn forward(netlist: &Netlist, input: &[bool]) -> Result<Vec<bool>> {
    if input.len() != netlist.input_width {
        return Err(Error::Width {
            expected: netlist.input_width,
            got: input.len(),
        });
    }
    let mut values = Vec::with_capacity(netlist.num_gates());
    for gate in netlist.gates() {
        let resolve = |r: NodeRef| match r {
            NodeRef::Input(k) => input[k],
            NodeRef::Gate(k) => values[k],
        };
        let v = gate_truth(gate.op, resolve(gate.in_a), resolve(gate.in_b));
        values.push(v);
    }
    Ok(values.split_off(netlist.first_output_gate()))
}

/// Per-class popcounts of the output blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScoreVector {
    pub scores: Vec<u64>,
}

impl ScoreVector {
    pub fn from_outputs(outputs: &[bool], block_size: usize) -> Self {
        ScoreVector {
            scores: outputs
                .chunks(block_size)
                .map(|b| b.iter().filter(|&&x| x).count() as u64)
                .collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.scores.iter().sum()
    }

    /// Highest-indexed class attaining the maximum score.
    pub fn winner(&self) -> usize {
        let max = self.scores.iter().copied().max().unwrap_or(0);
        self.scores.iter().rposition(|&s| s == max).unwrap_or(0)
    }

    pub fn confidence(&self) -> Confidence {
        Confidence {
            winner_score: self.scores.get(self.winner()).copied().unwrap_or(0),
            total: self.total(),
            num_classes: self.scores.len() as u64,
        }
    }
}

/// Winner score over total score, kept as integers. An all-zero output has
/// the degenerate confidence `1/C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Confidence {
    pub winner_score: u64,
    pub total: u64,
    pub num_classes: u64,
}

impl Confidence {
    pub fn is_degenerate(&self) -> bool {
        self.total == 0
    }

    pub fn value(&self) -> Kappa {
        if self.total == 0 {
            Kappa::new(1, self.num_classes as i64)
        } else {
            Kappa::new(self.winner_score as i64, self.total as i64)
        }
    }

    /// Strict comparison `conf > kappa`.
    pub fn exceeds(&self, kappa: Kappa) -> bool {
        self.value() > kappa
    }
}

impl std::fmt::Display for Confidence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.total == 0 {
            write!(f, "1/{} (all outputs zero)", self.num_classes)
        } else {
            write!(f, "{}/{}", self.winner_score, self.total)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prediction {
    pub class: usize,
    pub scores: ScoreVector,
    pub confidence: Confidence,
}

pub fn predict_scores(scores: ScoreVector) -> Prediction {
    Prediction {
        class: scores.winner(),
        confidence: scores.confidence(),
        scores,
    }
}

pub fn predict(netlist: &Netlist, input: &[bool]) -> Result<Prediction> {
    let out = forward(netlist, input)?;
    Ok(predict_scores(ScoreVector::from_outputs(
        &out,
        netlist.block_size,
    )))
}

/// Similarity predicate on decoded feature values.
pub fn phi_values(
    schema: &FeatureSchema,
    x: &[FeatureValue],
    x_prime: &[FeatureValue],
    eps: u64,
    mode: Mode,
) -> bool {
    schema
        .features
        .iter()
        .zip(x.iter().zip(x_prime))
        .all(|(f, (a, b))| match f.kind {
            FeatureKind::Numerical { .. } => a.index().abs_diff(b.index()) as u64 <= eps,
            FeatureKind::Categorical { sensitive, .. } => {
                if sensitive && mode == Mode::Fair {
                    a != b
                } else {
                    a == b
                }
            }
        })
}

/// `Φ(x, x′, ε)`: non-sensitive numericals within `eps` thermometer flips,
/// non-sensitive categoricals equal and, in fair mode, sensitive
/// categoricals different.
pub fn check_phi(
    x: &[bool],
    x_prime: &[bool],
    schema: &FeatureSchema,
    eps: u64,
    mode: Mode,
) -> Result<bool> {
    let a = schema.decode(x)?;
    let b = schema.decode(x_prime)?;
    Ok(phi_values(schema, &a, &b, eps, mode))
}

/// One side of a counterexample pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessInput {
    #[serde(serialize_with = "ser_bits")]
    pub bits: Vec<bool>,
    pub values: Vec<FeatureValue>,
    pub class: usize,
    pub scores: Vec<u64>,
    pub confidence: String,
}

fn ser_bits<S: serde::Serializer>(bits: &[bool], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&crate::schema::bit_string(bits))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub x: WitnessInput,
    pub x_prime: WitnessInput,
}

impl WitnessInput {
    pub fn evaluate(netlist: &Netlist, schema: &FeatureSchema, bits: Vec<bool>) -> Result<Self> {
        let values = schema.decode(&bits)?;
        let p = predict(netlist, &bits)?;
        Ok(WitnessInput {
            values,
            class: p.class,
            scores: p.scores.scores,
            confidence: p.confidence.to_string(),
            bits,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Holds,
    Counterexample,
    Unknown,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct QueryStats {
    pub time_secs: f64,
    pub num_vars: usize,
    pub num_clauses: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    /// Present exactly when `status` is `Counterexample`.
    pub witness: Option<Box<Witness>>,
    pub stats: QueryStats,
}

impl Verdict {
    pub fn holds(stats: QueryStats) -> Self {
        Verdict {
            status: Status::Holds,
            witness: None,
            stats,
        }
    }

    pub fn counterexample(witness: Witness, stats: QueryStats) -> Self {
        Verdict {
            status: Status::Counterexample,
            witness: Some(Box::new(witness)),
            stats,
        }
    }

    pub fn unknown(stats: QueryStats) -> Self {
        Verdict {
            status: Status::Unknown,
            witness: None,
            stats,
        }
    }
}

const PAIR_GUARD: u128 = 100_000_000;

/// Every well-formed input with its bits, decoded values and prediction,
/// in enumeration order.
struct Universe {
    bits: Vec<Vec<bool>>,
    values: Vec<Vec<FeatureValue>>,
    preds: Vec<Prediction>,
}

impl Universe {
    fn build(netlist: &Netlist, schema: &FeatureSchema) -> Result<Self> {
        let w = schema.input_count();
        if w.saturating_mul(w) > PAIR_GUARD {
            return Err(Error::TooLarge(w));
        }
        if schema.width() != netlist.input_width {
            return Err(Error::Width {
                expected: netlist.input_width,
                got: schema.width(),
            });
        }
        let mut u = Universe {
            bits: Vec::with_capacity(w as usize),
            values: Vec::with_capacity(w as usize),
            preds: Vec::with_capacity(w as usize),
        };
        for i in 0..w {
            let values = schema.nth_values(i);
            let bits = schema.encode(&values)?;
            u.preds.push(predict(netlist, &bits)?);
            u.bits.push(bits);
            u.values.push(values);
        }
        Ok(u)
    }

    /// Bad pairs: `Φ` holds and the predicted classes differ.
    fn bad_pairs<'a>(
        &'a self,
        schema: &'a FeatureSchema,
        eps: u64,
        mode: Mode,
    ) -> impl Iterator<Item = (usize, usize)> + 'a {
        let n = self.bits.len();
        (0..n).flat_map(move |i| {
            (0..n).filter_map(move |j| {
                (self.preds[i].class != self.preds[j].class
                    && phi_values(schema, &self.values[i], &self.values[j], eps, mode))
                .then_some((i, j))
            })
        })
    }
}

fn require_sensitive(schema: &FeatureSchema, mode: Mode) -> Result<()> {
    if mode == Mode::Fair && schema.num_sensitive() == 0 {
        return Err(Error::NoSensitiveFeature);
    }
    Ok(())
}

/// Exhaustive check of `Φ ∧ conf(f(x)) > κ ⟹ f(x) = f(x′)` over all
/// well-formed pairs. Returns the first violating pair in enumeration order.
pub fn brute_force_verify(
    netlist: &Netlist,
    schema: &FeatureSchema,
    mode: Mode,
    eps: u64,
    kappa: Kappa,
) -> Result<Verdict> {
    require_sensitive(schema, mode)?;
    let start = Instant::now();
    let u = Universe::build(netlist, schema)?;
    let hit = u
        .bad_pairs(schema, eps, mode)
        .find(|&(i, _)| u.preds[i].confidence.exceeds(kappa));
    let stats = QueryStats {
        time_secs: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok(match hit {
        None => Verdict::holds(stats),
        Some((i, j)) => {
            let witness = Witness {
                x: WitnessInput::evaluate(netlist, schema, u.bits[i].clone())?,
                x_prime: WitnessInput::evaluate(netlist, schema, u.bits[j].clone())?,
            };
            Verdict::counterexample(witness, stats)
        }
    })
}

/// Smallest κ at which the property holds: the largest confidence among
/// bad pairs, or `1/C` when there are none.
pub fn brute_force_min_kappa(
    netlist: &Netlist,
    schema: &FeatureSchema,
    mode: Mode,
    eps: u64,
) -> Result<Kappa> {
    require_sensitive(schema, mode)?;
    let u = Universe::build(netlist, schema)?;
    let floor = Kappa::new(1, netlist.num_classes as i64);
    Ok(u.bad_pairs(schema, eps, mode)
        .map(|(i, _)| u.preds[i].confidence.value())
        .fold(floor, Kappa::max))
}

/// Whether some well-formed input with at least one output bit set has
/// confidence strictly above `kappa`.
pub fn brute_force_attainable(
    netlist: &Netlist,
    schema: &FeatureSchema,
    kappa: Kappa,
) -> Result<bool> {
    let w = schema.input_count();
    if w > PAIR_GUARD {
        return Err(Error::TooLarge(w));
    }
    for i in 0..w {
        let bits = schema.encode(&schema.nth_values(i))?;
        let c = predict(netlist, &bits)?.confidence;
        if !c.is_degenerate() && c.exceeds(kappa) {
            return Ok(true);
        }
    }
    Ok(false)
}
