//! Lowering of the two-copy robustness/fairness query (and the single-copy
//! attainability query) into CNF.
//!
//! The negated property asks for inputs `x`, `x′` that are well-formed,
//! similar under `Φ`, confidently classified (`conf(f(x)) > κ`) and
//! assigned different classes. UNSAT means the property holds.

use std::fmt::Write;

use serde::Serialize;

use crate::cnf::{CnfBuilder, CnfFormula, Lit};
use crate::error::{Error, Result};
use crate::eval::Mode;
use crate::kappa::{check_unit, floor_mul, Kappa};
use crate::netlist::Netlist;
use crate::schema::{FeatureKind, FeatureSchema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Fair,
    Robust,
    Attainable,
}

impl From<Mode> for QueryKind {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Fair => QueryKind::Fair,
            Mode::Robust => QueryKind::Robust,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PropertyQuery<'a> {
    pub kind: QueryKind,
    pub eps: u64,
    pub kappa: Kappa,
    pub netlist: &'a Netlist,
    pub schema: &'a FeatureSchema,
}

/// Literals of one input copy and its network.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CopyVars {
    pub inputs: Vec<Lit>,
    pub gates: Vec<Lit>,
    /// Final-layer literals in block order.
    pub outputs: Vec<Lit>,
    /// Each class block sorted descending.
    pub sorted_blocks: Vec<Vec<Lit>>,
    /// Winner flags, present when the copy takes part in `diff_class`.
    pub winners: Vec<Lit>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComponentCount {
    pub name: String,
    pub clauses: usize,
    pub vars: usize,
}

/// Where each semantic role lives in the formula.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarMap {
    pub x: CopyVars,
    /// The primed copy; absent in attainability queries.
    pub x_prime: Option<CopyVars>,
    /// All output bits of the unprimed copy sorted descending.
    pub total_sorted: Vec<Lit>,
    /// Clause and variable counts per emitted component; they sum to the
    /// formula totals.
    pub components: Vec<ComponentCount>,
}

impl VarMap {
    /// One line per role: `<role> <literal>...`.
    pub fn to_sidecar(&self) -> String {
        let mut out = String::new();
        let mut line = |role: &str, lits: &[Lit]| {
            let _ = write!(out, "{role}");
            for l in lits {
                let _ = write!(out, " {l}");
            }
            out.push('\n');
        };
        for (suffix, copy) in [("", Some(&self.x)), ("'", self.x_prime.as_ref())] {
            let Some(c) = copy else { continue };
            line(&format!("in{suffix}"), &c.inputs);
            line(&format!("gates{suffix}"), &c.gates);
            line(&format!("out{suffix}"), &c.outputs);
            for (j, b) in c.sorted_blocks.iter().enumerate() {
                line(&format!("sorted{suffix}[{j}]"), b);
            }
            if !c.winners.is_empty() {
                line(&format!("w{suffix}"), &c.winners);
            }
        }
        line("sorted_total", &self.total_sorted);
        out
    }
}

/// Thermometer monotonicity (`t[k] ⇒ t[k−1]`) per numerical feature and
/// exactly-one per categorical feature.
pub fn emit_well_formed(b: &mut CnfBuilder, schema: &FeatureSchema, in_lits: &[Lit]) {
    assert_eq!(in_lits.len(), schema.width());
    for (f, r) in schema.features.iter().zip(schema.ranges()) {
        let block = &in_lits[r];
        match f.kind {
            FeatureKind::Numerical { .. } => {
                for k in 1..block.len() {
                    b.implies(block[k], block[k - 1]);
                }
            }
            FeatureKind::Categorical { .. } => {
                b.add_clause(block.iter().copied());
                for i in 0..block.len() {
                    for j in i + 1..block.len() {
                        b.add_clause([!block[i], !block[j]]);
                    }
                }
            }
        }
    }
}

/// Thermometer proximity: for `k = ε..B−1`, `t[k] ⇒ t′[k−ε]` and
/// `t′[k] ⇒ t[k−ε]`.
pub fn emit_prox(b: &mut CnfBuilder, eps: u64, t: &[Lit], t_prime: &[Lit]) {
    assert_eq!(t.len(), t_prime.len());
    let eps = eps.min(t.len() as u64) as usize;
    for k in eps..t.len() {
        b.implies(t[k], t_prime[k - eps]);
        b.implies(t_prime[k], t[k - eps]);
    }
}

pub fn emit_same_cat(b: &mut CnfBuilder, c: &[Lit], c_prime: &[Lit]) {
    assert_eq!(c.len(), c_prime.len());
    for (&x, &y) in c.iter().zip(c_prime) {
        b.equiv(x, y);
    }
}

/// Category inequality under one-hot: some position is hot in `c` and
/// cold in `c′`, via selectors `sel_k ↔ c[k] ∧ ¬c′[k]`.
pub fn emit_diff_cat(b: &mut CnfBuilder, c: &[Lit], c_prime: &[Lit]) {
    assert_eq!(c.len(), c_prime.len());
    let selectors: Vec<Lit> = c.iter().zip(c_prime).map(|(&x, &y)| b.and(x, !y)).collect();
    b.add_clause(selectors);
}

/// Winner flags over descending-sorted class blocks. `w_c` implies class
/// `c` scores at least as high as every lower class and strictly higher
/// than every higher class; one further clause requires some flag.
pub fn emit_winning(b: &mut CnfBuilder, sorted_blocks: &[Vec<Lit>]) -> Vec<Lit> {
    let num_classes = sorted_blocks.len();
    let mut winners = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let w = b.fresh();
        let sc = &sorted_blocks[c];
        for (d, sd) in sorted_blocks.iter().enumerate() {
            if d < c {
                for k in 0..sc.len() {
                    b.add_clause([!w, !sd[k], sc[k]]);
                }
            } else if d > c {
                let strictly: Vec<Lit> = (0..sc.len()).map(|k| b.and(sc[k], !sd[k])).collect();
                b.add_clause(std::iter::once(!w).chain(strictly));
            }
        }
        winners.push(w);
    }
    b.add_clause(winners.iter().copied());
    winners
}

/// `w_c ⇒ ¬w′_c` for every class.
pub fn emit_diff_class(b: &mut CnfBuilder, w: &[Lit], w_prime: &[Lit]) {
    assert_eq!(w.len(), w_prime.len());
    for (&x, &y) in w.iter().zip(w_prime) {
        b.add_clause([!x, !y]);
    }
}

/// `conf > κ` over sorted outputs: for `i = 1..C·L`,
/// `total[i−1] ⇒ ∨_c block_c[⌊i·κ⌋]`, with indices past the block end
/// read as FALSE. Vacuously true when every output bit is zero.
pub fn emit_confidence_gt(
    b: &mut CnfBuilder,
    kappa: Kappa,
    sorted_blocks: &[Vec<Lit>],
    total_sorted: &[Lit],
) -> Result<()> {
    check_unit(kappa)?;
    for (i0, &t) in total_sorted.iter().enumerate() {
        let idx = floor_mul(i0 as u64 + 1, kappa) as usize;
        let rhs = sorted_blocks
            .iter()
            .map(|blk| blk.get(idx).copied().unwrap_or(Lit::FALSE));
        b.add_clause(std::iter::once(!t).chain(rhs));
    }
    Ok(())
}

/// Tracks per-component clause/variable growth.
struct Tally {
    components: Vec<ComponentCount>,
    clauses: usize,
    vars: usize,
}

impl Tally {
    fn new(b: &CnfBuilder) -> Self {
        Tally {
            components: vec![ComponentCount {
                name: "true_unit".into(),
                clauses: b.num_clauses(),
                vars: b.num_vars() as usize,
            }],
            clauses: b.num_clauses(),
            vars: b.num_vars() as usize,
        }
    }

    fn mark(&mut self, b: &CnfBuilder, name: &str) {
        let (c, v) = (b.num_clauses(), b.num_vars() as usize);
        self.components.push(ComponentCount {
            name: name.into(),
            clauses: c - self.clauses,
            vars: v - self.vars,
        });
        self.clauses = c;
        self.vars = v;
    }
}

fn encode_copy(
    b: &mut CnfBuilder,
    q: &PropertyQuery<'_>,
    tally: &mut Tally,
    suffix: &str,
) -> CopyVars {
    let n = q.netlist;
    let inputs = b.fresh_vec(n.input_width);
    tally.mark(b, &format!("inputs{suffix}"));
    emit_well_formed(b, q.schema, &inputs);
    tally.mark(b, &format!("well_formed{suffix}"));
    let gates = b.encode_gates(n, &inputs);
    let outputs = gates[n.first_output_gate()..].to_vec();
    tally.mark(b, &format!("network{suffix}"));
    let sorted_blocks: Vec<Vec<Lit>> = outputs
        .chunks(n.block_size)
        .map(|blk| b.sort_block(blk))
        .collect();
    tally.mark(b, &format!("sort_blocks{suffix}"));
    CopyVars {
        inputs,
        gates,
        outputs,
        sorted_blocks,
        winners: Vec::new(),
    }
}

/// Builds the complete CNF for a query.
///
/// Fair/robust: both copies with well-formedness, networks and sorted
/// blocks, `Φ` (proximity, equal non-sensitive categories, and in fair
/// mode differing sensitive categories), winner flags on both copies,
/// `diff_class`, and `conf(f(x)) > κ`. For `κ ≥ 1/C` a guard clause also
/// requires some output bit of `x` to be set, so the all-zero output
/// (whose confidence is taken as `1/C`) never counts as confident.
///
/// Attainable: a single copy with well-formedness, network, confidence
/// and the nonzero-output clause.
pub fn build_query(q: &PropertyQuery<'_>) -> Result<(CnfFormula, VarMap)> {
    let n = q.netlist;
    let report = n.validate(Some(q.schema));
    report.into_result()?;
    check_unit(q.kappa)?;
    if q.kind == QueryKind::Fair && q.schema.num_sensitive() == 0 {
        return Err(Error::NoSensitiveFeature);
    }

    let mut b = CnfBuilder::new();
    let mut tally = Tally::new(&b);
    let mut x = encode_copy(&mut b, q, &mut tally, "");
    let total_sorted = b.sort_block(&x.outputs);
    tally.mark(&b, "sort_total");
    emit_confidence_gt(&mut b, q.kappa, &x.sorted_blocks, &total_sorted)?;
    tally.mark(&b, "confidence");

    let x_prime = match q.kind {
        QueryKind::Attainable => {
            b.add_clause(x.outputs.iter().copied());
            tally.mark(&b, "nonzero_output");
            None
        }
        QueryKind::Fair | QueryKind::Robust => {
            if q.kappa >= Kappa::new(1, n.num_classes as i64) {
                b.add_clause(x.outputs.iter().copied());
                tally.mark(&b, "nonzero_output");
            }
            let mut xp = encode_copy(&mut b, q, &mut tally, "'");

            for (f, r) in q.schema.features.iter().zip(q.schema.ranges()) {
                let (t, tp) = (&x.inputs[r.clone()], &xp.inputs[r]);
                match f.kind {
                    FeatureKind::Numerical { .. } => emit_prox(&mut b, q.eps, t, tp),
                    FeatureKind::Categorical {
                        sensitive: true, ..
                    } if q.kind == QueryKind::Fair => emit_diff_cat(&mut b, t, tp),
                    FeatureKind::Categorical { .. } => emit_same_cat(&mut b, t, tp),
                }
            }
            tally.mark(&b, "phi");

            x.winners = emit_winning(&mut b, &x.sorted_blocks);
            xp.winners = emit_winning(&mut b, &xp.sorted_blocks);
            tally.mark(&b, "winning");
            emit_diff_class(&mut b, &x.winners, &xp.winners);
            tally.mark(&b, "diff_class");
            Some(xp)
        }
    };

    let varmap = VarMap {
        x,
        x_prime,
        total_sorted,
        components: tally.components,
    };
    Ok((b.finish(), varmap))
}
