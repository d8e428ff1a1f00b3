//! CNF construction: literal and variable bookkeeping, full-equivalence
//! Tseitin encoding of gates with constant folding, Batcher odd-even merge
//! sorting networks, and DIMACS output.
//!
//! Variable 1 is the constant TRUE, pinned by a unit clause emitted at
//! construction. Every auxiliary variable is bi-implied by its definition,
//! so fixing the inputs of an encoded circuit determines all of its
//! internal variables.

use std::fmt::{self, Write};
use std::ops::Not;

use crate::netlist::{gate_truth, GateOp, Netlist, NodeRef};

/// Signed DIMACS literal; negative means negated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(i32);

impl Lit {
    pub const TRUE: Lit = Lit(1);
    pub const FALSE: Lit = Lit(-1);

    pub fn from_dimacs(v: i32) -> Lit {
        assert!(v != 0, "literal 0 is the clause terminator");
        Lit(v)
    }

    pub fn constant(value: bool) -> Lit {
        if value {
            Lit::TRUE
        } else {
            Lit::FALSE
        }
    }

    pub fn dimacs(self) -> i32 {
        self.0
    }

    pub fn var(self) -> u32 {
        self.0.unsigned_abs()
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_const(self) -> bool {
        self.var() == 1
    }

    /// Constant value, if this is ±TRUE.
    pub fn const_value(self) -> Option<bool> {
        self.is_const().then_some(self.is_positive())
    }

    /// Value under a model indexed by variable id (index 0 unused).
    pub fn eval(self, model: &[bool]) -> bool {
        model[self.var() as usize] == self.is_positive()
    }
}

impl Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl CnfFormula {
    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Whether every clause is satisfied by `model` (indexed by var id).
    pub fn satisfied_by(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| l.eval(model)))
    }

    pub fn to_dimacs(&self) -> String {
        to_dimacs(self)
    }
}

/// `p cnf <vars> <clauses>` followed by one zero-terminated clause per line.
pub fn to_dimacs(formula: &CnfFormula) -> String {
    let mut out = String::with_capacity(16 + formula.clauses.len() * 12);
    let _ = writeln!(out, "p cnf {} {}", formula.num_vars, formula.clauses.len());
    for clause in &formula.clauses {
        for lit in clause {
            let _ = write!(out, "{lit} ");
        }
        out.push_str("0\n");
    }
    out
}

/// Single-writer formula builder.
#[derive(Clone, Debug)]
pub struct CnfBuilder {
    formula: CnfFormula,
}

impl Default for CnfBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl CnfBuilder {
    pub fn new() -> Self {
        CnfBuilder {
            formula: CnfFormula {
                num_vars: 1,
                clauses: vec![vec![Lit::TRUE]],
            },
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.formula.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.formula.clauses.len()
    }

    pub fn formula(&self) -> &CnfFormula {
        &self.formula
    }

    pub fn finish(self) -> CnfFormula {
        self.formula
    }

    pub fn fresh(&mut self) -> Lit {
        self.formula.num_vars += 1;
        Lit(self.formula.num_vars as i32)
    }

    pub fn fresh_vec(&mut self, n: usize) -> Vec<Lit> {
        (0..n).map(|_| self.fresh()).collect()
    }

    /// Adds a clause after simplification: satisfied clauses (containing
    /// TRUE or a complementary pair) are dropped, FALSE literals and
    /// duplicates removed. A clause that simplifies to empty is kept as the
    /// unit `[FALSE]`, making the formula unsatisfiable.
    pub fn add_clause(&mut self, lits: impl IntoIterator<Item = Lit>) {
        let mut clause: Vec<Lit> = Vec::new();
        for l in lits {
            match l.const_value() {
                Some(true) => return,
                Some(false) => continue,
                None => {}
            }
            if clause.contains(&!l) {
                return;
            }
            if !clause.contains(&l) {
                clause.push(l);
            }
        }
        if clause.is_empty() {
            clause.push(Lit::FALSE);
        }
        self.formula.clauses.push(clause);
    }

    /// `a ⇒ b`.
    pub fn implies(&mut self, a: Lit, b: Lit) {
        self.add_clause([!a, b]);
    }

    pub fn equiv(&mut self, a: Lit, b: Lit) {
        self.implies(a, b);
        self.implies(b, a);
    }

    /// Literal equivalent to `a ∧ b`.
    pub fn and(&mut self, a: Lit, b: Lit) -> Lit {
        self.encode_gate(GateOp::AND, a, b)
    }

    /// Literal equivalent to `a ∨ b`.
    pub fn or(&mut self, a: Lit, b: Lit) -> Lit {
        self.encode_gate(GateOp::OR, a, b)
    }

    /// Literal `o` with `o ↔ op(a, b)`. Constant and single-input
    /// functions, including those arising from constant or repeated
    /// inputs, fold to an existing literal without a new variable.
    pub fn encode_gate(&mut self, op: GateOp, a: Lit, b: Lit) -> Lit {
        // Reduce to a unary function of one literal when possible.
        let unary = |x: Lit, f0: bool, f1: bool| match (f0, f1) {
            (false, false) => Lit::FALSE,
            (true, true) => Lit::TRUE,
            (false, true) => x,
            (true, false) => !x,
        };
        if let Some(av) = a.const_value() {
            return unary(b, gate_truth(op, av, false), gate_truth(op, av, true));
        }
        if let Some(bv) = b.const_value() {
            return unary(a, gate_truth(op, false, bv), gate_truth(op, true, bv));
        }
        if a == b {
            return unary(a, gate_truth(op, false, false), gate_truth(op, true, true));
        }
        if a == !b {
            return unary(a, gate_truth(op, false, true), gate_truth(op, true, false));
        }

        let tt = |x: bool, y: bool| gate_truth(op, x, y);
        let minterms: Vec<(bool, bool)> =
            [(false, false), (false, true), (true, false), (true, true)]
                .into_iter()
                .filter(|&(x, y)| tt(x, y))
                .collect();
        match minterms.len() {
            0 => Lit::FALSE,
            4 => Lit::TRUE,
            1 | 3 => {
                // One true (AND-like) or one false (NAND-like) minterm.
                let (negate, (x, y)) = if minterms.len() == 1 {
                    (false, minterms[0])
                } else {
                    let off = [(false, false), (false, true), (true, false), (true, true)]
                        .into_iter()
                        .find(|&(x, y)| !tt(x, y))
                        .unwrap();
                    (true, off)
                };
                let la = if x { a } else { !a };
                let lb = if y { b } else { !b };
                let o = self.fresh();
                self.add_clause([!o, la]);
                self.add_clause([!o, lb]);
                self.add_clause([o, !la, !lb]);
                if negate {
                    !o
                } else {
                    o
                }
            }
            _ => {
                // Two true minterms: a projection or XOR/XNOR.
                if tt(false, false) == tt(false, true) && tt(true, false) == tt(true, true) {
                    return unary(a, tt(false, false), tt(true, false));
                }
                if tt(false, false) == tt(true, false) && tt(false, true) == tt(true, true) {
                    return unary(b, tt(false, false), tt(false, true));
                }
                let o = self.fresh();
                self.add_clause([!o, a, b]);
                self.add_clause([!o, !a, !b]);
                self.add_clause([o, !a, b]);
                self.add_clause([o, a, !b]);
                if tt(false, false) {
                    !o
                } else {
                    o
                }
            }
        }
    }

    /// Encodes every gate in layer order; returns the output-block
    /// literals in block order.
    pub fn encode_network(&mut self, netlist: &Netlist, in_lits: &[Lit]) -> Vec<Lit> {
        let mut gate_lits = self.encode_gates(netlist, in_lits);
        gate_lits.split_off(netlist.first_output_gate())
    }

    /// Literal of every gate, in global gate id order.
    pub fn encode_gates(&mut self, netlist: &Netlist, in_lits: &[Lit]) -> Vec<Lit> {
        assert_eq!(in_lits.len(), netlist.input_width, "input literal count");
        let mut gate_lits: Vec<Lit> = Vec::with_capacity(netlist.num_gates());
        for gate in netlist.gates() {
            let resolve = |r: NodeRef| match r {
                NodeRef::Input(k) => in_lits[k],
                NodeRef::Gate(k) => gate_lits[k],
            };
            let (a, b) = (resolve(gate.in_a), resolve(gate.in_b));
            let o = self.encode_gate(gate.op, a, b);
            gate_lits.push(o);
        }
        gate_lits
    }

    /// Comparator: `(a ∨ b, a ∧ b)`.
    fn comparator(&mut self, a: Lit, b: Lit) -> (Lit, Lit) {
        (self.or(a, b), self.and(a, b))
    }

    /// Unary sort in descending order: output `k` is true iff at least
    /// `k + 1` inputs are true. Built from a Batcher odd-even merge
    /// network over the input padded with FALSE to a power of two.
    pub fn sort_block(&mut self, lits: &[Lit]) -> Vec<Lit> {
        let n = lits.len();
        if n <= 1 {
            return lits.to_vec();
        }
        let size = n.next_power_of_two();
        let mut v: Vec<Lit> = lits.to_vec();
        v.resize(size, Lit::FALSE);
        for (i, j) in odd_even_merge_pairs(size) {
            let (hi, lo) = self.comparator(v[i], v[j]);
            v[i] = hi;
            v[j] = lo;
        }
        v.truncate(n);
        v
    }
}

/// Comparator positions `(i, j)`, `i < j`, of Batcher's odd-even merge sort
/// on `n` (a power of two) wires, in application order.
pub fn odd_even_merge_pairs(n: usize) -> Vec<(usize, usize)> {
    debug_assert!(n.is_power_of_two());
    let mut pairs = Vec::new();
    let mut p = 1;
    while p < n {
        let mut k = p;
        while k >= 1 {
            let mut j = k % p;
            while j + k < n {
                for i in 0..k.min(n - j - k) {
                    if (i + j) / (2 * p) == (i + j + k) / (2 * p) {
                        pairs.push((i + j, i + j + k));
                    }
                }
                j += 2 * k;
            }
            k /= 2;
        }
        p *= 2;
    }
    pairs
}
