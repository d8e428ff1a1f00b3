//! Logic gate network data model: gates, wiring, the text file format,
//! structural validation and seeded random generation.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::schema::FeatureSchema;

/// Two-input Boolean operation stored as a 4-bit truth table.
///
/// The output for inputs `(a, b)` is bit `2a + b` of the code, so AND is 8,
/// OR is 14, XOR is 6 and NAND is 7.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateOp(u8);

impl GateOp {
    pub const FALSE: GateOp = GateOp(0);
    pub const NOR: GateOp = GateOp(1);
    pub const NOT_A_AND_B: GateOp = GateOp(2);
    pub const NOT_A: GateOp = GateOp(3);
    pub const A_AND_NOT_B: GateOp = GateOp(4);
    pub const NOT_B: GateOp = GateOp(5);
    pub const XOR: GateOp = GateOp(6);
    pub const NAND: GateOp = GateOp(7);
    pub const AND: GateOp = GateOp(8);
    pub const XNOR: GateOp = GateOp(9);
    pub const B: GateOp = GateOp(10);
    pub const A_IMPLIES_B: GateOp = GateOp(11);
    pub const A: GateOp = GateOp(12);
    pub const B_IMPLIES_A: GateOp = GateOp(13);
    pub const OR: GateOp = GateOp(14);
    pub const TRUE: GateOp = GateOp(15);

    pub fn new(code: u8) -> Result<Self> {
        if code < 16 {
            Ok(GateOp(code))
        } else {
            Err(Error::OpCodeRange(code as u64))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// All sixteen operations in code order.
    pub fn all() -> impl Iterator<Item = GateOp> {
        (0..16).map(GateOp)
    }

    pub fn eval(self, a: bool, b: bool) -> bool {
        gate_truth(self, a, b)
    }
}

/// Output of `op` on the ordered inputs `(a, b)`.
pub fn gate_truth(op: GateOp, a: bool, b: bool) -> bool {
    let idx = 2 * (a as u8) + (b as u8);
    (op.0 >> idx) & 1 == 1
}

/// Source of a gate input: a primary input bit or a gate in an earlier layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeRef {
    Input(usize),
    Gate(usize),
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Input(k) => write!(f, "i{k}"),
            NodeRef::Gate(k) => write!(f, "g{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Gate {
    pub op: GateOp,
    pub in_a: NodeRef,
    pub in_b: NodeRef,
}

impl Gate {
    pub fn new(op: GateOp, in_a: NodeRef, in_b: NodeRef) -> Self {
        Gate { op, in_a, in_b }
    }
}

/// A layered network of two-input gates. Gates are numbered globally in
/// layer order; the final layer holds `num_classes * block_size` outputs,
/// grouped class by class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Netlist {
    pub input_width: usize,
    pub num_classes: usize,
    pub block_size: usize,
    pub layers: Vec<Vec<Gate>>,
}

impl Netlist {
    pub fn num_gates(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn num_outputs(&self) -> usize {
        self.num_classes * self.block_size
    }

    /// Gates in global id order.
    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flatten()
    }

    /// Global id of the first gate in the final layer.
    pub fn first_output_gate(&self) -> usize {
        self.num_gates() - self.layers.last().map_or(0, Vec::len)
    }

    /// Global gate id of output bit `k` of class `class` (both 0-based).
    pub fn output_gate(&self, class: usize, k: usize) -> usize {
        self.first_output_gate() + class * self.block_size + k
    }

    pub fn validate(&self, schema: Option<&FeatureSchema>) -> ValidationReport {
        validate(self, schema)
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_netlist(text)
    }

    pub fn to_text(&self) -> String {
        serialize_netlist(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Invalid(self.violations))
        }
    }
}

/// Checks every structural invariant of the netlist (and of the schema,
/// when given) and collects all violations instead of stopping at the first.
pub fn validate(netlist: &Netlist, schema: Option<&FeatureSchema>) -> ValidationReport {
    let mut report = ValidationReport::default();
    if netlist.input_width < 1 {
        report.push("header", "input_width must be at least 1");
    }
    if netlist.num_classes < 2 {
        report.push("header", "num_classes must be at least 2");
    }
    if netlist.block_size < 1 {
        report.push("header", "block_size must be at least 1");
    }
    if netlist.layers.is_empty() {
        report.push("layers", "netlist has no layers");
    }

    let mut layer_start = 0usize;
    for (li, layer) in netlist.layers.iter().enumerate() {
        if layer.is_empty() {
            report.push(format!("layer {li}"), "empty layer");
        }
        for (pos, gate) in layer.iter().enumerate() {
            let gid = layer_start + pos;
            if gate.op.code() > 15 {
                report.push(format!("gate g{gid}"), "op code out of range");
            }
            for (slot, r) in [("a", gate.in_a), ("b", gate.in_b)] {
                match r {
                    NodeRef::Input(k) if k >= netlist.input_width => report.push(
                        format!("gate g{gid} input {slot}"),
                        format!(
                            "input bit i{k} out of range (input_width {})",
                            netlist.input_width
                        ),
                    ),
                    NodeRef::Gate(k) if k >= layer_start => report.push(
                        format!("gate g{gid} input {slot}"),
                        format!(
                            "forward/self reference to g{k} (layer {li} starts at g{layer_start})"
                        ),
                    ),
                    _ => {}
                }
            }
        }
        layer_start += layer.len();
    }

    if let Some(last) = netlist.layers.last() {
        let expected = netlist.num_classes * netlist.block_size;
        if last.len() != expected {
            report.push(
                format!("layer {}", netlist.layers.len() - 1),
                format!(
                    "output count ≠ C·L: final layer has {} gates, expected {}·{} = {expected}",
                    last.len(),
                    netlist.num_classes,
                    netlist.block_size
                ),
            );
        }
    }

    if let Some(schema) = schema {
        for v in schema.violations() {
            report.violations.push(v);
        }
        if schema.width() != netlist.input_width {
            report.push(
                "schema",
                format!(
                    "schema width {} does not match input_width {}",
                    schema.width(),
                    netlist.input_width
                ),
            );
        }
    }
    report
}

const MAGIC: &str = "lgn-netlist v1";

/// Canonical text form. `parse_netlist(&serialize_netlist(n)) == n`.
pub fn serialize_netlist(netlist: &Netlist) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "input_width {}", netlist.input_width);
    let _ = writeln!(out, "num_classes {}", netlist.num_classes);
    let _ = writeln!(out, "block_size {}", netlist.block_size);
    for (li, layer) in netlist.layers.iter().enumerate() {
        let _ = writeln!(out, "layer {li} gates {}", layer.len());
        for g in layer {
            let _ = writeln!(out, "({}, {}, {})", g.op.code(), g.in_a, g.in_b);
        }
    }
    out.push_str("end\n");
    out
}

struct LineCursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> LineCursor<'a> {
    /// Next non-blank, non-comment line with its byte offset.
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        while self.pos < self.text.len() {
            let start = self.pos;
            let rest = &self.text[start..];
            let (line, adv) = match rest.find('\n') {
                Some(i) => (&rest[..i], i + 1),
                None => (rest, rest.len()),
            };
            self.pos += adv;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some((start, trimmed));
        }
        None
    }

    fn expect_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_line().ok_or_else(|| Error::Syntax {
            offset: self.text.len(),
            message: format!("unexpected end of input, expected {what}"),
        })
    }
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        offset,
        message: message.into(),
    }
}

fn parse_header(cur: &mut LineCursor<'_>, key: &str) -> Result<usize> {
    let (off, line) = cur.expect_line(key)?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(syntax(off, format!("expected `{key} <n>`, found `{line}`")));
    }
    let value = parts
        .next()
        .ok_or_else(|| syntax(off, format!("missing value for {key}")))?;
    if parts.next().is_some() {
        return Err(syntax(off, format!("trailing tokens after {key}")));
    }
    value
        .parse()
        .map_err(|_| syntax(off, format!("invalid integer `{value}` for {key}")))
}

fn parse_ref(tok: &str, off: usize) -> Result<NodeRef> {
    let (kind, num) = tok.split_at(tok.char_indices().nth(1).map_or(tok.len(), |(i, _)| i));
    let idx: usize = num
        .parse()
        .map_err(|_| syntax(off, format!("invalid node reference `{tok}`")))?;
    match kind {
        "i" => Ok(NodeRef::Input(idx)),
        "g" => Ok(NodeRef::Gate(idx)),
        _ => Err(syntax(off, format!("invalid node reference `{tok}`"))),
    }
}

fn parse_gate(line: &str, off: usize) -> Result<Gate> {
    let inner = line
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| {
            syntax(
                off,
                format!("expected `(<op>, <ref>, <ref>)`, found `{line}`"),
            )
        })?;
    let fields: Vec<&str> = inner.split(',').map(str::trim).collect();
    if fields.len() != 3 {
        return Err(syntax(
            off,
            format!("gate needs 3 fields, found {}", fields.len()),
        ));
    }
    let code: u64 = fields[0]
        .parse()
        .map_err(|_| syntax(off, format!("invalid op code `{}`", fields[0])))?;
    if code > 15 {
        return Err(Error::OpCodeRange(code));
    }
    Ok(Gate {
        op: GateOp(code as u8),
        in_a: parse_ref(fields[1], off)?,
        in_b: parse_ref(fields[2], off)?,
    })
}

/// Parses the netlist text format and validates the result.
pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let mut cur = LineCursor { text, pos: 0 };
    let (off, magic) = cur.expect_line("header")?;
    if magic != MAGIC {
        return Err(syntax(off, format!("expected `{MAGIC}`, found `{magic}`")));
    }
    let input_width = parse_header(&mut cur, "input_width")?;
    let num_classes = parse_header(&mut cur, "num_classes")?;
    let block_size = parse_header(&mut cur, "block_size")?;

    let mut layers = Vec::new();
    loop {
        let (off, line) = cur.expect_line("`layer` or `end`")?;
        if line == "end" {
            break;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let count = match toks.as_slice() {
            ["layer", idx, "gates", n] => {
                if idx.parse::<usize>().ok() != Some(layers.len()) {
                    return Err(syntax(
                        off,
                        format!("expected layer {}, found `{idx}`", layers.len()),
                    ));
                }
                n.parse::<usize>()
                    .map_err(|_| syntax(off, format!("invalid gate count `{n}`")))?
            }
            _ => {
                return Err(syntax(
                    off,
                    format!("expected `layer <i> gates <n>`, found `{line}`"),
                ))
            }
        };
        let mut layer = Vec::with_capacity(count);
        for _ in 0..count {
            let (goff, gline) = cur.expect_line("gate")?;
            layer.push(parse_gate(gline, goff)?);
        }
        layers.push(layer);
    }
    if let Some((off, line)) = cur.next_line() {
        return Err(syntax(off, format!("content after `end`: `{line}`")));
    }

    let netlist = Netlist {
        input_width,
        num_classes,
        block_size,
        layers,
    };
    validate(&netlist, None).into_result()?;
    Ok(netlist)
}

/// Seeded random netlist: uniform gate ops, each input wired uniformly to a
/// node of the immediately preceding layer (primary inputs for layer 0).
pub fn random_netlist(
    input_width: usize,
    layer_sizes: &[usize],
    num_classes: usize,
    block_size: usize,
    seed: u64,
) -> Result<Netlist> {
    if input_width < 1 || num_classes < 2 || block_size < 1 {
        return Err(Error::Dimensions(format!(
            "need d ≥ 1, C ≥ 2, L ≥ 1 (got d={input_width}, C={num_classes}, L={block_size})"
        )));
    }
    match layer_sizes.last() {
        Some(&last) if last == num_classes * block_size => {}
        _ => {
            return Err(Error::Dimensions(format!(
                "last layer size must equal C·L = {}",
                num_classes * block_size
            )))
        }
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Dimensions("layer sizes must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(layer_sizes.len());
    let mut prev_start = 0usize;
    let mut prev_size = input_width;
    let mut next_id = 0usize;
    for (li, &size) in layer_sizes.iter().enumerate() {
        let pick = |rng: &mut ChaCha8Rng| -> NodeRef {
            let k = rng.random_range(0..prev_size);
            if li == 0 {
                NodeRef::Input(k)
            } else {
                NodeRef::Gate(prev_start + k)
            }
        };
        let layer: Vec<Gate> = (0..size)
            .map(|_| {
                let op = GateOp(rng.random_range(0..16u8));
                let in_a = pick(&mut rng);
                let in_b = pick(&mut rng);
                Gate { op, in_a, in_b }
            })
            .collect();
        layers.push(layer);
        prev_start = next_id;
        prev_size = size;
        next_id += size;
    }
    Ok(Netlist {
        input_width,
        num_classes,
        block_size,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn minimal() -> Netlist {
        Netlist {
            input_width: 2,
            num_classes: 2,
            block_size: 1,
            layers: vec![vec![
                Gate::new(GateOp::AND, NodeRef::Input(0), NodeRef::Input(1)),
                Gate::new(GateOp::XOR, NodeRef::Input(0), NodeRef::Input(1)),
            ]],
        }
    }

    /// Named Boolean functions, written out independently of the bit indexing.
    fn named(code: u8, a: bool, b: bool) -> bool {
        match code {
            0 => false,
            1 => !(a || b),
            2 => !a && b,
            3 => !a,
            4 => a && !b,
            5 => !b,
            6 => a ^ b,
            7 => !(a && b),
            8 => a && b,
            9 => a == b,
            10 => b,
            11 => !a || b,
            12 => a,
            13 => a || !b,
            14 => a || b,
            15 => true,
            _ => unreachable!(),
        }
    }

    #[test]
    fn truth_table_matches_named_functions() {
        for op in GateOp::all() {
            for a in [false, true] {
                for b in [false, true] {
                    assert_eq!(
                        gate_truth(op, a, b),
                        named(op.code(), a, b),
                        "op {}",
                        op.code()
                    );
                }
            }
        }
    }

    #[test]
    fn truth_examples() {
        assert!(gate_truth(GateOp::AND, true, true));
        assert!(!gate_truth(GateOp::AND, true, false));
        assert!(gate_truth(GateOp::XOR, true, false));
        assert!(!gate_truth(GateOp::XOR, true, true));
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            assert!(!gate_truth(GateOp::FALSE, a, b));
        }
    }

    #[test]
    fn op_code_range() {
        assert!(GateOp::new(15).is_ok());
        assert!(matches!(GateOp::new(16), Err(Error::OpCodeRange(16))));
    }

    #[test]
    fn minimal_netlist_is_valid() {
        assert!(validate(&minimal(), None).is_ok());
    }

    #[test]
    fn output_count_mismatch() {
        let mut n = minimal();
        n.block_size = 3;
        let g = n.layers[0][0];
        n.layers[0].extend([g; 3]);
        assert_eq!(n.layers[0].len(), 5);
        let report = validate(&n, None);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].message.contains("output count ≠ C·L"));
    }

    #[test]
    fn same_layer_reference_rejected() {
        let mut n = minimal();
        n.layers[0][1].in_b = NodeRef::Gate(0);
        let report = validate(&n, None);
        assert!(report.violations[0]
            .message
            .contains("forward/self reference"));
        assert_eq!(report.violations[0].location, "gate g1 input b");
    }

    #[test]
    fn skip_connections_allowed() {
        let n = Netlist {
            input_width: 2,
            num_classes: 2,
            block_size: 1,
            layers: vec![
                vec![Gate::new(GateOp::OR, NodeRef::Input(0), NodeRef::Input(1))],
                vec![Gate::new(GateOp::NOT_A, NodeRef::Gate(0), NodeRef::Gate(0))],
                vec![
                    Gate::new(GateOp::A, NodeRef::Gate(0), NodeRef::Input(1)),
                    Gate::new(GateOp::A, NodeRef::Gate(1), NodeRef::Input(1)),
                ],
            ],
        };
        assert!(validate(&n, None).is_ok());
    }

    #[test]
    fn round_trip_minimal() {
        let text = serialize_netlist(&minimal());
        let parsed = parse_netlist(&text).unwrap();
        assert_eq!(parsed, minimal());
        assert_eq!(serialize_netlist(&parsed), text);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let text = serialize_netlist(&minimal());
        let cut = &text[..text.len() - 12];
        match parse_netlist(cut) {
            Err(Error::Syntax { offset, .. }) => assert!(offset <= cut.len()),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn op_code_16_rejected() {
        let text = serialize_netlist(&minimal()).replace("(8, i0, i1)", "(16, i0, i1)");
        assert!(matches!(parse_netlist(&text), Err(Error::OpCodeRange(16))));
    }

    #[test]
    fn parse_rejects_invalid_structure() {
        let text = serialize_netlist(&minimal()).replace("(6, i0, i1)", "(6, i0, g1)");
        assert!(matches!(parse_netlist(&text), Err(Error::Invalid(_))));
    }

    #[test]
    fn random_is_deterministic() {
        let a = random_netlist(6, &[8, 6], 2, 3, 7).unwrap();
        let b = random_netlist(6, &[8, 6], 2, 3, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_seeds_differ() {
        let distinct: HashSet<String> = (0..100)
            .map(|s| serialize_netlist(&random_netlist(6, &[8, 6], 2, 3, s).unwrap()))
            .collect();
        assert!(distinct.len() >= 99);
    }

    #[test]
    fn random_wires_adjacent_layers_only() {
        let n = random_netlist(5, &[4, 7, 6], 2, 3, 11).unwrap();
        assert!(validate(&n, None).is_ok());
        let starts = [0usize, 4, 11];
        for (li, layer) in n.layers.iter().enumerate() {
            for g in layer {
                for r in [g.in_a, g.in_b] {
                    match r {
                        NodeRef::Input(k) => assert!(li == 0 && k < 5),
                        NodeRef::Gate(k) => {
                            assert!(li > 0 && k >= starts[li - 1] && k < starts[li])
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn random_small_layers_valid() {
        let n = random_netlist(3, &[4, 6], 2, 3, 1).unwrap();
        assert!(validate(&n, None).is_ok());
        assert!(random_netlist(3, &[4, 5], 2, 3, 1).is_err());
        assert!(random_netlist(0, &[4, 6], 2, 3, 1).is_err());
    }
}
