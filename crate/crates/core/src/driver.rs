//! Fixed-threshold verification, binary search over κ, attainability and
//! threshold sweeps. Every probe is a fresh solver run.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{predict, Mode, QueryStats, Status, Verdict, WitnessInput};
use crate::kappa::{check_unit, Kappa};
use crate::netlist::Netlist;
use crate::property::{build_query, PropertyQuery, QueryKind};
use crate::schema::FeatureSchema;
use crate::solver::{decode_counterexample, solve, SolveStatus, SolverConfig};

/// Default convergence width of the κ search.
pub fn default_tolerance() -> Kappa {
    Kappa::new(1, 20)
}

/// Builds, solves and (on SAT) decodes one fair/robust query.
pub fn verify_at(
    netlist: &Netlist,
    schema: &FeatureSchema,
    mode: Mode,
    eps: u64,
    kappa: Kappa,
    solver: &SolverConfig,
) -> Result<Verdict> {
    let query = PropertyQuery {
        kind: mode.into(),
        eps,
        kappa,
        netlist,
        schema,
    };
    let (formula, varmap) = build_query(&query)?;
    let outcome = solve(&formula, solver)?;
    let stats = QueryStats {
        time_secs: outcome.wall_time.as_secs_f64(),
        num_vars: formula.num_vars as usize,
        num_clauses: formula.num_clauses(),
    };
    Ok(match outcome.status {
        SolveStatus::Unsat => Verdict::holds(stats),
        SolveStatus::Unknown => Verdict::unknown(stats),
        SolveStatus::Sat(model) => {
            let w = decode_counterexample(&model, &varmap, schema, netlist, mode, eps, kappa)?;
            Verdict::counterexample(w, stats)
        }
    })
}

/// One probe of a search or sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRecord {
    #[serde(serialize_with = "ser_kappa")]
    pub kappa: Kappa,
    pub status: Status,
    pub time_secs: f64,
    pub num_vars: usize,
    pub num_clauses: usize,
}

impl ProbeRecord {
    fn new(kappa: Kappa, v: &Verdict) -> Self {
        ProbeRecord {
            kappa,
            status: v.status,
            time_secs: v.stats.time_secs,
            num_vars: v.stats.num_vars,
            num_clauses: v.stats.num_clauses,
        }
    }
}

pub(crate) fn ser_kappa<S: serde::Serializer>(
    k: &Kappa,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&k.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KappaSearchResult {
    /// Smallest probed threshold at which the property held.
    #[serde(serialize_with = "ser_kappa")]
    pub kappa_star: Kappa,
    /// Whether some input actually reaches a confidence above `kappa_star`.
    /// Filled in by [`search_with_attainability`]; `false` otherwise.
    pub attainable: bool,
    /// Set when the property fails even at κ = 1.
    pub unsafe_everywhere: bool,
    pub converged: bool,
    #[serde(serialize_with = "ser_kappa")]
    pub lo: Kappa,
    #[serde(serialize_with = "ser_kappa")]
    pub hi: Kappa,
    pub queries: Vec<ProbeRecord>,
    pub total_time: f64,
}

impl KappaSearchResult {
    /// No Holds probe is followed by a Counterexample at a larger κ.
    pub fn is_monotone(&self) -> bool {
        monotone(&self.queries)
    }
}

fn monotone(rows: &[ProbeRecord]) -> bool {
    rows.iter().all(|a| {
        a.status != Status::Holds
            || rows
                .iter()
                .all(|b| !(b.kappa > a.kappa && b.status == Status::Counterexample))
    })
}

/// Bisects κ over `[1/C, 1]` until the bracket is no wider than
/// `tolerance`. An `Unknown` probe stops the search and returns the
/// partial log with `converged = false`.
pub fn search_min_kappa(
    netlist: &Netlist,
    schema: &FeatureSchema,
    mode: Mode,
    eps: u64,
    tolerance: Kappa,
    solver: &SolverConfig,
) -> Result<KappaSearchResult> {
    if tolerance <= Kappa::from_integer(0) {
        return Err(Error::Value(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let mut lo = Kappa::new(1, netlist.num_classes.max(1) as i64);
    let mut hi = Kappa::from_integer(1);
    let mut queries = Vec::new();
    let probe = |k: Kappa, queries: &mut Vec<ProbeRecord>| -> Result<Status> {
        let v = verify_at(netlist, schema, mode, eps, k, solver)?;
        queries.push(ProbeRecord::new(k, &v));
        Ok(v.status)
    };
    let finish = |kappa_star, unsafe_everywhere, converged, lo, hi, queries: Vec<ProbeRecord>| {
        let total_time = queries.iter().map(|q| q.time_secs).sum();
        KappaSearchResult {
            kappa_star,
            attainable: false,
            unsafe_everywhere,
            converged,
            lo,
            hi,
            queries,
            total_time,
        }
    };

    match probe(hi, &mut queries)? {
        Status::Holds => {}
        Status::Counterexample => return Ok(finish(hi, true, true, lo, hi, queries)),
        Status::Unknown => return Ok(finish(hi, false, false, lo, hi, queries)),
    }
    match probe(lo, &mut queries)? {
        Status::Holds => return Ok(finish(lo, false, true, lo, lo, queries)),
        Status::Counterexample => {}
        Status::Unknown => return Ok(finish(hi, false, false, lo, hi, queries)),
    }
    while hi - lo > tolerance {
        let mid = (lo + hi) / 2;
        match probe(mid, &mut queries)? {
            Status::Holds => hi = mid,
            Status::Counterexample => lo = mid,
            Status::Unknown => return Ok(finish(hi, false, false, lo, hi, queries)),
        }
    }
    Ok(finish(hi, false, true, lo, hi, queries))
}

/// A decoded attainability witness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Attainability {
    pub attainable: bool,
    pub witness: Option<WitnessInput>,
    pub stats: QueryStats,
    /// True when the solver gave up.
    pub unknown: bool,
}

/// Is there a well-formed input with some output bit set whose confidence
/// exceeds `kappa`? A SAT witness is re-evaluated concretely.
pub fn check_attainable(
    netlist: &Netlist,
    schema: &FeatureSchema,
    kappa: Kappa,
    solver: &SolverConfig,
) -> Result<Attainability> {
    check_unit(kappa)?;
    let query = PropertyQuery {
        kind: QueryKind::Attainable,
        eps: 0,
        kappa,
        netlist,
        schema,
    };
    let (formula, varmap) = build_query(&query)?;
    let outcome = solve(&formula, solver)?;
    let stats = QueryStats {
        time_secs: outcome.wall_time.as_secs_f64(),
        num_vars: formula.num_vars as usize,
        num_clauses: formula.num_clauses(),
    };
    match outcome.status {
        SolveStatus::Unsat => Ok(Attainability {
            attainable: false,
            witness: None,
            stats,
            unknown: false,
        }),
        SolveStatus::Unknown => Ok(Attainability {
            attainable: false,
            witness: None,
            stats,
            unknown: true,
        }),
        SolveStatus::Sat(model) => {
            let bits: Vec<bool> = varmap.x.inputs.iter().map(|l| l.eval(&model)).collect();
            let p = predict(netlist, &bits)?;
            if p.confidence.is_degenerate() || !p.confidence.exceeds(kappa) {
                return Err(Error::Consistency(format!(
                    "attainability witness has confidence {} (threshold {kappa})",
                    p.confidence
                )));
            }
            let witness = WitnessInput::evaluate(netlist, schema, bits).map_err(|e| match e {
                Error::IllFormed(m) => {
                    Error::Consistency(format!("attainability witness is ill-formed: {m}"))
                }
                other => other,
            })?;
            Ok(Attainability {
                attainable: true,
                witness: Some(witness),
                stats,
                unknown: false,
            })
        }
    }
}

/// Runs the search and then asks whether `kappa_star` is actually reached
/// by some input.
pub fn search_with_attainability(
    netlist: &Netlist,
    schema: &FeatureSchema,
    mode: Mode,
    eps: u64,
    tolerance: Kappa,
    solver: &SolverConfig,
) -> Result<(KappaSearchResult, Option<Attainability>)> {
    let mut r = search_min_kappa(netlist, schema, mode, eps, tolerance, solver)?;
    if !r.converged {
        return Ok((r, None));
    }
    let a = check_attainable(netlist, schema, r.kappa_star, solver)?;
    r.attainable = a.attainable;
    Ok((r, Some(a)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(serialize_with = "ser_kappa")]
    pub kappa: Kappa,
    /// `None` when this entry failed; see `error`.
    pub status: Option<Status>,
    pub time_secs: f64,
    pub num_vars: usize,
    pub num_clauses: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub monotone: bool,
    pub total_time: f64,
}

/// `verify_at` for each κ in order. Per-entry errors are recorded in the
/// row and do not stop the sweep.
pub fn sweep(
    netlist: &Netlist,
    schema: &FeatureSchema,
    mode: Mode,
    eps: u64,
    kappas: &[Kappa],
    solver: &SolverConfig,
) -> Result<SweepReport> {
    if kappas.is_empty() {
        return Err(Error::Value("sweep needs at least one threshold".into()));
    }
    let rows: Vec<SweepRow> = kappas
        .iter()
        .map(
            |&k| match verify_at(netlist, schema, mode, eps, k, solver) {
                Ok(v) => SweepRow {
                    kappa: k,
                    status: Some(v.status),
                    time_secs: v.stats.time_secs,
                    num_vars: v.stats.num_vars,
                    num_clauses: v.stats.num_clauses,
                    error: None,
                },
                Err(e) => SweepRow {
                    kappa: k,
                    status: None,
                    time_secs: 0.0,
                    num_vars: 0,
                    num_clauses: 0,
                    error: Some(e.to_string()),
                },
            },
        )
        .collect();
    let probes: Vec<ProbeRecord> = rows
        .iter()
        .filter_map(|r| {
            r.status.map(|status| ProbeRecord {
                kappa: r.kappa,
                status,
                time_secs: r.time_secs,
                num_vars: r.num_vars,
                num_clauses: r.num_clauses,
            })
        })
        .collect();
    Ok(SweepReport {
        monotone: monotone(&probes),
        total_time: rows.iter().map(|r| r.time_secs).sum(),
        rows,
    })
}
