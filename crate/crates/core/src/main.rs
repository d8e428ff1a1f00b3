use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use lgnv::data::{accuracy, Dataset, LabelSpec};
use lgnv::driver::{check_attainable, search_with_attainability, sweep, verify_at};
use lgnv::eval::{predict, Status, WitnessInput};
use lgnv::kappa::{parse_kappa, Kappa};
use lgnv::netlist::random_netlist;
use lgnv::property::{build_query, PropertyQuery, QueryKind};
use lgnv::schema::FeatureSchema;
use lgnv::solver::{SolverConfig, SOLVER_ENV};
use lgnv::{Error, Mode, Netlist};

const EXIT_HOLDS: u8 = 0;
const EXIT_COUNTEREXAMPLE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_ENVIRONMENT: u8 = 3;
const EXIT_UNKNOWN: u8 = 4;

/// Global robustness and fairness verification for logic gate networks.
///
/// Every command prints one JSON report on stdout; progress goes to stderr.
/// Exit codes: 0 holds/ok, 1 counterexample, 2 invalid input,
/// 3 usage or environment error, 4 unknown (solver timeout).
#[derive(Parser, Debug)]
#[command(name = "lgnv", version)]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a netlist (and optionally a schema) for structural errors.
    Validate {
        netlist: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Verify the property at one confidence threshold.
    Verify {
        #[command(flatten)]
        q: QueryArgs,
        /// Confidence threshold as P/Q or an exact decimal.
        #[arg(long, value_parser = kappa_arg)]
        kappa: Kappa,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Binary-search the smallest threshold at which the property holds,
    /// then check whether that threshold is attained by some input.
    SearchKappa {
        #[command(flatten)]
        q: QueryArgs,
        /// Convergence width of the search bracket.
        #[arg(long, default_value = "1/20", value_parser = kappa_arg)]
        tol: Kappa,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Verify at each threshold of a comma-separated list.
    Sweep {
        #[command(flatten)]
        q: QueryArgs,
        #[arg(long, value_delimiter = ',', required = true, value_parser = kappa_arg)]
        kappas: Vec<Kappa>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Write the query as DIMACS plus a variable-map sidecar, without solving.
    Encode {
        netlist: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 0)]
        eps: u64,
        #[arg(long, value_parser = kappa_arg)]
        kappa: Kappa,
        /// DIMACS output path.
        #[arg(short, long)]
        output: PathBuf,
        /// Sidecar path (default: OUTPUT with `.map` appended).
        #[arg(long)]
        varmap: Option<PathBuf>,
    },
    /// Is some confidence strictly above KAPPA reached by a real input?
    Attainable {
        netlist: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_parser = kappa_arg)]
        kappa: Kappa,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Generate a seeded random layered netlist.
    GenRandom {
        #[arg(long)]
        inputs: usize,
        /// Hidden layer sizes; the C·L output layer is appended.
        #[arg(long, value_delimiter = ',')]
        hidden: Vec<usize>,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        block: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the netlist here and print a report; otherwise print the netlist.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Predict one input given as raw bits or comma-separated feature values.
    Eval {
        netlist: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, conflicts_with = "values", required_unless_present = "values")]
        bits: Option<String>,
        /// Raw feature values in schema order (requires --schema).
        #[arg(long, requires = "schema")]
        values: Option<String>,
    },
    /// Classification accuracy of a netlist on a headered CSV file.
    Accuracy {
        netlist: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
        /// Subtracted from integer labels (1 for labels 1..=C).
        #[arg(long, default_value_t = 0, conflicts_with = "class_names")]
        label_base: usize,
        /// Label strings in class order, instead of integer labels.
        #[arg(long, value_delimiter = ',')]
        class_names: Option<Vec<String>>,
    },
}

#[derive(Args, Debug)]
struct QueryArgs {
    netlist: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Maximum thermometer distance per numerical feature.
    #[arg(long, default_value_t = 0)]
    eps: u64,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Solver executable (default: $LGNV_SOLVER, kissat on PATH, bundled lgnv-sat).
    #[arg(long, env = SOLVER_ENV)]
    solver: Option<PathBuf>,
    /// Per-query timeout, e.g. `30`, `2.5s`, `500ms`.
    #[arg(long, default_value = "3600s", value_parser = duration_arg)]
    timeout: Duration,
    /// Extra argument passed to the solver before the CNF path (repeatable).
    #[arg(long = "solver-arg", allow_hyphen_values = true)]
    solver_args: Vec<String>,
    /// Keep the DIMACS file of each query in the temp directory.
    #[arg(long)]
    keep_cnf: bool,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            executable: self.solver.clone(),
            timeout: self.timeout,
            extra_args: self.solver_args.clone(),
            work_dir: None,
            keep_files: self.keep_cnf,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Fair,
    Robust,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Fair => Mode::Fair,
            ModeArg::Robust => Mode::Robust,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Fair,
    Robust,
    Attainable,
}

fn kappa_arg(s: &str) -> Result<Kappa, String> {
    parse_kappa(s).map_err(|e| e.to_string())
}

fn duration_arg(s: &str) -> Result<Duration, String> {
    let s = s.trim();
    let (num, scale) = if let Some(n) = s.strip_suffix("ms") {
        (n, 1e-3)
    } else if let Some(n) = s.strip_suffix('s') {
        (n, 1.0)
    } else {
        (s, 1.0)
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("invalid duration `{s}`"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("invalid duration `{s}`"));
    }
    Ok(Duration::from_secs_f64(v * scale))
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Syntax { .. }
        | Error::OpCodeRange(_)
        | Error::Invalid(_)
        | Error::Dimensions(_)
        | Error::Width { .. }
        | Error::IllFormed(_)
        | Error::Value(_)
        | Error::NoSensitiveFeature
        | Error::EmptyDataset
        | Error::Csv(_) => EXIT_INVALID,
        Error::KappaRange(_)
        | Error::TooLarge(_)
        | Error::SolverNotFound(_)
        | Error::SolverOutput(_)
        | Error::Consistency(_)
        | Error::Usage(_)
        | Error::Io(_) => EXIT_ENVIRONMENT,
    }
}

/// Collects input file hashes while loading.
#[derive(Default)]
struct Inputs {
    hashes: serde_json::Map<String, Value>,
}

impl Inputs {
    fn read(&mut self, path: &Path) -> lgnv::Result<String> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        self.hashes.insert(
            path.display().to_string(),
            Value::String(hex::encode(Sha256::digest(text.as_bytes()))),
        );
        Ok(text)
    }

    fn netlist(&mut self, path: &Path) -> lgnv::Result<Netlist> {
        Netlist::parse(&self.read(path)?)
    }

    fn schema(&mut self, path: &Path) -> lgnv::Result<FeatureSchema> {
        FeatureSchema::parse(&self.read(path)?)
    }
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Holds => EXIT_HOLDS,
        Status::Counterexample => EXIT_COUNTEREXAMPLE,
        Status::Unknown => EXIT_UNKNOWN,
    }
}

struct Log {
    quiet: bool,
}

impl Log {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("lgnv: {}", msg.as_ref());
        }
    }
}

fn run(cmd: &Command, inputs: &mut Inputs, log: &Log) -> lgnv::Result<(Value, u8)> {
    match cmd {
        Command::Validate { netlist, schema } => {
            let n = inputs.netlist(netlist)?;
            let s = schema.as_deref().map(|p| inputs.schema(p)).transpose()?;
            let report = n.validate(s.as_ref());
            let violations: Vec<String> =
                report.violations.iter().map(ToString::to_string).collect();
            for v in &violations {
                log.info(v);
            }
            let code = if report.is_ok() {
                EXIT_HOLDS
            } else {
                EXIT_INVALID
            };
            Ok((
                json!({
                    "valid": report.is_ok(),
                    "violations": violations,
                    "input_width": n.input_width,
                    "num_classes": n.num_classes,
                    "block_size": n.block_size,
                    "layers": n.layers.iter().map(Vec::len).collect::<Vec<_>>(),
                }),
                code,
            ))
        }
        Command::Verify { q, kappa, solver } => {
            let (n, s) = (inputs.netlist(&q.netlist)?, inputs.schema(&q.schema)?);
            log.info(format!(
                "verifying {:?} at kappa={kappa}, eps={}",
                q.mode, q.eps
            ));
            let v = verify_at(&n, &s, q.mode.into(), q.eps, *kappa, &solver.config())?;
            log.info(format!("{:?} in {:.3}s", v.status, v.stats.time_secs));
            Ok((
                json!({
                    "mode": Mode::from(q.mode),
                    "eps": q.eps,
                    "kappa": kappa.to_string(),
                    "verdict": v,
                }),
                status_code(v.status),
            ))
        }
        Command::SearchKappa { q, tol, solver } => {
            let (n, s) = (inputs.netlist(&q.netlist)?, inputs.schema(&q.schema)?);
            let cfg = solver.config();
            let (r, att) = search_with_attainability(&n, &s, q.mode.into(), q.eps, *tol, &cfg)?;
            for p in &r.queries {
                log.info(format!(
                    "kappa={} {:?} ({:.3}s)",
                    p.kappa, p.status, p.time_secs
                ));
            }
            let code = if !r.converged || att.as_ref().is_some_and(|a| a.unknown) {
                EXIT_UNKNOWN
            } else if r.unsafe_everywhere {
                EXIT_COUNTEREXAMPLE
            } else {
                EXIT_HOLDS
            };
            Ok((
                json!({
                    "mode": Mode::from(q.mode),
                    "eps": q.eps,
                    "tolerance": tol.to_string(),
                    "bracket": [format!("1/{}", n.num_classes), "1"],
                    "search": r,
                    "attainability": att,
                    "monotone": r.is_monotone(),
                }),
                code,
            ))
        }
        Command::Sweep { q, kappas, solver } => {
            let (n, s) = (inputs.netlist(&q.netlist)?, inputs.schema(&q.schema)?);
            let rep = sweep(&n, &s, q.mode.into(), q.eps, kappas, &solver.config())?;
            for r in &rep.rows {
                log.info(format!(
                    "kappa={} {:?} ({:.3}s)",
                    r.kappa, r.status, r.time_secs
                ));
            }
            let code = if rep.rows.iter().any(|r| r.error.is_some()) {
                EXIT_ENVIRONMENT
            } else if rep.rows.iter().any(|r| r.status == Some(Status::Unknown)) {
                EXIT_UNKNOWN
            } else {
                EXIT_HOLDS
            };
            Ok((
                json!({ "mode": Mode::from(q.mode), "eps": q.eps, "sweep": rep }),
                code,
            ))
        }
        Command::Encode {
            netlist,
            schema,
            kind,
            eps,
            kappa,
            output,
            varmap,
        } => {
            let (n, s) = (inputs.netlist(netlist)?, inputs.schema(schema)?);
            let kind = match kind {
                KindArg::Fair => QueryKind::Fair,
                KindArg::Robust => QueryKind::Robust,
                KindArg::Attainable => QueryKind::Attainable,
            };
            let (f, vm) = build_query(&PropertyQuery {
                kind,
                eps: *eps,
                kappa: *kappa,
                netlist: &n,
                schema: &s,
            })?;
            let map_path = varmap.clone().unwrap_or_else(|| {
                let mut p = output.clone().into_os_string();
                p.push(".map");
                PathBuf::from(p)
            });
            std::fs::write(output, f.to_dimacs())?;
            std::fs::write(&map_path, vm.to_sidecar())?;
            log.info(format!(
                "wrote {} ({} vars, {} clauses)",
                output.display(),
                f.num_vars,
                f.num_clauses()
            ));
            Ok((
                json!({
                    "kind": kind,
                    "eps": eps,
                    "kappa": kappa.to_string(),
                    "dimacs": output.display().to_string(),
                    "varmap": map_path.display().to_string(),
                    "num_vars": f.num_vars,
                    "num_clauses": f.num_clauses(),
                    "components": vm.components,
                }),
                EXIT_HOLDS,
            ))
        }
        Command::Attainable {
            netlist,
            schema,
            kappa,
            solver,
        } => {
            let (n, s) = (inputs.netlist(netlist)?, inputs.schema(schema)?);
            let a = check_attainable(&n, &s, *kappa, &solver.config())?;
            let code = if a.unknown { EXIT_UNKNOWN } else { EXIT_HOLDS };
            Ok((
                json!({ "kappa": kappa.to_string(), "attainability": a }),
                code,
            ))
        }
        Command::GenRandom {
            inputs: d,
            hidden,
            classes,
            block,
            seed,
            output,
        } => {
            let mut sizes = hidden.clone();
            sizes.push(classes * block);
            let n = random_netlist(*d, &sizes, *classes, *block, *seed)?;
            let text = n.to_text();
            match output {
                Some(path) => {
                    std::fs::write(path, &text)?;
                    let hash = hex::encode(Sha256::digest(text.as_bytes()));
                    Ok((
                        json!({ "output": path.display().to_string(), "sha256": hash, "gates": n.num_gates() }),
                        EXIT_HOLDS,
                    ))
                }
                None => {
                    emit(&text);
                    Ok((Value::Null, EXIT_HOLDS))
                }
            }
        }
        Command::Eval {
            netlist,
            schema,
            bits,
            values,
        } => {
            let n = inputs.netlist(netlist)?;
            let s = schema.as_deref().map(|p| inputs.schema(p)).transpose()?;
            let input: Vec<bool> = match (bits, values, &s) {
                (Some(b), _, _) => parse_bits(b)?,
                (None, Some(v), Some(s)) => {
                    let raw: Vec<&str> = v.split(',').collect();
                    lgnv::data::encode_row(s, &raw)?
                }
                _ => {
                    return Err(Error::Usage(
                        "eval needs --bits or --values with --schema".into(),
                    ))
                }
            };
            let result = match &s {
                Some(s) => serde_json::to_value(WitnessInput::evaluate(&n, s, input)?),
                None => {
                    let p = predict(&n, &input)?;
                    serde_json::to_value(json!({
                        "bits": input.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>(),
                        "class": p.class,
                        "scores": p.scores.scores,
                        "confidence": p.confidence.to_string(),
                    }))
                }
            }
            .expect("serializable");
            Ok((json!({ "prediction": result }), EXIT_HOLDS))
        }
        Command::Accuracy {
            netlist,
            schema,
            data,
            label_column,
            label_base,
            class_names,
        } => {
            let n = inputs.netlist(netlist)?;
            let s = inputs.schema(schema)?;
            inputs.read(data)?;
            let labels = match class_names {
                Some(names) => LabelSpec::Names(names.clone()),
                None => LabelSpec::Integer { base: *label_base },
            };
            let ds = Dataset::from_csv_path(data, s, n.num_classes, label_column, &labels)?;
            let acc = accuracy(&n, &ds)?;
            log.info(format!("{} rows, accuracy {acc:.4}", ds.rows.len()));
            Ok((
                json!({ "rows": ds.rows.len(), "accuracy": acc }),
                EXIT_HOLDS,
            ))
        }
    }
}

/// Writes to stdout, tolerating a closed pipe (e.g. `lgnv ... | head`).
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn parse_bits(s: &str) -> lgnv::Result<Vec<bool>> {
    s.chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Value(format!("bit string contains `{c}`"))),
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ENVIRONMENT } else { 0 });
        }
    };
    let log = Log { quiet: cli.quiet };
    let mut inputs = Inputs::default();
    let command: Vec<String> = std::env::args().collect();
    let (result, code) = match run(&cli.command, &mut inputs, &log) {
        Ok((Value::Null, code)) => return ExitCode::from(code),
        Ok((v, code)) => (json!({ "ok": true, "result": v }), code),
        Err(e) => {
            eprintln!("lgnv: error: {e}");
            let code = exit_code_for(&e);
            (json!({ "ok": false, "error": e.to_string() }), code)
        }
    };
    let report = json!({
        "tool": "lgnv",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "inputs": inputs.hashes,
        "exit_code": code,
        "outcome": result,
    });
    let text = serde_json::to_string_pretty(&report).expect("serializable");
    emit(&format!("{text}\n"));
    ExitCode::from(code)
}
