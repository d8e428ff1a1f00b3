//! External SAT solver protocol: DIMACS in a temp file, competition-style
//! output (`s` status line, `v` model lines, exit code 10/20) back.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::cnf::{to_dimacs, CnfFormula};
use crate::error::{Error, Result};
use crate::eval::{phi_values, Mode, Witness, WitnessInput};
use crate::kappa::Kappa;
use crate::netlist::Netlist;
use crate::property::VarMap;
use crate::schema::FeatureSchema;

/// Environment variable overriding the solver executable.
pub const SOLVER_ENV: &str = "LGNV_SOLVER";
/// Bundled solver binary name.
pub const BUNDLED_SOLVER: &str = "lgnv-sat";
pub const DEFAULT_SOLVER: &str = "kissat";

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Explicit solver path; `None` resolves via [`resolve_executable`].
    pub executable: Option<PathBuf>,
    pub timeout: Duration,
    pub extra_args: Vec<String>,
    /// Directory for temporary DIMACS files (system temp dir if `None`).
    pub work_dir: Option<PathBuf>,
    /// Keep the DIMACS file after solving.
    pub keep_files: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            executable: None,
            timeout: Duration::from_secs(3600),
            extra_args: Vec::new(),
            work_dir: None,
            keep_files: false,
        }
    }
}

impl SolverConfig {
    pub fn with_executable(path: impl Into<PathBuf>) -> Self {
        SolverConfig {
            executable: Some(path.into()),
            ..Default::default()
        }
    }
}

fn on_path(name: &str) -> Option<PathBuf> {
    let paths = std::env::var_os("PATH")?;
    std::env::split_paths(&paths)
        .map(|dir| dir.join(name))
        .find(|p| p.is_file())
}

/// Solver executable: explicit path, then `$LGNV_SOLVER`, then `kissat`
/// on `PATH`, then the bundled `lgnv-sat` next to the running binary.
pub fn resolve_executable(explicit: Option<&Path>) -> Result<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.to_path_buf());
    }
    if let Some(p) = std::env::var_os(SOLVER_ENV).filter(|p| !p.is_empty()) {
        return Ok(PathBuf::from(p));
    }
    if let Some(p) = on_path(DEFAULT_SOLVER) {
        return Ok(p);
    }
    if let Ok(exe) = std::env::current_exe() {
        // Test binaries live one level deeper, in target/<profile>/deps.
        for dir in exe.ancestors().skip(1).take(2) {
            let candidate = dir.join(BUNDLED_SOLVER);
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
    }
    if let Some(p) = on_path(BUNDLED_SOLVER) {
        return Ok(p);
    }
    Err(Error::SolverNotFound(PathBuf::from(DEFAULT_SOLVER)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Model indexed by variable id; index 0 unused.
    Sat(Vec<bool>),
    Unsat,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub wall_time: Duration,
    pub exit_code: Option<i32>,
    /// Solver comment lines (`c ...`).
    pub stats_lines: Vec<String>,
    /// Path of the DIMACS file when kept.
    pub dimacs_path: Option<PathBuf>,
}

impl SolveOutcome {
    pub fn model(&self) -> Option<&[bool]> {
        match &self.status {
            SolveStatus::Sat(m) => Some(m),
            _ => None,
        }
    }
}

/// Short content hash used to name temp files.
pub fn formula_hash(dimacs: &str) -> String {
    let digest = Sha256::digest(dimacs.as_bytes());
    hex::encode(&digest[..8])
}

/// Writes the formula as DIMACS, runs the solver on it and interprets the
/// result. A timeout yields `Unknown`, not an error.
pub fn solve(formula: &CnfFormula, config: &SolverConfig) -> Result<SolveOutcome> {
    let exe = resolve_executable(config.executable.as_deref())?;
    let dimacs = to_dimacs(formula);
    let dir = config.work_dir.clone().unwrap_or_else(std::env::temp_dir);
    let file = tempfile::Builder::new()
        .prefix(&format!("lgnv-{}-", formula_hash(&dimacs)))
        .suffix(".cnf")
        .tempfile_in(&dir)?;
    std::fs::write(file.path(), &dimacs)?;

    let start = Instant::now();
    let mut cmd = Command::new(&exe);
    cmd.args(&config.extra_args)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    // Own process group, so a timeout also reaches children of wrapper scripts.
    #[cfg(unix)]
    std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
    let mut child = cmd.spawn().map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
            Error::SolverNotFound(exe.clone())
        }
        _ => Error::Io(e),
    })?;

    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });

    let mut timed_out = false;
    let exit = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if start.elapsed() >= config.timeout {
            kill_tree(&mut child);
            let _ = child.wait();
            timed_out = true;
            break None;
        }
        thread::sleep(Duration::from_millis(1));
    };
    let wall_time = start.elapsed();
    let output = reader.join().unwrap_or_default();
    let exit_code = exit.and_then(|s| s.code());

    let dimacs_path = if config.keep_files {
        let (_, path) = file.keep().map_err(|e| Error::Io(e.error))?;
        Some(path)
    } else {
        None
    };

    let stats_lines: Vec<String> = output
        .lines()
        .filter(|l| l.starts_with('c'))
        .map(str::to_string)
        .collect();

    let status = if timed_out {
        SolveStatus::Unknown
    } else {
        interpret(exit_code, &output, formula.num_vars)?
    };
    Ok(SolveOutcome {
        status,
        wall_time,
        exit_code,
        stats_lines,
        dimacs_path,
    })
}

fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    if let Ok(pid) = libc::pid_t::try_from(child.id()) {
        // SAFETY: plain syscall on the group created at spawn time.
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
}

/// Maps exit code and stdout to a status, cross-checking the `s` line.
pub fn interpret(exit_code: Option<i32>, output: &str, num_vars: u32) -> Result<SolveStatus> {
    let s_line = output
        .lines()
        .find(|l| l.starts_with("s "))
        .map(|l| l[2..].trim());
    match (exit_code, s_line) {
        (Some(10), Some("SATISFIABLE") | None) => {
            Ok(SolveStatus::Sat(parse_model(output, num_vars)?))
        }
        (Some(20), Some("UNSATISFIABLE") | None) => Ok(SolveStatus::Unsat),
        (Some(10 | 20), Some(other)) => Err(Error::SolverOutput(format!(
            "exit code {} contradicts status line `s {other}`",
            exit_code.unwrap_or_default()
        ))),
        _ => Ok(SolveStatus::Unknown),
    }
}

/// Collects `v` lines into a full assignment. Variables the solver does
/// not mention are set false.
pub fn parse_model(output: &str, num_vars: u32) -> Result<Vec<bool>> {
    let mut model = vec![false; num_vars as usize + 1];
    let mut terminated = false;
    for line in output.lines().filter(|l| l.starts_with("v ") || *l == "v") {
        for tok in line[1..].split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| Error::SolverOutput(format!("bad literal `{tok}` in model line")))?;
            if v == 0 {
                terminated = true;
                continue;
            }
            let idx = v.unsigned_abs() as usize;
            if idx > num_vars as usize {
                return Err(Error::SolverOutput(format!(
                    "model literal {v} exceeds {num_vars} variables"
                )));
            }
            model[idx] = v > 0;
        }
    }
    if !terminated {
        return Err(Error::SolverOutput(
            "model not terminated by `v ... 0`".into(),
        ));
    }
    Ok(model)
}

/// Decodes both inputs of a SAT fair/robust query and re-checks the
/// violation concretely: `Φ` holds, classes differ and `conf(f(x)) > κ`.
/// Any mismatch is an encoding bug and reported as such.
pub fn decode_counterexample(
    model: &[bool],
    varmap: &VarMap,
    schema: &FeatureSchema,
    netlist: &Netlist,
    mode: Mode,
    eps: u64,
    kappa: Kappa,
) -> Result<Witness> {
    let prime = varmap
        .x_prime
        .as_ref()
        .ok_or_else(|| Error::Consistency("query has no primed copy".into()))?;
    let read =
        |lits: &[crate::cnf::Lit]| -> Vec<bool> { lits.iter().map(|l| l.eval(model)).collect() };
    let side = |bits: Vec<bool>| {
        WitnessInput::evaluate(netlist, schema, bits).map_err(|e| match e {
            Error::IllFormed(m) => {
                Error::Consistency(format!("model violates well-formedness: {m}"))
            }
            other => other,
        })
    };
    let x = side(read(&varmap.x.inputs))?;
    let x_prime = side(read(&prime.inputs))?;

    if !phi_values(schema, &x.values, &x_prime.values, eps, mode) {
        return Err(Error::Consistency(
            "decoded pair violates the similarity predicate".into(),
        ));
    }
    if x.class == x_prime.class {
        return Err(Error::Consistency(format!(
            "decoded pair shares class {}",
            x.class
        )));
    }
    let conf = crate::eval::predict(netlist, &x.bits)?.confidence;
    if !conf.exceeds(kappa) {
        return Err(Error::Consistency(format!(
            "decoded confidence {conf} does not exceed {kappa}"
        )));
    }
    // Output literals must agree with the concrete forward pass.
    let outs = read(&varmap.x.outputs);
    if outs != crate::eval::forward(netlist, &x.bits)? {
        return Err(Error::Consistency(
            "model outputs differ from forward evaluation".into(),
        ));
    }
    Ok(Witness { x, x_prime })
}
