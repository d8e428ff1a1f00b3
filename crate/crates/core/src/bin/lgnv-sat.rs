//! Minimal DIMACS CNF solver front end with the usual competition output
//! protocol: `s SATISFIABLE` plus `v` lines and exit code 10, or
//! `s UNSATISFIABLE` and exit code 20.
//!
//! Usage: `lgnv-sat [FILE]` (reads stdin when FILE is absent or `-`).

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::process::ExitCode;

fn declared_vars(text: &str) -> usize {
    text.lines()
        .find_map(|l| {
            let mut t = l.split_whitespace();
            (t.next() == Some("p") && t.next() == Some("cnf"))
                .then(|| t.next().and_then(|v| v.parse().ok()))
                .flatten()
        })
        .unwrap_or(0)
}

fn run() -> io::Result<u8> {
    let mut text = String::new();
    match std::env::args().nth(1).as_deref() {
        None | Some("-") => io::stdin().read_to_string(&mut text)?,
        Some(path) => File::open(path)?.read_to_string(&mut text)?,
    };
    let num_vars = declared_vars(&text);

    let mut solver = varisat::Solver::new();
    solver
        .add_dimacs_cnf(text.as_bytes())
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    let sat = solver
        .solve()
        .map_err(|e| io::Error::other(e.to_string()))?;

    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    writeln!(out, "c lgnv-sat (varisat backend)")?;
    if !sat {
        writeln!(out, "s UNSATISFIABLE")?;
        out.flush()?;
        return Ok(20);
    }
    let mut values = vec![false; num_vars + 1];
    for lit in solver.model().unwrap_or_default() {
        let v = lit.to_dimacs();
        let idx = v.unsigned_abs();
        if idx >= values.len() {
            values.resize(idx + 1, false);
        }
        values[idx] = v > 0;
    }
    writeln!(out, "s SATISFIABLE")?;
    let lits: Vec<String> = (1..values.len())
        .map(|v| {
            if values[v] {
                v.to_string()
            } else {
                format!("-{v}")
            }
        })
        .collect();
    for chunk in lits.chunks(16) {
        writeln!(out, "v {}", chunk.join(" "))?;
    }
    writeln!(out, "v 0")?;
    out.flush()?;
    Ok(10)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("c error: {e}");
            println!("s UNKNOWN");
            ExitCode::from(1)
        }
    }
}
