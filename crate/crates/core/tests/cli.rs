use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const FLIP: &str = "lgn-netlist v1
input_width 4
num_classes 2
block_size 1
layer 0 gates 2
(12, i2, i0)
(12, i3, i0)
end
";

const CONSTANT: &str = "lgn-netlist v1
input_width 4
num_classes 2
block_size 1
# class 0 always fires, class 1 never
layer 0 gates 2
(15, i0, i0)
(0, i0, i0)
end
";

const SCHEMA: &str = "num n bits=2 lo=0 hi=3\ncat s arity=2 sensitive=1 values=f,m\n";

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        for (name, text) in [
            ("flip.lgn", FLIP),
            ("const.lgn", CONSTANT),
            ("s.schema", SCHEMA),
        ] {
            std::fs::write(dir.path().join(name), text).unwrap();
        }
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> (i32, Value, Output) {
        let out = lgnv()
            .args(args)
            .current_dir(self.dir.path())
            .output()
            .unwrap();
        let code = out.status.code().unwrap_or(-1);
        let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
        (code, report, out)
    }
}

fn lgnv() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lgnv"));
    c.env("LGNV_SOLVER", env!("CARGO_BIN_EXE_lgnv-sat"))
        .arg("--quiet");
    c
}

fn result(report: &Value) -> &Value {
    &report["outcome"]["result"]
}

#[test]
fn validate_exit_codes() {
    let fx = Fixture::new();
    let (code, report, _) = fx.run(&["validate", "flip.lgn", "--schema", "s.schema"]);
    assert_eq!(code, 0);
    assert_eq!(result(&report)["valid"], true);
    assert!(report["inputs"]["flip.lgn"].as_str().unwrap().len() == 64);

    std::fs::write(fx.path("bad.lgn"), FLIP.replace("(12, i2", "(16, i2")).unwrap();
    let (code, report, _) = fx.run(&["validate", "bad.lgn"]);
    assert_eq!(code, 2);
    assert!(report["outcome"]["error"]
        .as_str()
        .unwrap()
        .contains("op code 16"));

    let (code, _, _) = fx.run(&["validate", "missing.lgn"]);
    assert_eq!(code, 3);

    // A schema wider than the netlist input is a structural violation.
    std::fs::write(
        fx.path("wide.schema"),
        "num n bits=4 lo=0 hi=1\ncat s arity=2 sensitive=1\n",
    )
    .unwrap();
    let (code, report, _) = fx.run(&["validate", "flip.lgn", "--schema", "wide.schema"]);
    assert_eq!(code, 2);
    assert!(!result(&report)["violations"].as_array().unwrap().is_empty());
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    let fx = Fixture::new();
    let (code, report, _) = fx.run(&[
        "verify",
        "const.lgn",
        "--schema",
        "s.schema",
        "--mode",
        "robust",
        "--kappa",
        "1/2",
    ]);
    assert_eq!(code, 0);
    assert_eq!(result(&report)["verdict"]["status"], "Holds");

    let (code, report, _) = fx.run(&[
        "verify", "flip.lgn", "--schema", "s.schema", "--mode", "fair", "--eps", "1", "--kappa",
        "0.5",
    ]);
    assert_eq!(code, 1);
    let w = &result(&report)["verdict"]["witness"];
    assert_ne!(w["x"]["class"], w["x_prime"]["class"]);
    assert_eq!(report["exit_code"], 1);
    assert_eq!(report["command"][2], "verify");
}

#[test]
fn eval_on_witness_matches_report() {
    let fx = Fixture::new();
    let (_, report, _) = fx.run(&[
        "verify", "flip.lgn", "--schema", "s.schema", "--mode", "fair", "--kappa", "1/2",
    ]);
    let x = &result(&report)["verdict"]["witness"]["x"];
    let bits = x["bits"].as_str().unwrap();
    let (code, ev, _) = fx.run(&["eval", "flip.lgn", "--schema", "s.schema", "--bits", bits]);
    assert_eq!(code, 0);
    let p = &result(&ev)["prediction"];
    assert_eq!(p["confidence"], x["confidence"]);
    assert_eq!(p["class"], x["class"]);

    let (code, ev, _) = fx.run(&[
        "eval", "flip.lgn", "--schema", "s.schema", "--values", "2,m",
    ]);
    assert_eq!(code, 0);
    assert_eq!(result(&ev)["prediction"]["bits"], "1101");
    assert_eq!(result(&ev)["prediction"]["class"], 1);

    let (code, _, _) = fx.run(&["eval", "flip.lgn", "--schema", "s.schema", "--bits", "0111"]);
    assert_eq!(code, 2, "ill-formed bits are invalid input");
}

#[test]
fn search_kappa_reports() {
    let fx = Fixture::new();
    let (code, report, _) = fx.run(&[
        "search-kappa",
        "flip.lgn",
        "--schema",
        "s.schema",
        "--mode",
        "fair",
    ]);
    assert_eq!(code, 0);
    let r = result(&report);
    assert_eq!(r["search"]["kappa_star"], "1");
    assert_eq!(r["search"]["converged"], true);
    assert_eq!(r["monotone"], true);
    assert_eq!(r["bracket"][0], "1/2");
    assert_eq!(r["search"]["attainable"], false);

    let (code, report, _) = fx.run(&[
        "search-kappa",
        "const.lgn",
        "--schema",
        "s.schema",
        "--mode",
        "fair",
        "--tol",
        "1/10",
    ]);
    assert_eq!(code, 0);
    let r = result(&report);
    assert_eq!(r["search"]["kappa_star"], "1/2");
    assert_eq!(r["search"]["queries"].as_array().unwrap().len(), 2);
    // Constant scores (1, 0) give confidence 1 > 1/2.
    assert_eq!(r["search"]["attainable"], true);
}

#[test]
fn timeouts_exit_with_unknown() {
    let fx = Fixture::new();
    let (code, report, _) = fx.run(&[
        "search-kappa",
        "flip.lgn",
        "--schema",
        "s.schema",
        "--mode",
        "fair",
        "--timeout",
        "0ms",
    ]);
    assert_eq!(code, 4);
    assert_eq!(result(&report)["search"]["converged"], false);

    // A solver that never answers in time.
    let slow = fx.path("slow.sh");
    std::fs::write(
        &slow,
        "#!/bin/sh\nsleep 5\necho 's UNSATISFIABLE'\nexit 20\n",
    )
    .unwrap();
    std::fs::set_permissions(&slow, std::fs::Permissions::from_mode(0o755)).unwrap();
    let started = std::time::Instant::now();
    let (code, report, _) = fx.run(&[
        "verify",
        "flip.lgn",
        "--schema",
        "s.schema",
        "--mode",
        "fair",
        "--kappa",
        "1/2",
        "--timeout",
        "100ms",
        "--solver",
        slow.to_str().unwrap(),
    ]);
    assert_eq!(code, 4);
    assert_eq!(result(&report)["verdict"]["status"], "Unknown");
    assert!(started.elapsed() < std::time::Duration::from_secs(4));
}

#[test]
fn sweep_table() {
    let fx = Fixture::new();
    let (code, report, _) = fx.run(&[
        "sweep",
        "flip.lgn",
        "--schema",
        "s.schema",
        "--mode",
        "fair",
        "--kappas",
        "1/2,0.99,1",
    ]);
    assert_eq!(code, 0);
    let rows = result(&report)["sweep"]["rows"].as_array().unwrap();
    let status: Vec<&str> = rows.iter().map(|r| r["status"].as_str().unwrap()).collect();
    assert_eq!(status, ["Counterexample", "Counterexample", "Holds"]);
    assert_eq!(result(&report)["sweep"]["monotone"], true);
}

fn run_solver_by_hand(cnf: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_lgnv-sat"))
        .arg(cnf)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn encode_then_external_solver_agrees_with_verify() {
    let fx = Fixture::new();
    for (net, mode, expect_verify, expect_solver) in
        [("flip.lgn", "fair", 1, 10), ("const.lgn", "robust", 0, 20)]
    {
        let (code, report, _) = fx.run(&[
            "encode", net, "--schema", "s.schema", "--kind", mode, "--kappa", "3/4", "-o", "q.cnf",
        ]);
        assert_eq!(code, 0);
        assert_eq!(run_solver_by_hand(&fx.path("q.cnf")), expect_solver);
        let (code, _, _) = fx.run(&[
            "verify", net, "--schema", "s.schema", "--mode", mode, "--kappa", "3/4",
        ]);
        assert_eq!(code, expect_verify);

        let dimacs = std::fs::read_to_string(fx.path("q.cnf")).unwrap();
        let header = format!(
            "p cnf {} {}",
            result(&report)["num_vars"],
            result(&report)["num_clauses"]
        );
        assert!(dimacs.starts_with(&header));
        let map = std::fs::read_to_string(fx.path("q.cnf.map")).unwrap();
        assert!(map.lines().any(|l| l.starts_with("in' ")));
    }
    let (code, _, _) = fx.run(&[
        "encode",
        "flip.lgn",
        "--schema",
        "s.schema",
        "--kind",
        "attainable",
        "--kappa",
        "1/2",
        "-o",
        "a.cnf",
        "--varmap",
        "a.vars",
    ]);
    assert_eq!(code, 0);
    assert!(fx.path("a.vars").exists());
    assert_eq!(run_solver_by_hand(&fx.path("a.cnf")), 10);
}

#[test]
fn attainable_command() {
    let fx = Fixture::new();
    let (code, report, _) = fx.run(&[
        "attainable",
        "const.lgn",
        "--schema",
        "s.schema",
        "--kappa",
        "99/100",
    ]);
    assert_eq!(code, 0);
    assert_eq!(result(&report)["attainability"]["attainable"], true);
    let (_, report, _) = fx.run(&[
        "attainable",
        "const.lgn",
        "--schema",
        "s.schema",
        "--kappa",
        "1",
    ]);
    assert_eq!(result(&report)["attainability"]["attainable"], false);
}

#[test]
fn gen_random_is_deterministic() {
    let fx = Fixture::new();
    let gen = |seed: &str| {
        let out = lgnv()
            .args([
                "gen-random",
                "--inputs",
                "6",
                "--hidden",
                "8,8",
                "--classes",
                "3",
                "--block",
                "2",
                "--seed",
                seed,
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    assert_eq!(gen("42"), gen("42"));
    assert_ne!(gen("42"), gen("43"));
    std::fs::write(fx.path("r.lgn"), gen("42")).unwrap();
    let (code, _, _) = fx.run(&["validate", "r.lgn"]);
    assert_eq!(code, 0);
}

#[test]
fn accuracy_on_csv() {
    let fx = Fixture::new();
    std::fs::write(
        fx.path("d.csv"),
        "n,s,y\n0,f,0\n1,m,0\n2,f,1\n3,m,0\n3,f,0\n",
    )
    .unwrap();
    let (code, report, _) = fx.run(&[
        "accuracy",
        "const.lgn",
        "--schema",
        "s.schema",
        "--data",
        "d.csv",
        "--label-column",
        "y",
    ]);
    assert_eq!(code, 0);
    assert_eq!(result(&report)["rows"], 5);
    assert!((result(&report)["accuracy"].as_f64().unwrap() - 0.8).abs() < 1e-12);

    let iris = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let out = lgnv()
        .args([
            "gen-random",
            "--inputs",
            "14",
            "--hidden",
            "12",
            "--classes",
            "3",
            "--block",
            "2",
            "-o",
        ])
        .arg(fx.path("iris.lgn"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let (code, report, _) = fx.run(&[
        "accuracy",
        "iris.lgn",
        "--schema",
        iris.join("iris.schema").to_str().unwrap(),
        "--data",
        iris.join("iris.csv").to_str().unwrap(),
        "--label-column",
        "species",
        "--class-names",
        "setosa,versicolor,virginica",
    ]);
    assert_eq!(code, 0);
    assert_eq!(result(&report)["rows"], 150);

    std::fs::write(fx.path("empty.csv"), "n,s,y\n").unwrap();
    let (code, _, _) = fx.run(&[
        "accuracy",
        "const.lgn",
        "--schema",
        "s.schema",
        "--data",
        "empty.csv",
        "--label-column",
        "y",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn usage_and_environment_errors() {
    let fx = Fixture::new();
    let (code, _, _) = fx.run(&[
        "verify", "flip.lgn", "--schema", "s.schema", "--mode", "fair", "--kappa", "0.5.1",
    ]);
    assert_eq!(code, 3);
    let (code, _, _) = fx.run(&[
        "verify", "flip.lgn", "--schema", "s.schema", "--mode", "fair", "--kappa", "3/2",
    ]);
    assert_eq!(code, 3);
    let out = lgnv()
        .env("LGNV_SOLVER", "/no/such/solver")
        .args([
            "verify", "flip.lgn", "--schema", "s.schema", "--mode", "fair", "--kappa", "1/2",
        ])
        .current_dir(fx.dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    // An explicit --solver wins over the environment.
    let out = lgnv()
        .env("LGNV_SOLVER", "/no/such/solver")
        .args([
            "verify", "flip.lgn", "--schema", "s.schema", "--mode", "fair", "--kappa", "1/2",
            "--solver",
        ])
        .arg(env!("CARGO_BIN_EXE_lgnv-sat"))
        .current_dir(fx.dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
