use std::path::Path;
use std::process::{Command, Output};

use lowramp::cli::config::{merge_args, parse_config};
use lowramp::cli::{Cell, Table};

fn lowramp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowramp"))
        .args(args)
        .env("LOWRAMP_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn gen(dir: &Path, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let mut args = vec!["gen", "--n", "120", "--seed", "4", "--out", d];
    args.extend_from_slice(extra);
    let out = lowramp(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_run_and_rerun_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let planted = ["--prior", "rademacher_bernoulli", "--rho", "0.3", "--channel", "gaussian", "--delta", "0.02"];
    gen(&a, &planted);
    gen(&b, &planted);
    for f in ["meta.json", "Y.bin", "X0.bin"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let run = |dir: &Path| lowramp(&["amp", "--instance", dir.to_str().unwrap(), "--seed", "3", "--damping", "0.8"]);
    let (r1, r2) = (run(&a), run(&a));
    assert_eq!(code(&r1), 0, "{}", String::from_utf8_lossy(&r1.stderr));
    assert_eq!(r1.stdout, r2.stdout);
    let text = stdout(&r1);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,conv,mse,free_energy"));
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(last[2] < 0.1, "final mse {}", last[2]);
    assert!(a.join("x_hat.bin").exists() && a.join("sigma.bin").exists());
}

#[test]
fn csv_storage_and_spectral_json() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("inst");
    gen(&dir, &["--prior", "gaussian", "--channel", "gaussian", "--delta", "0.3", "--storage", "csv"]);
    let header = std::fs::read_to_string(dir.join("Y.csv")).unwrap();
    assert!(header.starts_with("i,j,y\n"));
    let out = lowramp(&["spectral", "--instance", dir.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let row = &rows[0];
    for key in ["k", "value", "overlap2", "overlap2_theory"] {
        assert!(row.get(key).is_some(), "missing {key}");
    }
    assert!((row["overlap2_theory"].as_f64().unwrap() - 0.7).abs() < 1e-9);
}

#[test]
fn state_evolution_tables() {
    let out = lowramp(&["se", "--model", "gauss_bernoulli", "--rho", "0.1", "--delta", "0.005,0.014,0.03"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("delta,init,m,mse,free_energy_gap,iterations,converged"));
    // Two starts per noise level.
    assert_eq!(text.lines().count(), 7);
    for line in text.lines().skip(1) {
        for field in line.split(',').filter(|f| f.parse::<f64>().is_ok()) {
            let digits = field.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
            assert!(digits.trim_start_matches('0').len() <= 12, "{field}");
        }
    }
    let sk = lowramp(&["se", "--model", "sk", "--j", "0.5,2", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_str(&stdout(&sk)).unwrap();
    assert!(rows[0]["q"].as_f64().unwrap() < 1e-10);
    assert!(rows[1]["q"].as_f64().unwrap() > 0.5);

    let scan = lowramp(&["phase-scan", "--model", "rademacher_bernoulli", "--rho", "0.05,0.2", "--rescale", "rho2"]);
    assert_eq!(code(&scan), 0, "{}", String::from_utf8_lossy(&scan.stderr));
    let text = stdout(&scan);
    assert_eq!(text.lines().next(), Some("rho,delta_c,delta_alg,delta_it,delta_dyn"));
    // Rescaled by rho^2, Delta_c is one.
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1) == Some("1")));
}

#[test]
fn configuration_errors_exit_with_two() {
    assert_eq!(code(&lowramp(&["se", "--model", "bernoulli", "--delta", "0.1"])), 2);
    assert_eq!(code(&lowramp(&["se", "--model", "nonsense", "--delta", "0.1"])), 2);
    assert_eq!(code(&lowramp(&["se", "--model", "gaussian", "--curve", "--x-min", "5", "--x-max", "1", "--x-points", "10"])), 2);
    assert_eq!(code(&lowramp(&["phase-scan", "--model", "gauss_bernoulli"])), 2);
    assert_eq!(code(&lowramp(&["amp", "--instance", "/nonexistent/lowramp"])), 2);
    assert_eq!(code(&lowramp(&["gen", "--n", "10", "--out", "/tmp/x", "--prior", "bernoulli", "--rho", "2", "--channel", "gaussian", "--delta", "1"])), 2);
    assert_eq!(code(&lowramp(&["se", "--model", "gaussian", "--delta", "0.1", "--threads", "0"])), 2);
    assert_eq!(code(&lowramp(&["frobnicate"])), 2);
    assert_eq!(code(&lowramp(&["--version"])), 0);
}

#[test]
fn numerical_failures_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("inst");
    gen(&dir, &["--prior", "gauss_bernoulli", "--rho", "0.3", "--channel", "gaussian", "--delta", "0.03"]);
    let out = lowramp(&["amp", "--instance", dir.to_str().unwrap(), "--variant", "full"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    // The informative branch cannot be resolved on a grid that ends too early.
    let scan = lowramp(&["phase-scan", "--model", "rademacher_bernoulli", "--rho", "0.05", "--x-min", "1e-4", "--x-max", "2", "--x-points", "200"]);
    assert_eq!(code(&scan), 3, "{}", String::from_utf8_lossy(&scan.stderr));
}

#[test]
fn config_file_supplies_defaults_and_command_line_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("se.conf");
    std::fs::write(&path, "# state evolution\ncommand = se\nmodel = gauss_bernoulli\nrho = 0.1\ndelta = 0.02\ninit = informative\n").unwrap();
    let p = path.to_str().unwrap();
    let from_file = stdout(&lowramp(&["--config", p]));
    assert_eq!(from_file.lines().count(), 2);
    assert!(from_file.lines().nth(1).unwrap().starts_with("0.02,informative,"));
    let overridden = stdout(&lowramp(&["se", "--config", p, "--delta", "0.012"]));
    assert_eq!(overridden.lines().count(), 2);
    assert!(overridden.lines().nth(1).unwrap().starts_with("0.012,informative,"));
    assert_eq!(code(&lowramp(&["gen", "--config", p])), 2);
    std::fs::write(&path, "not a pair\n").unwrap();
    assert_eq!(code(&lowramp(&["se", "--config", p])), 2);
}

#[test]
fn config_parsing_and_merging() {
    let f = parse_config("model = gaussian\nadaptive_damping = true\nverbose = false\n").unwrap();
    assert_eq!(f.entries, vec![("--model".into(), Some("gaussian".into())), ("--adaptive-damping".into(), None)]);
    let args = ["lowramp", "se", "--model=sk"].map(std::ffi::OsString::from).to_vec();
    let merged = merge_args(args, &f).unwrap();
    let merged: Vec<String> = merged.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    assert_eq!(merged, ["lowramp", "se", "--adaptive-damping", "--model=sk"]);
    assert!(parse_config("config = other\n").is_err());
}

#[test]
fn tables_render_the_same_numbers_in_both_formats() {
    let mut t = Table::new(&["a", "b", "c"]);
    t.push(vec![Cell::from(1.0 / 3.0), Cell::from(None), Cell::from(true)]);
    assert_eq!(t.to_csv(), "a,b,c\n0.333333333333,,true\n");
    let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
    assert_eq!(v[0]["a"].as_f64().unwrap(), 0.333333333333);
    assert!(v[0]["b"].is_null());
}
