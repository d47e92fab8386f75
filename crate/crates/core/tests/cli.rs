use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anova-qmc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("anova-qmc-it-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn every_subcommand_is_wired() {
    let help = stdout(&run(&["--help"]));
    for sub in ["conditions", "constant", "kernel-check", "norm-equiv", "anova", "converge", "price"] {
        assert!(help.contains(sub), "{sub} missing from --help");
        assert_eq!(run(&[sub, "--help"]).status.code(), Some(0), "{sub} --help");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["price", "--n", "many"]).status.code(), Some(2));
    assert_eq!(run(&["price", "--sigma", "-0.2"]).status.code(), Some(2));
    assert_eq!(run(&["constant", "--psi", "gaussian_decay:alpha=oops"]).status.code(), Some(2));
    assert_eq!(run(&["price", "--config", "/nonexistent/anova-qmc.cfg"]).status.code(), Some(2));
}

#[test]
fn property_failure_exits_1() {
    let o = run(&["converge", "--method", "mc", "--n-list", "128,256,512,1024,2048", "--max-slope", "-2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("# slope="));
    // the strong condition fails for α = 1, so C is undefined
    assert_eq!(run(&["constant", "--psi", "gaussian_decay:alpha=1"]).status.code(), Some(1));
}

#[test]
fn success_exits_0_with_csv() {
    let o = run(&["constant", "--gamma", "0.5,0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let body: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "quantity,value");
    assert!(out.contains("# command=constant"));
}

#[test]
fn same_seed_same_bytes() {
    let args = ["--seed", "5", "price", "--n", "1024", "--shifts", "8", "--avg", "geom"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["--seed", "6", "price", "--n", "1024", "--shifts", "8", "--avg", "geom"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn config_file_fills_missing_flags() {
    let cfg = scratch("price.cfg");
    std::fs::write(&cfg, "seed=5\nn=1024\nshifts=8\navg=geom\n").unwrap();
    let from_file = run(&["price", "--config", cfg.to_str().unwrap()]);
    let direct = run(&["--seed", "5", "price", "--n", "1024", "--shifts", "8", "--avg", "geom"]);
    assert_eq!(from_file.status.code(), Some(0));
    // identical apart from the config path itself, which is not echoed
    assert_eq!(from_file.stdout, direct.stdout);
    let overridden = run(&["price", "--config", cfg.to_str().unwrap(), "--n", "2048"]);
    assert!(stdout(&overridden).contains("# n=2048"));
}

#[test]
fn out_flag_writes_the_file() {
    let path = scratch("conditions.csv");
    let o = run(&["conditions", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("gaussian,gaussian_decay:alpha=4,true,true"));
}

#[test]
fn converge_reports_rate_header() {
    let o = run(&[
        "converge", "--method", "qmc", "--avg", "geom", "--n-list", "256,512,1024,2048,4096", "--shifts", "4",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("# rate_fit=least squares of log2(rms) on log2(N), smallest N left out"));
    assert!(out.lines().any(|l| l.starts_with("256,") && l.ends_with(",false")));
    assert!(out.lines().last().unwrap().starts_with("# slope="));
}
