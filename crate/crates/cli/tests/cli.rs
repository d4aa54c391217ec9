use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lawshield(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lawshield"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scripted_run(dir: &Path) {
    fs::write(
        dir.join("exp.toml"),
        "policy = \"scripted_greedy\"\nlaws = [\"bundled:innermonologue\"]\nepisodes = 2\noutput_dir = \"out\"\n",
    )
    .unwrap();
    let o = lawshield(dir, &["run", "--config", "exp.toml"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_writes_logs_laws_and_report() {
    let dir = tempfile::tempdir().unwrap();
    scripted_run(dir.path());
    let out = dir.path().join("out");
    for f in [
        "report.txt",
        "report.json",
        "critic_round_1.txt",
        "round_0/laws.laws",
        "round_0/seed_0.jsonl",
        "round_0/seed_1.jsonl",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("diamond: 2/2"));
}

#[test]
fn seed_override_renames_logs() {
    let dir = tempfile::tempdir().unwrap();
    scripted_run(dir.path());
    let o = lawshield(
        dir.path(),
        &["run", "--config", "exp.toml", "--seed", "7", "--output", "seeded"],
    );
    assert!(o.status.success());
    assert!(dir.path().join("seeded/round_0/seed_7.jsonl").exists());
    assert!(dir.path().join("seeded/round_0/seed_8.jsonl").exists());
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    scripted_run(dir.path());
    let ok = lawshield(
        dir.path(),
        &[
            "verify",
            "--laws",
            "bundled:innermonologue",
            "--log",
            "out/round_0/seed_0.jsonl",
        ],
    );
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("all satisfied"));

    // A law the shielded run never honoured: it must be reported as violated.
    fs::write(
        dir.path().join("strict.laws"),
        "X01 ; hard_safety ; G(!obs_has_diamond -> X(!action_mine_log)) ; never mine logs\n",
    )
    .unwrap();
    let bad = lawshield(
        dir.path(),
        &["verify", "--laws", "strict.laws", "--log", "out/round_0/seed_0.jsonl"],
    );
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("X01: VIOLATED at trajectory 0 step 1"));
}

#[test]
fn missing_inputs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = lawshield(dir.path(), &["verify", "--laws", "none.laws", "--log", "none.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lawshield(dir.path(), &["graph", "--logs", "nothing/*.jsonl", "--dot", "g.dot"]);
    assert_eq!(o.status.code(), Some(2));
    let o = lawshield(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn induce_is_idempotent_on_its_own_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.toml"),
        "policy = \"random_allowed\"\nmax_steps = 60\nmax_rounds = 0\noutput_dir = \"out\"\n",
    )
    .unwrap();
    assert!(lawshield(dir.path(), &["run", "--config", "exp.toml"]).status.success());
    let first = lawshield(
        dir.path(),
        &[
            "induce",
            "--laws",
            "bundled:saycan_hard",
            "--logs",
            "out/round_0/*.jsonl",
            "--out",
            "a.laws",
        ],
    );
    assert!(first.status.success());
    let second = lawshield(
        dir.path(),
        &[
            "induce",
            "--laws",
            "a.laws",
            "--logs",
            "out/round_0/*.jsonl",
            "--out",
            "b.laws",
            "--report",
            "b.txt",
        ],
    );
    assert!(second.status.success());
    let a = fs::read(dir.path().join("a.laws")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.laws")).unwrap());
    assert!(fs::read_to_string(dir.path().join("b.txt"))
        .unwrap()
        .contains("added 0 law(s)"));
}

#[test]
fn graph_exports_dot_and_table() {
    let dir = tempfile::tempdir().unwrap();
    scripted_run(dir.path());
    let o = lawshield(
        dir.path(),
        &[
            "graph",
            "--logs",
            "out/round_0/*.jsonl",
            "--laws",
            "bundled:saycan_hard",
            "--dot",
            "task.dot",
        ],
    );
    assert!(o.status.success());
    let dot = fs::read_to_string(dir.path().join("task.dot")).unwrap();
    assert!(dot.starts_with("digraph task {"));
    let table = stdout(&o);
    assert!(table
        .lines()
        .any(|l| l.trim_start().starts_with("0 ") && l.contains("obs_has_diamond")));
}
