//! End-to-end tests of the binary: argument handling, config diagnostics,
//! exit codes, and byte determinism of the artifacts.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lattice-kpp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn bounds_without_config_prints_the_reference_speed() {
    let out = run(&["bounds"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("2.0734"), "{}", stdout(&out));
}

#[test]
fn config_typo_gets_a_suggestion_and_usage_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.cfg");
    std::fs::write(
        &cfg,
        "kind = speed\n[forcing]\nfamily = constant\nrate = 1\n[run]\nspeeed = 2\n",
    )
    .unwrap();
    let out = run(&["speed", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("did you mean `seed`"), "{err}");
    assert!(err.contains("line 6"), "{err}");
}

#[test]
fn kind_mismatch_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.cfg");
    std::fs::write(&cfg, "kind = bounds\n[forcing]\nfamily = constant\nrate = 1\n").unwrap();
    let out = run(&["speed", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("declares kind `bounds`"), "{}", stderr(&out));
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    std::fs::write(
        &cfg,
        "name = det\nkind = speed\n[forcing]\nfamily = constant\nrate = 1\n\
         [run]\nwindow = 200\nt_end = 60\n",
    )
    .unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out_dir, _) in [(&out_a, 0), (&out_b, 1)] {
        let out = run(&["speed", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = read_dir_sorted(&out_a);
    let b = read_dir_sorted(&out_b);
    assert_eq!(a.len(), 3, "expected csv + json + svg");
    assert_eq!(a, b);
}

#[test]
fn parallel_jobs_run_disjoint_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg1 = dir.path().join("one.cfg");
    let cfg2 = dir.path().join("two.cfg");
    std::fs::write(&cfg1, "name = one\nkind = bounds\n[forcing]\nfamily = constant\nrate = 1\n")
        .unwrap();
    std::fs::write(
        &cfg2,
        "name = two\nkind = bounds\n[forcing]\nfamily = periodic\nmean = 1\namplitude = 0.5\nperiod = 1\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "bounds",
        "--config",
        cfg1.to_str().unwrap(),
        "--config",
        cfg2.to_str().unwrap(),
        "--jobs",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out_dir.join("one-bounds.json").exists());
    assert!(out_dir.join("two-bounds.json").exists());
    let text = stdout(&out);
    let one = text.find("== one").unwrap();
    let two = text.find("== two").unwrap();
    assert!(one < two, "summaries keep input order:\n{text}");
}

#[test]
fn colliding_artifact_names_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("same.cfg");
    std::fs::write(&cfg, "name = same\nkind = bounds\n[forcing]\nfamily = constant\nrate = 1\n")
        .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "bounds",
        "--config",
        cfg.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("collide"), "{}", stderr(&out));
}

#[test]
fn shipped_scenarios_parse_and_declare_matching_names() {
    let scen_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in std::fs::read_dir(&scen_dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("cfg") {
            continue;
        }
        seen += 1;
        let scn = lattice_kpp::parse_scenario(&path)
            .unwrap_or_else(|e| panic!("{} does not parse: {e}", path.display()));
        let stem = path.file_stem().unwrap().to_str().unwrap();
        assert_eq!(scn.name, stem, "scenario name must match its file stem");
        assert!(scn.out.is_none(), "shipped scenarios leave `out` to the caller");
    }
    assert!(seen >= 8, "scenario corpus went missing ({seen} files)");
}
