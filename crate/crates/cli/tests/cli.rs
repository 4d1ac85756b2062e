//! End-to-end runs of the `wavehmm` binary.

use std::path::Path;
use std::process::{Command, Output};

fn wavehmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavehmm"))
        .args(args)
        .env_remove("WAVEHMM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn tensor_probe_prints_the_closed_form() {
    let o = wavehmm(&["tensor", "--x1", "0.25", "--mode", "exact"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "diag(0.455961, 0.48)");
    let o = wavehmm(&["tensor", "--x1", "0.25", "--mode", "hmm", "--micro-n", "64"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("diag(0.456"));
}

#[test]
fn selftest_passes() {
    let o = wavehmm(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_with_one() {
    for args in [
        &["frobnicate"][..],
        &["tensor"],
        &["tensor", "--x1", "abc"],
        &["space-study", "--set", "mesh_level=[2]"],
        &["micro-study", "--coupling", "perodic"],
        &["space-study", "--config", "/nonexistent/config.cfg"],
        &["space-study", "--orders", "3"],
    ] {
        let o = wavehmm(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(o.stdout.is_empty() && !o.stderr.is_empty(), "{args:?}");
    }
    assert_eq!(wavehmm(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.cfg");
    std::fs::write(&cfg, "mesh_levels = [2]\n[hmm]\nmicro_subdivison = [8]\n").unwrap();
    let o = wavehmm(&["space-study", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("micro_subdivison"));
    assert!(!dir.path().join("typo.csv").exists());
}

#[test]
fn micro_study_writes_reproducible_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = configs().join("micro.cfg");
    let run = || wavehmm(&["micro-study", "-c", cfg.to_str().unwrap(), "-o", out, "--micro-n", "16,32,64"]);
    assert_eq!(run().status.code(), Some(0));
    let csv = dir.path().join("micro.csv");
    let first = std::fs::read(&csv).unwrap();
    let svg = std::fs::read_to_string(dir.path().join("micro.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("class=\"point\""));
    assert_eq!(run().status.code(), Some(0));
    assert_eq!(std::fs::read(&csv).unwrap(), first);
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 3);
    let rate: f64 = rows[2][13].parse().unwrap();
    assert!((1.8..=2.2).contains(&rate), "{rate}");
    // nothing but the two outputs is left behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn overrides_win_over_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("base.cfg");
    std::fs::write(&cfg, "[hmm]\nmicro_subdivisions = [8, 16]\ndelta = 0.0625\n").unwrap();
    let c = cfg.to_str().unwrap();
    let printed = |extra: &[&str]| {
        let mut args = vec!["print-config", "micro", "-c", c];
        args.extend_from_slice(extra);
        let o = wavehmm(&args);
        assert_eq!(o.status.code(), Some(0));
        stdout(&o)
    };
    assert!(printed(&[]).contains("micro_subdivisions = [8, 16]"));
    let set = printed(&["--set", "hmm.micro_subdivisions=[4]"]);
    assert!(set.contains("micro_subdivisions = [4]") && set.contains("delta = 0.0625"));
    // dedicated flags come after --set
    let both = printed(&["--set", "hmm.delta=0.125", "--delta", "0.25"]);
    assert!(both.contains("delta = 0.25"));
}

#[test]
fn printed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["space", "time", "micro", "plateau"] {
        let cfg = configs().join(format!("{kind}.cfg"));
        let once = stdout(&wavehmm(&["print-config", kind, "-c", cfg.to_str().unwrap()]));
        let path = dir.path().join(format!("{kind}.toml"));
        std::fs::write(&path, &once).unwrap();
        let twice = stdout(&wavehmm(&["print-config", kind, "-c", path.to_str().unwrap()]));
        assert!(!once.is_empty());
        assert_eq!(once, twice, "{kind}");
    }
}

#[test]
fn time_study_flags_explicit_divergence() {
    // the shipped time config on a 2⁻⁴ mesh with a short sweep
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("time.cfg");
    let o = wavehmm(&[
        "time-study",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
        "--levels",
        "4",
        "--taus",
        "0.0625,0.03125,0.015625",
        "--reference",
        "reference",
        "--reference-tau",
        "0.001953125",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("time.csv"));
    for r in &rows {
        match r[1].as_str() {
            "explicit_mp" => assert_eq!((r[12].as_str(), r[14].as_str()), ("inf", "true")),
            _ => {
                assert_eq!(r[14], "false");
                if let Ok(rate) = r[13].parse::<f64>() {
                    assert!((1.8..=2.2).contains(&rate), "{r:?}");
                }
            }
        }
    }
    assert_eq!(rows.iter().filter(|r| !r[13].is_empty()).count(), 4);
    let svg = std::fs::read_to_string(dir.path().join("time.svg")).unwrap();
    assert_eq!(svg.matches("class=\"diverged\"").count(), 3);
}

#[test]
fn strict_divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = wavehmm(&[
        "space-study",
        "--schemes",
        "explicit_mp",
        "--orders",
        "2",
        "--levels",
        "4",
        "--taus",
        "0.0625",
        "--strict",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverge"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn fixed_point_failure_exits_with_two() {
    let o = wavehmm(&[
        "solve",
        "--schemes",
        "implicit_mp",
        "--levels",
        "2",
        "--taus",
        "0.25",
        "--set",
        "solver.fp_maxit=1",
        "--set",
        "solver.fp_tol=1e-15",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn solve_prints_one_row_and_output_dir_comes_from_the_environment() {
    let o = wavehmm(&["solve", "--levels", "3", "--taus", "0.0625", "--orders", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("solve,imex,2,0.125,0.0625,"));

    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wavehmm"))
        .args(["micro-study", "--micro-n", "8,16", "--no-plot", "--name", "env"])
        .env("WAVEHMM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("env.csv").exists() && !dir.path().join("env.svg").exists());
}

#[test]
fn shipped_time_config_gives_second_order_and_explicit_divergence() {
    // the documented invocation, unmodified: about half a minute
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("time.cfg");
    let o = wavehmm(&["time-study", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap(), "--no-plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("time.csv"));
    let against_reference: Vec<_> = rows.iter().filter(|r| r[0] == "time").collect();
    assert_eq!(against_reference.len(), 18);
    for r in against_reference {
        if r[1] == "explicit_mp" {
            assert_eq!(r[14], "true", "{r:?}");
        } else if !r[13].is_empty() {
            let rate: f64 = r[13].parse().unwrap();
            assert!((1.8..=2.2).contains(&rate), "{r:?}");
        }
    }
}
