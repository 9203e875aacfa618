use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qre(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qre"))
        .args(args)
        .env("QRE_OUTPUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn abs(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV written by the tool, metadata lines skipped.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn trace_logit_on_prism_respects_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = qre(
        dir.path(),
        &[
            "trace-logit",
            "--game",
            "prism",
            "--lambda-max",
            "50",
            "--check-bound",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("trace-logit.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    for key in ["# tool=qre", "# version=", "# seed=0", "# config_hash="] {
        assert!(text.contains(key), "missing {key}");
    }
    let (header, rows) = csv_rows(&path);
    assert_eq!(&header[..3], &["lambda", "residual", "p1_a1"]);
    let col = header.iter().position(|h| h == "p1_a2").unwrap();
    let max = rows
        .iter()
        .map(|r| r[col].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(max <= 1.0 / 3.0 + 1e-6);
    assert_eq!(rows.last().unwrap()[0], "50");
}

#[test]
fn qrf_quad_matches_logistic_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = qre(
        dir.path(),
        &[
            "qrf-quad",
            "--marginal",
            "gumbel",
            "--scale",
            "1",
            "--x",
            "0,1",
        ],
    );
    assert_eq!(code(&out), 0);
    let v = read_json(&dir.path().join("qrf-quad.json"));
    let p = &v["result"]["estimate"]["probabilities"];
    let expected = 1.0 / (1.0 + std::f64::consts::E);
    assert!((p[0].as_f64().unwrap() - expected).abs() < 1e-10);
    assert!((p[1].as_f64().unwrap() - (1.0 - expected)).abs() < 1e-10);
    assert!((p[0].as_f64().unwrap() - 0.2689).abs() < 1e-4);
}

#[test]
fn build_game_round_trips_through_game_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = qre(
        dir.path(),
        &["build-game", "--family", "paradox", "--k", "3"],
    );
    assert_eq!(code(&out), 0);
    let path = dir.path().join("build-game.json");
    let v = read_json(&path);
    assert_eq!(v["result"]["players"], 2);
    assert_eq!(v["result"]["actions"], serde_json::json!([3, 2]));
    assert_eq!(
        v["result"]["payoffs"][0],
        serde_json::json!([5.0, 5.0, 5.0, 1.0, 2.0, 4.0])
    );

    // the written file (envelope included) loads as a game
    let game = path.to_str().unwrap();
    let ok = qre(
        dir.path(),
        &["nash-check", "--game", game, "--profile", "0,0.35,0.65;1,0"],
    );
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let not_nash = qre(
        dir.path(),
        &[
            "nash-check",
            "--game",
            game,
            "--profile",
            "0,0.35,0.65;0.5,0.5",
        ],
    );
    assert_eq!(code(&not_nash), 1);
    let v = read_json(&dir.path().join("nash-check.json"));
    assert_eq!(v["result"]["nash"], false);

    // a bare game JSON loads too
    let bare = dir.path().join("bare.json");
    std::fs::write(
        &bare,
        r#"{"players":2,"actions":[2,2],"payoffs":[[1,0,0,1],[1,0,0,1]]}"#,
    )
    .unwrap();
    let out = qre(
        dir.path(),
        &[
            "nash-check",
            "--game",
            bare.to_str().unwrap(),
            "--profile",
            "1,0;1,0",
        ],
    );
    assert_eq!(code(&out), 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qre(dir.path(), &["no-such-command"])), 2);
    assert_eq!(
        code(&qre(
            dir.path(),
            &["trace-logit", "--game", "/no/such/file.json"]
        )),
        2
    );
    assert_eq!(
        code(&qre(
            dir.path(),
            &["qrf-quad", "--x", "0,1", "--format", "csv"]
        )),
        2
    );
    assert_eq!(
        code(&qre(
            dir.path(),
            &["dice-oracle", "--x", "0,1,2", "--base", "0,1,2"]
        )),
        2
    );
    let eps = qre(
        dir.path(),
        &[
            "exclusion-certificate",
            "--game",
            "paradox",
            "--epsilon",
            "0.9",
        ],
    );
    assert_eq!(code(&eps), 2);
    assert!(String::from_utf8_lossy(&eps.stderr).contains("max feasible"));
    // negative control: reversed gaps produce counterexamples
    assert_eq!(
        code(&qre(dir.path(), &["verify-dice-bound", "--reverse-gaps"])),
        1
    );
    assert_eq!(code(&qre(dir.path(), &["verify-dice-bound"])), 0);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = qre(
            dir.path(),
            &[
                "qrf-mc",
                "--x",
                "-1,0.5,2",
                "--marginal",
                "normal",
                "--samples",
                "50000",
                "--seed",
                seed,
                "-o",
                &abs(dir.path(), name),
            ],
        );
        assert_eq!(code(&out), 0);
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let a = run("a.json", "5");
    let b = run("b.json", "5");
    let c = run("c.json", "6");
    assert_eq!(a, b);
    assert_ne!(a, c);

    let region = |name: &str| {
        assert_eq!(
            code(&qre(
                dir.path(),
                &[
                    "region-sample",
                    "--count",
                    "300",
                    "-o",
                    &abs(dir.path(), name)
                ]
            )),
            0
        );
        std::fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(region("r1.csv"), region("r2.csv"));
}

#[test]
fn serial_and_parallel_results_agree() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["qrf-mc", "--x", "0,0.2,0.1", "--samples", "40000"];
    let (p_out, s_out) = (abs(dir.path(), "p.json"), abs(dir.path(), "s.json"));
    let par = qre(dir.path(), &[&args[..], &["-o", &p_out]].concat());
    let ser = qre(
        dir.path(),
        &[&args[..], &["-o", &s_out, "--serial"]].concat(),
    );
    assert_eq!(code(&par), 0);
    assert_eq!(code(&ser), 0);
    let (p, s) = (
        read_json(&dir.path().join("p.json")),
        read_json(&dir.path().join("s.json")),
    );
    assert_eq!(p["result"], s["result"]);
    assert_ne!(p["meta"]["config_hash"], s["meta"]["config_hash"]);
}

#[test]
fn certificate_and_region_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = qre(
        dir.path(),
        &[
            "exclusion-certificate",
            "--game",
            "paradox",
            "--sigma-star",
            "0,0.35,0.65;1,0",
            "--epsilon",
            "0.01",
            "--starts",
            "3",
            "--nodes",
            "512",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cert = read_json(&dir.path().join("exclusion-certificate.json"));
    let evidence = cert["result"]["numeric_evidence"].as_array().unwrap();
    assert_eq!(evidence.len(), 3);
    for e in evidence {
        assert!(e["min_distance"].as_f64().unwrap() > 0.01);
    }

    let out = qre(
        dir.path(),
        &["region-sample", "--count", "200", "--format", "csv"],
    );
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&dir.path().join("region-sample.csv"));
    assert_eq!(header.last().unwrap(), "classification");
    assert_eq!(rows.len(), 200);
}

#[test]
fn structural_solver_accepts_family_files() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("family.json");
    std::fs::write(
        &fam,
        r#"[{"player":0,"marginal":"normal","scale":0.5},{"player":1,"marginal":"gumbel","scale":2.0}]"#,
    )
    .unwrap();
    let out = qre(
        dir.path(),
        &[
            "solve-structural",
            "--game",
            "paradox",
            "--family",
            fam.to_str().unwrap(),
            "--starts",
            "1",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("solve-structural.json"));
    assert_eq!(v["result"]["solutions"].as_array().unwrap().len(), 2);
    assert_eq!(v["result"]["family"][0]["marginal"], "normal");
}
