//! Criterion 9: every command-line pipeline is byte-identical across two
//! runs with the same seed. Run with
//! `cargo test -p gchmm-cli --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

fn gchmm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gchmm"))
}

fn write_inputs(dir: &Path) {
    // A 12-person, 10-day contact list with duplicated duration rows.
    let mut contacts = String::new();
    let edges = [
        (1usize, 2usize),
        (2, 3),
        (3, 4),
        (4, 5),
        (5, 6),
        (6, 7),
        (7, 8),
        (8, 9),
        (9, 10),
        (10, 11),
        (11, 12),
        (1, 6),
        (2, 9),
    ];
    for day in 1..=10usize {
        for (k, &(i, j)) in edges.iter().enumerate() {
            if (day + k) % 3 != 0 {
                contacts.push_str(&format!("{day},{i},{j},15\n"));
            }
        }
    }
    std::fs::write(dir.join("contacts.csv"), contacts).unwrap();

    let mut covariates = String::from("node,f1,f2\n");
    for person in 1..=12usize {
        covariates.push_str(&format!(
            "{person},{},{}\n",
            (person as f64 - 6.5) / 6.5,
            ((person * 7) % 5) as f64 / 5.0 - 0.4,
        ));
    }
    std::fs::write(dir.join("covariates.csv"), covariates).unwrap();

    let params = serde_json::json!({
        "gamma": vec![0.3; 12],
        "alpha": vec![0.05; 12],
        "beta": vec![0.2; 12],
        "pi": 0.2,
        "theta": [[0.08, 0.1], [0.75, 0.7]],
    });
    std::fs::write(
        dir.join("params.json"),
        serde_json::to_string_pretty(&params).unwrap(),
    )
    .unwrap();
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(
            entry.file_name().to_string_lossy().into_owned(),
            std::fs::read(entry.path()).unwrap(),
        );
    }
    out
}

fn run_ok(cmd: &mut Command) {
    let output = cmd.output().unwrap();
    assert!(
        output.status.success(),
        "command failed: {:?}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn criterion_9_byte_identical_pipelines() {
    let work = tempfile::tempdir().unwrap();
    write_inputs(work.path());
    let contacts = work.path().join("contacts.csv");
    let params = work.path().join("params.json");
    let covariates = work.path().join("covariates.csv");

    let mut all_identical = true;
    let mut detail = String::new();

    // simulate → infer (each method) → evaluate → predict, twice each.
    for round in ["a", "b"] {
        let sim_dir = work.path().join(format!("sim_{round}"));
        run_ok(gchmm()
            .args(["simulate", "--network"])
            .arg(&contacts)
            .args(["--seed", "7", "--p-miss", "0.3", "--out-dir"])
            .arg(&sim_dir)
            .arg("--params")
            .arg(&params));

        for method in ["gbw", "gibbs", "bgem"] {
            let out = work.path().join(format!("{method}_{round}"));
            let mut cmd = gchmm();
            cmd.args(["infer", "--method", method, "--network"])
                .arg(&contacts)
                .arg("--symptoms-file")
                .arg(sim_dir.join("symptoms.csv"))
                .args(["--seed", "11", "--out-dir"])
                .arg(&out);
            match method {
                "gbw" => {
                    cmd.args(["--em-iters", "4", "--sweeps", "25"]);
                }
                "gibbs" => {
                    cmd.args(["--iterations", "80"]);
                }
                "bgem" => {
                    cmd.args(["--samples", "10", "--em-iters", "2", "--covariates"])
                        .arg(&covariates);
                }
                _ => unreachable!(),
            }
            run_ok(&mut cmd);
        }

        let eval_out = work.path().join(format!("metrics_{round}.json"));
        run_ok(gchmm()
            .args(["evaluate", "--truth-x"])
            .arg(sim_dir.join("states.csv"))
            .arg("--pred-marginals")
            .arg(work.path().join(format!("gibbs_{round}")).join("marginals.csv"))
            .arg("--out")
            .arg(&eval_out));

        let pred_dir = work.path().join(format!("pred_{round}"));
        run_ok(gchmm()
            .args(["predict", "--network"])
            .arg(&contacts)
            .arg("--symptoms-file")
            .arg(sim_dir.join("symptoms.csv"))
            .arg("--params")
            .arg(&params)
            .arg("--out-dir")
            .arg(&pred_dir));
    }

    for stage in ["sim", "gbw", "gibbs", "bgem", "pred"] {
        let a = dir_contents(&work.path().join(format!("{stage}_a")));
        let b = dir_contents(&work.path().join(format!("{stage}_b")));
        let same = a == b;
        all_identical &= same;
        detail.push_str(&format!("{stage} {} ", if same { "ok" } else { "DIFFERS" }));
    }
    let metrics_same = std::fs::read(work.path().join("metrics_a.json")).unwrap()
        == std::fs::read(work.path().join("metrics_b.json")).unwrap();
    all_identical &= metrics_same;
    detail.push_str(&format!("evaluate {}", if metrics_same { "ok" } else { "DIFFERS" }));

    println!(
        "criterion 9 (pipeline determinism): {} — {detail}",
        if all_identical { "PASS" } else { "FAIL" }
    );
    assert!(all_identical, "{detail}");
}
