use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const ORTHOGONAL: &str = r#"{"d":2,"k":2,"matrices":[[[[1,0],[0,0]],[[0,0],[0,0]]],[[[0,0],[0,0]],[[0,0],[1,0]]]]}"#;
const IDENTICAL: &str =
    r#"{"d":2,"k":2,"matrices":[[[[0.5,0],[0,0]],[[0,0],[0.5,0]]],[[[0.5,0],[0,0]],[[0,0],[0.5,0]]]]}"#;
// second matrix has a negative eigenvalue
const NOT_PSD: &str = r#"{"d":2,"k":2,"matrices":[[[[1,0],[0,0]],[[0,0],[0,0]]],[[[0.5,0],[1,0]],[[1,0],[0.5,0]]]]}"#;

fn cqcode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqcode"))
        .args(args)
        .env_remove("CQCODE_DIM_CAP")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decompose_small_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let o = cqcode(&["decompose", "--n", "2", "--d", "2", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let recs: Vec<csv::StringRecord> = rows.records().map(|r| r.unwrap()).collect();
    assert_eq!(&recs[0][0], "(2,0)");
    assert_eq!((&recs[0][1], &recs[0][2]), ("3", "1"));
    assert_eq!(&recs[1][0], "(1,1)");
    assert_eq!((&recs[1][1], &recs[1][2]), ("1", "1"));
    assert_eq!(&recs[2][3], "4");
}

#[test]
fn decompose_single_factor_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = cqcode(&["decompose", "--n", "1", "--d", "5", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["components"].as_array().unwrap().len(), 1);
    assert_eq!(v["completeness_residue"].as_f64().unwrap(), 0.0);
}

#[test]
fn capacity_exit_code_and_env_override() {
    let o = cqcode(&["decompose", "--n", "8", "--d", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("6561"));
    let o = Command::new(env!("CARGO_BIN_EXE_cqcode"))
        .args(["decompose", "--n", "4", "--d", "3"])
        .env("CQCODE_DIM_CAP", "16")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn malformed_channel_names_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write(dir.path(), "bad.json", NOT_PSD);
    let o = cqcode(&[
        "simulate",
        "--channel",
        s(&ch),
        "--p",
        "1/2,1/2",
        "--rate",
        "0.3",
        "--n",
        "2",
    ]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("matrix 1"), "{}", stderr(&o));
}

#[test]
fn invalid_inputs_exit_four() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write(dir.path(), "orth.json", ORTHOGONAL);
    let bad_p = cqcode(&[
        "simulate",
        "--channel",
        s(&ch),
        "--p",
        "0.3,0.3",
        "--rate",
        "0.3",
        "--n",
        "2",
    ]);
    assert_eq!(code(&bad_p), 4);
    let missing = cqcode(&[
        "simulate",
        "--channel",
        "/nonexistent/ch.json",
        "--p",
        "1/2,1/2",
        "--rate",
        "0.3",
        "--n",
        "2",
    ]);
    assert_eq!(code(&missing), 4);
    let negative = cqcode(&[
        "simulate",
        "--channel",
        s(&ch),
        "--p",
        "1/2,1/2",
        "--rate",
        "-1",
        "--n",
        "2",
    ]);
    assert_eq!(code(&negative), 4);
    assert_eq!(code(&cqcode(&["no-such-command"])), 4);
}

#[test]
fn packing_failure_exit_three() {
    let o = cqcode(&[
        "codebook",
        "--n",
        "3",
        "--p",
        "1/3,1/3,1/3",
        "--m",
        "2",
        "--max-attempts",
        "4",
    ]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("worst"), "{}", stderr(&o));
}

#[test]
fn codebook_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = cqcode(&[
            "codebook",
            "--n",
            "6",
            "--p",
            "1/2,1/2",
            "--m",
            "4",
            "--seed",
            "9",
            "--out",
            s(out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let v: serde_json::Value = serde_json::from_slice(&ta).unwrap();
    assert_eq!(v["words"].as_array().unwrap().len(), 4);
    assert_eq!(v["certificate"]["passed"], true);
}

#[test]
fn simulate_is_byte_identical_and_config_driven() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write(dir.path(), "orth.json", ORTHOGONAL);
    let cfg = write(
        dir.path(),
        "run.toml",
        &format!(
            "[simulate]\nchannel = {:?}\np = \"1/2,1/2\"\nrate = 0.3\nn = \"2..4\"\nseed = 5\nrepeats = 2\n",
            s(&ch)
        ),
    );
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let csv_path = dir.path().join(format!("{name}.csv"));
        let json_path = dir.path().join(format!("{name}.json"));
        let o = cqcode(&[
            "--config",
            s(&cfg),
            "simulate",
            "--out",
            s(&csv_path),
            "--summary",
            s(&json_path),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outputs.push((std::fs::read(&csv_path).unwrap(), std::fs::read(&json_path).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);

    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let eps: Vec<(usize, f64)> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[3].parse().unwrap())
        })
        .collect();
    assert_eq!(eps.len(), 6);
    let summary: serde_json::Value = serde_json::from_slice(&outputs[0].1).unwrap();
    assert_eq!(summary["epsilon_non_increasing"], true);
    assert_eq!(summary["unit"], "nats");

    // a flag beats the config value
    let o = cqcode(&["--config", s(&cfg), "simulate", "--n", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[decompose]\nn = 2\nd = 2\nsize = 4\n");
    let o = cqcode(&["--config", s(&cfg), "decompose"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn exponent_curves() {
    let dir = tempfile::tempdir().unwrap();
    let orth = write(dir.path(), "orth.json", ORTHOGONAL);
    let o = cqcode(&[
        "exponent",
        "--channel",
        s(&orth),
        "--p",
        "1/2,1/2",
        "--r-max",
        "0.6",
        "--r-steps",
        "7",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    for r in reader.records() {
        let r = r.unwrap();
        let (rate, u, h): (f64, f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(h >= u - 1e-9);
        assert!((h - (std::f64::consts::LN_2 - rate)).abs() <= 1e-5, "R={rate} h={h}");
    }

    let same = write(dir.path(), "same.json", IDENTICAL);
    let o = cqcode(&[
        "exponent",
        "--channel",
        s(&same),
        "--p",
        "1/2,1/2",
        "--r-min",
        "0.1",
        "--r-max",
        "0.5",
        "--r-steps",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    for r in reader.records() {
        let r = r.unwrap();
        assert!(r[1].parse::<f64>().unwrap() <= 0.0);
        assert!(r[2].parse::<f64>().unwrap() <= 0.0);
    }
}

#[test]
fn bits_toggle_only_rescales() {
    let dir = tempfile::tempdir().unwrap();
    let orth = write(dir.path(), "orth.json", ORTHOGONAL);
    let args = [
        "exponent",
        "--channel",
        s(&orth),
        "--p",
        "1/2,1/2",
        "--r-steps",
        "3",
        "--format",
        "json",
    ];
    let nats: serde_json::Value = serde_json::from_slice(&cqcode(&args).stdout).unwrap();
    let mut with_bits = vec!["--bits"];
    with_bits.extend_from_slice(&args);
    let bits: serde_json::Value = serde_json::from_slice(&cqcode(&with_bits).stdout).unwrap();
    let a = nats["rows"][0]["channel_aware"].as_f64().unwrap();
    let b = bits["rows"][0]["channel_aware"].as_f64().unwrap();
    assert!((a / std::f64::consts::LN_2 - b).abs() <= 1e-12);
    assert_eq!(bits["unit"], "bits");
}

#[test]
fn verify_default_suite_passes() {
    let o = cqcode(&["verify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn verify_fault_hook_fails_named_check() {
    let o = cqcode(&["verify", "--inject-fault", "corrupt-projector"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("decoder-povm"), "{}", stderr(&o));
}

#[test]
fn verify_lemma_only_reports_slack() {
    let o = cqcode(&["verify", "--only", "lemma1", "--verbose"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("lemma1") && text.contains("PASS") && text.contains("slack"));
    assert_eq!(code(&cqcode(&["verify", "--only", "nonsense"])), 4);
}
