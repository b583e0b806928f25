//! Shared CLI scenario: input fixtures, the scripted command sequence, golden
//! comparison and the expected error paths. `L2V_BLESS=1` rewrites the
//! checked-in inputs and goldens.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use l2v_core::tensor_store::{ActivationMatrix, Precision, Role};
use serde_json::Value;

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_l2v"))
}

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn blessing() -> bool {
    std::env::var_os("L2V_BLESS").is_some()
}

#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn l2v(dir: &Path, args: &[&str]) -> Outcome {
    let out = Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .expect("spawn l2v");
    Outcome {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn tensor(rows: &[Vec<f64>]) -> ActivationMatrix<f64> {
    ActivationMatrix::from_rows(rows).unwrap()
}

/// Smooth vector without Nyquist energy: survives k = d unchanged.
pub fn identity_w() -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    (0..16)
        .map(|t| {
            let x = t as f64 / 16.0;
            0.3 + (tau * x + 0.2).cos() + 0.4 * (3.0 * tau * x + 1.0).cos()
        })
        .collect()
}

/// Hand-specified inputs, rebuilt deterministically.
pub fn input_files() -> Vec<(&'static str, Vec<u8>)> {
    let cross = tensor(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]])
        .with_role(Role::Direction);
    let identical = tensor(&vec![vec![0.5, -1.0, 2.0, 0.25]; 3]);
    // pos - neg is the alternating (Nyquist-only) vector: nothing survives k = 2
    let neg_rows = vec![
        vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
        vec![-0.3, 0.0, 0.9, 0.1, -0.2, 0.4, 0.0, 0.6],
    ];
    let pos_rows: Vec<Vec<f64>> = neg_rows
        .iter()
        .map(|r| r.iter().enumerate().map(|(i, x)| x + if i % 2 == 0 { 1.0 } else { -1.0 }).collect())
        .collect();
    let flat_pos = tensor(&pos_rows).with_role(Role::Positive).with_layer(1);
    let flat_neg = tensor(&neg_rows).with_role(Role::Negative).with_layer(1);

    let w = identity_w();
    let id_neg_rows: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..16).map(|j| ((i * 16 + j) as f64 * 0.37).sin()).collect())
        .collect();
    let id_pos_rows: Vec<Vec<f64>> = id_neg_rows
        .iter()
        .map(|r| r.iter().zip(&w).map(|(a, b)| a + b).collect())
        .collect();
    let id_pos = tensor(&id_pos_rows).with_role(Role::Positive).with_layer(3);
    let id_neg = tensor(&id_neg_rows).with_role(Role::Negative).with_layer(3);

    let json = |v: Value| {
        let mut b = serde_json::to_vec_pretty(&v).unwrap();
        b.push(b'\n');
        b
    };
    vec![
        ("cross.lvt", cross.to_bytes(Precision::F64).unwrap()),
        ("identical.lvt", identical.to_bytes(Precision::F64).unwrap()),
        ("flat_pos.lvt", flat_pos.to_bytes(Precision::F64).unwrap()),
        ("flat_neg.lvt", flat_neg.to_bytes(Precision::F64).unwrap()),
        ("id_pos.lvt", id_pos.to_bytes(Precision::F64).unwrap()),
        ("id_neg.lvt", id_neg.to_bytes(Precision::F64).unwrap()),
        ("tokens.json", json(serde_json::json!([9, 12, 30, 4, 17, 1, 2, 3, 4]))),
        (
            "clean.json",
            json(serde_json::json!({
                "n": 60, "d": 32, "k_signal": 6, "signal_norm": 4.0,
                "noise_energy": 0.0, "residual_energy": 10.0, "seed": 1
            })),
        ),
        (
            "noisy.json",
            json(serde_json::json!({
                "n": 60, "d": 32, "k_signal": 6, "signal_norm": 4.0,
                "noise_energy": 50.0, "residual_energy": 10.0, "seed": 2
            })),
        ),
        (
            "extract.json",
            json(serde_json::json!({
                "pos": "src_pos.lvt", "neg": "src_neg.lvt", "out": "sv.lvt",
                "k": 6, "d_target": 48, "alpha": 0.5, "layer_target": 2
            })),
        ),
    ]
}

/// Copies the checked-in inputs into `dir`, checking them against the
/// builders (or rewriting them when blessing).
pub fn stage_inputs(dir: &Path) -> Result<(), String> {
    let src = fixtures().join("inputs");
    for (name, bytes) in input_files() {
        let path = src.join(name);
        if blessing() {
            std::fs::create_dir_all(&src).unwrap();
            std::fs::write(&path, &bytes).unwrap();
        }
        let on_disk = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        if on_disk != bytes {
            return Err(format!("checked-in input {name} differs from its builder"));
        }
        std::fs::write(dir.join(name), &on_disk).unwrap();
    }
    Ok(())
}

/// Scripted successful runs, in order.
pub const STEPS: &[&[&str]] = &[
    &["toy-dump", "--net", "source", "--layer", "2", "--n", "16", "--seed", "7",
      "--out-pos", "src_pos.lvt", "--out-neg", "src_neg.lvt", "--out-dirs", "src_dirs.lvt"],
    &["toy-dump", "--net", "target", "--layer", "2", "--n", "4", "--seed", "8",
      "--out-pos", "tgt_pos.lvt", "--out-neg", "tgt_neg.lvt"],
    &["extract", "--pos", "id_pos.lvt", "--neg", "id_neg.lvt", "--out", "id_sv.lvt", "--k", "16"],
    // the config file says k = 6; the flag wins
    &["extract", "--config", "extract.json", "--k", "12"],
    &["toy-run", "--net", "target", "--tokens", "tokens.json", "--vector", "sv.lvt", "--out", "logits.csv"],
    &["toy-run", "--net", "target", "--tokens", "tokens.json", "--vector", "sv.lvt", "--alpha", "0",
      "--out", "logits_a0.csv"],
    &["steer", "--hidden", "tgt_pos.lvt", "--vector", "sv.lvt", "--out", "steered.lvt"],
    &["analyze", "--dirs", "src_dirs.lvt", "--m", "3", "--out", "proj.csv", "--svg", "proj.svg"],
    &["analyze", "--dirs", "cross.lvt", "--out", "cross.csv", "--manifest", "cross_manifest.json"],
    &["analyze", "--dirs", "identical.lvt", "--m", "1", "--out", "identical.csv"],
    &["bands", "--b", "src_dirs.lvt", "--k", "12", "--out", "bands.csv", "--svg", "bands.svg"],
    &["bands", "--a", "src_dirs.lvt", "--b", "src_dirs.lvt", "--n-bands", "4", "--out", "bands_same.csv"],
    &["drift", "--clean", "clean.json", "--noisy", "noisy.json", "--out", "drift.csv", "--svg", "drift.svg"],
];

/// Files compared byte-for-byte (manifests without their timestamp).
pub const GOLDEN: &[&str] = &[
    "src_pos.lvt", "src_neg.lvt", "src_dirs.lvt", "src_pos.manifest.json",
    "tgt_pos.lvt", "tgt_neg.lvt",
    "id_sv.lvt", "id_sv.manifest.json",
    "sv.lvt", "sv.manifest.json",
    "logits.csv", "logits.manifest.json", "logits_a0.csv", "logits_a0.manifest.json",
    "steered.lvt", "steered.manifest.json",
    "proj.csv", "proj.svg", "proj.manifest.json",
    "cross.csv", "cross_manifest.json",
    "identical.csv", "identical.manifest.json",
    "bands.csv", "bands.svg", "bands.manifest.json",
    "bands_same.csv",
    "drift.csv", "drift.svg", "drift.manifest.json",
];

pub fn run_steps(dir: &Path) -> Result<(), String> {
    for step in STEPS {
        let o = l2v(dir, step);
        if o.code != 0 {
            return Err(format!("`l2v {}` exited {}: {}", step.join(" "), o.code, o.stderr));
        }
    }
    Ok(())
}

pub fn without_timestamp(name: &str, bytes: Vec<u8>) -> Vec<u8> {
    if !name.ends_with(".json") {
        return bytes;
    }
    let mut v: Value = serde_json::from_slice(&bytes).expect("manifest is JSON");
    if let Value::Object(m) = &mut v {
        m.remove("timestamp");
    }
    let mut out = serde_json::to_vec_pretty(&v).unwrap();
    out.push(b'\n');
    out
}

/// Names of produced files that differ from the goldens.
pub fn golden_mismatches(dir: &Path) -> Vec<String> {
    let gdir = fixtures().join("golden");
    let mut bad = Vec::new();
    for name in GOLDEN {
        let got = match std::fs::read(dir.join(name)) {
            Ok(b) => without_timestamp(name, b),
            Err(e) => {
                bad.push(format!("{name}: not produced ({e})"));
                continue;
            }
        };
        let path = gdir.join(name);
        if blessing() {
            std::fs::create_dir_all(&gdir).unwrap();
            std::fs::write(&path, &got).unwrap();
        }
        match std::fs::read(&path) {
            Ok(want) if want == got => {}
            Ok(_) => bad.push(format!("{name}: differs from golden")),
            Err(e) => bad.push(format!("{name}: no golden ({e})")),
        }
    }
    bad
}

pub struct ErrorCase {
    pub args: &'static [&'static str],
    pub code: i32,
    pub stage: &'static str,
    /// Output that must not exist afterwards.
    pub output: &'static str,
}

/// Failing invocations; run after `run_steps` so the scenario's files exist.
pub const ERROR_CASES: &[ErrorCase] = &[
    ErrorCase {
        args: &["extract", "--pos", "missing.lvt", "--neg", "src_neg.lvt", "--out", "e1.lvt", "--k", "4"],
        code: 3,
        stage: "read_positive",
        output: "e1.lvt",
    },
    ErrorCase {
        args: &["analyze", "--dirs", "tokens.json", "--out", "e2.csv"],
        code: 3,
        stage: "read_dirs",
        output: "e2.csv",
    },
    ErrorCase {
        args: &["extract", "--pos", "src_pos.lvt", "--neg", "src_neg.lvt", "--out", "e3.lvt"],
        code: 2,
        stage: "resolve_config",
        output: "e3.lvt",
    },
    ErrorCase {
        args: &["analyze", "--dirs", "cross.lvt", "--out", "e4.csv", "--bogus"],
        code: 2,
        stage: "parse_args",
        output: "e4.csv",
    },
    ErrorCase {
        args: &["bands", "--a", "cross.lvt", "--b", "src_dirs.lvt", "--out", "e5.csv"],
        code: 4,
        stage: "read_a",
        output: "e5.csv",
    },
    ErrorCase {
        args: &["toy-run", "--net", "source", "--tokens", "tokens.json", "--vector", "sv.lvt", "--out", "e6.csv"],
        code: 4,
        stage: "check_vector",
        output: "e6.csv",
    },
    ErrorCase {
        args: &["extract", "--pos", "src_pos.lvt", "--neg", "src_pos.lvt", "--out", "e7.lvt", "--k", "4"],
        code: 4,
        stage: "direction_set",
        output: "e7.lvt",
    },
    ErrorCase {
        args: &["extract", "--pos", "flat_pos.lvt", "--neg", "flat_neg.lvt", "--out", "e8.lvt", "--k", "2"],
        code: 5,
        stage: "extract_pattern",
        output: "e8.lvt",
    },
    ErrorCase {
        args: &["analyze", "--dirs", "cross.lvt", "--m", "3", "--out", "e9.csv", "--svg", "e9.svg"],
        code: 2,
        stage: "pca",
        output: "e9.csv",
    },
];

/// Checks one error case: exit code, JSON record on stderr, no output.
pub fn check_error_case(dir: &Path, case: &ErrorCase) -> Result<(), String> {
    let o = l2v(dir, case.args);
    let cmd = case.args.join(" ");
    if o.code != case.code {
        return Err(format!("`{cmd}`: exit {} (want {})", o.code, case.code));
    }
    let rec: Value = serde_json::from_str(o.stderr.trim())
        .map_err(|e| format!("`{cmd}`: stderr is not a JSON record ({e}): {}", o.stderr))?;
    let err = &rec["error"];
    if err["exit_code"] != case.code || err["stage"] != case.stage || !err["message"].is_string() {
        return Err(format!("`{cmd}`: unexpected record {rec}"));
    }
    if dir.join(case.output).exists() {
        return Err(format!("`{cmd}`: partial output {} left behind", case.output));
    }
    let manifest = Path::new(case.output).with_extension("manifest.json");
    if dir.join(&manifest).exists() {
        return Err(format!("`{cmd}`: manifest written on failure"));
    }
    Ok(())
}

/// Runs the scenario twice in fresh directories and compares every output
/// byte-for-byte (manifests modulo timestamp).
pub fn rerun_identical() -> Result<(), String> {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        stage_inputs(d)?;
        run_steps(d)?;
    }
    for name in GOLDEN {
        let x = without_timestamp(name, std::fs::read(a.path().join(name)).unwrap());
        let y = without_timestamp(name, std::fs::read(b.path().join(name)).unwrap());
        if x != y {
            return Err(format!("{name} differs between runs"));
        }
    }
    Ok(())
}
