//! End-to-end runs of the `wstar` binary.

use std::f64::consts::LN_2;
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> String {
    format!("{}/examples/models/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn wstar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wstar")).args(args).env_remove("WSTAR_SEED").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn tracial_axioms_pass() {
    let out = wstar(&["check-axioms", "--model", &model("tracial2.json"), "--axioms", "1-20", "--samples", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["v"], 1);
    assert_eq!(v["summary"]["unexpected_fail"], 0);
    assert_eq!(v["reports"].as_array().unwrap().len(), v["summary"]["instances"].as_u64().unwrap() as usize);
}

#[test]
fn periodic_axiom_21_with_gamma_ln2() {
    let out = wstar(&["check-axioms", "--model", &model("geo.json"), "--axioms", "21", "--gamma", "ln2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((json(&out)["gamma"].as_f64().unwrap() - LN_2).abs() < 1e-15);
}

#[test]
fn axiom_failure_exits_1() {
    let out = wstar(&["check-axioms", "--model", &model("geo2x2.json"), "--axioms", "27", "--format", "text"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn invalid_inputs_exit_2_with_json_errors() {
    let cases: [(&[&str], &str); 5] = [
        (&["check-axioms", "--model", &model("malformed.json")], "Json"),
        (&["check-axioms", "--model", &model("p23.json"), "--axioms", "3-1"], "BadRange"),
        (&["check-axioms", "--model", &model("p23.json"), "--axioms", "21"], "BadInstantiation"),
        (&["check-axioms", "--model", &model("p23.json"), "--gamma", "lnx"], "BadParameters"),
        (&["spectrum", "--model", &model("p23.json"), "--constant", "w01"], "UnknownConstant"),
    ];
    for (args, kind) in cases {
        let out = wstar(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let e = stderr_json(&out);
        assert_eq!(e["v"], 1);
        assert_eq!(e["error"]["kind"], kind, "{args:?}");
    }
    let out = wstar(&["check-axioms", "--model", &model("p23.json"), "--format", "xml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "Usage");
}

#[test]
fn normg_lemma_on_p23() {
    let out = wstar(&["verify-lemmas", "--model", &model("p23.json"), "--lemma", "normg", "--samples", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let check = &v["report"]["checks"][0];
    assert_eq!(check["trials"], 100);
    assert_eq!(check["violations"], 0);
    assert!(v["worst_margin"].as_f64().unwrap() >= 0.0);
}

#[test]
fn every_lemma_passes_on_p23() {
    for lemma in ["contprod", "normg", "contmod", "spectral", "forms"] {
        let out = wstar(&["verify-lemmas", "--model", &model("p23.json"), "--lemma", lemma, "--samples", "8"]);
        assert_eq!(out.status.code(), Some(0), "{lemma}");
        assert_eq!(json(&out)["report"]["pass"], true);
    }
}

#[test]
fn forms_exponent_misuse() {
    let out = wstar(&["verify-lemmas", "--model", &model("p23.json"), "--lemma", "forms", "--alpha", "0.4", "--beta", "0.7"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "BadExponents");
}

fn spectrum(args: &[&str]) -> Value {
    let out = wstar(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    json(&out)
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn spectra_of_catalog_models() {
    let tr = spectrum(&["spectrum", "--model", &model("tracial4.json")]);
    assert_eq!(floats(&tr["flow_spectrum"]), vec![0.0]);
    let per = spectrum(&["spectrum", "--model", &model("periodic_half4.json")]);
    let sp = floats(&per["flow_spectrum"]);
    assert_eq!(sp.len(), 7);
    for r in sp {
        assert!(((r / LN_2) - (r / LN_2).round()).abs() < 1e-12, "{r}");
    }
    let geo = spectrum(&["spectrum", "--model", &model("geo.json"), "--constant", "w01"]);
    let w = floats(&geo["operator_spectrum"]);
    assert_eq!(w.len(), 1);
    assert!((w[0] - LN_2).abs() < 1e-12);
    let unit = spectrum(&["spectrum", "--model", &model("periodic_half4.json"), "--operator", &model("w01.json")]);
    assert!((floats(&unit["operator_spectrum"])[0] - LN_2).abs() < 1e-12);
}

#[test]
fn definability_table_and_out_file() {
    let dir = std::env::temp_dir().join(format!("wstar-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("chain.json");
    let out = wstar(&["definability", "--model", &model("p23.json"), "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["summary"]["failed"], 0);
    assert!(v["stages"].as_array().unwrap().iter().all(|r| r["pass"] == true));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn text_format_is_a_fixed_width_table() {
    let out = wstar(&["verify-lemmas", "--model", &model("p23.json"), "--lemma", "contmod", "--samples", "4", "--format", "text"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("CHECK"));
    let width = lines[0].len();
    assert!(lines[1..lines.len() - 1].iter().all(|l| l.len() == width), "{text}");
}

#[test]
fn seed_env_overrides_flag() {
    let args = ["verify-lemmas", "--model", &model("p23.json"), "--lemma", "contprod", "--samples", "4"];
    let with_flag = {
        let mut a = args.to_vec();
        a.extend(["--seed", "5"]);
        wstar(&a)
    };
    let with_env = Command::new(env!("CARGO_BIN_EXE_wstar")).args(args).args(["--seed", "1"]).env("WSTAR_SEED", "5").output().unwrap();
    assert_eq!(with_flag.stdout, with_env.stdout);
    assert_eq!(json(&with_env)["seed"], 5);
}
