use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evolvid_core::aero::table_v_defaults;
use evolvid_core::data::{read_flight_csv, save_flight_csv, synthesize, ManeuverConfig};
use evolvid_core::model::ModelBody;
use evolvid_core::{CoeffKind, CoefficientModel, Input, ModelSnapshot, ModelType};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evolvid")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().trim().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_snapshot(path: &Path, model: CoefficientModel) {
    std::fs::write(path, ModelSnapshot::new(model, None).to_json().unwrap()).unwrap();
}

fn linear(kind: CoeffKind) -> CoefficientModel {
    let p = table_v_defaults().into_iter().find(|p| p.kind == kind).unwrap();
    CoefficientModel { coeff: kind, model_type: ModelType::Ols, body: ModelBody::Linear(p) }
}

fn parameter_rows(csv: &Path) -> Vec<(String, f64)> {
    std::fs::read_to_string(csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().parse().unwrap())
        })
        .collect()
}

#[test]
fn synth_is_deterministic_and_uses_reference_params() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--n", "300", "--noise", "0.01", "--seed", "7", "--out", "a.csv"]);
    ok(d.path(), &["synth", "--n", "300", "--noise", "0.01", "--seed", "7", "--out", "b.csv"]);
    let a = std::fs::read(d.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.path().join("b.csv")).unwrap());
    assert_eq!(read_flight_csv(a.as_slice()).unwrap().len(), 300);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    let gen = &manifest["manifest"]["config"]["generator"];
    assert_eq!(gen[0]["kind"], "CL");
    assert_eq!(gen[0]["slopes"][0], 5.3137);
    assert!(manifest["timing"]["total_ms"].is_number());
}

#[test]
fn synth_accepts_a_params_file() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("p.json"), r#"[{"kind":"CL","bias":0.1,"slopes":[4.0,1.0,0.3]}]"#).unwrap();
    ok(d.path(), &["synth", "--params", "p.json", "--n", "50", "--noise", "0", "--out", "d.csv"]);
    let recs = read_flight_csv(std::fs::File::open(d.path().join("d.csv")).unwrap()).unwrap();
    let r = &recs[10];
    let want = 0.1 + 4.0 * r.input(Input::Alpha) + 1.0 * r.input(Input::QN) + 0.3 * r.input(Input::DeltaE);
    assert!((r.coefficient(CoeffKind::CL).unwrap() - want).abs() < 1e-12);
    assert_eq!(r.coefficient(CoeffKind::CM), None);
}

#[test]
fn usage_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        &["synth", "--n", "0", "--out", "x.csv"][..],
        &["synth", "--noise", "nan", "--out", "x.csv"],
        &["train", "--data", "x.csv", "--rho", "1.5"],
        &["train", "--data", "x.csv", "--model", "anfis"],
        &["eval", "--data", "x.csv"],
        &["frobnicate"],
    ] {
        assert_eq!(run(d.path(), args).status.code(), Some(2), "{args:?}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_evolvid"))
        .args(["train", "--data", "x.csv"])
        .env("EVOLVID_THREADS", "0")
        .current_dir(d.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_1() {
    let d = tempfile::tempdir().unwrap();
    let out = run(d.path(), &["train", "--data", "missing.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing.csv"));

    // Inference-only data has no target columns.
    let recs = synthesize(&[], &ManeuverConfig::default(), 100, 0.0, 1).unwrap();
    save_flight_csv(&recs, d.path().join("inputs.csv")).unwrap();
    let out = run(d.path(), &["train", "--data", "inputs.csv", "--coeff", "CM"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("c_m"), "{}", stderr(&out));
}

#[test]
fn train_writes_one_snapshot_per_coefficient() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--n", "600", "--seed", "3", "--out", "data.csv"]);
    let run_dir = PathBuf::from(ok(d.path(), &["train", "--data", "data.csv", "--model", "et1qfnn", "--out", "out"]));
    let run_dir = d.path().join(run_dir);
    for k in CoeffKind::ALL {
        let text = std::fs::read_to_string(run_dir.join("models").join(format!("{k}.json"))).unwrap();
        let snap = ModelSnapshot::from_json(&text).unwrap();
        assert_eq!(snap.model.model_type, ModelType::Et1qfnn);
        assert!(snap.model.network().is_some());
        assert_eq!(snap.manifest.as_ref().unwrap()["manifest"]["command"], "train");
        assert!(run_dir.join("logs").join(format!("{k}.csv")).is_file());
    }
    let rules = std::fs::read_to_string(run_dir.join("reports/rules.csv")).unwrap();
    assert!(rules.starts_with("coeff,rules\nCL,"));
    assert!(run_dir.join("manifest.json").is_file());

    let ols = d.path().join(ok(d.path(), &["train", "--data", "data.csv", "--coeff", "CR", "--model", "ols", "--out", "out"]));
    let snap = ModelSnapshot::from_json(&std::fs::read_to_string(ols.join("models/CR.json")).unwrap()).unwrap();
    assert!(matches!(snap.model.body, ModelBody::Linear(_)));
    assert!(!ols.join("reports/rules.csv").exists());
}

#[test]
fn eval_of_a_perfect_model_gives_zero_tic() {
    let d = tempfile::tempdir().unwrap();
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 400, 0.0, 2).unwrap();
    save_flight_csv(&recs, d.path().join("clean.csv")).unwrap();
    std::fs::create_dir(d.path().join("models")).unwrap();
    for k in CoeffKind::ALL {
        write_snapshot(&d.path().join("models").join(format!("{k}.json")), linear(k));
    }
    let dir = d.path().join(ok(d.path(), &["eval", "--models", "models", "--data", "clean.csv", "--out", "out"]));
    let tic = std::fs::read_to_string(dir.join("reports/tic.csv")).unwrap();
    assert_eq!(tic, "coeff,ols\nCL,0\nCD,0\nCM,0\nCY,0\nCR,0\nCN,0\n");
    assert_eq!(std::fs::read_to_string(dir.join("reports/ranks.csv")).unwrap(), "model,mean_rank\nols,1.00\n");
}

#[test]
fn eval_rejects_incomplete_tables_and_bad_snapshots() {
    let d = tempfile::tempdir().unwrap();
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 400, 0.01, 2).unwrap();
    save_flight_csv(&recs, d.path().join("data.csv")).unwrap();
    std::fs::create_dir(d.path().join("m")).unwrap();
    write_snapshot(&d.path().join("m/CL.json"), linear(CoeffKind::CL));
    write_snapshot(&d.path().join("m/CM.json"), linear(CoeffKind::CM));
    ok(d.path(), &["train", "--data", "data.csv", "--coeff", "CL", "--model", "et2qfnn", "--out", "out"]);
    let t2 = std::fs::read_dir(d.path().join("out")).unwrap().next().unwrap().unwrap().path();
    let out = run(d.path(), &["eval", "--models", "m", t2.to_str().unwrap(), "--data", "data.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("CM/et2qfnn"), "{}", stderr(&out));

    // A CL network relabelled as CY has the wrong input dimension.
    let text = std::fs::read_to_string(t2.join("models/CL.json")).unwrap();
    let bad = text.replacen("\"coeff\": \"CL\"", "\"coeff\": \"CY\"", 1);
    assert_ne!(bad, text);
    std::fs::write(d.path().join("bad.json"), bad).unwrap();
    let out = run(d.path(), &["eval", "--models", "bad.json", "--data", "data.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("inputs"), "{}", stderr(&out));
}

#[test]
fn rank_reproduces_reference_ordering() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let out = ok(&fixtures, &["rank", "--table", "table_i.csv"]);
    assert_eq!(out, "model,mean_rank\nOLS,3.17\neT1QFNN,3.00\neT2QFNN,1.00\nANFIS,3.83\nNN,4.00");
    let out = ok(&fixtures, &["rank", "--table", "table_ii.csv"]);
    assert!(out.contains("eT2QFNN,2.00"));

    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("t.csv"), "coeff,a,b\nCL,0.1,0.2\nCM,0.3,\n").unwrap();
    let out = run(d.path(), &["rank", "--table", "t.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("CM/b"));
}

#[test]
fn ols_derivatives_reproduce_stored_slopes_at_any_step() {
    let d = tempfile::tempdir().unwrap();
    let recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 500, 0.01, 5).unwrap();
    save_flight_csv(&recs, d.path().join("data.csv")).unwrap();
    std::fs::create_dir(d.path().join("m")).unwrap();
    for k in CoeffKind::ALL {
        write_snapshot(&d.path().join("m").join(format!("{k}.json")), linear(k));
    }
    let mut tables = Vec::new();
    for step in ["0.005", "0.02"] {
        let dir = d.path().join(ok(d.path(), &["derivatives", "--model", "m", "--data", "data.csv", "--perturb", step]));
        assert!(dir.join("histograms/CN_delta_r.csv").is_file());
        tables.push(parameter_rows(&dir.join("reports/parameters.csv")));
    }
    let truth = table_v_defaults();
    let expected: Vec<(String, f64)> = CoeffKind::ALL
        .iter()
        .flat_map(|&k| {
            let p = truth.iter().find(|p| p.kind == k).unwrap().clone();
            p.named_slopes().map(move |(i, s)| (k.parameter_name(i), s)).collect::<Vec<_>>()
        })
        .collect();
    for t in &tables {
        assert_eq!(t.len(), expected.len());
        for ((name, v), (want_name, want)) in t.iter().zip(&expected) {
            assert_eq!(name, want_name);
            assert!((v - want).abs() < 1e-9, "{name}: {v} vs {want}");
        }
    }
}

#[test]
fn constant_input_is_reported_by_name() {
    let d = tempfile::tempdir().unwrap();
    let mut recs = synthesize(&table_v_defaults(), &ManeuverConfig::default(), 200, 0.0, 5).unwrap();
    for r in &mut recs {
        r.inputs[Input::DeltaA.index()] = 0.0;
    }
    save_flight_csv(&recs, d.path().join("flat.csv")).unwrap();
    write_snapshot(&d.path().join("CR.json"), linear(CoeffKind::CR));
    let out = run(d.path(), &["derivatives", "--model", "CR.json", "--data", "flat.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("delta_a"), "{}", stderr(&out));
}

#[test]
fn thread_cap_does_not_change_results() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["synth", "--n", "400", "--seed", "9", "--out", "data.csv"]);
    let mut snaps = Vec::new();
    for (threads, out) in [("1", "one"), ("6", "six")] {
        let o = Command::new(env!("CARGO_BIN_EXE_evolvid"))
            .args(["train", "--data", "data.csv", "--out", out])
            .env("EVOLVID_THREADS", threads)
            .current_dir(d.path())
            .output()
            .unwrap();
        assert!(o.status.success());
        let dir = d.path().join(String::from_utf8(o.stdout).unwrap().trim());
        snaps.push(std::fs::read(dir.join("models/CN.json")).unwrap());
    }
    assert_eq!(snaps[0], snaps[1]);
}
