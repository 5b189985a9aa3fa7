use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use evolvid_core::aero::table_v_defaults;
use evolvid_core::data::{fit_normalization, read_flight_csv, split, synthesize, write_flight_csv, ManeuverConfig};
use evolvid_core::derivatives::{all_derivatives, summarize_derivatives, HISTOGRAM_BINS};
use evolvid_core::metrics::{mean_rule_count, rank_models, tic, write_ranks_csv, TicTable};
use evolvid_core::{
    AeroParams, CoeffKind, CoefficientModel, Error, FlightRecord, ModelSnapshot, ModelType, TrainConfig,
};

use crate::manifest::{run_dir, write_manifest_file, RunManifest, Timer};
use crate::{split_setting, DerivativesArgs, EvalArgs, RankArgs, SynthArgs, TrainArgs};

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load_records(bytes: &[u8], path: &Path) -> Result<Vec<FlightRecord>> {
    read_flight_csv(bytes).with_context(|| format!("parsing {}", path.display()))
}

fn require_targets(records: &[FlightRecord], coeffs: &[CoeffKind]) -> Result<()> {
    for &k in coeffs {
        if let Some(row) = records.iter().position(|r| r.coefficient(k).is_none()) {
            return Err(Error::MissingColumn(k.column().to_string()))
                .with_context(|| format!("no {} target from data row {}", k, row + 1));
        }
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut timer = Timer::start();
    let (params, params_bytes) = if a.params == "table-v-defaults" {
        (table_v_defaults(), None)
    } else {
        let path = Path::new(&a.params);
        let bytes = read_bytes(path)?;
        let raw: Vec<AeroParams> =
            serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
        let mut params = Vec::with_capacity(raw.len());
        for p in raw {
            if params.iter().any(|q: &AeroParams| q.kind == p.kind) {
                bail!("{} listed twice in {}", p.kind, path.display());
            }
            params.push(AeroParams::new(p.kind, p.bias, p.slopes)?);
        }
        (params, Some(bytes))
    };
    let maneuver = ManeuverConfig::default();
    let n = usize::try_from(a.n).context("--n too large")?;
    let records = synthesize(&params, &maneuver, n, a.noise, a.seed)?;
    timer.stage("synthesize");

    let mut manifest = RunManifest::new(
        "synth",
        json!({
            "params": if params_bytes.is_some() { "file" } else { "table-v-defaults" },
            "generator": params,
            "maneuver": maneuver,
            "n": a.n,
            "noise": a.noise,
        }),
        Some(a.seed),
    );
    if let Some(b) = &params_bytes {
        manifest.add_input("params", b);
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut csv = Vec::new();
    write_flight_csv(&records, &mut csv)?;
    write_file(&a.out, &csv)?;
    timer.stage("write");
    let mut sidecar = a.out.clone().into_os_string();
    sidecar.push(".manifest.json");
    write_manifest_file(Path::new(&sidecar), &manifest, &timer)?;
    println!("{}", a.out.display());
    Ok(())
}

pub fn train(a: &TrainArgs, threads: Option<usize>) -> Result<()> {
    let mut timer = Timer::start();
    let bytes = read_bytes(&a.data)?;
    let records = load_records(&bytes, &a.data)?;
    let coeffs = a.coeff.kinds();
    let (train_part, _) = split(&records, split_setting(a.setting))?;
    require_targets(train_part, &coeffs)?;
    let cfg = TrainConfig {
        rho: a.rho,
        delta1: a.delta1,
        eta: a.eta,
        seed: a.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    timer.stage("load");

    let mut manifest = RunManifest::new(
        "train",
        json!({
            "coeffs": coeffs.iter().map(|k| k.label()).collect::<Vec<_>>(),
            "model": a.model,
            "setting": a.setting,
            "train": cfg,
        }),
        Some(a.seed),
    );
    manifest.add_input("data", &bytes);
    let embedded = json!({ "run_id": manifest.run_id(), "manifest": manifest.to_value() });

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let results: Vec<_> = pool.install(|| {
        coeffs
            .par_iter()
            .map(|&k| CoefficientModel::train(a.model, k, train_part, &cfg).with_context(|| format!("training {k}")))
            .collect()
    });
    timer.stage("train");

    let dir = run_dir(&a.out, &manifest, &["models", "reports", "logs"])?;
    let mut rules = Vec::new();
    for (k, res) in coeffs.iter().zip(results) {
        let (model, log) = res?;
        if let Some(net) = model.network() {
            rules.push((*k, net.rule_count()));
        }
        let snap = ModelSnapshot::new(model, Some(embedded.clone()));
        write_file(&dir.join("models").join(format!("{k}.json")), (snap.to_json()? + "\n").as_bytes())?;
        if let Some(log) = log {
            let mut buf = Vec::new();
            log.write_csv(&mut buf)?;
            write_file(&dir.join("logs").join(format!("{k}.csv")), &buf)?;
        }
    }
    if !rules.is_empty() {
        let mut buf = String::from("coeff,rules\n");
        for (k, n) in &rules {
            buf.push_str(&format!("{k},{n}\n"));
        }
        let mean = mean_rule_count(&rules.iter().map(|r| r.1).collect::<Vec<_>>())?;
        buf.push_str(&format!("mean,{mean:.2}\n"));
        write_file(&dir.join("reports").join("rules.csv"), buf.as_bytes())?;
    }
    timer.stage("write");
    write_manifest_file(&dir.join("manifest.json"), &manifest, &timer)?;
    println!("{}", dir.display());
    Ok(())
}

/// Snapshot files behind `paths`: files as given, directories scanned for
/// `*.json` (a run directory is scanned through its `models` subdirectory).
fn snapshot_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let dir = if p.join("models").is_dir() { p.join("models") } else { p.clone() };
            let mut found: Vec<PathBuf> = fs::read_dir(&dir)
                .with_context(|| format!("listing {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json") && f.file_name().is_some_and(|n| n != "manifest.json"))
                .collect();
            if found.is_empty() {
                bail!("no snapshots in {}", dir.display());
            }
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

struct LoadedSnapshot {
    bytes: Vec<u8>,
    model: CoefficientModel,
}

/// Loads, validates and orders snapshots by (coefficient, model type).
fn load_snapshots(paths: &[PathBuf]) -> Result<Vec<LoadedSnapshot>> {
    let mut snaps = Vec::new();
    for f in snapshot_files(paths)? {
        let bytes = read_bytes(&f)?;
        let text = String::from_utf8(bytes.clone()).with_context(|| format!("{} is not UTF-8", f.display()))?;
        let snap = ModelSnapshot::from_json(&text).with_context(|| format!("loading {}", f.display()))?;
        snaps.push(LoadedSnapshot { bytes, model: snap.model });
    }
    let key = |s: &LoadedSnapshot| (CoeffKind::ALL.iter().position(|&k| k == s.model.coeff), s.model.model_type);
    snaps.sort_by_key(key);
    for w in snaps.windows(2) {
        if key(&w[0]) == key(&w[1]) {
            bail!("two {} snapshots for {}", w[0].model.model_type, w[0].model.coeff);
        }
    }
    Ok(snaps)
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let mut timer = Timer::start();
    let snaps = load_snapshots(&a.models)?;
    let bytes = read_bytes(&a.data)?;
    let records = load_records(&bytes, &a.data)?;
    let (_, test) = split(&records, split_setting(a.setting))?;
    let coeffs: Vec<CoeffKind> = CoeffKind::ALL.into_iter().filter(|k| snaps.iter().any(|s| s.model.coeff == *k)).collect();
    require_targets(test, &coeffs)?;
    timer.stage("load");

    let models: Vec<ModelType> =
        ModelType::ALL.into_iter().filter(|m| snaps.iter().any(|s| s.model.model_type == *m)).collect();
    let mut table = TicTable::new(coeffs, models.iter().map(|m| m.name().to_string()).collect());
    for s in &snaps {
        let k = s.model.coeff;
        let measured: Vec<f64> = test.iter().map(|r| r.coefficient(k).expect("targets checked")).collect();
        let predicted = s.model.predict_all(test).with_context(|| format!("evaluating {} {k}", s.model.model_type))?;
        table.set(k, s.model.model_type.name(), tic(&measured, &predicted)?);
    }
    timer.stage("evaluate");

    let mut manifest = RunManifest::new("eval", json!({ "setting": a.setting }), None);
    for s in &snaps {
        manifest.add_input(format!("model:{}/{}", s.model.coeff, s.model.model_type), &s.bytes);
    }
    manifest.add_input("data", &bytes);
    let dir = run_dir(&a.out, &manifest, &["reports"])?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_file(&dir.join("reports").join("tic.csv"), &buf)?;
    let ranked = rank_models(&table);
    if let Ok(ranks) = &ranked {
        let mut buf = Vec::new();
        write_ranks_csv(ranks, &mut buf)?;
        write_file(&dir.join("reports").join("ranks.csv"), &buf)?;
    }
    timer.stage("write");
    write_manifest_file(&dir.join("manifest.json"), &manifest, &timer)?;
    ranked.context("ranking models")?;
    println!("{}", dir.display());
    Ok(())
}

pub fn derivatives(a: &DerivativesArgs) -> Result<()> {
    let mut timer = Timer::start();
    let snaps = load_snapshots(&a.model)?;
    let model_type = snaps[0].model.model_type;
    if let Some(other) = snaps.iter().find(|s| s.model.model_type != model_type) {
        bail!("snapshots mix model types {model_type} and {}", other.model.model_type);
    }
    let bytes = read_bytes(&a.data)?;
    let records = load_records(&bytes, &a.data)?;
    let (train_part, _) = split(&records, split_setting(a.setting))?;
    let stats = fit_normalization(train_part);
    timer.stage("load");

    let mut series = Vec::new();
    for s in &snaps {
        let k = s.model.coeff;
        series.extend(all_derivatives(&s.model, &records, a.perturb, &stats).with_context(|| format!("{model_type} {k}"))?);
    }
    let coeffs: Vec<CoeffKind> = snaps.iter().map(|s| s.model.coeff).collect();
    let table = summarize_derivatives(&series, &coeffs)?;
    timer.stage("derivatives");

    let mut manifest = RunManifest::new(
        "derivatives",
        json!({ "perturb": a.perturb, "setting": a.setting, "bins": HISTOGRAM_BINS, "model": model_type }),
        None,
    );
    for s in &snaps {
        manifest.add_input(format!("model:{}/{}", s.model.coeff, s.model.model_type), &s.bytes);
    }
    manifest.add_input("data", &bytes);
    let dir = run_dir(&a.out_dir, &manifest, &["reports", "histograms"])?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_file(&dir.join("reports").join("parameters.csv"), &buf)?;
    for s in &series {
        let mut buf = Vec::new();
        s.histogram.write_csv(&mut buf)?;
        write_file(&dir.join("histograms").join(format!("{}.csv", s.parameter_name())), &buf)?;
    }
    timer.stage("write");
    write_manifest_file(&dir.join("manifest.json"), &manifest, &timer)?;
    println!("{}", dir.display());
    Ok(())
}

pub fn rank(a: &RankArgs) -> Result<()> {
    let bytes = read_bytes(&a.table)?;
    let table = TicTable::read_csv(bytes.as_slice()).with_context(|| format!("parsing {}", a.table.display()))?;
    let ranks = rank_models(&table).map_err(|e| anyhow!(e)).context("ranking models")?;
    let mut buf = Vec::new();
    write_ranks_csv(&ranks, &mut buf)?;
    match &a.out {
        Some(p) => write_file(p, &buf),
        None => std::io::stdout().write_all(&buf).context("writing stdout"),
    }
}
