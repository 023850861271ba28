use std::fs;
use std::path::Path;
use std::process::Command;

use chromalight::dataset::{load_manifest, synth_generate, MANIFEST_FILE};
use chromalight::estimators::EstimatorSpec;
use chromalight::eval::{
    cmd_eval, cmd_report, cmd_transport, run_eval, CurveBins, EvalConfig, AGGREGATE_FILE, CURVES_FILE, RECORDS_FILE,
};
use chromalight::io::write_pfm;
use chromalight::strategies::{StrategyId, WhiteBalancer};
use chromalight::transport::{build_transport, cache_path, CacheStatus, SceneConfig};
use chromalight::{Error, Panorama};

fn small_scene() -> SceneConfig {
    SceneConfig {
        render_size: 16,
        env_width: 32,
        env_height: 16,
        ..SceneConfig::default()
    }
}

fn config(estimator: EstimatorSpec, strategies: Vec<StrategyId>) -> EvalConfig {
    EvalConfig {
        strategies,
        balancer: WhiteBalancer::GrayWorld,
        estimator,
        scene: small_scene(),
        ..EvalConfig::default()
    }
}

#[test]
fn oracle_baseline_is_error_free() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth_generate(2, 3, 1, dir.path()).unwrap();
    let t = build_transport(&small_scene()).unwrap();
    let out = run_eval(&m, &t, &config(EstimatorSpec::Oracle, vec![StrategyId::Baseline])).unwrap();
    assert_eq!(out.records.len(), 2 * 3 * 3);
    for r in &out.records {
        assert!(r.delta_e.abs() < 1e-6 && r.rgb_angular_deg.abs() < 1e-6, "{r:?}");
        assert_eq!(r.render_l1, 0.0);
    }
}

#[test]
fn record_enumeration_and_awb_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth_generate(2, 4, 2, dir.path()).unwrap();
    let t = build_transport(&small_scene()).unwrap();
    let strategies = StrategyId::ALL.to_vec();
    let out = run_eval(&m, &t, &config(EstimatorSpec::TintBlind { beta: 1.0 }, strategies)).unwrap();
    assert_eq!(out.records.len(), 2 * 4 * 3 * 5);
    assert_eq!(out.report.failure_count, 0);
    let per_strategy: usize = out.report.strategies.values().map(|m| m.values().next().unwrap().count).sum();
    assert_eq!(per_strategy, out.records.len());
    for r in &out.records {
        assert!(r.delta_e.is_finite() && r.rgb_angular_deg.is_finite());
        if r.setting_name == "awb" {
            assert_eq!(r.awb_distance_deg, 0.0);
        }
        assert_eq!(r.fit_residual.is_some(), r.strategy.wraps_white_balance() && !r.fallback);
    }
    for s in StrategyId::ALL {
        assert!(out.report.curve_point(s, 0).is_some());
    }
    // the unwrapped strategies share one pipeline at evaluation time
    let pick = |s| out.records.iter().filter(move |r| r.strategy == s).map(|r| r.rgb_angular_deg);
    assert!(pick(StrategyId::Baseline).eq(pick(StrategyId::Augment)));
    assert!(pick(StrategyId::WbTest).eq(pick(StrategyId::WbTrain)));
}

#[test]
fn outputs_are_deterministic_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    synth_generate(3, 3, 5, &dir.path().join("data")).unwrap();
    let manifest = dir.path().join("data").join(MANIFEST_FILE);
    let cache = dir.path().join("cache");
    let run = |name: &str, jobs: Option<usize>| {
        let cfg = EvalConfig {
            jobs,
            cache_dir: Some(cache.clone()),
            ..config(EstimatorSpec::TintBlind { beta: 1.0 }, vec![StrategyId::Baseline, StrategyId::WbTest])
        };
        let out = dir.path().join(name);
        cmd_eval(&manifest, &cfg, &out).unwrap();
        (
            fs::read(out.join(RECORDS_FILE)).unwrap(),
            fs::read(out.join(AGGREGATE_FILE)).unwrap(),
            fs::read(out.join(CURVES_FILE)).unwrap(),
        )
    };
    let a = run("a", Some(1));
    let b = run("b", Some(1));
    let c = run("c", Some(4));
    assert!(a == b);
    assert!(a == c);
}

#[test]
fn estimator_failures_are_counted_and_excluded() {
    let dir = tempfile::tempdir().unwrap();
    let m = synth_generate(2, 3, 6, &dir.path().join("data")).unwrap();
    let fixed = Panorama::uniform(32, 16, [0.5, 0.5, 0.5]).unwrap();
    let fixed_path = dir.path().join("fixed.pfm");
    write_pfm(&fixed_path, fixed.image()).unwrap();
    // fails on roughly half of the inputs, decided by the input's checksum
    let cmd = format!(
        "sh -c 'case $(cksum < \"$1\" | cut -c1-3) in *[02468]) exit 7;; esac; cp {} \"$2\"' stub {{input}} {{output}}",
        fixed_path.display()
    );
    let spec: EstimatorSpec = format!("external:{cmd}").parse().unwrap();
    let t = build_transport(&small_scene()).unwrap();
    let out = run_eval(&m, &t, &config(spec, vec![StrategyId::Baseline])).unwrap();
    assert_eq!(out.records.len() + out.failures.len(), 2 * 3 * 3);
    assert!(!out.failures.is_empty() && !out.records.is_empty());
    assert_eq!(out.report.failure_count, out.failures.len());
    assert_eq!(out.report.record_count, out.records.len());
    assert!(out.failures[0].message.contains("exit"));
}

#[test]
fn transport_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_scene();
    let (t1, s1) = cmd_transport(&cfg, dir.path()).unwrap();
    let bytes1 = fs::read(cache_path(dir.path(), &cfg)).unwrap();
    let (t2, s2) = cmd_transport(&cfg, dir.path()).unwrap();
    let bytes2 = fs::read(cache_path(dir.path(), &cfg)).unwrap();
    assert_eq!((s1, s2), (CacheStatus::Built, CacheStatus::Hit));
    assert_eq!(t1, t2);
    assert!(bytes1 == bytes2);
}

#[test]
fn report_reaggregates_records() {
    let dir = tempfile::tempdir().unwrap();
    synth_generate(2, 3, 9, &dir.path().join("data")).unwrap();
    let cfg = config(EstimatorSpec::Ambient, vec![StrategyId::Baseline, StrategyId::WbTest]);
    let out = cmd_eval(&dir.path().join("data").join(MANIFEST_FILE), &cfg, &dir.path().join("eval")).unwrap();
    let rep = cmd_report(&dir.path().join("eval").join(RECORDS_FILE), CurveBins::default(), &dir.path().join("rep")).unwrap();
    assert_eq!(rep.strategies, out.report.strategies);
    assert_eq!(rep.curves, out.report.curves);

    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert!(matches!(cmd_report(&empty, CurveBins::default(), dir.path()), Err(Error::EmptyRecords)));
}

#[test]
fn aggregate_json_records_methodology() {
    let dir = tempfile::tempdir().unwrap();
    synth_generate(1, 2, 3, &dir.path().join("data")).unwrap();
    let cfg = config(EstimatorSpec::Ambient, vec![StrategyId::WbTest]);
    cmd_eval(&dir.path().join("data").join(MANIFEST_FILE), &cfg, &dir.path().join("eval")).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eval").join(AGGREGATE_FILE)).unwrap()).unwrap();
    assert_eq!(json["metadata"]["delta_e_variant"], "CIE76");
    assert!(json["metadata"]["fit_pixels"].as_str().unwrap().starts_with("masked"));
    let stats = &json["strategies"]["wbtest"]["rgb_angular"];
    assert!(stats["q1"].as_f64().unwrap() <= stats["median"].as_f64().unwrap());
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_chromalight"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn command_line_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = cli(&["synth", "--scenes", "2", "--settings", "3", "--seed", "4", "--out", path(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    load_manifest(data.join(MANIFEST_FILE)).unwrap();

    let scene_cfg = dir.path().join("scene.json");
    fs::write(&scene_cfg, serde_json::to_string(&small_scene()).unwrap()).unwrap();
    let ev = dir.path().join("eval");
    let out = cli(&[
        "eval",
        "--manifest",
        path(&data.join(MANIFEST_FILE)),
        "--strategies",
        "baseline,wbtest,augment",
        "--balancer",
        "shades_of_gray:p=6",
        "--estimator",
        "tintblind:beta=1",
        "--scene-cfg",
        path(&scene_cfg),
        "--seed",
        "3",
        "--jobs",
        "2",
        "--out",
        path(&ev),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = fs::read_to_string(ev.join(RECORDS_FILE)).unwrap();
    assert_eq!(records.lines().count(), 1 + 2 * 3 * 3 * 3);
    assert!(ev.join(AGGREGATE_FILE).is_file() && ev.join(CURVES_FILE).is_file());

    let rep = dir.path().join("report");
    let out = cli(&["report", "--records", path(&ev.join(RECORDS_FILE)), "--out", path(&rep)]);
    assert!(out.status.success());
    assert_eq!(fs::read(rep.join(CURVES_FILE)).unwrap(), fs::read(ev.join(CURVES_FILE)).unwrap());

    let tr = dir.path().join("transport");
    let out = cli(&["transport", "--scene-cfg", path(&scene_cfg), "--out", path(&tr)]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("Built"));
    let out = cli(&["transport", "--scene-cfg", path(&scene_cfg), "--out", path(&tr)]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("Hit"));

    let bad = cli(&["eval", "--manifest", path(&data.join(MANIFEST_FILE)), "--balancer", "white_patch:pct=0", "--out", path(&ev)]);
    assert!(!bad.status.success());
    let bad = cli(&["eval", "--manifest", path(&dir.path().join("missing.json")), "--out", path(&ev)]);
    assert!(!bad.status.success());
}
