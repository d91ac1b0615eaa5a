use std::fs;
use std::path::{Path, PathBuf};

use qpp_core::campaign::{run_campaign, validate_config, CampaignKind, ExperimentConfig, ProfileRef};
use qpp_core::QppError;
use serde_json::Value;

const KINDS: [CampaignKind; 7] = [
    CampaignKind::FidelityHaar,
    CampaignKind::FidelityPerm,
    CampaignKind::Calibration,
    CampaignKind::HomMap,
    CampaignKind::DelaySweep,
    CampaignKind::LossReport,
    CampaignKind::Platform,
];

fn small(kind: CampaignKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind).with_n(if kind == CampaignKind::Calibration { 3 } else { 5 });
    cfg.seed = 42;
    if matches!(kind, CampaignKind::FidelityHaar | CampaignKind::FidelityPerm) {
        cfg.count = 12;
    }
    cfg.workers = Some(2);
    cfg
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn usage_message(r: qpp_core::Result<ExperimentConfig>) -> String {
    match r {
        Err(e @ QppError::Validation(_)) => {
            assert!(e.is_usage());
            e.to_string()
        }
        other => panic!("expected a usage error, got {other:?}"),
    }
}

#[test]
fn minimal_config_gets_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", r#"{"schema_version": 1, "campaign": "fidelity-haar"}"#);
    let cfg = validate_config(&p).unwrap();
    assert_eq!((cfg.n, cfg.seed, cfg.count), (20, 0, 1000));
    assert_eq!(cfg.profile, ProfileRef::Default);
    let echo = cfg.normalized();
    assert_eq!(echo["n"], 20);
    assert_eq!(echo["seed"], 0);
}

#[test]
fn bad_configs_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"schema_version": 1, "campaign": "fidelity-haar", "count": -5}"#, "count"),
        (r#"{"schema_version": 1, "campaign": "fidelity-haar", "n": 1}"#, "n"),
        (r#"{"schema_version": 1, "campaign": "fidelity-haar", "colour": "red"}"#, "colour"),
        (r#"{"campaign": "fidelity-haar"}"#, "schema_version"),
        (r#"{"schema_version": 1}"#, "campaign"),
        (r#"{"schema_version": 2, "campaign": "platform"}"#, "schema_version"),
        (r#"{"schema_version": 1, "campaign": "hom-map", "overlap": 1.5}"#, "overlap"),
        (r#"{"schema_version": 1, "campaign": "fidelity-perm", "n": 3, "count": 7}"#, "count"),
    ];
    for (body, field) in cases {
        let p = write_config(dir.path(), "c.json", body);
        let msg = usage_message(validate_config(&p));
        assert!(msg.contains(field), "{body}: {msg}");
    }
}

#[test]
fn profile_override_is_resolved() {
    let dir = tempfile::tempdir().unwrap();
    let profile = qpp_core::HardwareProfile::nominal(4, 1);
    fs::write(dir.path().join("chip.json"), profile.to_json()).unwrap();
    let p = write_config(
        dir.path(),
        "c.json",
        r#"{"schema_version": 1, "campaign": "loss-report", "n": 4, "profile": "chip.json"}"#,
    );
    let cfg = validate_config(&p).unwrap();
    assert_eq!(cfg.profile, ProfileRef::File(dir.path().join("chip.json")));
    assert_eq!(cfg.normalized()["profile"], dir.path().join("chip.json").display().to_string());
    assert_eq!(cfg.profile.load(4, 0).unwrap(), profile);

    let missing = write_config(dir.path(), "m.json", r#"{"schema_version": 1, "campaign": "loss-report", "profile": "nope.json"}"#);
    let err = run_campaign(&validate_config(&missing).unwrap()).unwrap_err();
    assert!(err.is_usage(), "{err}");
}

fn golden_path(kind: CampaignKind) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{}.json", kind.name()))
}

#[test]
fn small_campaigns_match_golden_files() {
    let update = std::env::var_os("QPP_UPDATE_GOLDEN").is_some();
    for kind in KINDS {
        let report = run_campaign(&small(kind)).unwrap();
        let got = report.payload_json();
        let path = golden_path(kind);
        if update {
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(&path, &got).unwrap();
            continue;
        }
        let want = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(got == want, "{} differs from its golden file", kind.name());
    }
}

#[test]
fn reports_are_identical_across_runs_and_workers() {
    for kind in KINDS {
        let mut cfg = small(kind);
        let mut outputs = Vec::new();
        for workers in [1, 3, 8] {
            cfg.workers = Some(workers);
            let r = run_campaign(&cfg).unwrap();
            let dir = tempfile::tempdir().unwrap();
            r.write_to(dir.path()).unwrap();
            let mut files: Vec<(String, Vec<u8>)> = r.artifacts.iter().map(|a| (a.name.clone(), fs::read(dir.path().join(&a.name)).unwrap())).collect();
            files.push(("payload".into(), r.payload_json().into_bytes()));
            outputs.push(files);
        }
        assert!(outputs.windows(2).all(|w| w[0] == w[1]), "{} changes with worker count", kind.name());
    }
}

#[test]
fn report_json_has_timing_and_version() {
    let r = run_campaign(&small(CampaignKind::LossReport)).unwrap();
    let v: Value = serde_json::from_str(&r.to_json()).unwrap();
    assert!(v["timing"]["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["tool_version"], qpp_core::campaign::TOOL_VERSION);
    assert!(v["config"].get("workers").is_none());
    let payload: Value = serde_json::from_str(&r.payload_json()).unwrap();
    assert!(payload.get("timing").is_none());
}

#[test]
fn writes_leave_no_temp_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_campaign(&small(CampaignKind::HomMap)).unwrap();
    r.write_to(dir.path()).unwrap();
    let mut names: Vec<String> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(names, ["report.json", "visibility_grid.csv", "visibility_map.json"]);
}

// n = 20 scale

fn full(kind: CampaignKind) -> ExperimentConfig {
    ExperimentConfig::new(kind)
}

#[test]
fn ideal_haar_campaign_is_exact() {
    let mut cfg = full(CampaignKind::FidelityHaar);
    cfg.profile = ProfileRef::Ideal;
    let r = run_campaign(&cfg).unwrap();
    assert_eq!(r.results.as_array().unwrap().len(), 1000);
    for item in r.results.as_array().unwrap() {
        assert!((item["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn ideal_perm_campaign_is_exact() {
    let mut cfg = full(CampaignKind::FidelityPerm);
    cfg.profile = ProfileRef::Ideal;
    let r = run_campaign(&cfg).unwrap();
    assert_eq!(r.summary["count"], 190);
    assert!((r.summary["min_fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn ideal_hom_map_is_flat() {
    let mut cfg = full(CampaignKind::HomMap);
    cfg.profile = ProfileRef::Ideal;
    cfg.overlap = 1.0;
    let r = run_campaign(&cfg).unwrap();
    let cells = r.results.as_array().unwrap();
    assert_eq!(cells.len(), 190);
    assert!(cells.iter().all(|c| (c["visibility"].as_f64().unwrap() - 1.0).abs() < 1e-6));
}

#[test]
fn calibration_campaign_closes() {
    let mut cfg = full(CampaignKind::Calibration);
    cfg.detector_noise = Some(0.0);
    let r = run_campaign(&cfg).unwrap();
    assert_eq!(r.summary["heaters"], 380);
    assert!(r.summary["max_alpha_relative_error"].as_f64().unwrap() < 1e-6);
    assert!(r.summary["max_phi0_error"].as_f64().unwrap() < 1e-6);
}

#[test]
fn noisy_calibration_stays_close() {
    let mut cfg = full(CampaignKind::Calibration);
    cfg.detector_noise = Some(0.005);
    let r = run_campaign(&cfg).unwrap();
    assert!(r.summary["max_alpha_relative_error"].as_f64().unwrap() < 0.02, "{}", r.summary);
}

#[test]
fn delay_sweep_campaign_shifts_linearly() {
    let mut cfg = full(CampaignKind::DelaySweep);
    cfg.profile = ProfileRef::Ideal;
    cfg.overlap = 1.0;
    let r = run_campaign(&cfg).unwrap();
    for p in r.results.as_array().unwrap() {
        let applied = p["total_shift_um"].as_f64().unwrap();
        let fitted = p["fitted_center_um"].as_f64().unwrap();
        assert!((applied - fitted).abs() < 1e-3, "{applied} vs {fitted}");
    }
}

#[test]
fn loss_campaign_matches_budget() {
    let r = run_campaign(&full(CampaignKind::LossReport)).unwrap();
    let mean = r.summary["mean_insertion_loss_db"].as_f64().unwrap();
    assert!((mean - 2.9).abs() < 0.1, "{mean}");
    assert_eq!(r.results.as_array().unwrap().len(), 20);
}

#[test]
fn platform_campaign_ranks_sin_first() {
    let r = run_campaign(&full(CampaignKind::Platform)).unwrap();
    let ranking = r.results.as_array().unwrap();
    assert_eq!(ranking[0]["platform"], "SiN");
    assert_eq!(ranking[0]["name"], "20-mode processor");
}

#[test]
fn extra_platform_file_is_merged() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("extra.csv"),
        "name,platform,modes,loss_per_unit_cell_db,insertion_loss_db,citation\ntoy,glass,4,0.05,1.0,none\n",
    )
    .unwrap();
    let p = write_config(dir.path(), "c.json", r#"{"schema_version": 1, "campaign": "platform", "platforms": "extra.csv"}"#);
    let r = run_campaign(&validate_config(&p).unwrap()).unwrap();
    let toy = r.results.as_array().unwrap().iter().find(|e| e["name"] == "toy").unwrap();
    assert_eq!(toy["useful_size"], 86);
}
