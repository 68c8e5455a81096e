//! End-to-end tests of the `sarplan` binary: artifact sets per subcommand,
//! exit codes per error class, determinism, GeoJSON export, and the remote
//! plausibility scorer (against a throwaway local HTTP server).

use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sarplan(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sarplan"))
        .args(args)
        .args(["--out-dir", out_dir.to_str().unwrap()])
        .output()
        .unwrap()
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Serve every request with the same JSON body until the process exits.
fn spawn_scorer(body: &'static str) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut buf = Vec::new();
            let mut tmp = [0u8; 1024];
            let header_end = loop {
                let Ok(n) = stream.read(&mut tmp) else {
                    break 0;
                };
                if n == 0 {
                    break 0;
                }
                buf.extend_from_slice(&tmp[..n]);
                if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                    break pos + 4;
                }
            };
            if header_end == 0 {
                continue;
            }
            let headers = String::from_utf8_lossy(&buf[..header_end]).to_lowercase();
            let content_length: usize = headers
                .lines()
                .find_map(|l| l.strip_prefix("content-length:"))
                .map(|v| v.trim().parse().unwrap())
                .unwrap_or(0);
            while buf.len() < header_end + content_length {
                let Ok(n) = stream.read(&mut tmp) else { break };
                if n == 0 {
                    break;
                }
                buf.extend_from_slice(&tmp[..n]);
            }
            let resp = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    format!("http://{addr}/score")
}

#[test]
fn bundled_case_fixture_parses_and_validates() {
    let text = sarplan_cli::fixture("demo_case.json").unwrap();
    let case: sarplan_core::case::CaseRecord = serde_json::from_str(text).unwrap();
    case.validate().unwrap();
    assert_eq!(case.case_id, "GRD-2025-001541");
    assert_eq!(case.movement_profile.as_str(), "on-foot");
    assert_eq!(case.age, 15);
    assert_eq!(case.sightings.len(), 1);
    assert!(case.ground_truth.is_none());
}

#[test]
fn demo_writes_all_artifacts_and_valid_plan() {
    let dir = tempfile::tempdir().unwrap();
    let out = sarplan(&["demo"], dir.path());
    assert_success(&out);

    for name in [
        "search_plan.json",
        "zones.jsonl",
        "zones_review.jsonl",
        "zone_qa_metrics.json",
    ] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let plan = read_json(&dir.path().join("search_plan.json"));
    assert_eq!(plan["schema_version"], 1);
    assert_eq!(plan["case_id"], "GRD-2025-001541");
    let n = plan["grid_xy"].as_array().unwrap().len();
    assert_eq!(plan["p"].as_array().unwrap().len(), n);
    for h in ["24", "48", "72"] {
        assert_eq!(plan["forecasts_by_horizon"][h].as_array().unwrap().len(), n);
        assert!(plan["rings"][h].is_array());
    }
    assert!(plan["rings"]["cumulative"].is_array());

    let metrics = read_json(&dir.path().join("zone_qa_metrics.json"));
    assert_eq!(metrics["schema_version"], 1);
    assert!(metrics["n_zones"].as_u64().unwrap() > 0);
}

#[test]
fn forecast_and_zones_write_expected_artifact_sets() {
    let dir = tempfile::tempdir().unwrap();
    // Materialize fixtures once via demo, then drive the staged commands
    // off the same case and config.
    assert_success(&sarplan(&["demo"], dir.path()));
    let fixtures = dir.path().join("fixtures");
    let config = fixtures.join("demo_config.toml");
    let case = fixtures.join("demo_case.json");

    let f_dir = tempfile::tempdir().unwrap();
    let out = sarplan(
        &[
            "forecast",
            case.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
        ],
        f_dir.path(),
    );
    assert_success(&out);
    assert!(f_dir.path().join("search_plan.json").is_file());
    assert!(!f_dir.path().join("zones.jsonl").exists());

    let z_dir = tempfile::tempdir().unwrap();
    let out = sarplan(
        &[
            "zones",
            case.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
        ],
        z_dir.path(),
    );
    assert_success(&out);
    assert!(z_dir.path().join("search_plan.json").is_file());
    assert!(z_dir.path().join("zones.jsonl").is_file());
    assert!(!z_dir.path().join("zones_review.jsonl").exists());

    // The staged plan must equal the demo's: same config, same case.
    assert_eq!(
        std::fs::read(dir.path().join("search_plan.json")).unwrap(),
        std::fs::read(z_dir.path().join("search_plan.json")).unwrap()
    );
}

#[test]
fn qa_standalone_reproduces_demo_review() {
    let demo_dir = tempfile::tempdir().unwrap();
    assert_success(&sarplan(&["demo"], demo_dir.path()));

    let qa_dir = tempfile::tempdir().unwrap();
    let zones_path = demo_dir.path().join("zones.jsonl");
    let out = sarplan(&["qa", zones_path.to_str().unwrap()], qa_dir.path());
    assert_success(&out);
    for name in ["zones_review.jsonl", "zone_qa_metrics.json"] {
        assert_eq!(
            std::fs::read(demo_dir.path().join(name)).unwrap(),
            std::fs::read(qa_dir.path().join(name)).unwrap(),
            "{name} differs from in-pipeline review"
        );
    }
}

#[test]
fn exit_codes_match_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| sarplan(args, dir.path()).status.code().unwrap();

    // 4: unreadable input file.
    assert_eq!(code(&["forecast", "/nonexistent/case.json"]), 4);

    // 2: malformed JSON case (schema violation).
    let bad_json = dir.path().join("bad.json");
    std::fs::write(&bad_json, "{\"truncated\":").unwrap();
    assert_eq!(code(&["forecast", bad_json.to_str().unwrap()]), 2);

    // 2: clap usage error.
    assert_eq!(code(&["not-a-subcommand"]), 2);

    // 3: invalid configuration.
    let bad_toml = dir.path().join("bad.toml");
    std::fs::write(&bad_toml, "[grid]\nn_cols = 0\n").unwrap();
    assert_success(&sarplan(&["demo"], dir.path()));
    let case = dir.path().join("fixtures/demo_case.json");
    assert_eq!(
        code(&[
            "forecast",
            case.to_str().unwrap(),
            "--config",
            bad_toml.to_str().unwrap()
        ]),
        3
    );

    // 3: evaluate needs ground truth; the demo case has none.
    assert_eq!(code(&["evaluate", case.to_str().unwrap()]), 3);

    // 3: generate without --seed.
    assert_eq!(code(&["generate", "--profile", "on-foot"]), 3);

    // 3: qa with --no-qa is contradictory.
    let zones = dir.path().join("zones.jsonl");
    assert_eq!(code(&["qa", zones.to_str().unwrap(), "--no-qa"]), 3);
}

#[test]
fn generate_is_seed_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_success(&sarplan(
        &["generate", "--seed", "41", "--profile", "vehicle"],
        a.path(),
    ));
    assert_success(&sarplan(
        &["generate", "--seed", "41", "--profile", "vehicle"],
        b.path(),
    ));
    let name = "GRD-2025-000041.json";
    assert_eq!(
        std::fs::read(a.path().join(name)).unwrap(),
        std::fs::read(b.path().join(name)).unwrap()
    );

    let c = tempfile::tempdir().unwrap();
    assert_success(&sarplan(
        &["generate", "--seed", "42", "--profile", "vehicle"],
        c.path(),
    ));
    let other = c.path().join("GRD-2025-000042.json");
    assert!(other.is_file());
    assert_ne!(
        std::fs::read(a.path().join(name)).unwrap(),
        std::fs::read(&other).unwrap()
    );
}

#[test]
fn evaluate_generated_case_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    assert_success(&sarplan(
        &["generate", "--seed", "3", "--profile", "on-foot"],
        dir.path(),
    ));
    let case: PathBuf = dir.path().join("GRD-2025-000003.json");
    let out = sarplan(&["evaluate", case.to_str().unwrap()], dir.path());
    assert_success(&out);

    let report = read_json(&dir.path().join("eval_report.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["case_id"], "GRD-2025-000003");
    for k in ["1", "3", "5"] {
        let hit = report["geo_hit_at_k"][k].as_u64().unwrap();
        assert!(hit <= 1);
    }
    assert!(report["asuh_sq_miles"].as_f64().unwrap() >= 0.0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("geo-hit@"));
}

#[test]
fn export_geojson_writes_feature_collections() {
    let dir = tempfile::tempdir().unwrap();
    assert_success(&sarplan(&["demo", "--export-geojson"], dir.path()));
    for name in ["plan_cells.geojson", "zones.geojson", "rings.geojson"] {
        let doc = read_json(&dir.path().join(name));
        assert_eq!(doc["type"], "FeatureCollection", "{name}");
        assert!(
            !doc["features"].as_array().unwrap().is_empty(),
            "{name} has no features"
        );
    }
}

#[test]
fn no_qa_skips_review_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert_success(&sarplan(&["demo", "--no-qa"], dir.path()));
    assert!(dir.path().join("search_plan.json").is_file());
    assert!(dir.path().join("zones.jsonl").is_file());
    assert!(!dir.path().join("zones_review.jsonl").exists());
    assert!(!dir.path().join("zone_qa_metrics.json").exists());
}

#[test]
fn remote_endpoint_scores_every_zone() {
    let endpoint = spawn_scorer(r#"{"plausibility": 0.5, "rationale": "remote check"}"#);
    let dir = tempfile::tempdir().unwrap();
    assert_success(&sarplan(&["demo", "--qa-endpoint", &endpoint], dir.path()));

    let reviews = std::fs::read_to_string(dir.path().join("zones_review.jsonl")).unwrap();
    assert!(!reviews.is_empty());
    for line in reviews.lines() {
        let review: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(review["scorer"], "remote");
        assert_eq!(review["plausibility"], 0.5);
        assert_eq!(review["rationale"], "remote check");
    }
    let metrics = read_json(&dir.path().join("zone_qa_metrics.json"));
    assert_eq!(metrics["n_fallbacks"], 0);
    assert_eq!(metrics["mean_plausibility"], 0.5);
}

#[test]
fn unreachable_endpoint_falls_back_to_heuristic() {
    let dir = tempfile::tempdir().unwrap();
    // Nothing listens on port 9; connection is refused immediately.
    assert_success(&sarplan(
        &["demo", "--qa-endpoint", "http://127.0.0.1:9/score"],
        dir.path(),
    ));
    let metrics = read_json(&dir.path().join("zone_qa_metrics.json"));
    let n_zones = metrics["n_zones"].as_u64().unwrap();
    assert!(n_zones > 0);
    assert_eq!(metrics["n_fallbacks"], n_zones);
    let reviews = std::fs::read_to_string(dir.path().join("zones_review.jsonl")).unwrap();
    for line in reviews.lines() {
        let review: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(review["scorer"], "heuristic");
    }
}
