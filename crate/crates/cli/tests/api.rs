mod common;

use std::sync::OnceLock;

use glitchscope::server::AppState;
use glitchscope_core::audit::{CaseLabel, LabelStore};
use glitchscope_core::daf::DiscrepancyCase;
use glitchscope_core::jsonl::read_jsonl;
use glitchscope_core::tcac::TcacCase;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use common::{run_pipeline, serve_pipeline, Pipeline};

/// One pipeline run shared by every test; each test copies it before serving.
fn pipeline() -> &'static Pipeline {
    static P: OnceLock<(tempfile::TempDir, Pipeline)> = OnceLock::new();
    &P.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let p = run_pipeline(dir.path());
        (dir, p)
    })
    .1
}

fn fresh() -> (tempfile::TempDir, Pipeline) {
    let src = pipeline();
    let dir = tempfile::tempdir().unwrap();
    for name in ["daf.jsonl", "tcac.jsonl"] {
        std::fs::copy(src.path(name), dir.path().join(name)).unwrap();
    }
    std::os::unix::fs::symlink(src.path("data"), dir.path().join("data")).unwrap();
    std::os::unix::fs::symlink(src.path("transformed"), dir.path().join("transformed")).unwrap();
    let p = Pipeline { dir: dir.path().to_path_buf() };
    (dir, p)
}

fn get(client: &Client, url: &str) -> (StatusCode, Value) {
    let r = client.get(url).send().unwrap();
    let status = r.status();
    (status, r.json().unwrap_or(Value::Null))
}

fn post(client: &Client, url: &str, body: Value) -> (StatusCode, Value) {
    let r = client.post(url).json(&body).send().unwrap();
    let status = r.status();
    (status, r.json().unwrap_or(Value::Null))
}

fn label_body(faults: &[&str], annotator: &str, ts: i64) -> Value {
    json!({ "fault_ids": faults, "note": "seen", "annotator": annotator, "timestamp": ts })
}

#[test]
fn taxonomy_lists_fourteen_faults() {
    let (_d, p) = fresh();
    let server = serve_pipeline(&p);
    let (status, body) = get(&Client::new(), &server.url("/api/taxonomy"));
    assert_eq!(status, StatusCode::OK);
    let faults = body.as_array().unwrap();
    assert_eq!(faults.len(), 14);
    assert_eq!(faults.iter().filter(|f| f["novel"] == true).count(), 4);
    assert!(faults.iter().all(|f| f["id"].is_string() && f["name"].is_string()));
}

#[test]
fn case_listing_filters_and_pages() {
    let (_d, p) = fresh();
    let daf: Vec<DiscrepancyCase> = read_jsonl(p.daf_cases()).unwrap();
    let tcac: Vec<TcacCase> = read_jsonl(p.tcac_cases()).unwrap();
    let server = serve_pipeline(&p);
    let c = Client::new();

    let (status, all) = get(&c, &server.url("/api/cases?limit=1000"));
    assert_eq!(status, StatusCode::OK);
    assert_eq!(all["total"], daf.len() + tcac.len());
    let cases = all["cases"].as_array().unwrap();
    let ids: Vec<&str> = cases.iter().map(|c| c["id"].as_str().unwrap()).collect();
    let expected: Vec<String> = daf
        .iter()
        .map(|c| c.query_id.clone())
        .chain(tcac.iter().map(TcacCase::case_id))
        .collect();
    assert_eq!(ids, expected);

    let (_, page) = get(&c, &server.url("/api/cases?offset=3&limit=5"));
    assert_eq!(page["cases"].as_array().unwrap().len(), 5);
    assert_eq!(page["cases"][0]["id"], cases[3]["id"]);
    assert_eq!(page["total"], all["total"]);

    let (_, gray) = get(&c, &server.url("/api/cases?transform=grayscale&limit=1000"));
    assert_eq!(gray["total"], 32);
    assert!(gray["cases"].as_array().unwrap().iter().all(|c| c["transform"] == "grayscale"));

    let (_, only_daf) = get(&c, &server.url("/api/cases?source=daf"));
    assert_eq!(only_daf["total"], daf.len());

    let (status, err) = get(&c, &server.url("/api/cases?source=bogus"));
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(err["error"].is_string());
    let (status, _) = get(&c, &server.url("/api/cases?transform=sepia"));
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[test]
fn case_detail_links_images() {
    let (_d, p) = fresh();
    let daf: Vec<DiscrepancyCase> = read_jsonl(p.daf_cases()).unwrap();
    let tcac: Vec<TcacCase> = read_jsonl(p.tcac_cases()).unwrap();
    let server = serve_pipeline(&p);
    let c = Client::new();

    let first = &tcac[0];
    let (status, body) = get(&c, &server.url(&format!("/api/cases/tcac/{}", first.case_id())));
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["image_id"], first.image_id);
    assert_eq!(serde_json::from_value::<TcacCase>(body["case"].clone()).unwrap(), *first);
    assert!(body["daf"]["status"].is_string());
    let original = c.get(server.url(body["original_image_url"].as_str().unwrap())).send().unwrap();
    assert_eq!(original.status(), StatusCode::OK);
    assert_eq!(
        original.bytes().unwrap().as_ref(),
        std::fs::read(p.path(&format!("data/images/{}.png", first.image_id))).unwrap()
    );
    let transformed = c.get(server.url(body["transformed_image_url"].as_str().unwrap())).send().unwrap();
    assert_eq!(transformed.status(), StatusCode::OK);
    assert_eq!(
        transformed.bytes().unwrap().as_ref(),
        std::fs::read(p.path(&format!("transformed/{}/{}.png", first.transform, first.image_id))).unwrap()
    );

    let d = &daf[0];
    let (status, body) = get(&c, &server.url(&format!("/api/cases/daf/{}", d.query_id)));
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_value::<DiscrepancyCase>(body["case"].clone()).unwrap(), *d);
    assert!(body.get("transformed_image_url").is_none());

    let (status, _) = get(&c, &server.url("/api/cases/tcac/grayscale:nope"));
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get(&c, &server.url("/api/cases/other/x"));
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[test]
fn labels_round_trip_and_supersede() {
    let (_d, p) = fresh();
    let tcac: Vec<TcacCase> = read_jsonl(p.tcac_cases()).unwrap();
    let id = tcac[1].case_id();
    let server = serve_pipeline(&p);
    let c = Client::new();
    let labels_url = server.url(&format!("/api/cases/tcac/{id}/labels"));

    let (status, saved) = post(&c, &labels_url, label_body(&["misinterpretation-of-color"], "ana", 10));
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(saved["case_ref"]["case_id"], id.as_str());
    post(&c, &labels_url, label_body(&["confusion-between-objects"], "bo", 11));
    let (status, _) = post(&c, &labels_url, label_body(&[], "ana", 12));
    assert_eq!(status, StatusCode::CREATED);

    let (_, body) = get(&c, &labels_url);
    assert_eq!(body["history"].as_array().unwrap().len(), 3);
    let current = body["current"].as_array().unwrap();
    assert_eq!(current.len(), 2);
    let ana = current.iter().find(|l| l["annotator"] == "ana").unwrap();
    assert_eq!(ana["fault_ids"], json!([]));

    let (_, detail) = get(&c, &server.url(&format!("/api/cases/tcac/{id}")));
    assert_eq!(detail["labels"].as_array().unwrap().len(), 2);

    let (_, report) = get(&c, &server.url("/api/report"));
    assert_eq!(report["label_events"], 3);
    assert_eq!(report["effective_labels"], 2);
    assert_eq!(report["per_fault"]["confusion-between-objects"], 1);
    assert_eq!(report["per_fault"]["misinterpretation-of-color"], 0);
    assert_eq!(report["disagreements"], 1);

    let (status, err) = post(&c, &labels_url, label_body(&["made-up-fault"], "ana", 13));
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(err["error"].as_str().unwrap().contains("made-up-fault"));
    let (status, _) = post(&c, &server.url("/api/cases/daf/missing/labels"), label_body(&[], "ana", 14));
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (_, body) = get(&c, &labels_url);
    assert_eq!(body["history"].as_array().unwrap().len(), 3);

    server.stop().unwrap();
    let reopened = LabelStore::open(p.labels()).unwrap();
    assert_eq!(reopened.history().len(), 3);
    let on_disk: Vec<CaseLabel> = read_jsonl(p.labels()).unwrap();
    assert_eq!(on_disk[2].timestamp, 12);
}

#[test]
fn missing_timestamp_uses_server_clock() {
    let (_d, p) = fresh();
    let daf: Vec<DiscrepancyCase> = read_jsonl(p.daf_cases()).unwrap();
    let server = serve_pipeline(&p);
    let url = server.url(&format!("/api/cases/daf/{}/labels", daf[0].query_id));
    let (status, saved) = post(&Client::new(), &url, json!({ "fault_ids": [], "annotator": "cy" }));
    assert_eq!(status, StatusCode::CREATED);
    assert!(saved["timestamp"].as_i64().unwrap() > 1_700_000_000);
}

#[test]
fn corrupt_case_file_refuses_startup() {
    let (_d, p) = fresh();
    let mut text = std::fs::read_to_string(p.tcac_cases()).unwrap();
    text.push_str("{not json\n");
    std::fs::write(p.tcac_cases(), &text).unwrap();
    let line = text.lines().count();
    let err = AppState::load(Some(&p.daf_cases()), Some(&p.tcac_cases()), &p.labels()).err().unwrap();
    let msg = format!("{err:#}");
    assert!(msg.contains(&format!("tcac.jsonl:{line}:")), "{msg}");

    let out = common::glitchscope(&[
        "serve", "--tcac-cases", p.tcac_cases().to_str().unwrap(), "--labels", p.labels().to_str().unwrap(), "--port", "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("tcac.jsonl:{line}:")));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.jsonl");
    let out = common::glitchscope(&["ingest", "--manifest", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": 3}\n").unwrap();
    let out = common::glitchscope(&["ingest", "--manifest", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = common::glitchscope(&["daf", "run", "--emb-a", "x"]);
    assert_eq!(out.status.code(), Some(2));

    let out = common::glitchscope(&[
        "embed", "--scorer", "remote:http://127.0.0.1:9", "--modality", "text",
        "--manifest", common::mini_manifest().to_str().unwrap(), "--out", dir.path().join("t.gseb").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
