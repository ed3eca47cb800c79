mod common;

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use glitchscope_core::scorer::protocol::{self, *};
use glitchscope_core::scorer::{RemoteConfig, RemoteScorer, Scorer, ScorerBinding, ToyScorer};
use glitchscope_core::{Error, ErrorClass};

#[derive(Default)]
struct Faults {
    /// Requests to answer with 503 before behaving.
    fail_first: usize,
    /// Answer every POST with this status instead.
    always: Option<StatusCode>,
    /// Return a syntactically valid but wrong-shaped body.
    malformed: bool,
}

struct Mock {
    toy: ToyScorer,
    faults: Mutex<Faults>,
    seen: Mutex<Vec<(String, Option<String>, String)>>,
}

type Shared = Arc<Mock>;

fn error(status: StatusCode, msg: &str) -> Response {
    (status, Json(ErrorResponse { error: msg.into() })).into_response()
}

fn gate(mock: &Mock, path: &str, headers: &HeaderMap, body: &Bytes) -> Option<Response> {
    let digest = headers.get(DIGEST_HEADER).map(|v| v.to_str().unwrap().to_string());
    mock.seen
        .lock()
        .unwrap()
        .push((path.to_string(), digest, protocol::body_digest(body)));
    let mut f = mock.faults.lock().unwrap();
    if let Some(status) = f.always {
        return Some(error(status, "refused"));
    }
    if f.fail_first > 0 {
        f.fail_first -= 1;
        return Some(error(StatusCode::SERVICE_UNAVAILABLE, "warming up"));
    }
    if f.malformed {
        return Some(Json(serde_json::json!({"dim": 3, "unexpected": true})).into_response());
    }
    None
}

fn respond<T: serde::Serialize>(r: glitchscope_core::Result<T>) -> Response {
    match r {
        Ok(v) => Json(v).into_response(),
        Err(e) => error(StatusCode::BAD_REQUEST, &e.to_string()),
    }
}

async fn info(State(m): State<Shared>) -> Response {
    Json(handle_info(&m.toy, m.toy.dim())).into_response()
}

async fn embed_image(State(m): State<Shared>, headers: HeaderMap, body: Bytes) -> Response {
    if let Some(r) = gate(&m, EMBED_IMAGE_PATH, &headers, &body) {
        return r;
    }
    let req: EmbedImageRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, &e.to_string()),
    };
    respond(handle_embed_image(&m.toy, &req))
}

async fn embed_text(State(m): State<Shared>, headers: HeaderMap, body: Bytes) -> Response {
    if let Some(r) = gate(&m, EMBED_TEXT_PATH, &headers, &body) {
        return r;
    }
    let req: EmbedTextRequest = serde_json::from_slice(&body).unwrap();
    respond(handle_embed_text(&m.toy, &req))
}

async fn score(State(m): State<Shared>, headers: HeaderMap, body: Bytes) -> Response {
    if let Some(r) = gate(&m, SCORE_PATH, &headers, &body) {
        return r;
    }
    let req: ScoreRequest = serde_json::from_slice(&body).unwrap();
    respond(handle_score(&m.toy, &req))
}

fn start(faults: Faults) -> (SocketAddr, Shared) {
    let mock = Arc::new(Mock {
        toy: ToyScorer::new(1, 64).unwrap(),
        faults: Mutex::new(faults),
        seen: Mutex::new(Vec::new()),
    });
    let app = Router::new()
        .route(INFO_PATH, get(info))
        .route(EMBED_IMAGE_PATH, post(embed_image))
        .route(EMBED_TEXT_PATH, post(embed_text))
        .route(SCORE_PATH, post(score))
        .with_state(mock.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (rx.recv().unwrap(), mock)
}

fn connect(addr: SocketAddr, batch_size: usize) -> RemoteScorer {
    RemoteScorer::connect(RemoteConfig {
        base_url: format!("http://{addr}"),
        timeout: Duration::from_secs(10),
        retries: 3,
        backoff: Duration::from_millis(5),
        max_in_flight: 3,
        batch_size,
    })
    .unwrap()
}

#[test]
fn remote_matches_local_toy_bit_for_bit() {
    let (addr, _) = start(Faults::default());
    let remote = connect(addr, 5);
    let local = ToyScorer::new(1, 64).unwrap();
    assert_eq!(remote.model_id(), local.model_id());
    assert_eq!(remote.info().dim, 64);

    let manifest = common::mini_manifest();
    let images = common::mini_images(&manifest);
    assert_eq!(remote.embed_images(&images).unwrap(), local.embed_images(&images).unwrap());

    let texts = manifest.unique_captions();
    assert_eq!(remote.embed_texts(&texts).unwrap(), local.embed_texts(&texts).unwrap());

    let (id, img) = &images[0];
    let caps = &texts[..7];
    assert_eq!(
        remote.score_image_captions(id, img, caps).unwrap(),
        local.score_image_captions(id, img, caps).unwrap()
    );
}

#[test]
fn server_errors_are_retried_with_the_same_digest() {
    let (addr, mock) = start(Faults {
        fail_first: 2,
        ..Faults::default()
    });
    let remote = connect(addr, 32);
    let texts = vec!["a dog".to_string(), "a cat".to_string()];
    let store = remote.embed_texts(&texts).unwrap();
    assert_eq!(store, ToyScorer::new(1, 64).unwrap().embed_texts(&texts).unwrap());
    let seen = mock.seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    for (path, header, actual) in seen.iter() {
        assert_eq!(path, EMBED_TEXT_PATH);
        assert_eq!(header.as_deref(), Some(actual.as_str()));
        assert_eq!(header, &seen[0].1);
    }
}

#[test]
fn retries_run_out() {
    let (addr, mock) = start(Faults {
        always: Some(StatusCode::INTERNAL_SERVER_ERROR),
        ..Faults::default()
    });
    let err = connect(addr, 32).embed_texts(&["x".into()]).unwrap_err();
    assert!(matches!(err, Error::Remote { retryable: true, .. }));
    assert_eq!(err.class(), ErrorClass::Remote);
    assert_eq!(mock.seen.lock().unwrap().len(), 4);
}

#[test]
fn client_errors_are_not_retried() {
    let (addr, mock) = start(Faults {
        always: Some(StatusCode::BAD_REQUEST),
        ..Faults::default()
    });
    let err = connect(addr, 32).embed_texts(&["x".into()]).unwrap_err();
    assert!(matches!(&err, Error::Remote { retryable: false, message } if message.contains("refused")));
    assert_eq!(mock.seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_payload_is_reported() {
    let (addr, _) = start(Faults {
        malformed: true,
        ..Faults::default()
    });
    let err = connect(addr, 32).embed_texts(&["x".into()]).unwrap_err();
    assert!(matches!(&err, Error::Remote { message, .. } if message.contains("malformed")));
}

#[test]
fn unreachable_service_is_a_remote_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let err = RemoteScorer::connect(RemoteConfig {
        base_url: format!("http://{addr}"),
        retries: 1,
        backoff: Duration::from_millis(1),
        ..RemoteConfig::default()
    })
    .unwrap_err();
    assert_eq!(err.class(), ErrorClass::Remote);
}

#[test]
fn binding_opens_remote() {
    let (addr, _) = start(Faults::default());
    let scorer = format!("remote:http://{addr}").parse::<ScorerBinding>().unwrap().open().unwrap();
    assert_eq!(scorer.model_id(), "toy-seed1-dim64");
}
