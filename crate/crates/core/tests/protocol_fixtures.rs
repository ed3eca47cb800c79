//! Request/response vectors for the `/v1` scoring protocol, produced by the
//! toy backend (`toy:seed=1,dim=8`). Any implementation of the service can
//! replay them. Regenerate with `GLITCHSCOPE_BLESS=1 cargo test --test protocol_fixtures`.

use std::path::PathBuf;

use glitchscope_core::scorer::protocol::*;
use glitchscope_core::scorer::{Scorer, ToyScorer};
use glitchscope_core::transform::ImageBuffer;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/protocol")
}

fn toy() -> ToyScorer {
    ToyScorer::new(1, 8).unwrap()
}

fn checker_png() -> String {
    let mut img = ImageBuffer::filled(4, 4, [20, 40, 60]).unwrap();
    img.set_pixel(1, 1, [250, 10, 10]);
    img.set_pixel(2, 3, [10, 250, 10]);
    encode_png(&img)
}

fn requests() -> Vec<(&'static str, Value)> {
    vec![
        (
            "embed_image",
            serde_json::to_value(EmbedImageRequest {
                items: vec![ImageItem {
                    id: "checker".into(),
                    png_b64: checker_png(),
                }],
            })
            .unwrap(),
        ),
        (
            "embed_text",
            serde_json::to_value(EmbedTextRequest {
                texts: vec!["a dog in a park".into(), "two cats on a sofa".into()],
            })
            .unwrap(),
        ),
        (
            "score",
            serde_json::to_value(ScoreRequest {
                png_b64: checker_png(),
                captions: vec!["a red dot".into(), "a green dot".into(), "nothing at all".into()],
            })
            .unwrap(),
        ),
    ]
}

/// Runs the handler and returns its response as a JSON value. When `expected`
/// is given, it is also compared as a typed response so float payloads are
/// checked at f32 precision.
fn serve(name: &str, request: &Value, expected: Option<&Value>) -> Value {
    fn run<Req: DeserializeOwned, Resp: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(
        request: &Value,
        expected: Option<&Value>,
        f: impl Fn(&dyn Scorer, &Req) -> glitchscope_core::Result<Resp>,
    ) -> Value {
        let req: Req = serde_json::from_value(request.clone()).unwrap();
        let resp = f(&toy(), &req).unwrap();
        if let Some(want) = expected {
            let want: Resp = serde_json::from_value(want.clone()).unwrap();
            assert_eq!(resp, want);
        }
        serde_json::to_value(resp).unwrap()
    }
    match name {
        "embed_image" => run(request, expected, handle_embed_image),
        "embed_text" => run(request, expected, handle_embed_text),
        "score" => run(request, expected, handle_score),
        other => panic!("{other}"),
    }
}

fn read(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

#[test]
fn toy_backend_reproduces_fixtures() {
    let bless = std::env::var_os("GLITCHSCOPE_BLESS").is_some();
    let info = serde_json::to_value(handle_info(&toy(), 8)).unwrap();
    let mut cases = requests();
    cases.sort_by_key(|(n, _)| *n);
    if bless {
        let write = |name: String, v: &Value| {
            std::fs::write(dir().join(name), serde_json::to_string_pretty(v).unwrap() + "\n").unwrap();
        };
        write("info.response.json".into(), &info);
        for (name, req) in &cases {
            write(format!("{name}.request.json"), req);
            write(format!("{name}.response.json"), &serve(name, req, None));
        }
    }
    assert_eq!(read(dir().join("info.response.json")), info);
    for (name, _) in &cases {
        let req = read(dir().join(format!("{name}.request.json")));
        let want = read(dir().join(format!("{name}.response.json")));
        serve(name, &req, Some(&want));
    }
}

#[test]
fn fixtures_follow_the_wire_schema() {
    let resp = read(dir().join("embed_image.response.json"));
    let dim = resp["dim"].as_u64().unwrap() as usize;
    for item in resp["items"].as_array().unwrap() {
        assert!(item["id"].is_string());
        assert_eq!(item["vec"].as_array().unwrap().len(), dim);
    }
    let resp = read(dir().join("embed_text.response.json"));
    let req = read(dir().join("embed_text.request.json"));
    assert_eq!(resp["vecs"].as_array().unwrap().len(), req["texts"].as_array().unwrap().len());
    let resp = read(dir().join("score.response.json"));
    let req = read(dir().join("score.request.json"));
    assert_eq!(resp["logits"].as_array().unwrap().len(), req["captions"].as_array().unwrap().len());
    let info = read(dir().join("info.response.json"));
    assert!(info["model_id"].is_string() && info["dim"].is_u64());

    // typed round trip
    let _: EmbedImageResponse = serde_json::from_value(read(dir().join("embed_image.response.json"))).unwrap();
    let _: ErrorResponse = serde_json::from_str(r#"{"error":"boom"}"#).unwrap();
}
