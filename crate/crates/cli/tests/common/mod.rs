#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::thread::JoinHandle;

use glitchscope::server::{serve_until, AppState, Assets};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_glitchscope")
}

pub fn mini_manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/mini/manifest.jsonl")
}

pub fn glitchscope(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn glitchscope")
}

/// Runs the binary and panics with its stderr on failure.
pub fn check(args: &[&str]) -> String {
    let out = glitchscope(args);
    assert!(
        out.status.success(),
        "glitchscope {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Outputs of one full pipeline run.
pub struct Pipeline {
    pub dir: PathBuf,
}

impl Pipeline {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn daf_cases(&self) -> PathBuf {
        self.path("daf.jsonl")
    }

    pub fn tcac_cases(&self) -> PathBuf {
        self.path("tcac.jsonl")
    }

    pub fn labels(&self) -> PathBuf {
        self.path("labels.jsonl")
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// ingest, embed x3, daf run, daf prompt, tcac pool, tcac run, report.
pub fn run_pipeline(dir: &Path) -> Pipeline {
    let p = Pipeline { dir: dir.to_path_buf() };
    let data = p.path("data");
    let manifest = data.join("manifest.jsonl");
    check(&["ingest", "--manifest", s(&mini_manifest()), "--out", s(&data)]);
    for (scorer, modality, out) in [
        ("toy:seed=1,dim=64", "image", "emb_a.gseb"),
        ("toy:seed=2,dim=64", "image", "emb_b.gseb"),
        ("toy:seed=1,dim=64", "text", "text.gseb"),
    ] {
        check(&["embed", "--scorer", scorer, "--modality", modality, "--manifest", s(&manifest), "--out", s(&p.path(out))]);
    }
    // toy seeds 1 and 2 peak below the 0.8 default on this corpus
    check(&[
        "daf", "run", "--emb-a", s(&p.path("emb_a.gseb")), "--emb-b", s(&p.path("emb_b.gseb")),
        "--threshold", "0.5", "--manifest", s(&manifest), "--out", s(&p.daf_cases()),
    ]);
    check(&["daf", "prompt", "--cases", s(&p.daf_cases()), "--out", s(&p.path("prompts"))]);
    check(&["tcac", "pool", "--manifest", s(&manifest), "--text-emb", s(&p.path("text.gseb")), "--out", s(&p.path("pools.jsonl"))]);
    check(&[
        "tcac", "run", "--manifest", s(&manifest), "--pools", s(&p.path("pools.jsonl")), "--scorer", "toy:seed=1,dim=64",
        "--daf-cases", s(&p.daf_cases()), "--images-out", s(&p.path("transformed")), "--out", s(&p.tcac_cases()),
    ]);
    check(&[
        "report", "--labels", s(&p.labels()), "--cases", s(&p.daf_cases()), s(&p.tcac_cases()),
        "--out", s(&p.path("report.json")),
    ]);
    p
}

/// An in-process triage server on an ephemeral port.
pub struct TestServer {
    pub base: String,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    handle: Option<JoinHandle<anyhow::Result<()>>>,
}

impl TestServer {
    pub fn start(state: AppState, assets: Assets) -> Self {
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let handle = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
                addr_tx.send(listener.local_addr()?).expect("test thread alive");
                serve_until(listener, Arc::new(state), &assets, async {
                    let _ = stop_rx.await;
                })
                .await
            })
        });
        let addr = addr_rx.recv().expect("server bound");
        TestServer {
            base: format!("http://{addr}"),
            stop: Some(stop_tx),
            handle: Some(handle),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    /// Graceful shutdown; returns the server's result.
    pub fn stop(mut self) -> anyhow::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> anyhow::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.handle.take() {
            Some(h) => h.join().expect("server thread panicked"),
            None => Ok(()),
        }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

pub fn serve_pipeline(p: &Pipeline) -> TestServer {
    let state = AppState::load(Some(&p.daf_cases()), Some(&p.tcac_cases()), &p.labels()).expect("state loads");
    TestServer::start(
        state,
        Assets {
            images: Some(p.path("data/images")),
            transformed: Some(p.path("transformed")),
            static_dir: None,
        },
    )
}
