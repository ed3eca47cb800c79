use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use glitchscope_core::audit::{aggregate_report, CaseCatalog, CaseLabel};
use glitchscope_core::daf::{self, attach_captions, DafParams, DiscrepancyCase};
use glitchscope_core::datastore::{
    load_manifest, read_embeddings, write_embeddings, DatasetManifest, ImageRecord,
};
use glitchscope_core::jsonl::{read_jsonl, write_jsonl};
use glitchscope_core::tcac::{self, build_pools, run_tcac, select_cases, CaptionPool, TcacParams};
use glitchscope_core::transform::{make_suite, ImageBuffer, SuiteConfig};
use rayon::prelude::*;

use crate::args::*;

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let records = manifest
        .records
        .par_iter()
        .map(|r| {
            let img = ImageBuffer::load(manifest.resolve_image_path(r))?;
            let rel = Path::new("images").join(format!("{}.png", r.id));
            img.save_png(args.out.join(&rel))?;
            ImageRecord::new(r.id.clone(), rel, r.captions.clone())
        })
        .collect::<glitchscope_core::Result<Vec<_>>>()?;
    let cached = DatasetManifest::new(manifest.source_name.clone(), &args.out, records)?;
    cached.write(&args.out.join("manifest.jsonl"))?;
    println!(
        "ingested {} images, {} captions ({} unique) into {}",
        cached.len(),
        cached.caption_count(),
        cached.unique_captions().len(),
        args.out.display()
    );
    Ok(())
}

fn load_images(manifest: &DatasetManifest) -> Result<Vec<(String, ImageBuffer)>> {
    Ok(manifest
        .records
        .par_iter()
        .map(|r| Ok((r.id.clone(), ImageBuffer::load(manifest.resolve_image_path(r))?)))
        .collect::<glitchscope_core::Result<Vec<_>>>()?)
}

pub fn embed(args: &EmbedArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let scorer = args.scorer.open()?;
    let store = match args.modality {
        Modality::Image => scorer.embed_images(&load_images(&manifest)?)?,
        Modality::Text => scorer.embed_texts(&manifest.unique_captions())?,
    };
    write_embeddings(&store, &args.out)?;
    println!(
        "wrote {} {}-dim vectors from {} to {}",
        store.len(),
        store.dim(),
        store.model_id(),
        args.out.display()
    );
    Ok(())
}

pub fn daf_run(args: &DafRunArgs) -> Result<()> {
    let a = read_embeddings(&args.emb_a)?;
    let b = read_embeddings(&args.emb_b)?;
    let params = DafParams {
        k: args.k,
        metric: args.metric,
        threshold: args.threshold,
        rbo_p: args.rbo_p,
    };
    let mut cases = daf::run_daf(&a, &b, &params)?;
    if let Some(path) = &args.manifest {
        attach_captions(&mut cases, &load_manifest(path)?)?;
    }
    write_jsonl(&args.out, &cases)?;
    println!(
        "flagged {} of {} queries (1 - jaccard@{} >= {}) -> {}",
        cases.len(),
        a.len(),
        args.k,
        args.threshold,
        args.out.display()
    );
    Ok(())
}

pub fn daf_prompt(args: &DafPromptArgs) -> Result<()> {
    let mut cases: Vec<DiscrepancyCase> = read_jsonl(&args.cases)?;
    if cases.is_empty() {
        bail!("{} holds no cases; nothing to prompt", args.cases.display());
    }
    if let Some(path) = &args.manifest {
        attach_captions(&mut cases, &load_manifest(path)?)?;
    } else if cases.iter().any(|c| c.captions.is_empty()) {
        bail!("cases carry no captions; pass --manifest here or to `daf run`");
    }
    let written = daf::write_prompts(&cases, args.batch, args.caption_policy, &args.out)?;
    println!("wrote {} prompt files to {}", written.len(), args.out.display());
    Ok(())
}

pub fn tcac_pool(args: &TcacPoolArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let texts = read_embeddings(&args.text_emb)?;
    let pools = build_pools(&manifest, &texts, args.per_caption, args.pool_scope)?;
    write_jsonl(&args.out, &pools)?;
    let largest = pools.iter().map(CaptionPool::len).max().unwrap_or(0);
    println!(
        "built {} caption pools (largest {}) -> {}",
        pools.len(),
        largest,
        args.out.display()
    );
    Ok(())
}

pub fn tcac_run(args: &TcacRunArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let pools: Vec<CaptionPool> = read_jsonl(&args.pools)?;
    let mut config = match &args.transforms {
        Some(path) => SuiteConfig::load(path)?,
        None => SuiteConfig::default(),
    };
    if args.elastic {
        config = config.with_elastic();
    }
    let suite = make_suite(&config, args.seed)?;
    let scorer = args.scorer.open()?;
    let params = TcacParams {
        k: args.k,
        temperature_scale: args.temperature,
    };
    if args.select == 0 {
        bail!(glitchscope_core::Error::invalid("select", "must be at least 1"));
    }
    let all = run_tcac(&manifest, &pools, scorer.as_ref(), &suite, &params, args.images_out.as_deref())?;
    let mut selected = select_cases(&all, args.select);
    if let Some(path) = &args.daf_cases {
        let daf_cases: Vec<DiscrepancyCase> = read_jsonl(path)?;
        tcac::annotate_cases(&mut selected, &daf_cases);
    }
    write_jsonl(&args.out, &selected)?;
    println!(
        "scored {} image/transform pairs over {} transforms; kept {} -> {}",
        all.len(),
        suite.len(),
        selected.len(),
        args.out.display()
    );
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let catalog = CaseCatalog::load_files(&args.cases)?;
    let log: Vec<CaseLabel> = if args.labels.exists() {
        read_jsonl(&args.labels)?
    } else {
        Vec::new()
    };
    let report = aggregate_report(&log, &catalog);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&args.out, text).map_err(|e| glitchscope_core::Error::io(&args.out, e))?;
    println!(
        "{} cases, {} unlabeled, {} current labels -> {}",
        report.total_cases,
        report.unlabeled_cases,
        report.effective_labels,
        args.out.display()
    );
    Ok(())
}
