use std::collections::{BTreeMap, BTreeSet, HashMap};

use glitchscope_core::audit::{
    aggregate_report, find_fault, slugify, taxonomy, AuditReport, CaseCatalog, CaseLabel, CaseRef, CaseSource,
    LabelStore, SourceCounts,
};
use glitchscope_core::daf::{DiscrepancyCase, DivergenceScore};
use glitchscope_core::simindex::{NeighborList, SimilarityMetric};
use glitchscope_core::tcac::TcacCase;
use glitchscope_core::transform::TransformKind;
use glitchscope_core::Error;
use rand::{Rng, SeedableRng};

fn catalog() -> CaseCatalog {
    let empty = |q: &str| NeighborList {
        query_id: q.into(),
        metric: SimilarityMetric::Cosine,
        entries: vec![],
    };
    let daf = (0..6)
        .map(|i| {
            let q = format!("img_{i:02}");
            DiscrepancyCase {
                query_id: q.clone(),
                divergence: DivergenceScore {
                    jaccard_at_k: 0.1,
                    rbo: 0.1,
                    rbo_p: 0.9,
                    displacement: 1.0,
                },
                neighbors_a: empty(&q),
                neighbors_b: empty(&q),
                captions: BTreeMap::new(),
            }
        })
        .collect();
    let tcac = TransformKind::ALL[..6]
        .iter()
        .flat_map(|&t| {
            (0..4).map(move |i| TcacCase {
                image_id: format!("img_{i:02}"),
                transform: t,
                top_before: vec![],
                top_after: vec![],
                diff_count: i,
                daf: None,
            })
        })
        .collect();
    CaseCatalog::new(daf, tcac).unwrap()
}

/// Straight replay of the log: last label per (case, annotator) wins.
fn replay(log: &[CaseLabel], catalog: &CaseCatalog) -> AuditReport {
    let mut current: HashMap<(CaseRef, String), CaseLabel> = HashMap::new();
    for l in log {
        current.insert((l.case_ref.clone(), l.annotator.clone()), l.clone());
    }
    let transform_of = |r: &CaseRef| match r.source {
        CaseSource::Daf => None,
        CaseSource::Tcac => Some(r.case_id.split(':').next().unwrap().to_string()),
    };
    let mut per_fault: BTreeMap<String, usize> = taxonomy().iter().map(|f| (f.id.to_string(), 0)).collect();
    let mut per_transform: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut by_case: BTreeMap<CaseRef, Vec<BTreeSet<String>>> = BTreeMap::new();
    let mut orphan = 0;
    let mut effective = 0;
    for ((case, _), label) in &current {
        if !catalog.contains(case) {
            orphan += 1;
            continue;
        }
        effective += 1;
        let faults: BTreeSet<String> = label.fault_ids.iter().cloned().collect();
        for f in &faults {
            *per_fault.get_mut(f).unwrap() += 1;
            if let Some(t) = transform_of(case) {
                *per_transform.entry(t).or_default().entry(f.clone()).or_default() += 1;
            }
        }
        by_case.entry(case.clone()).or_default().push(faults);
    }
    let mut per_source = BTreeMap::new();
    for (source, ids) in [
        (CaseSource::Daf, catalog.daf().iter().map(|c| c.query_id.clone()).collect::<Vec<_>>()),
        (CaseSource::Tcac, catalog.tcac().iter().map(|c| c.case_id()).collect()),
    ] {
        let mut counts = SourceCounts::default();
        for id in ids {
            counts.cases += 1;
            if let Some(sets) = by_case.get(&CaseRef::new(source, id)) {
                counts.labeled += 1;
                if sets.iter().all(|s| s.is_empty()) {
                    counts.not_a_failure += 1;
                }
            }
        }
        per_source.insert(source.name().to_string(), counts);
    }
    let labeled: usize = per_source.values().map(|c: &SourceCounts| c.labeled).sum();
    AuditReport {
        total_cases: catalog.len(),
        unlabeled_cases: catalog.len() - labeled,
        effective_labels: effective,
        label_events: log.len(),
        orphan_labels: orphan,
        per_fault,
        per_transform,
        per_source,
        disagreements: by_case
            .values()
            .filter(|sets| sets.iter().collect::<BTreeSet<_>>().len() > 1)
            .count(),
    }
}

fn random_label(rng: &mut impl Rng, refs: &[CaseRef], t: i64) -> CaseLabel {
    let ids: Vec<&str> = taxonomy().iter().map(|f| f.id).collect();
    let n = rng.random_range(0..=3);
    CaseLabel {
        case_ref: refs[rng.random_range(0..refs.len())].clone(),
        fault_ids: (0..n).map(|_| ids[rng.random_range(0..ids.len())].to_string()).collect(),
        note: format!("op {t}"),
        annotator: ["ana", "bo", "cy"][rng.random_range(0..3)].into(),
        timestamp: 1_700_000_000 + t,
    }
}

#[test]
fn two_hundred_random_operations_replay_identically() {
    let catalog = catalog();
    // a narrow slice of cases forces plenty of supersessions
    let refs: Vec<CaseRef> = catalog.refs().step_by(3).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.jsonl");
    for seed in 0..5u64 {
        let _ = std::fs::remove_file(&path);
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut store = LabelStore::open(&path).unwrap();
        for t in 0..200 {
            let label = random_label(&mut rng, &refs, t);
            store.record_label(label, &catalog).unwrap();
            if t % 50 == 49 {
                assert_eq!(store.report(&catalog), replay(store.history(), &catalog));
            }
        }
        let live = store.report(&catalog);
        assert_eq!(live.label_events, 200);
        assert!(live.effective_labels < 200);
        assert_eq!(live, replay(store.history(), &catalog));
        assert_eq!(live, aggregate_report(store.history(), &catalog));
        drop(store);
        let reopened = LabelStore::open(&path).unwrap();
        assert_eq!(reopened.history().len(), 200);
        assert_eq!(reopened.report(&catalog), live);
        let raw: Vec<CaseLabel> = glitchscope_core::jsonl::read_jsonl(&path).unwrap();
        assert_eq!(aggregate_report(&raw, &catalog), live);
    }
}

#[test]
fn report_examples() {
    let catalog = catalog();
    let empty = aggregate_report(&[], &catalog);
    assert_eq!(empty.unlabeled_cases, empty.total_cases);
    assert_eq!(empty.total_cases, 6 + 24);
    assert!(empty.per_fault.values().all(|&c| c == 0));
    assert_eq!(empty.per_fault.len(), 14);

    let refs: Vec<CaseRef> = catalog.refs().take(3).collect();
    let faults = ["action-vs-stillness-confusion", "hallucination-of-water-like-features", "action-vs-stillness-confusion"];
    let log: Vec<CaseLabel> = refs
        .iter()
        .zip(faults)
        .map(|(r, f)| CaseLabel {
            case_ref: r.clone(),
            fault_ids: vec![f.into()],
            note: String::new(),
            annotator: "ana".into(),
            timestamp: 0,
        })
        .collect();
    let report = aggregate_report(&log, &catalog);
    assert_eq!(report.per_fault.values().sum::<usize>(), 3);
    assert_eq!(report.unlabeled_cases, 27);
}

#[test]
fn supersede_keeps_history() {
    let catalog = catalog();
    let case = CaseRef::new(CaseSource::Tcac, "grayscale:img_01");
    let mut store = LabelStore::in_memory();
    for (t, faults) in [(1, vec!["action-vs-stillness-confusion"]), (2, vec![])] {
        store
            .record_label(
                CaseLabel {
                    case_ref: case.clone(),
                    fault_ids: faults.into_iter().map(String::from).collect(),
                    note: String::new(),
                    annotator: "ana".into(),
                    timestamp: t,
                },
                &catalog,
            )
            .unwrap();
    }
    assert_eq!(store.history().len(), 2);
    let current = store.labels_for(&case);
    assert_eq!(current.len(), 1);
    assert_eq!(current[0].timestamp, 2);
    let report = store.report(&catalog);
    assert_eq!(report.per_source["tcac"].not_a_failure, 1);
    assert_eq!(report.per_fault["action-vs-stillness-confusion"], 0);
}

#[test]
fn taxonomy_shape() {
    let t = taxonomy();
    assert_eq!(t.len(), 14);
    assert_eq!(t.iter().filter(|f| f.novel).count(), 4);
    for f in t {
        assert_eq!(f.id, slugify(f.name));
        assert_eq!(find_fault(f.id).unwrap().name, f.name);
    }
    assert!(find_fault("hallucination-of-water-like-features").is_some());
    assert!(find_fault("made-up-fault").is_none());

    let mut store = LabelStore::in_memory();
    let err = store
        .record_label(
            CaseLabel {
                case_ref: CaseRef::new(CaseSource::Daf, "img_00"),
                fault_ids: vec!["made-up-fault".into()],
                note: String::new(),
                annotator: "ana".into(),
                timestamp: 0,
            },
            &catalog(),
        )
        .unwrap_err();
    assert!(matches!(err, Error::UnknownFault(_)));
}
