use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::cases::{CaseCatalog, CaseRef, CaseSource};
use super::labels::CaseLabel;
use super::taxonomy::taxonomy;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub cases: usize,
    pub labeled: usize,
    /// Labeled cases where every current label is empty.
    pub not_a_failure: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub total_cases: usize,
    pub unlabeled_cases: usize,
    /// Current labels (one per case and annotator) counted against loaded cases.
    pub effective_labels: usize,
    /// Every entry in the log, superseded ones included.
    pub label_events: usize,
    /// Current labels whose case is not among the loaded cases.
    pub orphan_labels: usize,
    /// Fault id -> number of current labels citing it. Every fault is listed.
    pub per_fault: BTreeMap<String, usize>,
    /// Transform -> fault id -> count, TCAC labels only.
    pub per_transform: BTreeMap<String, BTreeMap<String, usize>>,
    pub per_source: BTreeMap<String, SourceCounts>,
    /// Cases whose annotators disagree on the fault set.
    pub disagreements: usize,
}

/// Keeps the last label for each (case, annotator), in log order.
pub fn resolve_supersession(log: &[CaseLabel]) -> Vec<&CaseLabel> {
    let mut latest: BTreeMap<(&CaseRef, &str), &CaseLabel> = BTreeMap::new();
    for label in log {
        latest.insert((&label.case_ref, label.annotator.as_str()), label);
    }
    latest.into_values().collect()
}

/// Aggregates a raw label log against the loaded cases.
pub fn aggregate_report(log: &[CaseLabel], catalog: &CaseCatalog) -> AuditReport {
    report_from_effective(resolve_supersession(log).into_iter(), log.len(), catalog)
}

pub(crate) fn report_from_effective<'a>(
    effective: impl Iterator<Item = &'a CaseLabel>,
    label_events: usize,
    catalog: &CaseCatalog,
) -> AuditReport {
    let mut per_fault: BTreeMap<String, usize> = taxonomy().iter().map(|f| (f.id.to_string(), 0)).collect();
    let mut per_transform: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut by_case: BTreeMap<&CaseRef, Vec<&CaseLabel>> = BTreeMap::new();
    let mut orphan_labels = 0;
    let mut effective_labels = 0;

    for label in effective {
        if !catalog.contains(&label.case_ref) {
            orphan_labels += 1;
            continue;
        }
        effective_labels += 1;
        by_case.entry(&label.case_ref).or_default().push(label);
        let transform = catalog.transform_of(&label.case_ref);
        for fault in label.fault_set() {
            *per_fault.entry(fault.to_string()).or_default() += 1;
            if let Some(t) = transform {
                *per_transform
                    .entry(t.name().to_string())
                    .or_default()
                    .entry(fault.to_string())
                    .or_default() += 1;
            }
        }
    }

    let mut per_source: BTreeMap<String, SourceCounts> = [CaseSource::Daf, CaseSource::Tcac]
        .iter()
        .map(|s| (s.name().to_string(), SourceCounts::default()))
        .collect();
    let mut unlabeled_cases = 0;
    for r in catalog.refs() {
        let counts = per_source.get_mut(r.source.name()).expect("both sources present");
        counts.cases += 1;
        match by_case.get(&r) {
            None => unlabeled_cases += 1,
            Some(labels) => {
                counts.labeled += 1;
                if labels.iter().all(|l| l.fault_ids.is_empty()) {
                    counts.not_a_failure += 1;
                }
            }
        }
    }

    let disagreements = by_case
        .values()
        .filter(|labels| {
            let sets: BTreeSet<BTreeSet<&str>> = labels.iter().map(|l| l.fault_set()).collect();
            sets.len() > 1
        })
        .count();

    AuditReport {
        total_cases: catalog.len(),
        unlabeled_cases,
        effective_labels,
        label_events,
        orphan_labels,
        per_fault,
        per_transform,
        per_source,
        disagreements,
    }
}
