//! Grouping of normalized components by canonical label, and root-script
//! filtering.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::{label, representative, CanonError, Dag};
use crate::script::ScriptMatcher;
use crate::tdag::{add_super_root, compress_counted, ClassStats, Component, Forest};

/// Samples kept per class in the JSON report.
pub const SAMPLE_IDS: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsoClassReport {
    pub label: String,
    pub count: usize,
    pub height: usize,
    pub cardinality: usize,
    pub edges: usize,
    pub roots: usize,
    pub sample_component_ids: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("component {id}: {source}")]
    Canon { id: usize, source: CanonError },
    #[error("components {a} and {b} share label {label} but differ in stats")]
    StatMismatch { label: String, a: usize, b: usize },
}

/// A labelled component, ready for grouping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labelled {
    pub id: usize,
    pub label: String,
    pub stats: ClassStats,
    pub exact: bool,
}

/// Compresses every component and adds a super-root where there are
/// several roots. Returns how many components compression changed.
pub fn normalize(forest: Forest, trivial: &ScriptMatcher) -> (Forest, usize) {
    let done: Vec<(Component, usize)> = forest
        .components
        .into_par_iter()
        .map(|c| {
            let (dag, removed) = compress_counted(&c.dag, trivial);
            (
                Component {
                    dag: add_super_root(dag),
                    ..c
                },
                removed,
            )
        })
        .collect();
    let touched = done.iter().filter(|(_, r)| *r > 0).count();
    let components = done.into_iter().map(|(c, _)| c).collect();
    (Forest { components }, touched)
}

/// Canonical labels of normalized components, in forest order.
pub fn label_components(forest: &Forest) -> Result<Vec<Labelled>, ClusterError> {
    forest
        .components
        .par_iter()
        .map(|c| {
            let dag = Dag::from_tdag(&c.dag).map_err(|source| ClusterError::Canon { id: c.id, source })?;
            let r = representative(&dag);
            Ok(Labelled {
                id: c.id,
                label: label(r.dag()),
                stats: ClassStats::of_normalized(&c.dag),
                exact: r.exact(),
            })
        })
        .collect()
}

/// Groups labelled components. Rows come out by count descending, then
/// label ascending.
pub fn group(labelled: &[Labelled]) -> Result<Vec<IsoClassReport>, ClusterError> {
    let mut by_label: BTreeMap<&str, (IsoClassReport, usize)> = BTreeMap::new();
    for l in labelled {
        match by_label.get_mut(l.label.as_str()) {
            Some((row, first)) => {
                let s = &l.stats;
                if (s.height, s.cardinality, s.edges, s.roots)
                    != (row.height, row.cardinality, row.edges, row.roots)
                {
                    return Err(ClusterError::StatMismatch {
                        label: l.label.clone(),
                        a: *first,
                        b: l.id,
                    });
                }
                row.count += 1;
                if row.sample_component_ids.len() < SAMPLE_IDS {
                    row.sample_component_ids.push(l.id);
                }
            }
            None => {
                let s = &l.stats;
                let row = IsoClassReport {
                    label: l.label.clone(),
                    count: 1,
                    height: s.height,
                    cardinality: s.cardinality,
                    edges: s.edges,
                    roots: s.roots,
                    sample_component_ids: vec![l.id],
                };
                by_label.insert(&l.label, (row, l.id));
            }
        }
    }
    let mut rows: Vec<IsoClassReport> = by_label.into_values().map(|(r, _)| r).collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.label.cmp(&b.label)));
    Ok(rows)
}

/// Expects every component already normalized.
pub fn cluster(forest: &Forest) -> Result<Vec<IsoClassReport>, ClusterError> {
    group(&label_components(forest)?)
}

/// Drops components whose root scripts match a rule. The first matching
/// rule, in matcher order, takes the count.
pub fn filter_by_script(forest: Forest, matcher: &ScriptMatcher) -> (Forest, BTreeMap<String, usize>) {
    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    let mut kept = Vec::with_capacity(forest.components.len());
    let names: Vec<&str> = matcher.names().collect();
    for c in forest.components {
        let hit = c
            .root_scripts
            .iter()
            .filter_map(|s| matcher.match_script(s))
            .filter_map(|n| names.iter().position(|x| *x == n))
            .min();
        match hit {
            Some(i) => *dropped.entry(names[i].to_owned()).or_default() += 1,
            None => kept.push(c),
        }
    }
    (Forest { components: kept }, dropped)
}

pub fn write_csv(rows: &[IsoClassReport], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "label,count,height,cardinality,edges,roots")?;
    for r in rows {
        // Labels hold only digits and `,:;`, so quoting is enough.
        writeln!(
            w,
            "\"{}\",{},{},{},{},{}",
            r.label, r.count, r.height, r.cardinality, r.edges, r.roots
        )?;
    }
    w.flush()
}

pub fn write_json(rows: &[IsoClassReport], mut w: impl Write) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, rows)?;
    w.write_all(b"\n")?;
    w.flush()
}
