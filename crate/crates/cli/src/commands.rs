//! Subcommands other than `run` and `fetch`, which live with their stages.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};

use unktx_core::canon::{canonical_label, canonical_label_tdag};
use unktx_core::cluster::{cluster, filter_by_script, write_csv, write_json};
use unktx_core::ledger::synth::{synth, GeneratorSpec};
use unktx_core::ledger::write as write_ledger;
use unktx_core::oracle::{cross_validate, rooted_trees, CrossReport};
use unktx_core::script::{default_matcher, ScriptMatcher};

use crate::config::read_rules;
use crate::error::{CliError, CliResult};
use crate::pipeline::{dump_to_forest, load_dump, progress};

/// Reads a generator spec, TOML if the extension says so, JSON otherwise.
pub fn read_spec(path: &Path) -> CliResult<GeneratorSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading spec {}", path.display()))
        .map_err(CliError::Input)?;
    let parsed = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(anyhow::Error::from)
    } else {
        serde_json::from_str(&text).map_err(anyhow::Error::from)
    };
    parsed
        .with_context(|| format!("spec {}", path.display()))
        .map_err(CliError::Input)
}

pub fn cmd_synth(spec_path: &Path, seed: u64, out: &Path) -> CliResult<()> {
    let spec = read_spec(spec_path)?;
    let ledger = synth(&spec, seed).map_err(CliError::input)?;
    write_ledger(&ledger, out)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(CliError::Input)?;
    progress("synth", ledger.blocks().len(), ledger.blocks().len());
    Ok(())
}

/// Prints `id<TAB>label` per component. With `check`, stored labels must
/// match the recomputed ones.
pub fn cmd_label(dump: &Path, check: bool, mut out: impl Write) -> CliResult<()> {
    let records = load_dump(dump)?;
    let forest = dump_to_forest(&records)?;
    let mut mismatches = 0;
    for (r, c) in records.iter().zip(&forest.components) {
        let l = canonical_label_tdag(&c.dag)
            .map_err(|e| CliError::input(anyhow!("component {}: {e}", c.id)))?;
        if check && r.label.as_deref() != Some(l.as_str()) {
            mismatches += 1;
            log::error!("component {}: stored label {:?} != {l}", c.id, r.label);
        }
        writeln!(out, "{}\t{l}", c.id).map_err(CliError::internal)?;
    }
    if mismatches > 0 {
        return Err(CliError::internal(anyhow!("{mismatches} stored labels differ")));
    }
    Ok(())
}

pub enum ClusterFormat {
    Csv,
    Json,
}

/// Re-clusters a forest dump, optionally after root-script filtering.
pub fn cmd_cluster(
    dump: &Path,
    filter: Option<&ScriptMatcher>,
    format: ClusterFormat,
    mut out: impl Write,
) -> CliResult<BTreeMap<String, usize>> {
    let forest = dump_to_forest(&load_dump(dump)?)?;
    let (forest, dropped) = match filter {
        Some(m) => filter_by_script(forest, m),
        None => (forest, BTreeMap::new()),
    };
    let rows = cluster(&forest).map_err(CliError::internal)?;
    match format {
        ClusterFormat::Csv => write_csv(&rows, &mut out),
        ClusterFormat::Json => write_json(&rows, &mut out),
    }
    .map_err(CliError::internal)?;
    Ok(dropped)
}

pub fn filter_matcher(rules: Option<&Path>) -> CliResult<ScriptMatcher> {
    match rules {
        Some(p) => ScriptMatcher::new(read_rules(p)?).map_err(CliError::input),
        None => Ok(default_matcher()),
    }
}

#[derive(Debug, serde::Serialize)]
pub struct TreeCheck {
    pub n: usize,
    pub trees: usize,
    pub distinct_labels: usize,
    pub pair_disagreements: usize,
}

/// Every rooted tree up to `max_n` vertices: distinct labels must equal the
/// number of trees, and label equality must match brute force pairwise
/// (up to 9 vertices, the brute-force limit).
pub fn tree_check(max_n: usize) -> Vec<TreeCheck> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        let trees = rooted_trees(n);
        let labels: Vec<String> = trees.iter().map(canonical_label).collect();
        let mut distinct = labels.clone();
        distinct.sort();
        distinct.dedup();
        let mut bad = 0;
        if n <= 9 {
            for i in 0..trees.len() {
                for j in i..trees.len() {
                    let brute = unktx_core::canon::brute_force_isomorphic(&trees[i], &trees[j])
                        .expect("within limit");
                    if brute != (labels[i] == labels[j]) {
                        bad += 1;
                    }
                }
            }
        }
        out.push(TreeCheck {
            n,
            trees: trees.len(),
            distinct_labels: distinct.len(),
            pair_disagreements: bad,
        });
    }
    out
}

#[derive(Debug, serde::Serialize)]
pub struct OracleReport {
    pub trees: Vec<TreeCheck>,
    pub shared_vertex: CrossReport,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.shared_vertex.passed()
            && self
                .trees
                .iter()
                .all(|t| t.distinct_labels == t.trees && t.pair_disagreements == 0)
    }
}

pub fn cmd_oracle_check(
    max_n: usize,
    samples: usize,
    seed: u64,
    report: &Path,
    mut out: impl Write,
) -> CliResult<OracleReport> {
    if max_n == 0 {
        return Err(CliError::input(anyhow!("max-n must be positive")));
    }
    let trees = tree_check(max_n);
    let shared_vertex = cross_validate(samples, max_n.min(9), seed);
    let rep = OracleReport {
        trees,
        shared_vertex,
    };
    let mut bytes = serde_json::to_vec_pretty(&rep).map_err(CliError::internal)?;
    bytes.push(b'\n');
    std::fs::write(report, bytes)
        .with_context(|| format!("writing {}", report.display()))
        .map_err(CliError::Input)?;
    for t in &rep.trees {
        writeln!(
            out,
            "trees n={} count={} labels={} disagreements={}",
            t.n, t.trees, t.distinct_labels, t.pair_disagreements
        )
        .map_err(CliError::internal)?;
    }
    let s = &rep.shared_vertex;
    writeln!(
        out,
        "shared-vertex pairs={} isomorphic={} soundness_violations={} completeness_disagreements={}",
        s.pairs_compared,
        s.brute_isomorphic_pairs,
        s.soundness_violations.len(),
        s.completeness_disagreements.len()
    )
    .map_err(CliError::internal)?;
    Ok(rep)
}
