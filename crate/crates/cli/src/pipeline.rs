//! The `run` pipeline: ingest → link → α-detect → extract → prune →
//! compress → super-root → label → filter → cluster, then reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use unktx_core::canon::LABEL_FORMAT;
use unktx_core::cluster::{
    filter_by_script, group, label_components, normalize, write_csv, write_json, IsoClassReport,
    Labelled,
};
use unktx_core::ledger::{ingest, link};
use unktx_core::tdag::{build_forest, prune_height1, write_forest, ComponentRecord, Forest};
use unktx_core::tiograph::find_alpha_nodes;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

pub const FOREST_FILE: &str = "forest.jsonl";
pub const CLASSES_CSV: &str = "classes.csv";
pub const CLASSES_JSON: &str = "classes.json";
pub const DROPPED_FILE: &str = "dropped.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn progress(stage: &str, done: usize, total: usize) {
    eprintln!("stage={stage} done={done} total={total}");
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        h.update(&buf[..k]);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub blocks: usize,
    pub transactions: usize,
    pub alpha_nodes: usize,
    pub forest_nodes: usize,
    pub forest_edges: usize,
    pub components: usize,
    pub pruned: usize,
    pub compressed: usize,
    pub dropped: usize,
    pub kept: usize,
    pub classes: usize,
    pub inexact_labels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub label_format: String,
    pub config_sha256: String,
    pub input_sha256: String,
    pub seed: Option<u64>,
    pub threads: usize,
    pub counts: Counts,
    pub stages: Vec<StageTime>,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub counts: Counts,
    pub dropped: BTreeMap<String, usize>,
    pub classes: Vec<IsoClassReport>,
    pub manifest: Manifest,
}

struct Stages {
    times: Vec<StageTime>,
}

impl Stages {
    fn run<T>(&mut self, name: &str, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
        progress(name, 0, 1);
        let t0 = Instant::now();
        let out = f().map_err(|e| e.context(format!("stage {name}")))?;
        self.times.push(StageTime {
            stage: name.to_owned(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        progress(name, 1, 1);
        Ok(out)
    }
}

/// Output files, held in memory until every stage has succeeded.
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    /// Writes `*.partial` files then renames them; nothing is left behind
    /// on failure.
    fn commit(self, dir: &Path) -> CliResult<Vec<OutputEntry>> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(CliError::Input)?;
        let partial = |name: &str| dir.join(format!("{name}.partial"));
        let mut entries = Vec::new();
        let write_all = || -> std::io::Result<()> {
            for (name, bytes) in &self.files {
                fs::write(partial(name), bytes)?;
            }
            for (name, _) in &self.files {
                fs::rename(partial(name), dir.join(name))?;
            }
            Ok(())
        };
        if let Err(e) = write_all() {
            for (name, _) in &self.files {
                let _ = fs::remove_file(partial(name));
            }
            return Err(CliError::Internal(anyhow!(e).context("writing outputs")));
        }
        for (name, bytes) in &self.files {
            entries.push(OutputEntry {
                path: name.clone(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            });
        }
        Ok(entries)
    }
}

fn render_reports(
    normalized: &Forest,
    labelled: &[Labelled],
    classes: &[IsoClassReport],
    dropped: &BTreeMap<String, usize>,
) -> CliResult<Outputs> {
    let mut forest = Vec::new();
    let records: Vec<ComponentRecord> = normalized
        .components
        .iter()
        .zip(labelled)
        .map(|(c, l)| ComponentRecord::from_component(c, Some(l.label.clone())))
        .collect();
    write_forest(&records, &mut forest).map_err(CliError::internal)?;
    let mut csv = Vec::new();
    write_csv(classes, &mut csv).map_err(CliError::internal)?;
    let mut json = Vec::new();
    write_json(classes, &mut json).map_err(CliError::internal)?;
    let mut dj = serde_json::to_vec_pretty(dropped).map_err(CliError::internal)?;
    dj.push(b'\n');
    Ok(Outputs {
        files: vec![
            (FOREST_FILE.into(), forest),
            (CLASSES_CSV.into(), csv),
            (CLASSES_JSON.into(), json),
            (DROPPED_FILE.into(), dj),
        ],
    })
}

/// Runs the pipeline on a thread pool of `config.threads` workers.
pub fn run(config: &PipelineConfig, config_text: &str) -> CliResult<RunSummary> {
    config.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(CliError::internal)?;
    pool.install(|| run_inner(config, config_text))
}

pub fn run_config_file(path: &Path) -> CliResult<RunSummary> {
    let (config, text) = PipelineConfig::load(path)?;
    run(&config, &text)
}

fn run_inner(config: &PipelineConfig, config_text: &str) -> CliResult<RunSummary> {
    let mut st = Stages { times: Vec::new() };
    let trivial = config.trivial_matcher()?;
    let filters = config.filter_matcher()?;
    let mut counts = Counts::default();

    let input_sha256 = sha256_file(&config.ledger_path)
        .with_context(|| format!("reading {}", config.ledger_path.display()))
        .map_err(CliError::Input)?;
    let ledger = st.run("ingest", || ingest(&config.ledger_path).map_err(CliError::input))?;
    counts.blocks = ledger.blocks().len();
    counts.transactions = ledger.txs().len();
    let ledger = st.run("link", || link(ledger).map_err(CliError::input))?;
    let alphas = st.run("alpha", || Ok(find_alpha_nodes(&ledger)))?;
    counts.alpha_nodes = alphas.len();
    let forest = st.run("extract", || Ok(build_forest(&ledger)))?;
    drop(ledger);
    let fs = forest.stats();
    counts.forest_nodes = fs.node_count;
    counts.forest_edges = fs.edge_count;
    counts.components = fs.component_count;
    let forest = st.run("prune", || {
        if config.prune_height1 {
            let (f, n) = prune_height1(forest, config.keep_two_vertex);
            counts.pruned = n;
            Ok(f)
        } else {
            Ok(forest)
        }
    })?;
    let forest = st.run("normalize", || {
        let (f, n) = normalize(forest, &trivial);
        counts.compressed = n;
        Ok(f)
    })?;
    let labelled = st.run("label", || label_components(&forest).map_err(CliError::internal))?;
    counts.inexact_labels = labelled.iter().filter(|l| !l.exact).count();
    let (kept_ids, dropped) = st.run("filter", || {
        let (kept, dropped) = filter_by_script(forest.clone(), &filters);
        Ok((
            kept.components.iter().map(|c| c.id).collect::<std::collections::BTreeSet<_>>(),
            dropped,
        ))
    })?;
    counts.dropped = dropped.values().sum();
    counts.kept = kept_ids.len();
    let classes = st.run("cluster", || {
        let kept: Vec<Labelled> =
            labelled.iter().filter(|l| kept_ids.contains(&l.id)).cloned().collect();
        group(&kept).map_err(CliError::internal)
    })?;
    counts.classes = classes.len();

    let outputs = st.run("write", || {
        render_reports(&forest, &labelled, &classes, &dropped)?.commit(&config.output_dir)
    })?;
    let manifest = Manifest {
        tool: "unktx".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        label_format: LABEL_FORMAT.into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        input_sha256,
        seed: config.seed,
        threads: config.threads,
        counts: counts.clone(),
        stages: st.times,
        outputs,
    };
    let mut mbytes = serde_json::to_vec_pretty(&manifest).map_err(CliError::internal)?;
    mbytes.push(b'\n');
    Outputs {
        files: vec![(MANIFEST_FILE.into(), mbytes)],
    }
    .commit(&config.output_dir)?;
    Ok(RunSummary {
        counts,
        dropped,
        classes,
        manifest,
    })
}

/// Components of a forest dump, validated.
pub fn load_dump(path: &Path) -> CliResult<Vec<ComponentRecord>> {
    let f = fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(CliError::Input)?;
    unktx_core::tdag::read_forest(std::io::BufReader::new(f))
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::Input)
}

pub fn dump_to_forest(records: &[ComponentRecord]) -> CliResult<Forest> {
    let components = records
        .iter()
        .map(|r| {
            r.to_component()
                .map_err(|m| CliError::input(anyhow!("component {}: {m}", r.id)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Forest { components })
}

/// Class report as CSV, for `run --stdout`.
pub fn write_stdout_report(s: &RunSummary, w: impl std::io::Write) -> CliResult<()> {
    write_csv(&s.classes, w).map_err(CliError::internal)
}
