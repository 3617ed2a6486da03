//! Forest dump: one JSON object per component per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Component, TDag, TVertex, VertexKind};
use crate::ledger::{Hash32, Tio, TioKind};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub txid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blockhash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub id: usize,
    pub roots: Vec<u32>,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<[u32; 2]>,
    pub height: usize,
    /// Vertex count of this record.
    pub cardinality: usize,
    #[serde(default)]
    pub root_scripts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ComponentRecord {
    pub fn from_component(c: &Component, label: Option<String>) -> Self {
        let d = &c.dag;
        let vertices = d
            .vertices()
            .iter()
            .map(|v| {
                let (kind, txid, blockhash, index) = match &v.kind {
                    VertexKind::Alpha { txid, blockhash } => {
                        ("alpha", Some(txid.to_hex()), Some(blockhash.to_hex()), None)
                    }
                    VertexKind::Output(t) => (
                        "output",
                        Some(t.txid.to_hex()),
                        Some(t.blockhash.to_hex()),
                        Some(t.index),
                    ),
                    VertexKind::SuperRoot => ("super_root", None, None, None),
                };
                VertexRecord {
                    kind: kind.to_owned(),
                    txid,
                    blockhash,
                    index,
                    address: v.address.clone(),
                    script: v.script.as_ref().map(hex::encode),
                }
            })
            .collect();
        ComponentRecord {
            id: c.id,
            roots: d.roots(),
            vertices,
            edges: d.edges().map(|(a, b)| [a, b]).collect(),
            height: d.height(),
            cardinality: d.len(),
            root_scripts: c.root_scripts.iter().map(hex::encode).collect(),
            label,
        }
    }

    pub fn to_component(&self) -> Result<Component, String> {
        let hash = |s: &Option<String>, what: &str| -> Result<Hash32, String> {
            s.as_deref()
                .ok_or_else(|| format!("vertex missing `{what}`"))?
                .parse()
                .map_err(|e| format!("`{what}`: {e}"))
        };
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            let kind = match v.kind.as_str() {
                "alpha" => VertexKind::Alpha {
                    txid: hash(&v.txid, "txid")?,
                    blockhash: hash(&v.blockhash, "blockhash")?,
                },
                "output" => VertexKind::Output(Tio {
                    kind: TioKind::Output,
                    txid: hash(&v.txid, "txid")?,
                    blockhash: hash(&v.blockhash, "blockhash")?,
                    index: v.index.ok_or("output vertex missing `index`")?,
                }),
                "super_root" => VertexKind::SuperRoot,
                other => return Err(format!("unknown vertex kind {other:?}")),
            };
            let script = v
                .script
                .as_deref()
                .map(hex::decode)
                .transpose()
                .map_err(|e| format!("`script`: {e}"))?;
            vertices.push(TVertex {
                kind,
                address: v.address.clone(),
                script,
            });
        }
        let n = vertices.len() as u32;
        if let Some(e) = self.edges.iter().find(|e| e[0] >= n || e[1] >= n) {
            return Err(format!("edge {e:?} out of range"));
        }
        let dag = TDag::new(vertices, self.edges.iter().map(|e| (e[0], e[1])));
        if dag.topo_order().is_none() {
            return Err("edges contain a cycle".into());
        }
        let root_scripts = self
            .root_scripts
            .iter()
            .map(hex::decode)
            .collect::<Result<_, _>>()
            .map_err(|e| format!("`root_scripts`: {e}"))?;
        Ok(Component {
            id: self.id,
            dag,
            root_scripts,
        })
    }
}

pub fn write_forest<'a>(
    records: impl IntoIterator<Item = &'a ComponentRecord>,
    mut w: impl Write,
) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_forest(r: impl BufRead) -> Result<Vec<ComponentRecord>, DumpError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| DumpError::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
