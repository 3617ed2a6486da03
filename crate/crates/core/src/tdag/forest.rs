use std::collections::HashMap;

use rayon::prelude::*;

use super::{TDag, TVertex, VertexKind};
use crate::ledger::{LinkedLedger, OutPoint, TxPos};
use crate::tiograph::{find_alpha_nodes, AlphaNode, NodeKey};
use crate::union_find::UnionFind;

fn vertex_for(ledger: &LinkedLedger, key: NodeKey) -> TVertex {
    match key {
        NodeKey::Alpha(pos) => {
            let tx = ledger.tx(pos);
            TVertex {
                kind: VertexKind::Alpha {
                    txid: tx.hash,
                    blockhash: tx.blockhash,
                },
                address: None,
                script: None,
            }
        }
        NodeKey::Output(o) => {
            let rec = ledger.output(o);
            TVertex {
                kind: VertexKind::Output(ledger.output_tio(o)),
                address: rec.address.clone(),
                script: Some(rec.script.clone()),
            }
        }
        NodeKey::Input(_) => unreachable!("inputs never appear in a T-DAG"),
    }
}

fn outputs_of(ledger: &LinkedLedger, pos: TxPos) -> impl Iterator<Item = OutPoint> {
    (0..ledger.tx(pos).vout.len() as u32).map(move |vout| OutPoint { tx: pos, vout })
}

/// Shared state of the stack-driven expansion. Keeps one vertex per key, so
/// an output reached twice is expanded once.
#[derive(Default)]
struct Expansion {
    keys: Vec<NodeKey>,
    ids: HashMap<NodeKey, u32>,
    edges: Vec<(u32, u32)>,
}

impl Expansion {
    fn node(&mut self, key: NodeKey) -> (u32, bool) {
        if let Some(&id) = self.ids.get(&key) {
            return (id, false);
        }
        let id = self.keys.len() as u32;
        self.keys.push(key);
        self.ids.insert(key, id);
        (id, true)
    }

    /// T-DAG generation from root `alpha`: funded outputs of the root, then
    /// for every popped Null output that is spent, all outputs of the
    /// spending transaction.
    fn expand(&mut self, ledger: &LinkedLedger, alpha: TxPos) {
        let (root, _) = self.node(NodeKey::Alpha(alpha));
        let mut stack = Vec::new();
        for o in outputs_of(ledger, alpha) {
            let (id, new) = self.node(NodeKey::Output(o));
            self.edges.push((root, id));
            if new {
                stack.push((id, o));
            }
        }
        while let Some((id, o)) = stack.pop() {
            let rec = ledger.output(o);
            if rec.address.is_some() {
                continue;
            }
            let Some(spend) = rec.spent_by else { continue };
            for w in outputs_of(ledger, spend.tx) {
                let (wid, new) = self.node(NodeKey::Output(w));
                self.edges.push((id, wid));
                if new {
                    stack.push((wid, w));
                }
            }
        }
    }
}

/// The Unknown TX T-DAG generated by one α-node.
pub fn generate_tdag(ledger: &LinkedLedger, alpha: AlphaNode) -> TDag {
    let mut ex = Expansion::default();
    ex.expand(ledger, alpha.tx);
    let vertices = ex.keys.iter().map(|&k| vertex_for(ledger, k)).collect();
    TDag::new(vertices, ex.edges)
}

/// One weakly connected component of the forest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// Stable across pruning, filtering and compression.
    pub id: usize,
    pub dag: TDag,
    /// Scripts of the Null outputs created by the root transactions, root
    /// by root in vout order. Used by the root-script filter.
    pub root_scripts: Vec<Vec<u8>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ForestStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub component_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Forest {
    pub components: Vec<Component>,
}

impl Forest {
    pub fn stats(&self) -> ForestStats {
        ForestStats {
            node_count: self.components.iter().map(|c| c.dag.len()).sum(),
            edge_count: self.components.iter().map(|c| c.dag.edge_count()).sum(),
            component_count: self.components.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

fn root_scripts(ledger: &LinkedLedger, keys: &[NodeKey]) -> Vec<Vec<u8>> {
    keys.iter()
        .filter_map(|k| match k {
            NodeKey::Alpha(pos) => Some(*pos),
            _ => None,
        })
        .flat_map(|pos| {
            ledger
                .tx(pos)
                .vout
                .iter()
                .filter(|o| o.address.is_none())
                .map(|o| o.script.clone())
        })
        .collect()
}

/// Splits a global expansion into components ordered by their first root.
fn assemble(ledger: &LinkedLedger, ex: Expansion) -> Forest {
    let mut uf = UnionFind::new(ex.keys.len());
    for &(a, b) in &ex.edges {
        uf.union(a, b);
    }
    let mut groups: Vec<Vec<u32>> = uf
        .groups()
        .into_iter()
        .filter(|g| g.len() >= 2)
        .map(|mut g| {
            g.sort_by_key(|&v| ex.keys[v as usize]);
            g
        })
        .collect();
    groups.sort_by_key(|g| ex.keys[g[0] as usize]);

    let mut slot = vec![(u32::MAX, 0u32); ex.keys.len()];
    for (gi, g) in groups.iter().enumerate() {
        for (local, &v) in g.iter().enumerate() {
            slot[v as usize] = (gi as u32, local as u32);
        }
    }
    let mut edges: Vec<Vec<(u32, u32)>> = vec![Vec::new(); groups.len()];
    for &(a, b) in &ex.edges {
        let (ga, la) = slot[a as usize];
        if ga != u32::MAX {
            edges[ga as usize].push((la, slot[b as usize].1));
        }
    }
    let components = groups
        .into_par_iter()
        .zip(edges)
        .enumerate()
        .map(|(id, (g, e))| {
            let keys: Vec<NodeKey> = g.iter().map(|&v| ex.keys[v as usize]).collect();
            let vertices = keys.iter().map(|&k| vertex_for(ledger, k)).collect();
            Component {
                id,
                dag: TDag::new(vertices, e),
                root_scripts: root_scripts(ledger, &keys),
            }
        })
        .collect();
    Forest { components }
}

/// Iterates T-DAG generation over every α-node with one shared visited
/// set, then merges components that share output vertices.
pub fn build_forest(ledger: &LinkedLedger) -> Forest {
    let mut ex = Expansion::default();
    for a in find_alpha_nodes(ledger) {
        ex.expand(ledger, a.tx);
    }
    assemble(ledger, ex)
}

/// Same forest as [`build_forest`], built as the union of independent
/// per-root generations. Slower; kept as a cross-check.
pub fn build_forest_from_roots(ledger: &LinkedLedger) -> Forest {
    let alphas = find_alpha_nodes(ledger);
    let parts: Vec<Expansion> = alphas
        .par_iter()
        .map(|a| {
            let mut ex = Expansion::default();
            ex.expand(ledger, a.tx);
            ex
        })
        .collect();
    let mut all = Expansion::default();
    for p in parts {
        for (a, b) in p.edges {
            let (ga, _) = all.node(p.keys[a as usize]);
            let (gb, _) = all.node(p.keys[b as usize]);
            all.edges.push((ga, gb));
        }
        for k in p.keys {
            all.node(k);
        }
    }
    all.edges.sort_unstable();
    all.edges.dedup();
    assemble(ledger, all)
}

/// Drops height-1 components. With `keep_two_vertex`, a height-1
/// component made of a root and one addressed leaf is kept. Returns the
/// number dropped.
pub fn prune_height1(forest: Forest, keep_two_vertex: bool) -> (Forest, usize) {
    let before = forest.len();
    let components: Vec<Component> = forest
        .components
        .into_iter()
        .filter(|c| {
            if c.dag.height() != 1 {
                return true;
            }
            keep_two_vertex && c.dag.len() == 2 && c.dag.vertices().iter().any(|v| v.f() == 1)
        })
        .collect();
    let dropped = before - components.len();
    (Forest { components }, dropped)
}
