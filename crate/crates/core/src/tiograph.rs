//! TIO graph, α-node detection and the contracted TIO graph.
//!
//! Vertices are addressed by ledger position rather than by the full
//! [`Tio`] so the graphs stay compact; [`NodeKey::tio`] converts back.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use serde_json::json;
use thiserror::Error;

use crate::ledger::{InPoint, Ledger, LinkedLedger, OutPoint, Tio, TxPos};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKey {
    /// A contracted α-node: all inputs of one transaction, or the synthetic
    /// input of a coinbase.
    Alpha(TxPos),
    Input(InPoint),
    Output(OutPoint),
}

impl NodeKey {
    pub fn tio(&self, ledger: &Ledger) -> Option<Tio> {
        match *self {
            NodeKey::Alpha(_) => None,
            NodeKey::Input(i) => Some(ledger.input_tio(i)),
            NodeKey::Output(o) => Some(ledger.output_tio(o)),
        }
    }
}

/// Simple directed graph with deduplicated edges and insertion-ordered ids.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<NodeKey>,
    index: HashMap<NodeKey, u32>,
    succ: Vec<Vec<u32>>,
}

impl Graph {
    pub fn add_node(&mut self, key: NodeKey) -> u32 {
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(key);
        self.index.insert(key, id);
        self.succ.push(Vec::new());
        id
    }

    /// Adds `a → b`, creating both endpoints if needed.
    pub fn add_edge(&mut self, a: NodeKey, b: NodeKey) {
        let a = self.add_node(a);
        let b = self.add_node(b);
        self.succ[a as usize].push(b);
    }

    /// Sorts adjacency lists and drops parallel edges.
    fn finish(mut self) -> Self {
        for s in &mut self.succ {
            s.sort_unstable();
            s.dedup();
        }
        self
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> &[NodeKey] {
        &self.nodes
    }

    pub fn id(&self, key: &NodeKey) -> Option<u32> {
        self.index.get(key).copied()
    }

    pub fn successors(&self, id: u32) -> &[u32] {
        &self.succ[id as usize]
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.iter().map(move |&b| (a as u32, b)))
    }

    /// Edge set by key, independent of id assignment.
    pub fn edge_keys(&self) -> BTreeSet<(NodeKey, NodeKey)> {
        self.edges()
            .map(|(a, b)| (self.nodes[a as usize], self.nodes[b as usize]))
            .collect()
    }

    pub fn node_keys(&self) -> BTreeSet<NodeKey> {
        self.nodes.iter().copied().collect()
    }

    /// Hand-built graphs for tests and tools.
    pub fn from_edges(edges: impl IntoIterator<Item = (NodeKey, NodeKey)>) -> Self {
        let mut g = Graph::default();
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g.finish()
    }

    /// Writes `tail<TAB>head` lines and a JSON sidecar mapping ids to TIOs.
    pub fn dump(
        &self,
        ledger: &Ledger,
        mut edges: impl Write,
        mut sidecar: impl Write,
    ) -> std::io::Result<()> {
        for (a, b) in self.edges() {
            writeln!(edges, "{a}\t{b}")?;
        }
        let nodes: serde_json::Map<String, serde_json::Value> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, key)| {
                let v = match *key {
                    NodeKey::Alpha(pos) => {
                        let tx = ledger.tx(pos);
                        json!({"kind": "alpha", "txid": tx.hash.to_hex(), "blockhash": tx.blockhash.to_hex()})
                    }
                    NodeKey::Input(_) | NodeKey::Output(_) => {
                        let t = key.tio(ledger).expect("input or output");
                        let kind = if matches!(key, NodeKey::Input(_)) { "input" } else { "output" };
                        json!({"kind": kind, "txid": t.txid.to_hex(), "blockhash": t.blockhash.to_hex(), "index": t.index})
                    }
                };
                (id.to_string(), v)
            })
            .collect();
        serde_json::to_writer(&mut sidecar, &nodes)?;
        sidecar.write_all(b"\n")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cycle found: {witness:?}")]
pub struct CycleError {
    /// Vertices along the cycle; the last one has an edge back to the first.
    pub witness: Vec<NodeKey>,
}

/// Kahn's algorithm. On failure, walks the leftover vertices to extract one
/// cycle as a witness.
pub fn assert_acyclic(g: &Graph) -> Result<(), CycleError> {
    let n = g.node_count();
    let mut indeg = vec![0u32; n];
    for (_, b) in g.edges() {
        indeg[b as usize] += 1;
    }
    let mut queue: Vec<u32> = (0..n as u32).filter(|&v| indeg[v as usize] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop() {
        seen += 1;
        for &w in g.successors(v) {
            indeg[w as usize] -= 1;
            if indeg[w as usize] == 0 {
                queue.push(w);
            }
        }
    }
    if seen == n {
        return Ok(());
    }
    // Every leftover vertex has a leftover predecessor, hence also a
    // leftover successor reachable by walking forward; follow until repeat.
    let left = |v: u32| indeg[v as usize] > 0;
    let start = (0..n as u32).find(|&v| left(v)).expect("leftover vertex");
    let mut pos = HashMap::new();
    let mut path = Vec::new();
    let mut v = start;
    loop {
        if let Some(&i) = pos.get(&v) {
            let witness = path[i..].iter().map(|&u: &u32| g.nodes[u as usize]).collect();
            return Err(CycleError { witness });
        }
        pos.insert(v, path.len());
        path.push(v);
        v = *g
            .successors(v)
            .iter()
            .find(|&&w| left(w))
            .expect("leftover vertex has a leftover successor");
    }
}

/// Materializes the TIO graph. Quadratic per transaction; meant for tests
/// and small ledgers.
pub fn build_tio_graph(ledger: &LinkedLedger) -> Graph {
    let mut g = Graph::default();
    for (p, tx) in ledger.txs().iter().enumerate() {
        let pos = TxPos(p as u32);
        for vin in 0..tx.vin.len() as u32 {
            g.add_node(NodeKey::Input(InPoint { tx: pos, vin }));
        }
        for vout in 0..tx.vout.len() as u32 {
            g.add_node(NodeKey::Output(OutPoint { tx: pos, vout }));
        }
    }
    for (p, tx) in ledger.txs().iter().enumerate() {
        let pos = TxPos(p as u32);
        for vin in 0..tx.vin.len() as u32 {
            for vout in 0..tx.vout.len() as u32 {
                g.add_edge(
                    NodeKey::Input(InPoint { tx: pos, vin }),
                    NodeKey::Output(OutPoint { tx: pos, vout }),
                );
            }
        }
        for (vout, o) in tx.vout.iter().enumerate() {
            if let Some(spend) = o.spent_by {
                g.add_edge(
                    NodeKey::Output(OutPoint { tx: pos, vout: vout as u32 }),
                    NodeKey::Input(spend),
                );
            }
        }
    }
    g.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlphaKind {
    Coinbase,
    AddressedSpend,
}

/// The input set of one transaction that may root an unknown-output graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlphaNode {
    pub tx: TxPos,
    pub kind: AlphaKind,
}

impl AlphaNode {
    pub fn inputs(&self, ledger: &Ledger) -> Vec<Tio> {
        (0..ledger.tx(self.tx).vin.len() as u32)
            .map(|vin| ledger.input_tio(InPoint { tx: self.tx, vin }))
            .collect()
    }
}

/// `Some(kind)` if `pos` is an α-node, `None` if every input spends a Null
/// output.
pub fn classify(ledger: &LinkedLedger, pos: TxPos) -> Option<AlphaKind> {
    let tx = ledger.tx(pos);
    if tx.coinbase {
        return Some(AlphaKind::Coinbase);
    }
    let addressed = tx.vin.iter().any(|i| {
        let src = i.source.expect("linked ledger");
        ledger.output(src).address.is_some()
    });
    addressed.then_some(AlphaKind::AddressedSpend)
}

/// All α-nodes in ledger order.
pub fn find_alpha_nodes(ledger: &LinkedLedger) -> Vec<AlphaNode> {
    (0..ledger.txs().len() as u32)
        .map(TxPos)
        .filter_map(|pos| {
            let kind = classify(ledger, pos);
            debug_assert!(
                kind.is_some()
                    || ledger.tx(pos).vin.iter().all(|i| ledger
                        .output(i.source.expect("linked"))
                        .address
                        .is_none())
            );
            kind.map(|kind| AlphaNode { tx: pos, kind })
        })
        .collect()
}

fn alpha_set(ledger: &LinkedLedger, alphas: &[AlphaNode]) -> Vec<bool> {
    let mut is_alpha = vec![false; ledger.txs().len()];
    for a in alphas {
        is_alpha[a.tx.index()] = true;
    }
    is_alpha
}

/// Contracts a materialized TIO graph: α input sets become one vertex each,
/// the inputs of every other transaction are bypassed and removed.
pub fn contract(g: &Graph, alphas: &[AlphaNode], ledger: &LinkedLedger) -> Graph {
    let is_alpha = alpha_set(ledger, alphas);
    let mut out = Graph::default();
    for key in g.nodes() {
        if let NodeKey::Output(_) = key {
            out.add_node(*key);
        }
    }
    // (i) contraction, with the coinbase case handled explicitly since a
    // coinbase has no input vertices to merge.
    for a in alphas {
        out.add_node(NodeKey::Alpha(a.tx));
        if ledger.tx(a.tx).vin.is_empty() {
            for vout in 0..ledger.tx(a.tx).vout.len() as u32 {
                out.add_edge(NodeKey::Alpha(a.tx), NodeKey::Output(OutPoint { tx: a.tx, vout }));
            }
        }
    }
    for (u, v) in g.edges() {
        let (ku, kv) = (g.nodes()[u as usize], g.nodes()[v as usize]);
        match (ku, kv) {
            (NodeKey::Input(i), NodeKey::Output(_)) if is_alpha[i.tx.index()] => {
                out.add_edge(NodeKey::Alpha(i.tx), kv);
            }
            (NodeKey::Output(_), NodeKey::Input(i)) if is_alpha[i.tx.index()] => {
                out.add_edge(ku, NodeKey::Alpha(i.tx));
            }
            // (ii) elimination: o → i → w becomes o → w.
            (NodeKey::Output(_), NodeKey::Input(_)) => {
                for &w in g.successors(v) {
                    out.add_edge(ku, g.nodes()[w as usize]);
                }
            }
            _ => {}
        }
    }
    out.finish()
}

/// Same result as [`contract`] without materializing the TIO graph: every
/// edge rule is local to one transaction and the outputs it spends.
pub fn contract_streaming(ledger: &LinkedLedger, alphas: &[AlphaNode]) -> Graph {
    let is_alpha = alpha_set(ledger, alphas);
    let mut out = Graph::default();
    for (p, tx) in ledger.txs().iter().enumerate() {
        let pos = TxPos(p as u32);
        for vout in 0..tx.vout.len() as u32 {
            out.add_node(NodeKey::Output(OutPoint { tx: pos, vout }));
        }
    }
    for (p, tx) in ledger.txs().iter().enumerate() {
        let pos = TxPos(p as u32);
        let outs = (0..tx.vout.len() as u32).map(|vout| NodeKey::Output(OutPoint { tx: pos, vout }));
        if is_alpha[p] {
            let a = NodeKey::Alpha(pos);
            out.add_node(a);
            for o in outs {
                out.add_edge(a, o);
            }
            for i in &tx.vin {
                out.add_edge(NodeKey::Output(i.source.expect("linked ledger")), a);
            }
        } else {
            let outs: Vec<NodeKey> = outs.collect();
            for i in &tx.vin {
                let src = NodeKey::Output(i.source.expect("linked ledger"));
                for &o in &outs {
                    out.add_edge(src, o);
                }
            }
        }
    }
    out.finish()
}
