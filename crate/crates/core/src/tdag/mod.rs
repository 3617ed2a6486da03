//! Unknown-output T-DAGs: extraction from α-node roots, the forest of
//! components, pruning, compression and super-root normalization.

mod dump;
mod forest;

use std::collections::BTreeSet;

use crate::ledger::{Hash32, Tio};
use crate::script::ScriptMatcher;

pub use dump::{read_forest, write_forest, ComponentRecord, DumpError};
pub use forest::{
    build_forest, build_forest_from_roots, generate_tdag, prune_height1, Component, Forest,
    ForestStats,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexKind {
    /// Contracted input set of an α-node transaction.
    Alpha { txid: Hash32, blockhash: Hash32 },
    Output(Tio),
    /// Synthetic source joining the roots of a multi-root component.
    SuperRoot,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TVertex {
    pub kind: VertexKind,
    pub address: Option<String>,
    pub script: Option<Vec<u8>>,
}

impl TVertex {
    pub fn tio(&self) -> Option<&Tio> {
        match &self.kind {
            VertexKind::Output(t) => Some(t),
            _ => None,
        }
    }

    /// Termination application: 1 iff the vertex carries an address.
    pub fn f(&self) -> u8 {
        u8::from(self.address.is_some())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Root,
    Internal,
    Leaf,
}

/// Directed acyclic graph over T-DAG vertices with sorted, duplicate-free
/// child lists. Multi-root until [`add_super_root`] is applied.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TDag {
    vertices: Vec<TVertex>,
    children: Vec<Vec<u32>>,
}

impl TDag {
    pub fn new(vertices: Vec<TVertex>, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut children = vec![Vec::new(); vertices.len()];
        for (a, b) in edges {
            children[a as usize].push(b);
        }
        for c in &mut children {
            c.sort_unstable();
            c.dedup();
        }
        TDag { vertices, children }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[TVertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: u32) -> &TVertex {
        &self.vertices[v as usize]
    }

    pub fn children(&self, v: u32) -> &[u32] {
        &self.children[v as usize]
    }

    pub fn child_lists(&self) -> &[Vec<u32>] {
        &self.children
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(a, c)| c.iter().map(move |&b| (a as u32, b)))
    }

    pub fn indegrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.len()];
        for (_, b) in self.edges() {
            d[b as usize] += 1;
        }
        d
    }

    pub fn parents(&self) -> Vec<Vec<u32>> {
        let mut p = vec![Vec::new(); self.len()];
        for (a, b) in self.edges() {
            p[b as usize].push(a);
        }
        p
    }

    /// Sources, in id order.
    pub fn roots(&self) -> Vec<u32> {
        let d = self.indegrees();
        (0..self.len() as u32).filter(|&v| d[v as usize] == 0).collect()
    }

    pub fn role(&self, v: u32) -> Role {
        if self.indegrees()[v as usize] == 0 {
            Role::Root
        } else if self.children(v).is_empty() {
            Role::Leaf
        } else {
            Role::Internal
        }
    }

    pub fn super_root(&self) -> Option<u32> {
        self.vertices
            .iter()
            .position(|v| v.kind == VertexKind::SuperRoot)
            .map(|i| i as u32)
    }

    /// Kahn order, or `None` when the graph has a cycle.
    pub fn topo_order(&self) -> Option<Vec<u32>> {
        let mut indeg = self.indegrees();
        let mut order: Vec<u32> = (0..self.len() as u32).filter(|&v| indeg[v as usize] == 0).collect();
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &w in self.children(v) {
                indeg[w as usize] -= 1;
                if indeg[w as usize] == 0 {
                    order.push(w);
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }

    pub fn is_weakly_connected(&self) -> bool {
        if self.is_empty() {
            return true;
        }
        let parents = self.parents();
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0u32];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in self.children(v).iter().chain(&parents[v as usize]) {
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.len()
    }

    /// Longest path length in edges. For several roots this is the maximum
    /// over roots.
    pub fn height(&self) -> usize {
        let order = self.topo_order().expect("T-DAG is acyclic");
        let mut depth = vec![0usize; self.len()];
        for &v in order.iter().rev() {
            depth[v as usize] = self
                .children(v)
                .iter()
                .map(|&c| depth[c as usize] + 1)
                .max()
                .unwrap_or(0);
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Vertex identity set, for comparing graphs built by different routes.
    pub fn key_set(&self) -> BTreeSet<VertexKind> {
        self.vertices.iter().map(|v| v.kind.clone()).collect()
    }

    pub fn edge_key_set(&self) -> BTreeSet<(VertexKind, VertexKind)> {
        self.edges()
            .map(|(a, b)| (self.vertex(a).kind.clone(), self.vertex(b).kind.clone()))
            .collect()
    }

    /// Keeps the vertices flagged in `keep`, renumbered in order.
    fn retain(&self, keep: &[bool], edges: impl IntoIterator<Item = (u32, u32)>) -> TDag {
        let mut map = vec![u32::MAX; self.len()];
        let mut vertices = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if keep[i] {
                map[i] = vertices.len() as u32;
                vertices.push(v.clone());
            }
        }
        TDag::new(
            vertices,
            edges
                .into_iter()
                .map(|(a, b)| (map[a as usize], map[b as usize])),
        )
    }
}

/// Elides internal vertices whose script `trivial` matches, linking each
/// predecessor to each child. Returns the number of removed vertices.
///
/// Removing a vertex never changes whether another vertex is internal, so a
/// single pass in topological order reaches the fixed point.
pub fn compress_counted(tdag: &TDag, trivial: &ScriptMatcher) -> (TDag, usize) {
    let order = tdag.topo_order().expect("T-DAG is acyclic");
    let mut children: Vec<BTreeSet<u32>> =
        tdag.children.iter().map(|c| c.iter().copied().collect()).collect();
    let mut parents: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); tdag.len()];
    for (a, b) in tdag.edges() {
        parents[b as usize].insert(a);
    }
    let mut keep = vec![true; tdag.len()];
    let mut removed = 0;
    for v in order {
        let vi = v as usize;
        let vert = &tdag.vertices[vi];
        let eligible = matches!(vert.kind, VertexKind::Output(_))
            && vert.address.is_none()
            && !parents[vi].is_empty()
            && !children[vi].is_empty()
            && vert
                .script
                .as_deref()
                .is_some_and(|s| trivial.match_script(s).is_some());
        if !eligible {
            continue;
        }
        let ps = std::mem::take(&mut parents[vi]);
        let cs = std::mem::take(&mut children[vi]);
        for &p in &ps {
            children[p as usize].remove(&v);
            children[p as usize].extend(cs.iter().copied());
        }
        for &c in &cs {
            parents[c as usize].remove(&v);
            parents[c as usize].extend(ps.iter().copied());
        }
        keep[vi] = false;
        removed += 1;
    }
    if removed == 0 {
        return (tdag.clone(), 0);
    }
    let edges: Vec<(u32, u32)> = children
        .iter()
        .enumerate()
        .filter(|(a, _)| keep[*a])
        .flat_map(|(a, c)| c.iter().map(move |&b| (a as u32, b)))
        .collect();
    (tdag.retain(&keep, edges), removed)
}

pub fn compress(tdag: &TDag, trivial: &ScriptMatcher) -> TDag {
    compress_counted(tdag, trivial).0
}

/// Adds one synthetic source with an edge to every root when there is more
/// than one root. The super-root is appended as the last vertex.
pub fn add_super_root(tdag: TDag) -> TDag {
    let roots = tdag.roots();
    if roots.len() <= 1 {
        return tdag;
    }
    let TDag {
        mut vertices,
        mut children,
    } = tdag;
    vertices.push(TVertex {
        kind: VertexKind::SuperRoot,
        address: None,
        script: None,
    });
    children.push(roots);
    TDag { vertices, children }
}

/// Reported statistics. Cardinality counts the normalized graph (with the
/// super-root); edges, height and roots describe the component before
/// normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassStats {
    pub height: usize,
    pub cardinality: usize,
    pub edges: usize,
    pub roots: usize,
}

impl ClassStats {
    /// Recovers the statistics from a normalized T-DAG alone.
    pub fn of_normalized(tdag: &TDag) -> Self {
        let (h, v, e) = (tdag.height(), tdag.len(), tdag.edge_count());
        match tdag.super_root() {
            Some(s) => {
                let r = tdag.children(s).len();
                ClassStats {
                    height: h - 1,
                    cardinality: v,
                    edges: e - r,
                    roots: r,
                }
            }
            None => ClassStats {
                height: h,
                cardinality: v,
                edges: e,
                roots: usize::from(v > 0),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::default_trivial_matcher;

    pub(crate) fn out_vertex(i: u32, addr: bool, script: &[u8]) -> TVertex {
        TVertex {
            kind: VertexKind::Output(Tio {
                kind: crate::ledger::TioKind::Output,
                txid: Hash32([i as u8; 32]),
                blockhash: Hash32::default(),
                index: i,
            }),
            address: addr.then(|| format!("1addr{i}")),
            script: Some(script.to_vec()),
        }
    }

    fn alpha(i: u8) -> TVertex {
        TVertex {
            kind: VertexKind::Alpha {
                txid: Hash32([i; 32]),
                blockhash: Hash32([1; 32]),
            },
            address: None,
            script: None,
        }
    }

    const JUNK: &[u8] = &[0x6a, 0x01, 0x02];

    #[test]
    fn height_examples() {
        let single = TDag::new(vec![alpha(1)], []);
        assert_eq!(single.height(), 0);
        let path = TDag::new(vec![alpha(1), out_vertex(1, false, JUNK), out_vertex(2, true, JUNK)], [(0, 1), (1, 2)]);
        assert_eq!(path.height(), 2);
        assert_eq!(path.role(0), Role::Root);
        assert_eq!(path.role(1), Role::Internal);
        assert_eq!(path.role(2), Role::Leaf);
    }

    #[test]
    fn compression_figure_case() {
        // root → trivial → {a, b, c}
        let vs = vec![
            alpha(1),
            out_vertex(1, false, &[0x51]),
            out_vertex(3, true, JUNK),
            out_vertex(4, true, JUNK),
            out_vertex(5, true, JUNK),
        ];
        let d = TDag::new(vs, [(0, 1), (1, 2), (1, 3), (1, 4)]);
        let (c, n) = compress_counted(&d, &default_trivial_matcher());
        assert_eq!(n, 1);
        assert_eq!(c.len(), 4);
        assert_eq!(c.children(0), &[1, 2, 3]);
        assert_eq!(compress(&c, &default_trivial_matcher()), c);
    }

    #[test]
    fn two_trivial_in_a_row() {
        let vs = vec![alpha(1), out_vertex(1, false, &[]), out_vertex(2, false, &[0x51]), out_vertex(3, true, JUNK)];
        let d = TDag::new(vs, [(0, 1), (1, 2), (2, 3)]);
        let c = compress(&d, &default_trivial_matcher());
        assert_eq!(c.len(), 2);
        assert_eq!(c.edge_count(), 1);
        assert_eq!(compress(&c, &default_trivial_matcher()), c);
    }

    #[test]
    fn no_trivial_is_identity_and_sinks_survive() {
        let vs = vec![alpha(1), out_vertex(1, false, JUNK), out_vertex(2, false, &[0x51])];
        let d = TDag::new(vs, [(0, 1), (1, 2)]);
        // Trivial sink stays: only internal vertices are elided.
        assert_eq!(compress(&d, &default_trivial_matcher()), d);
    }

    #[test]
    fn super_root_rules() {
        let vs = vec![alpha(1), alpha(2), out_vertex(1, false, JUNK), out_vertex(2, true, JUNK)];
        let d = TDag::new(vs, [(0, 2), (1, 2), (2, 3)]);
        assert_eq!(d.roots(), vec![0, 1]);
        let n = add_super_root(d.clone());
        assert_eq!(n.roots(), vec![4]);
        assert_eq!(n.len(), 5);
        assert_eq!(n.edge_count(), 5);
        let s = ClassStats::of_normalized(&n);
        assert_eq!(s, ClassStats { height: 2, cardinality: 5, edges: 3, roots: 2 });
        let single = TDag::new(vec![alpha(1), out_vertex(1, true, JUNK)], [(0, 1)]);
        assert_eq!(add_super_root(single.clone()), single);
    }

    #[test]
    fn connectivity_and_cycles() {
        let d = TDag::new(vec![alpha(1), alpha(2)], []);
        assert!(!d.is_weakly_connected());
        let cyc = TDag::new(vec![alpha(1), alpha(2)], [(0, 1), (1, 0)]);
        assert!(cyc.topo_order().is_none());
    }
}
