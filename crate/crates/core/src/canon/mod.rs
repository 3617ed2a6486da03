//! Total ordering of T-DAGs, class representatives, BFS labels and the
//! outdegree parser.
//!
//! Label format v1: clauses in id order joined by `:`, each clause the
//! comma-joined decimal ids of one vertex's children, then a single `;`.
//! The root has id 0 and ids are given in BFS discovery order.

mod brute;
mod order;
mod repr;

use std::fmt;

use thiserror::Error;

use crate::tdag::TDag;

pub use brute::brute_force_isomorphic;
pub use order::{class_table, compare, delta_key, ClassTable, SubDagView};
pub use repr::{representative, representative_with_budget, Budget, ClassRepresentative};

/// Version tag of the label text format.
pub const LABEL_FORMAT: &str = "v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CanonError {
    #[error("graph is empty")]
    Empty,
    #[error("expected exactly one source, found {0}")]
    MultiRoot(usize),
    #[error("graph has a cycle")]
    Cyclic,
    #[error("edge {0} -> {1} is out of range or duplicated")]
    BadEdge(u32, u32),
    #[error("brute-force oracle limited to {limit} vertices, got {got}")]
    TooLarge { limit: usize, got: usize },
}

/// Single-source DAG with a fixed child order at every vertex.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dag {
    children: Vec<Vec<u32>>,
    root: u32,
}

impl Dag {
    pub fn new(children: Vec<Vec<u32>>) -> Result<Self, CanonError> {
        let n = children.len();
        if n == 0 {
            return Err(CanonError::Empty);
        }
        let mut indeg = vec![0u32; n];
        let mut mark = vec![u32::MAX; n];
        for (v, cs) in children.iter().enumerate() {
            for &c in cs {
                if c as usize >= n || mark[c as usize] == v as u32 {
                    return Err(CanonError::BadEdge(v as u32, c));
                }
                mark[c as usize] = v as u32;
                indeg[c as usize] += 1;
            }
        }
        let sources: Vec<u32> = (0..n as u32).filter(|&v| indeg[v as usize] == 0).collect();
        if sources.len() != 1 {
            if sources.is_empty() {
                return Err(CanonError::Cyclic);
            }
            return Err(CanonError::MultiRoot(sources.len()));
        }
        let dag = Dag {
            children,
            root: sources[0],
        };
        if dag.topo_order().len() != n {
            return Err(CanonError::Cyclic);
        }
        Ok(dag)
    }

    pub fn from_tdag(t: &TDag) -> Result<Self, CanonError> {
        Dag::new(t.child_lists().to_vec())
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn root(&self) -> u32 {
        self.root
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

    pub fn indegrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.len()];
        for cs in &self.children {
            for &c in cs {
                d[c as usize] += 1;
            }
        }
        d
    }

    pub fn outdegrees(&self) -> Vec<usize> {
        self.children.iter().map(Vec::len).collect()
    }

    pub fn parents(&self) -> Vec<Vec<u32>> {
        let mut p = vec![Vec::new(); self.len()];
        for (v, cs) in self.children.iter().enumerate() {
            for &c in cs {
                p[c as usize].push(v as u32);
            }
        }
        p
    }

    /// Kahn order starting from the root. Shorter than `len()` on a cycle.
    pub fn topo_order(&self) -> Vec<u32> {
        let mut indeg = self.indegrees();
        let mut order: Vec<u32> = (0..self.len() as u32).filter(|&v| indeg[v as usize] == 0).collect();
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &c in &self.children[v as usize] {
                indeg[c as usize] -= 1;
                if indeg[c as usize] == 0 {
                    order.push(c);
                }
            }
        }
        order
    }

    /// Longest root-to-sink path in edges.
    pub fn height(&self) -> usize {
        let order = self.topo_order();
        let mut depth = vec![0usize; self.len()];
        for &v in order.iter().rev() {
            depth[v as usize] = self.children[v as usize]
                .iter()
                .map(|&c| depth[c as usize] + 1)
                .max()
                .unwrap_or(0);
        }
        depth[self.root as usize]
    }

    /// Renames vertex `v` to `perm[v]` and reverses every child list, so
    /// that neither ids nor child order carry over.
    pub fn relabel(&self, perm: &[u32]) -> Dag {
        let mut children = vec![Vec::new(); self.len()];
        for (v, cs) in self.children.iter().enumerate() {
            children[perm[v] as usize] = cs.iter().rev().map(|&c| perm[c as usize]).collect();
        }
        Dag {
            children,
            root: perm[self.root as usize],
        }
    }

    /// Rebuilds the DAG a label describes: vertex `i` is the vertex with
    /// id `i`, children in clause order.
    pub fn from_label(lbl: &str) -> Result<Self, LabelError> {
        let parsed = parse(lbl)?;
        let mut children = vec![Vec::new(); parsed.vertex_count];
        for (ci, &v) in parsed.owner.iter().enumerate() {
            children[v as usize] = parsed.clause(ci).to_vec();
        }
        Dag::new(children).map_err(|e| LabelError {
            offset: 0,
            kind: LabelErrorKind::NotADag(e.to_string()),
        })
    }
}

/// BFS label of a DAG under its current child order.
pub fn label(d: &Dag) -> String {
    let n = d.len();
    let mut id = vec![u32::MAX; n];
    let mut queue: Vec<u32> = Vec::with_capacity(n);
    id[d.root as usize] = 0;
    queue.push(d.root);
    let mut head = 0;
    let mut out = String::with_capacity(n * 2 + d.edge_count() * 4);
    while head < queue.len() {
        let v = queue[head];
        if head > 0 {
            out.push(':');
        }
        head += 1;
        for (i, &c) in d.children(v).iter().enumerate() {
            if id[c as usize] == u32::MAX {
                id[c as usize] = queue.len() as u32;
                queue.push(c);
            }
            if i > 0 {
                out.push(',');
            }
            push_id(&mut out, id[c as usize]);
        }
    }
    out.push(';');
    out
}

fn push_id(out: &mut String, mut x: u32) {
    let mut buf = [0u8; 10];
    let mut i = buf.len();
    loop {
        i -= 1;
        buf[i] = b'0' + (x % 10) as u8;
        x /= 10;
        if x == 0 {
            break;
        }
    }
    out.push_str(std::str::from_utf8(&buf[i..]).expect("ascii digits"));
}

/// `label(representative(d))`.
pub fn canonical_label(d: &Dag) -> String {
    label(representative(d).dag())
}

/// Canonical label of a normalized (single-source) T-DAG.
pub fn canonical_label_tdag(t: &TDag) -> Result<String, CanonError> {
    Ok(canonical_label(&Dag::from_tdag(t)?))
}

pub fn isomorphic(a: &Dag, b: &Dag) -> bool {
    a.len() == b.len() && a.edge_count() == b.edge_count() && canonical_label(a) == canonical_label(b)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("byte {offset}: {kind}")]
pub struct LabelError {
    pub offset: usize,
    pub kind: LabelErrorKind,
}

#[derive(Debug, PartialEq, Eq)]
pub enum LabelErrorKind {
    BadChar(char),
    EmptyId,
    MissingTerminator,
    TrailingBytes,
    IdOutOfRange,
    ClauseCount { clauses: usize, expected: usize },
    UnconsumedClause(usize),
    NotADag(String),
}

impl fmt::Display for LabelErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelErrorKind::BadChar(c) => write!(f, "unexpected character {c:?}"),
            LabelErrorKind::EmptyId => f.write_str("empty identifier"),
            LabelErrorKind::MissingTerminator => f.write_str("label must end with ';'"),
            LabelErrorKind::TrailingBytes => f.write_str("bytes after ';'"),
            LabelErrorKind::IdOutOfRange => f.write_str("identifier out of range"),
            LabelErrorKind::ClauseCount { clauses, expected } => {
                write!(f, "{clauses} clauses, expected {expected} (max id + 1)")
            }
            LabelErrorKind::UnconsumedClause(i) => write!(f, "clause {i} names no unprocessed vertex"),
            LabelErrorKind::NotADag(m) => write!(f, "label does not describe a T-DAG: {m}"),
        }
    }
}

/// Flat tokenization of a label: all ids, clause boundaries, and the
/// vertex each clause belongs to after replay.
struct Parsed {
    ids: Vec<u32>,
    /// `bounds[i]..bounds[i + 1]` indexes the ids of clause `i`.
    bounds: Vec<usize>,
    owner: Vec<u32>,
    vertex_count: usize,
}

impl Parsed {
    fn clause(&self, i: usize) -> &[u32] {
        &self.ids[self.bounds[i]..self.bounds[i + 1]]
    }
}

fn err(offset: usize, kind: LabelErrorKind) -> LabelError {
    LabelError { offset, kind }
}

fn tokenize(lbl: &str) -> Result<(Vec<u32>, Vec<usize>, Vec<usize>), LabelError> {
    let bytes = lbl.as_bytes();
    let mut ids = Vec::new();
    let mut bounds = vec![0usize];
    // Byte offset where each clause starts, for error reporting.
    let mut starts = vec![0usize];
    let mut cur: Option<u64> = None;
    let mut clause_empty = true;
    let mut end = None;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'0'..=b'9' => {
                let v = cur.unwrap_or(0) * 10 + u64::from(b - b'0');
                if v > u64::from(u32::MAX) {
                    return Err(err(i, LabelErrorKind::IdOutOfRange));
                }
                cur = Some(v);
                clause_empty = false;
            }
            b',' | b':' | b';' => {
                match cur.take() {
                    Some(v) => ids.push(v as u32),
                    None if b == b',' || !clause_empty => {
                        return Err(err(i, LabelErrorKind::EmptyId))
                    }
                    None => {}
                }
                if b == b',' {
                    continue;
                }
                bounds.push(ids.len());
                clause_empty = true;
                if b == b';' {
                    end = Some(i);
                    break;
                }
                starts.push(i + 1);
            }
            _ => {
                let c = lbl[i..].chars().next().unwrap_or('?');
                return Err(err(i, LabelErrorKind::BadChar(c)));
            }
        }
    }
    match end {
        None => Err(err(bytes.len(), LabelErrorKind::MissingTerminator)),
        Some(e) if e + 1 != bytes.len() => Err(err(e + 1, LabelErrorKind::TrailingBytes)),
        Some(_) => Ok((ids, bounds, starts)),
    }
}

/// Tokenizes and replays a label with the outdegree-parsing procedure,
/// recording which vertex each clause describes.
fn parse(lbl: &str) -> Result<Parsed, LabelError> {
    let (ids, bounds, starts) = tokenize(lbl)?;
    let clauses = bounds.len() - 1;
    let m = ids.iter().copied().max().unwrap_or(0) as usize;
    if clauses != m + 1 {
        return Err(err(
            0,
            LabelErrorKind::ClauseCount {
                clauses,
                expected: m + 1,
            },
        ));
    }
    let mut processed = vec![false; m + 1];
    let mut queue: std::collections::VecDeque<u32> = std::collections::VecDeque::new();
    let mut owner = Vec::with_capacity(clauses);
    let mut n_id = 0u32;
    for i in 0..clauses {
        while let Some(x) = queue.pop_front() {
            n_id = x;
            if !processed[n_id as usize] {
                break;
            }
        }
        if processed[n_id as usize] {
            return Err(err(starts[i], LabelErrorKind::UnconsumedClause(i)));
        }
        processed[n_id as usize] = true;
        owner.push(n_id);
        queue.extend(&ids[bounds[i]..bounds[i + 1]]);
    }
    Ok(Parsed {
        ids,
        bounds,
        owner,
        vertex_count: m + 1,
    })
}

/// Outdegree of every vertex, indexed by id, read from a label.
pub fn outdegree_from_label(lbl: &str) -> Result<Vec<usize>, LabelError> {
    let p = parse(lbl)?;
    let mut out_deg = vec![0usize; p.vertex_count];
    for (i, &v) in p.owner.iter().enumerate() {
        out_deg[v as usize] = p.bounds[i + 1] - p.bounds[i];
    }
    Ok(out_deg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(children: &[&[u32]]) -> Dag {
        Dag::new(children.iter().map(|c| c.to_vec()).collect()).unwrap()
    }

    #[test]
    fn label_examples() {
        assert_eq!(label(&dag(&[&[]])), ";");
        assert_eq!(label(&dag(&[&[1], &[2], &[]])), "1:2:;");
        assert_eq!(label(&dag(&[&[1, 2], &[], &[]])), "1,2::;");
        // Shared child written by id, not rediscovered.
        assert_eq!(label(&dag(&[&[1, 2], &[3], &[3], &[]])), "1,2:3:3:;");
    }

    #[test]
    fn outdegree_examples() {
        assert_eq!(outdegree_from_label("1,2::;").unwrap(), vec![2, 0, 0]);
        assert_eq!(outdegree_from_label("1:2:;").unwrap(), vec![1, 1, 0]);
        assert_eq!(outdegree_from_label(";").unwrap(), vec![0]);
        assert_eq!(outdegree_from_label("1,2:3:3:;").unwrap(), vec![2, 1, 1, 0]);
    }

    #[test]
    fn malformed_labels() {
        let kind = |s: &str| outdegree_from_label(s).unwrap_err().kind;
        assert_eq!(outdegree_from_label("1,x::;").unwrap_err().offset, 2);
        assert!(matches!(kind("1,x::;"), LabelErrorKind::BadChar('x')));
        assert_eq!(kind("1,,2::;"), LabelErrorKind::EmptyId);
        assert_eq!(kind("1,:;"), LabelErrorKind::EmptyId);
        assert_eq!(kind("1:2:"), LabelErrorKind::MissingTerminator);
        assert_eq!(kind(";;"), LabelErrorKind::TrailingBytes);
        assert!(matches!(kind("1:5:;"), LabelErrorKind::ClauseCount { .. }));
        assert_eq!(kind("99999999999:;"), LabelErrorKind::IdOutOfRange);
        assert_eq!(kind(""), LabelErrorKind::MissingTerminator);
        // Vertex 1 is never named, so the last clause has no owner.
        assert_eq!(kind("2::;"), LabelErrorKind::UnconsumedClause(2));
    }

    #[test]
    fn from_label_round_trip() {
        let d = dag(&[&[1, 2], &[3], &[3], &[]]);
        let l = label(&d);
        let back = Dag::from_label(&l).unwrap();
        assert_eq!(label(&back), l);
        assert!(Dag::from_label("0:;").is_err());
    }

    #[test]
    fn dag_validation() {
        assert_eq!(Dag::new(vec![]), Err(CanonError::Empty));
        assert_eq!(Dag::new(vec![vec![], vec![]]), Err(CanonError::MultiRoot(2)));
        assert_eq!(Dag::new(vec![vec![1], vec![1]]), Err(CanonError::Cyclic));
        assert_eq!(Dag::new(vec![vec![1, 1], vec![]]), Err(CanonError::BadEdge(0, 1)));
        assert_eq!(Dag::new(vec![vec![1], vec![2], vec![1]]), Err(CanonError::Cyclic));
    }

    #[test]
    fn path_and_star_differ() {
        let p = dag(&[&[1], &[2], &[]]);
        let s = dag(&[&[1, 2], &[], &[]]);
        assert_eq!(canonical_label(&p), "1:2:;");
        assert_eq!(canonical_label(&s), "1,2::;");
        assert!(!isomorphic(&p, &s));
    }

    #[test]
    fn four_vertex_classes_differ() {
        // root → unknown → two leaves, against root → three leaves
        let a = dag(&[&[1], &[2, 3], &[], &[]]);
        let b = dag(&[&[1, 2, 3], &[], &[], &[]]);
        assert_ne!(canonical_label(&a), canonical_label(&b));
    }
}
