//! Class representative: a fixed member of the isomorphism class of a DAG,
//! chosen as the arrangement with the least BFS label.
//!
//! Children are first ordered by ≺ class and then by Δ key. Siblings that
//! still tie are split further by colour refinement, and whatever ties
//! remain are searched: every distinct arrangement of not-yet-numbered tied
//! siblings is tried, up to swaps that are automorphisms anyway.

use std::collections::HashMap;
use std::hash::Hash;

use super::order::{class_table, delta_key};
use super::{label, Dag};

/// Limits for the tie search. Exceeding any of them keeps the best label
/// found so far and marks the result inexact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_leaves: u64,
    pub max_work: u64,
    pub max_depth: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_leaves: 40_320,
            max_work: 20_000_000,
            max_depth: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassRepresentative {
    dag: Dag,
    label: String,
    exact: bool,
}

impl ClassRepresentative {
    /// Vertex `i` is the vertex numbered `i` by the BFS, children in
    /// label order.
    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// False when the search ran out of budget.
    pub fn exact(&self) -> bool {
        self.exact
    }

    pub fn into_dag(self) -> Dag {
        self.dag
    }
}

pub fn representative(d: &Dag) -> ClassRepresentative {
    representative_with_budget(d, Budget::default())
}

pub fn representative_with_budget(d: &Dag, budget: Budget) -> ClassRepresentative {
    let prep = Prep::new(d);
    let mut s = Search {
        prep: &prep,
        budget,
        best: None,
        leaves: 0,
        work: 0,
        exhausted: false,
        exact: true,
    };
    let n = d.len();
    let mut st = State {
        id: vec![u32::MAX; n],
        queue: Vec::with_capacity(n),
        head: 0,
        label: String::new(),
    };
    st.id[d.root() as usize] = 0;
    st.queue.push(d.root());
    s.run(st, None, 0);
    let exact = s.exact;
    let best = s.best.expect("the first arrangement always completes");
    if !exact {
        log::warn!(
            "representative search over {n} vertices hit its budget; label may not be canonical"
        );
    }
    let dag = Dag::from_label(&best).expect("search emits well-formed labels");
    debug_assert_eq!(label(&dag), best);
    ClassRepresentative {
        dag,
        label: best,
        exact,
    }
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    start: usize,
    end: usize,
    free: bool,
}

struct Prep {
    order: Vec<Vec<u32>>,
    cells: Vec<Vec<Cell>>,
    /// Siblings sharing a swap key can be exchanged by an automorphism
    /// that leaves every numbered vertex fixed.
    swap: Vec<u32>,
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> (Vec<u32>, usize) {
    let mut uniq: Vec<K> = keys.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let ranks = keys
        .iter()
        .map(|k| uniq.binary_search(k).expect("present") as u32)
        .collect();
    (ranks, uniq.len())
}

struct Interner<K> {
    ids: HashMap<K, u32>,
}

impl<K: Hash + Eq> Interner<K> {
    fn new() -> Self {
        Interner { ids: HashMap::new() }
    }

    fn id(&mut self, k: K) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(k).or_insert(next)
    }
}

impl Prep {
    fn new(d: &Dag) -> Self {
        let n = d.len();
        let indeg = d.indegrees();
        let parents = d.parents();
        let ct = class_table(d);
        let init: Vec<(u32, Vec<u32>)> = (0..n as u32)
            .map(|v| (ct.class[v as usize], delta_key(d, &indeg, v)))
            .collect();
        let (mut colour, _) = dense_ranks(&init);
        let swap = swap_keys(d, &indeg, &parents);

        let mut prep = Prep::arrange(d, &colour, &swap);
        if prep.cells.iter().flatten().any(|c| !c.free) {
            colour = refine(d, &parents, colour);
            prep = Prep::arrange(d, &colour, &swap);
        }
        prep
    }

    fn arrange(d: &Dag, colour: &[u32], swap: &[u32]) -> Self {
        let n = d.len();
        let mut order = Vec::with_capacity(n);
        let mut cells = Vec::with_capacity(n);
        for v in 0..n as u32 {
            let mut cs = d.children(v).to_vec();
            cs.sort_by_key(|&c| colour[c as usize]);
            let mut vc = Vec::new();
            let mut i = 0;
            while i < cs.len() {
                let mut j = i + 1;
                while j < cs.len() && colour[cs[j] as usize] == colour[cs[i] as usize] {
                    j += 1;
                }
                let s0 = swap[cs[i] as usize];
                let free = cs[i..j].iter().all(|&c| swap[c as usize] == s0);
                vc.push(Cell {
                    start: i,
                    end: j,
                    free,
                });
                i = j;
            }
            order.push(cs);
            cells.push(vc);
        }
        Prep {
            order,
            cells,
            swap: swap.to_vec(),
        }
    }
}

/// Indegree-1 vertices are keyed by the shape of the tree hanging below
/// them, with edges leaving that tree named by their target vertex.
/// Other vertices are keyed by their exact parent and child sets.
fn swap_keys(d: &Dag, indeg: &[u32], parents: &[Vec<u32>]) -> Vec<u32> {
    let n = d.len();
    let mut private = vec![u32::MAX; n];
    let mut trees: Interner<Vec<(bool, u32)>> = Interner::new();
    let mut twins: Interner<(Vec<u32>, Vec<u32>)> = Interner::new();
    let mut key = vec![0u32; n];
    for &v in d.topo_order().iter().rev() {
        let vi = v as usize;
        if indeg[vi] == 1 {
            let mut items: Vec<(bool, u32)> = d
                .children(v)
                .iter()
                .map(|&c| {
                    if indeg[c as usize] == 1 {
                        (false, private[c as usize])
                    } else {
                        (true, c)
                    }
                })
                .collect();
            items.sort_unstable();
            private[vi] = trees.id(items);
            key[vi] = private[vi] * 2;
        } else {
            let mut ps = parents[vi].clone();
            ps.sort_unstable();
            let mut cs = d.children(v).to_vec();
            cs.sort_unstable();
            key[vi] = twins.id((ps, cs)) * 2 + 1;
        }
    }
    key
}

/// Splits colour classes by the multisets of parent and child colours
/// until nothing changes.
fn refine(d: &Dag, parents: &[Vec<u32>], mut colour: Vec<u32>) -> Vec<u32> {
    let n = d.len();
    let mut count = {
        let mut c = colour.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    };
    for _ in 0..n {
        let sig: Vec<(u32, Vec<u32>, Vec<u32>)> = (0..n)
            .map(|v| {
                let mut ps: Vec<u32> = parents[v].iter().map(|&p| colour[p as usize]).collect();
                ps.sort_unstable();
                let mut cs: Vec<u32> =
                    d.children(v as u32).iter().map(|&c| colour[c as usize]).collect();
                cs.sort_unstable();
                (colour[v], ps, cs)
            })
            .collect();
        let (next, k) = dense_ranks(&sig);
        colour = next;
        if k == count {
            break;
        }
        count = k;
    }
    colour
}

#[derive(Clone)]
struct State {
    id: Vec<u32>,
    queue: Vec<u32>,
    head: usize,
    label: String,
}

impl State {
    fn emit(&mut self, id: u32) {
        if !(self.label.is_empty() || self.label.ends_with(':')) {
            self.label.push(',');
        }
        super::push_id(&mut self.label, id);
    }

    fn number(&mut self, v: u32) {
        let id = self.queue.len() as u32;
        self.id[v as usize] = id;
        self.queue.push(v);
        self.emit(id);
    }
}

struct Search<'a> {
    prep: &'a Prep,
    budget: Budget,
    best: Option<String>,
    leaves: u64,
    work: u64,
    exhausted: bool,
    exact: bool,
}

fn next_permutation(xs: &mut [u32]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let mut i = xs.len() - 1;
    while i > 0 && xs[i - 1] >= xs[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = xs.len() - 1;
    while xs[j] <= xs[i - 1] {
        j -= 1;
    }
    xs.swap(i - 1, j);
    xs[i..].reverse();
    true
}

impl Search<'_> {
    fn charge(&mut self, w: usize) {
        self.work += w as u64;
        if self.work >= self.budget.max_work || self.leaves >= self.budget.max_leaves {
            self.exhausted = true;
        }
    }

    /// True when every completion of `partial` is worse than the best leaf.
    fn pruned(&self, partial: &str) -> bool {
        let Some(best) = &self.best else {
            return false;
        };
        let (p, b) = (partial.as_bytes(), best.as_bytes());
        let m = p.len().min(b.len());
        match p[..m].cmp(&b[..m]) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => p.len() > b.len(),
        }
    }

    fn leaf(&mut self, mut st: State) {
        st.label.push(';');
        self.leaves += 1;
        self.charge(0);
        if self.best.as_ref().is_none_or(|b| st.label < *b) {
            self.best = Some(st.label);
        }
    }

    /// Continues the BFS from `st`. `resume` restarts a clause part way,
    /// at vertex `v`, cell `k`.
    fn run(&mut self, mut st: State, mut resume: Option<(u32, usize)>, depth: usize) {
        let prep = self.prep;
        loop {
            let (v, first) = match resume.take() {
                Some(r) => r,
                None => {
                    if st.head == st.queue.len() {
                        self.leaf(st);
                        return;
                    }
                    let v = st.queue[st.head];
                    st.head += 1;
                    if st.head > 1 {
                        st.label.push(':');
                    }
                    (v, 0)
                }
            };
            let order = &prep.order[v as usize];
            let cells = &prep.cells[v as usize];
            self.charge(order.len() + 1);
            for (k, cell) in cells.iter().enumerate().skip(first) {
                let members = &order[cell.start..cell.end];
                let mut seen: Vec<u32> = members
                    .iter()
                    .map(|&c| st.id[c as usize])
                    .filter(|&i| i != u32::MAX)
                    .collect();
                seen.sort_unstable();
                for i in seen {
                    st.emit(i);
                }
                let fresh: Vec<u32> = members
                    .iter()
                    .copied()
                    .filter(|&c| st.id[c as usize] == u32::MAX)
                    .collect();
                let mut keys: Vec<u32> = fresh.iter().map(|&c| prep.swap[c as usize]).collect();
                keys.sort_unstable();
                let ambiguous = !cell.free && keys.first() != keys.last();
                if ambiguous {
                    if self.exhausted || depth >= self.budget.max_depth {
                        self.exact = false;
                    } else {
                        self.branch(&st, v, k, &fresh, keys, depth);
                        return;
                    }
                }
                for c in fresh {
                    st.number(c);
                }
            }
            if self.pruned(&st.label) {
                return;
            }
        }
    }

    /// Tries every distinct sequence of swap keys over `fresh`, members of
    /// one key taken in their stable order.
    fn branch(&mut self, st: &State, v: u32, k: usize, fresh: &[u32], mut keys: Vec<u32>, depth: usize) {
        let swap = &self.prep.swap;
        let mut first = true;
        loop {
            if !first && self.exhausted {
                self.exact = false;
                return;
            }
            first = false;
            let mut next = st.clone();
            self.charge(next.id.len() + next.label.len());
            let mut used = vec![false; fresh.len()];
            for &key in &keys {
                let i = (0..fresh.len())
                    .find(|&i| !used[i] && swap[fresh[i] as usize] == key)
                    .expect("key drawn from members");
                used[i] = true;
                next.number(fresh[i]);
            }
            self.run(next, Some((v, k + 1)), depth + 1);
            if !next_permutation(&mut keys) {
                return;
            }
        }
    }
}
