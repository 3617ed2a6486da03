//! The ≺ order on sub-DAGs, in two forms: a pairwise recursive comparison
//! with memoization, and a bottom-up class table that ranks every vertex of
//! one DAG at once.

use std::cmp::Ordering;
use std::collections::HashMap;

use super::Dag;

/// The sub-DAG induced on everything reachable from `root`. Shared
/// vertices count once per sub-DAG that reaches them.
#[derive(Clone, Copy, Debug)]
pub struct SubDagView<'a> {
    pub dag: &'a Dag,
    pub root: u32,
}

impl<'a> SubDagView<'a> {
    pub fn new(dag: &'a Dag, root: u32) -> Self {
        SubDagView { dag, root }
    }

    pub fn reach(&self) -> Vec<u32> {
        let mut seen = vec![false; self.dag.len()];
        let mut stack = vec![self.root];
        seen[self.root as usize] = true;
        let mut out = Vec::new();
        while let Some(v) = stack.pop() {
            out.push(v);
            for &c in self.dag.children(v) {
                if !seen[c as usize] {
                    seen[c as usize] = true;
                    stack.push(c);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn size(&self) -> usize {
        self.reach().len()
    }
}

/// `|reach(v)|` for every vertex. Vertices whose sub-DAG is a tree use
/// `1 + Σ children`; the rest are counted by a DFS.
pub(crate) fn reach_sizes(d: &Dag, indeg: &[u32]) -> Vec<usize> {
    let n = d.len();
    let order = d.topo_order();
    let mut size = vec![0usize; n];
    let mut tree = vec![false; n];
    let mut stamp = vec![u32::MAX; n];
    let mut stack = Vec::new();
    for &v in order.iter().rev() {
        let cs = d.children(v);
        tree[v as usize] = cs.iter().all(|&c| indeg[c as usize] == 1 && tree[c as usize]);
        if tree[v as usize] {
            size[v as usize] = 1 + cs.iter().map(|&c| size[c as usize]).sum::<usize>();
            continue;
        }
        let mut count = 0;
        stamp[v as usize] = v;
        stack.push(v);
        while let Some(u) = stack.pop() {
            count += 1;
            for &c in d.children(u) {
                if stamp[c as usize] != v {
                    stamp[c as usize] = v;
                    stack.push(c);
                }
            }
        }
        size[v as usize] = count;
    }
    size
}

/// Every vertex's ≡-class as a rank in the ≺ order: `class[u] < class[v]`
/// iff the sub-DAG at `u` precedes the one at `v`, equal iff ≡.
#[derive(Clone, Debug)]
pub struct ClassTable {
    pub size: Vec<usize>,
    pub class: Vec<u32>,
}

/// Ranks are assigned size by size. Children are strictly smaller than
/// their parent, so their ranks are final before the parent is keyed by
/// (outdegree, sorted child ranks).
pub fn class_table(d: &Dag) -> ClassTable {
    let n = d.len();
    let indeg = d.indegrees();
    let size = reach_sizes(d, &indeg);
    let mut by_size: Vec<u32> = (0..n as u32).collect();
    by_size.sort_by_key(|&v| size[v as usize]);
    let mut class = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut i = 0;
    while i < n {
        let s = size[by_size[i] as usize];
        let mut j = i;
        while j < n && size[by_size[j] as usize] == s {
            j += 1;
        }
        let mut keyed: Vec<((usize, Vec<u32>), u32)> = by_size[i..j]
            .iter()
            .map(|&v| {
                let mut ks: Vec<u32> = d.children(v).iter().map(|&c| class[c as usize]).collect();
                ks.sort_unstable();
                ((ks.len(), ks), v)
            })
            .collect();
        keyed.sort_unstable();
        let mut prev: Option<&(usize, Vec<u32>)> = None;
        for (k, v) in &keyed {
            if prev != Some(k) {
                if prev.is_some() {
                    next += 1;
                }
                prev = Some(k);
            }
            class[*v as usize] = next;
        }
        next += 1;
        i = j;
    }
    ClassTable { size, class }
}

impl ClassTable {
    pub fn cmp(&self, u: u32, v: u32) -> Ordering {
        self.class[u as usize].cmp(&self.class[v as usize])
    }
}

/// Non-decreasing sequence of the children's indegrees, indegrees taken in
/// the whole DAG. ≡ siblings are ordered by this key, lexicographically.
pub fn delta_key(d: &Dag, indeg: &[u32], v: u32) -> Vec<u32> {
    let mut k: Vec<u32> = d.children(v).iter().map(|&c| indeg[c as usize]).collect();
    k.sort_unstable();
    k
}

type Side = (u8, u32);

/// Direct recursive ≺ on pairs of vertices from up to two DAGs.
struct Pairwise<'a> {
    dags: [&'a Dag; 2],
    sizes: [Vec<usize>; 2],
    memo: HashMap<(Side, Side), Ordering>,
    sorted: HashMap<Side, Vec<u32>>,
}

impl<'a> Pairwise<'a> {
    fn new(a: &'a Dag, b: &'a Dag) -> Self {
        let size = |d: &Dag| -> Vec<usize> {
            (0..d.len() as u32).map(|v| SubDagView::new(d, v).size()).collect()
        };
        Pairwise {
            dags: [a, b],
            sizes: [size(a), size(b)],
            memo: HashMap::new(),
            sorted: HashMap::new(),
        }
    }

    fn sorted_children(&mut self, s: Side) -> Vec<u32> {
        if let Some(v) = self.sorted.get(&s) {
            return v.clone();
        }
        let mut cs: Vec<u32> = self.dags[s.0 as usize].children(s.1).to_vec();
        // Insertion sort: comparisons recurse into `self`.
        for i in 1..cs.len() {
            let mut j = i;
            while j > 0 && self.cmp((s.0, cs[j - 1]), (s.0, cs[j])) == Ordering::Greater {
                cs.swap(j - 1, j);
                j -= 1;
            }
        }
        self.sorted.insert(s, cs.clone());
        cs
    }

    fn cmp(&mut self, a: Side, b: Side) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        if let Some(&o) = self.memo.get(&(a, b)) {
            return o;
        }
        let o = self.cmp_uncached(a, b);
        self.memo.insert((a, b), o);
        self.memo.insert((b, a), o.reverse());
        o
    }

    fn cmp_uncached(&mut self, a: Side, b: Side) -> Ordering {
        let size = |s: Side, me: &Self| me.sizes[s.0 as usize][s.1 as usize];
        let outdeg = |s: Side, me: &Self| me.dags[s.0 as usize].children(s.1).len();
        let o = size(a, self)
            .cmp(&size(b, self))
            .then(outdeg(a, self).cmp(&outdeg(b, self)));
        if o != Ordering::Equal {
            return o;
        }
        let ca = self.sorted_children(a);
        let cb = self.sorted_children(b);
        for (&x, &y) in ca.iter().zip(&cb) {
            let o = self.cmp((a.0, x), (b.0, y));
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    }
}

/// `Less` iff `s ≺ t`, `Equal` iff `s ≡ t`.
pub fn compare(s: SubDagView<'_>, t: SubDagView<'_>) -> Ordering {
    let mut p = Pairwise::new(s.dag, t.dag);
    p.cmp((0, s.root), (1, t.root))
}
