//! Isomorphism by exhaustive matching, for cross-checking labels on small
//! DAGs.

use super::{CanonError, Dag};

const LIMIT: usize = 9;

/// Backtracking search for an edge-preserving bijection. Vertices are
/// matched in order, candidates pruned by in- and outdegree and by the
/// edges to already-matched vertices.
pub fn brute_force_isomorphic(a: &Dag, b: &Dag) -> Result<bool, CanonError> {
    for d in [a, b] {
        if d.len() > LIMIT {
            return Err(CanonError::TooLarge {
                limit: LIMIT,
                got: d.len(),
            });
        }
    }
    if a.len() != b.len() || a.edge_count() != b.edge_count() {
        return Ok(false);
    }
    let n = a.len();
    let adj = |d: &Dag| {
        let mut m = vec![[false; LIMIT]; n];
        for v in 0..n as u32 {
            for &c in d.children(v) {
                m[v as usize][c as usize] = true;
            }
        }
        m
    };
    let m = Matcher {
        n,
        ea: adj(a),
        eb: adj(b),
        da: degrees(a),
        db: degrees(b),
    };
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    // Single sources: the root must go to the root.
    map[a.root() as usize] = b.root() as usize;
    used[b.root() as usize] = true;
    if m.da[a.root() as usize] != m.db[b.root() as usize] {
        return Ok(false);
    }
    Ok(m.extend(0, &mut map, &mut used))
}

fn degrees(d: &Dag) -> Vec<(u32, usize)> {
    let indeg = d.indegrees();
    (0..d.len())
        .map(|v| (indeg[v], d.children(v as u32).len()))
        .collect()
}

struct Matcher {
    n: usize,
    ea: Vec<[bool; LIMIT]>,
    eb: Vec<[bool; LIMIT]>,
    da: Vec<(u32, usize)>,
    db: Vec<(u32, usize)>,
}

impl Matcher {
    fn extend(&self, v: usize, map: &mut [usize], used: &mut [bool]) -> bool {
        if v == self.n {
            return true;
        }
        if map[v] != usize::MAX {
            return self.consistent(v, map[v], map) && self.extend(v + 1, map, used);
        }
        for w in 0..self.n {
            if used[w] || self.da[v] != self.db[w] || !self.consistent(v, w, map) {
                continue;
            }
            map[v] = w;
            used[w] = true;
            if self.extend(v + 1, map, used) {
                return true;
            }
            map[v] = usize::MAX;
            used[w] = false;
        }
        false
    }

    fn consistent(&self, v: usize, w: usize, map: &[usize]) -> bool {
        (0..self.n).all(|u| {
            let x = map[u];
            x == usize::MAX
                || u == v
                || (self.ea[v][u] == self.eb[w][x] && self.ea[u][v] == self.eb[x][w])
        }) && self.ea[v][v] == self.eb[w][w]
    }
}
