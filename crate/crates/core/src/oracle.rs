//! Independent generators and the label-vs-brute-force harness.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canon::{brute_force_isomorphic, canonical_label, Dag};

/// All rooted unlabeled trees on `n` vertices, each exactly once, as child
/// lists rooted at 0. Built from canonical level sequences, in the order
/// of Beyer and Hedetniemi; no canonical labeling is involved.
pub fn rooted_trees(n: usize) -> Vec<Dag> {
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    // Levels of vertices in preorder; root at level 1.
    let mut l: Vec<usize> = (1..=n).collect();
    loop {
        out.push(from_levels(&l));
        // Rightmost position with level > 2.
        let Some(p) = (0..n).rev().find(|&i| l[i] > 2) else {
            break;
        };
        let q = (0..p).rev().find(|&i| l[i] == l[p] - 1).expect("parent level");
        for i in p..n {
            l[i] = l[i - (p - q)];
        }
    }
    out
}

fn from_levels(l: &[usize]) -> Dag {
    let n = l.len();
    let mut children = vec![Vec::new(); n];
    let mut stack: Vec<u32> = Vec::new();
    for (v, &lv) in l.iter().enumerate() {
        stack.truncate(lv - 1);
        if let Some(&p) = stack.last() {
            children[p as usize].push(v as u32);
        }
        stack.push(v as u32);
    }
    Dag::new(children).expect("level sequence is a tree")
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<u32> {
    let mut p: Vec<u32> = (0..n as u32).collect();
    p.shuffle(rng);
    p
}

/// Random tree on `n` vertices: every vertex after the first picks a parent
/// among the earlier ones.
pub fn random_tree(n: usize, rng: &mut impl Rng) -> Dag {
    let mut children = vec![Vec::new(); n];
    for v in 1..n {
        let p = rng.random_range(0..v);
        children[p].push(v as u32);
    }
    Dag::new(children).expect("tree")
}

/// Random single-source DAG on `n` vertices. Each non-root vertex gets one
/// parent, then extra parents with probability `extra` each, so shared
/// vertices are common.
pub fn random_dag(n: usize, extra: f64, rng: &mut impl Rng) -> Dag {
    let mut children = vec![Vec::new(); n];
    for v in 1..n {
        let first = rng.random_range(0..v);
        children[first].push(v as u32);
        for (p, cs) in children.iter_mut().enumerate().take(v) {
            if p != first && rng.random_bool(extra) {
                cs.push(v as u32);
            }
        }
    }
    Dag::new(children).expect("forward edges from a single source")
}

/// One pair on which the two isomorphism tests disagree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub a: Vec<Vec<u32>>,
    pub b: Vec<Vec<u32>>,
    pub label_a: String,
    pub label_b: String,
    pub brute_isomorphic: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossReport {
    pub samples: usize,
    pub pairs_compared: usize,
    pub brute_isomorphic_pairs: usize,
    /// Isomorphic inputs labelled differently.
    pub soundness_violations: Vec<Counterexample>,
    /// Equal labels on non-isomorphic inputs.
    pub completeness_disagreements: Vec<Counterexample>,
}

impl CrossReport {
    pub fn passed(&self) -> bool {
        self.soundness_violations.is_empty()
    }
}

/// For each sample: a random DAG on at most `max_n` vertices, a relabelled
/// copy, and a second random DAG with the same vertex and edge counts when
/// one turns up. Each pair is judged by labels and by brute force.
pub fn cross_validate(samples: usize, max_n: usize, seed: u64) -> CrossReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = CrossReport {
        samples,
        ..Default::default()
    };
    let max_n = max_n.clamp(1, 9);
    for _ in 0..samples {
        let n = rng.random_range(1..=max_n);
        let extra = rng.random_range(0.1..0.5);
        let a = random_dag(n, extra, &mut rng);
        let perm = random_permutation(n, &mut rng);
        let copy = a.relabel(&perm);
        let mut others = vec![copy];
        for _ in 0..8 {
            let b = random_dag(n, extra, &mut rng);
            if b.edge_count() == a.edge_count() {
                others.push(b);
                break;
            }
        }
        let la = canonical_label(&a);
        for b in others {
            let lb = canonical_label(&b);
            let brute = brute_force_isomorphic(&a, &b).expect("within limit");
            rep.pairs_compared += 1;
            rep.brute_isomorphic_pairs += usize::from(brute);
            if brute == (la == lb) {
                continue;
            }
            let cx = Counterexample {
                a: a.child_lists().to_vec(),
                b: b.child_lists().to_vec(),
                label_a: la.clone(),
                label_b: lb,
                brute_isomorphic: brute,
            };
            if brute {
                rep.soundness_violations.push(cx);
            } else {
                rep.completeness_disagreements.push(cx);
            }
        }
    }
    rep
}
