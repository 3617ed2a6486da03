use proptest::prelude::*;

use unktx_core::ledger::{Hash32, Tio, TioKind};
use unktx_core::script::default_trivial_matcher;
use unktx_core::tdag::{add_super_root, compress, ClassStats, Role, TDag, TVertex, VertexKind};

const SCRIPTS: [&[u8]; 4] = [&[], &[0x51], &[0x6a, 0x01, 0x02], &[0x76, 0xa9]];

fn vertex(i: usize, alpha: bool, addressed: bool, script: usize) -> TVertex {
    let h = Hash32([(i % 251) as u8; 32]);
    if alpha {
        return TVertex {
            kind: VertexKind::Alpha { txid: h, blockhash: Hash32::default() },
            address: None,
            script: None,
        };
    }
    TVertex {
        kind: VertexKind::Output(Tio {
            kind: TioKind::Output,
            txid: h,
            blockhash: Hash32::default(),
            index: i as u32,
        }),
        address: addressed.then(|| format!("1v{i}")),
        script: Some(SCRIPTS[script].to_vec()),
    }
}

/// Alphas first, then outputs each wired to one or more earlier vertices.
fn arb_tdag() -> impl Strategy<Value = TDag> {
    (1usize..4, 0usize..40).prop_flat_map(|(roots, rest)| {
        let n = roots + rest;
        (
            Just(roots),
            prop::collection::vec((any::<bool>(), 0usize..4), rest),
            prop::collection::vec(prop::collection::vec(any::<prop::sample::Index>(), 1..3), rest),
        )
            .prop_map(move |(roots, outs, parents)| {
                let mut vs: Vec<TVertex> = (0..roots).map(|i| vertex(i, true, false, 0)).collect();
                let mut edges = Vec::new();
                for (k, ((addr, s), ps)) in outs.into_iter().zip(parents).enumerate() {
                    let v = roots + k;
                    vs.push(vertex(v, false, addr, s));
                    for p in ps {
                        edges.push((p.index(v) as u32, v as u32));
                    }
                }
                debug_assert_eq!(vs.len(), n);
                TDag::new(vs, edges)
            })
    })
}

fn trivially_locked_internal(d: &TDag) -> usize {
    let m = default_trivial_matcher();
    (0..d.len() as u32)
        .filter(|&v| {
            let x = d.vertex(v);
            d.role(v) == Role::Internal
                && x.address.is_none()
                && x.tio().is_some()
                && x.script.as_deref().is_some_and(|s| m.match_script(s).is_some())
        })
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn compress_is_idempotent(d in arb_tdag()) {
        let m = default_trivial_matcher();
        let once = compress(&d, &m);
        prop_assert_eq!(&compress(&once, &m), &once);
        prop_assert_eq!(trivially_locked_internal(&once), 0);
        prop_assert!(once.topo_order().is_some());
        prop_assert!(once.len() <= d.len());
    }

    #[test]
    fn compress_preserves_reachability_between_survivors(d in arb_tdag()) {
        let once = compress(&d, &default_trivial_matcher());
        let keys = once.key_set();
        // Every surviving edge corresponds to a path in the input.
        let reach = |g: &TDag, from: u32| {
            let mut seen = vec![false; g.len()];
            let mut st = vec![from];
            while let Some(v) = st.pop() {
                for &c in g.children(v) {
                    if !seen[c as usize] {
                        seen[c as usize] = true;
                        st.push(c);
                    }
                }
            }
            seen
        };
        let idx = |g: &TDag, k: &VertexKind| g.vertices().iter().position(|v| &v.kind == k).unwrap() as u32;
        for (a, b) in once.edges() {
            let (ka, kb) = (&once.vertex(a).kind, &once.vertex(b).kind);
            prop_assert!(keys.contains(ka));
            prop_assert!(reach(&d, idx(&d, ka))[idx(&d, kb) as usize]);
        }
    }

    #[test]
    fn super_root_gives_single_source(d in arb_tdag()) {
        let roots = d.roots().len();
        let n = add_super_root(compress(&d, &default_trivial_matcher()));
        prop_assert_eq!(n.roots().len(), 1);
        let stats = ClassStats::of_normalized(&n);
        prop_assert_eq!(stats.roots, roots);
        if roots > 1 {
            prop_assert_eq!(n.super_root(), Some(n.len() as u32 - 1));
        } else {
            prop_assert_eq!(n.super_root(), None);
        }
        prop_assert_eq!(&add_super_root(n.clone()), &n);
    }
}
