use proptest::prelude::*;

use unktx_core::ledger::{ingest_reader, link, write_writer};
use unktx_core::ledger::synth::{synth, GeneratorSpec};
use unktx_core::tdag::{build_forest, build_forest_from_roots};
use unktx_core::tiograph::{
    assert_acyclic, build_tio_graph, contract, contract_streaming, find_alpha_nodes,
};

fn arb_spec() -> impl Strategy<Value = GeneratorSpec> {
    (0usize..4, 0usize..3, 0usize..3, 0usize..200, 0usize..4).prop_map(|(a, b, c, r, cb)| {
        GeneratorSpec {
            patterns: [
                ("table7".to_owned(), a),
                ("trivial_chain".to_owned(), b),
                ("table3".to_owned(), c),
            ]
            .into(),
            random_txs: r,
            coinbase_blocks: cb,
            ..Default::default()
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tio_graph_edge_law(spec in arb_spec(), seed in any::<u64>()) {
        let l = link(synth(&spec, seed).unwrap()).unwrap();
        let g = build_tio_graph(&l);
        // Every non-coinbase input spends exactly one output.
        let spent: usize = l.txs().iter().filter(|t| !t.coinbase).map(|t| t.vin.len()).sum();
        let products: usize = l.txs().iter().map(|t| t.vin.len() * t.vout.len()).sum();
        prop_assert_eq!(g.edge_count(), products + spent);
        prop_assert!(assert_acyclic(&g).is_ok());
    }

    #[test]
    fn contraction_routes_agree(spec in arb_spec(), seed in any::<u64>()) {
        let l = link(synth(&spec, seed).unwrap()).unwrap();
        let alphas = find_alpha_nodes(&l);
        let lit = contract(&build_tio_graph(&l), &alphas, &l);
        let st = contract_streaming(&l, &alphas);
        prop_assert_eq!(lit.edge_keys(), st.edge_keys());
        prop_assert_eq!(lit.node_keys(), st.node_keys());
        prop_assert!(assert_acyclic(&st).is_ok());
    }

    #[test]
    fn forest_routes_agree(spec in arb_spec(), seed in any::<u64>()) {
        let l = link(synth(&spec, seed).unwrap()).unwrap();
        let a = build_forest(&l);
        let b = build_forest_from_roots(&l);
        prop_assert_eq!(&a, &b);
        for c in &a.components {
            prop_assert!(c.dag.is_weakly_connected());
            prop_assert!(c.dag.topo_order().is_some());
        }
    }

    #[test]
    fn interchange_round_trip(spec in arb_spec(), seed in any::<u64>()) {
        let l = synth(&spec, seed).unwrap();
        let mut buf = Vec::new();
        write_writer(&l, &mut buf).unwrap();
        let back = ingest_reader(&buf[..]).unwrap();
        let mut again = Vec::new();
        write_writer(&back, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }
}

#[test]
fn synth_is_seed_deterministic() {
    let spec = GeneratorSpec { random_txs: 300, ..Default::default() };
    let enc = |seed| {
        let mut b = Vec::new();
        write_writer(&synth(&spec, seed).unwrap(), &mut b).unwrap();
        b
    };
    assert_eq!(enc(4), enc(4));
    assert_ne!(enc(4), enc(5));
}
