use bplab_core::binarize::{
    annotated_exact_marginals, binarize_graph, AnnotatedGraph, Gate, GateKind,
};
use bplab_core::graph::{random_table, Factor, FactorGraph};
use proptest::prelude::*;
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random pairwise factors on `n` variables plus one gate over `k` inputs.
fn random_annotated(seed: u64, n: usize, k: usize, kind: GateKind) -> AnnotatedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(0.4) {
                factors.push(Factor::new(a, b, random_table(&mut rng, 0.1, 1.0)));
            }
        }
    }
    let mut vars: Vec<usize> = (0..n).collect();
    vars.shuffle(&mut rng);
    let gate = Gate {
        out: vars[0],
        inputs: vars[1..=k].to_vec(),
        kind,
    };
    AnnotatedGraph::new(FactorGraph::build(n, factors).unwrap(), vec![gate]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn binarization_preserves_original_marginals(
        seed in any::<u64>(),
        n in 3usize..=6,
        or in any::<bool>(),
        k_frac in 0.0f64..1.0,
    ) {
        // Gate arity in 2..=n-1.
        let k = 2 + ((n - 2) as f64 * k_frac) as usize;
        let k = k.min(n - 1);
        let kind = if or { GateKind::Or } else { GateKind::And };
        let g = random_annotated(seed, n, k, kind);
        let b = binarize_graph(&g).unwrap();
        prop_assert_eq!(b.original_vars, n);
        prop_assert_eq!(b.intermediates.len(), k.saturating_sub(2));
        prop_assert!(b.graph.gates.iter().all(|gate| gate.inputs.len() <= 2));

        let before = annotated_exact_marginals(&g).unwrap();
        let after = annotated_exact_marginals(&b.graph).unwrap();
        for v in 0..n {
            prop_assert!((before.marginals[v] - after.marginals[v]).abs() <= 1e-12);
        }
        prop_assert!((before.partition_z - after.partition_z).abs() <= 1e-12 * before.partition_z);
    }

    #[test]
    fn annotated_text_round_trips(seed in any::<u64>(), n in 3usize..=6, or in any::<bool>()) {
        let kind = if or { GateKind::Or } else { GateKind::And };
        let g = random_annotated(seed, n, n - 1, kind);
        prop_assert_eq!(AnnotatedGraph::parse(&g.serialize()).unwrap(), g);
    }
}

#[test]
fn gate_depth_is_ceil_log2() {
    for (k, depth) in [(2, 1), (3, 2), (4, 2), (5, 3), (6, 3), (8, 3)] {
        let g = random_annotated(k as u64, 9, k, GateKind::Or);
        assert_eq!(binarize_graph(&g).unwrap().gate_depths, vec![depth]);
    }
}
