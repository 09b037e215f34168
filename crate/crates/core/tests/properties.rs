use dilrnn_core::cells::CellKind;
use dilrnn_core::graph::{build_cyclic_graph, digit_path_length, ArchSpec, PathTable};
use dilrnn_core::model::{DilatedRnnModel, ModelConfig};
use dilrnn_core::numeric::Rng;
use proptest::prelude::*;

/// Nested schedules: each dilation is a multiple of the one below, starting at 1.
fn nested_schedule() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=3, 0..4).prop_map(|factors| {
        let mut out = vec![1];
        for f in factors {
            let last = *out.last().unwrap();
            out.push(last * f);
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_matches_greedy_digits(dilations in nested_schedule(), extra in 0usize..20) {
        let graph = build_cyclic_graph(&ArchSpec::custom(&dilations)).unwrap();
        let horizon = graph.period + extra;
        let table = PathTable::compute(&graph, horizon);
        for k in 0..table.starts.len() {
            for n in 1..=horizon {
                prop_assert_eq!(table.get(k, n), digit_path_length(n, &dilations).unwrap());
            }
        }
    }

    #[test]
    fn interleaved_forward_matches_sequential(
        layers in 1usize..5,
        t in 1usize..40,
        batch in 1usize..4,
        start in 0u32..2,
        seed in any::<u64>(),
    ) {
        let cfg = ModelConfig::dilated(CellKind::Vanilla, layers, 2, start).dims(2, 3, 3);
        let mut rng = Rng::new(seed);
        let model = DilatedRnnModel::new(&cfg, &mut rng).unwrap();
        let xs: Vec<_> = (0..t).map(|_| rng.normal_matrix(batch, 2)).collect();
        let a = model.forward(&xs).unwrap();
        let b = model.forward_interleaved(&xs).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-12);
    }
}
