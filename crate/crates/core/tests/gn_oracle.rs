mod common;

use common::*;
use gnqa::gn::{gn_forward, stacked_forward, stacked_forward_batch, GnBlock, GnDims, GnStack};
use gnqa::nn::Mode;
use gnqa::tensor::ParamStore;
use gnqa::Rng;
use proptest::prelude::*;
use rand::SeedableRng;

fn dims(node: usize, edge: usize, global: usize) -> GnDims {
    GnDims { node, edge, global }
}

fn stub_block(
    d: GnDims,
    global_out: Option<usize>,
    rng: &mut Rng,
) -> (GnBlock<QuadStub>, QuadStub, QuadStub, Option<QuadStub>) {
    let fe = QuadStub::random(d.edge + 2 * d.node + d.global, d.edge, rng);
    let fv = QuadStub::random(d.node + d.edge + d.global, d.node, rng);
    let fu = global_out.map(|o| QuadStub::random(d.edge + d.node + d.global, o, rng));
    let block = GnBlock::new(d, fe.clone(), fv.clone(), fu.clone()).unwrap();
    (block, fe, fv, fu)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn block_matches_elementwise_reference(seed in any::<u64>(), dv in 1usize..5, de in 1usize..4, du in 1usize..5, with_global in any::<bool>()) {
        let mut rng = Rng::seed_from_u64(seed);
        let d = dims(dv, de, du);
        let (block, fe, fv, fu) = stub_block(d, with_global.then_some(3), &mut rng);
        let g = random_state(&mut rng, 7, 12, dv, de, du);
        let out = gn_forward(&g, &block, &ParamStore::new(), Mode::Eval, None).unwrap();
        let (e, v, u) = reference_block(&g, &fe, &fv, fu.as_ref());
        prop_assert!(max_abs_diff(out.edges.data(), &e.concat()) < 1e-12);
        prop_assert!(max_abs_diff(out.nodes.data(), &v.concat()) < 1e-12);
        prop_assert!(max_abs_diff(&out.global, &u) < 1e-12);
        prop_assert_eq!(&out.senders, &g.senders);
        prop_assert_eq!(&out.receivers, &g.receivers);
    }

    #[test]
    fn stack_is_permutation_equivariant(seed in any::<u64>(), depth in 1usize..4) {
        let mut rng = Rng::seed_from_u64(seed);
        let d = dims(4, 3, 5);
        let mut store = ParamStore::new();
        let stack = GnStack::with_mlps(&mut store, "gn", d, depth, 8, 2, 0.3, &mut rng).unwrap();
        let g = random_state(&mut rng, 8, 14, d.node, d.edge, d.global);
        let perm = random_permutation(&mut rng, g.num_nodes());
        let base = stacked_forward(&g, &stack, &store, Mode::Eval, None).unwrap();
        let moved = stacked_forward(&g.permute_nodes(&perm).unwrap(), &stack, &store, Mode::Eval, None).unwrap();
        prop_assert!(max_abs_diff(&moved.global, &base.global) < 1e-9);
        prop_assert_eq!(&moved.edges, &base.edges);
        for (i, &old) in perm.iter().enumerate() {
            prop_assert_eq!(moved.nodes.row(i), base.nodes.row(old));
        }
    }

    #[test]
    fn batching_does_not_change_results(seed in any::<u64>(), count in 1usize..6) {
        let mut rng = Rng::seed_from_u64(seed);
        let d = dims(3, 2, 4);
        let mut store = ParamStore::new();
        let stack = GnStack::with_mlps(&mut store, "gn", d, 2, 8, 3, 0.0, &mut rng).unwrap();
        let graphs: Vec<_> = (0..count).map(|_| random_state(&mut rng, 6, 9, d.node, d.edge, d.global)).collect();
        let refs: Vec<_> = graphs.iter().collect();
        let batched = stacked_forward_batch(&refs, &stack, &store, Mode::Eval, None).unwrap();
        for (g, b) in graphs.iter().zip(&batched) {
            let single = stacked_forward(g, &stack, &store, Mode::Eval, None).unwrap();
            prop_assert!(max_abs_diff(single.nodes.data(), b.nodes.data()) < 1e-12);
            prop_assert!(max_abs_diff(single.edges.data(), b.edges.data()) < 1e-12);
            prop_assert!(max_abs_diff(&single.global, &b.global) < 1e-12);
        }
    }
}

#[test]
fn isolated_nodes_see_a_zero_aggregate() {
    let mut rng = Rng::seed_from_u64(4);
    let d = dims(2, 2, 1);
    let (block, _, fv, _) = stub_block(d, None, &mut rng);
    let g = random_state(&mut rng, 1, 0, d.node, d.edge, d.global);
    let out = gn_forward(&g, &block, &ParamStore::new(), Mode::Eval, None).unwrap();
    let mut x = g.nodes.row(0).to_vec();
    x.extend([0.0, 0.0]);
    x.extend(&g.global);
    assert!(max_abs_diff(out.nodes.row(0), &fv.eval_row(&x)) < 1e-12);
    assert_eq!(out.num_edges(), 0);
    assert_eq!(out.global, g.global);
}

#[test]
fn inner_blocks_keep_the_global_and_the_last_one_replaces_it() {
    let mut rng = Rng::seed_from_u64(5);
    let d = dims(3, 2, 4);
    let mut store = ParamStore::new();
    let stack = GnStack::with_mlps(&mut store, "gn", d, 3, 8, 6, 0.0, &mut rng).unwrap();
    let blocks = stack.blocks();
    assert_eq!(blocks.len(), 3);
    assert!(blocks[..2].iter().all(|b| b.global_output_width() == 4));
    assert_eq!(blocks[2].global_output_width(), 6);
    let g = random_state(&mut rng, 5, 6, d.node, d.edge, d.global);
    let out = stacked_forward(&g, &stack, &store, Mode::Eval, None).unwrap();
    assert_eq!(out.global.len(), 6);
}
