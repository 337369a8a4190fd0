use super::*;
use crate::banksim::reduction_trace;
use crate::params::ParamSetId;
use crate::sigcore::{fors as sfors, keygen, merkle, Signer, SignerConfig};
use crate::thash::{HashBackend, HashCtx};
use crate::tuner::{padding_solve, tree_tune, PaddingScheme, TuneInput};

fn ctx(id: ParamSetId) -> HashCtx {
    let n = id.params().n;
    let seed: Vec<u8> = (0..3 * n as u8).collect();
    HashCtx::new(id.derived(), &seed[2 * n..], Some(&seed[..n]), HashBackend::Tuned)
}

fn indices(id: ParamSetId, salt: u8) -> Vec<u32> {
    let dp = id.derived();
    let mhash: Vec<u8> = (0..dp.fors_msg_bytes as u8).map(|i| i.wrapping_mul(29) ^ salt).collect();
    sfors::message_to_indices(&dp, &mhash)
}

struct Run {
    sig: Vec<u8>,
    roots: Vec<u8>,
    out: ForsTrees,
}

fn run(id: ParamSetId, layout: FusedSetLayout, pad: PaddingScheme, workers: usize, instrument: bool) -> Run {
    let dp = id.derived();
    let ctx = ctx(id);
    let allocs = AllocCounter::new();
    let mut blocks: Vec<_> = (0..layout.passes())
        .map(|_| VirtualBlock::new(layout.lanes_per_set as u32, DEFAULT_SCRATCH_BYTES, &allocs).unwrap())
        .collect();
    let mut sig = vec![0; dp.fors_bytes];
    let mut roots = vec![0; dp.params.k * dp.n()];
    let relax = if layout.relax { RelaxConfig::on(dp.n()) } else { RelaxConfig::off() };
    let out = run_fused_fors(
        &Executor::new(workers).unwrap(),
        &layout,
        relax,
        &ctx,
        &sfors::fors_address(99, 3),
        &indices(id, 5),
        &pad,
        &mut blocks,
        &mut sig,
        &mut roots,
        instrument,
    )
    .unwrap();
    Run { sig, roots, out }
}

fn oracle_fors(id: ParamSetId) -> (Vec<u8>, Vec<u8>) {
    let ctx = ctx(id);
    let adrs = sfors::fors_address(99, 3);
    let mut sig = Vec::new();
    let mut roots = Vec::new();
    for (i, &idx) in indices(id, 5).iter().enumerate() {
        let mut sk = vec![0; ctx.n()];
        sfors::fors_secret_into(&ctx, &mut sk, &adrs, idx + (i * ctx.params().fors_t) as u32);
        let (root, auth) = sfors::fors_tree(&ctx, &adrs, i as u32, idx);
        sig.extend(sk);
        sig.extend(auth);
        roots.extend(root);
    }
    (sig, roots)
}

fn tuned_layout(id: ParamSetId, relax: bool) -> FusedSetLayout {
    let mut input = TuneInput::new(id.derived());
    input.relax = relax;
    FusedSetLayout::from_candidate(&id.derived(), &tree_tune(&input).unwrap().best, relax).unwrap()
}

#[test]
fn fused_128f_single_pass() {
    let layout = tuned_layout(ParamSetId::S128f, false);
    assert_eq!((layout.lanes_per_set, layout.sets_fused, layout.trees_per_set), (704, 3, 11));
    assert_eq!(layout.passes(), 1);
    assert_eq!(layout.sync_points(), 6);
    let r = run(ParamSetId::S128f, layout, padding_solve(16).unwrap(), 1, false);
    assert_eq!((r.sig, r.roots), oracle_fors(ParamSetId::S128f));
    assert_eq!(r.out.report.sync_points, 6);
    assert_eq!(r.out.report.blocks, 1);
}

#[test]
fn degenerate_layout_is_sequential_treehash() {
    for id in ParamSetId::ALL {
        let layout = FusedSetLayout::sequential(&id.derived(), false);
        assert_eq!(layout.passes(), id.params().k);
        let r = run(id, layout, PaddingScheme::none(id.params().n as u32), 2, false);
        assert_eq!((r.sig, r.roots), oracle_fors(id), "{id}");
    }
}

#[test]
fn ragged_sets_have_inactive_slots() {
    let dp = ParamSetId::S192f.derived();
    let layout = tuned_layout(ParamSetId::S192f, false);
    assert_eq!((layout.trees_per_set, layout.sets_fused, layout.passes()), (3, 2, 6));
    assert_eq!(layout.slot_tree(5, 0, 2), Some(32));
    assert_eq!(layout.slot_tree(5, 1, 0), None);
    assert_eq!(layout.offsets(5), [30, 33]);
    let mut seen = std::collections::BTreeSet::new();
    for pass in 0..layout.passes() {
        for f in 0..2 {
            for j in 0..3 {
                if let Some(g) = layout.slot_tree(pass, f, j) {
                    assert!(seen.insert(g));
                }
            }
        }
    }
    assert_eq!(seen.len(), dp.params.k);
    let r = run(ParamSetId::S192f, layout, padding_solve(24).unwrap(), 8, false);
    assert_eq!((r.sig, r.roots), oracle_fors(ParamSetId::S192f));
    assert_eq!(r.out.report.sync_points, layout.sync_points());
}

#[test]
fn relax_halves_bottom_scratch() {
    let id = ParamSetId::S256f;
    let dp = id.derived();
    let plain = FusedSetLayout::new(&dp, 3, 1, false);
    assert!(plain.is_err(), "three full 256f trees exceed the lane limit");
    let on = tuned_layout(id, true);
    let off = FusedSetLayout::new(&dp, 1, 2, false).unwrap();
    let pad = PaddingScheme::none(32);
    let a = run(id, on, pad, 2, false);
    let b = run(id, off, pad, 2, false);
    assert_eq!((&a.sig, &a.roots), (&b.sig, &b.roots));
    assert_eq!((a.sig, a.roots), oracle_fors(id));
    assert_eq!(a.out.report.bottom_scratch_per_tree, 512 * 32 / 2);
    assert_eq!(b.out.report.bottom_scratch_per_tree, 512 * 32);
    let same_shape = FusedSetLayout::new(&dp, 1, 2, true).unwrap();
    let c = run(id, same_shape, pad, 1, false);
    assert_eq!(2 * c.out.report.peak_scratch_bytes, b.out.report.peak_scratch_bytes);
    assert_eq!(a.out.report.sync_points, 81);
}

#[test]
fn relax_budget_and_mismatch_rejected() {
    let id = ParamSetId::S128f;
    let dp = id.derived();
    let layout = FusedSetLayout::new(&dp, 1, 1, true).unwrap();
    let ctx = ctx(id);
    let allocs = AllocCounter::new();
    let mut blocks: Vec<_> = (0..layout.passes())
        .map(|_| VirtualBlock::new(32, DEFAULT_SCRATCH_BYTES, &allocs).unwrap())
        .collect();
    let mut sig = vec![0; dp.fors_bytes];
    let mut roots = vec![0; dp.params.k * 16];
    let pad = PaddingScheme::none(16);
    let mut go = |relax| {
        run_fused_fors(&Executor::inline(), &layout, relax, &ctx, &sfors::fors_address(0, 0), &indices(id, 0), &pad, &mut blocks, &mut sig, &mut roots, false)
            .map(|_| ())
    };
    assert!(matches!(go(RelaxConfig { enabled: true, regs_per_lane_budget: 31 }), Err(crate::Error::Config(_))));
    assert!(matches!(go(RelaxConfig::off()), Err(crate::Error::Config(_))));
    assert!(go(RelaxConfig::on(16)).is_ok());
}

#[test]
fn oversized_layout_is_config_error() {
    let dp = ParamSetId::S192f.derived();
    let layout = FusedSetLayout::new(&dp, 4, 3, false).unwrap();
    assert!(matches!(layout.validate(DEFAULT_SCRATCH_BYTES, &PaddingScheme::none(24)), Err(crate::Error::Config(_))));
    assert!(FusedSetLayout::new(&dp, 5, 1, false).is_err());
    let mut cfg = SignerConfig::sequential(ParamSetId::S192f);
    cfg.trees_per_set = 4;
    cfg.sets_fused = 3;
    assert!(Signer::new(cfg).is_err());
}

#[test]
fn instrumented_traces_match_model() {
    for (id, relax) in [(ParamSetId::S128f, false), (ParamSetId::S192f, false), (ParamSetId::S256f, true)] {
        let dp = id.derived();
        let pad = padding_solve(dp.n() as u32).unwrap();
        let r = run(id, tuned_layout(id, relax), pad, 1, true);
        let expected = reduction_trace(dp.params.log_t as u32, dp.n() as u32, relax).unwrap();
        assert_eq!(r.out.traces.len(), dp.params.k);
        assert!(r.out.traces.iter().all(|t| *t == expected));
        let conflicts = r.out.report.conflicts.unwrap();
        if dp.n() != 24 {
            assert_eq!(conflicts.total_conflicts(), 0, "{id}");
        } else {
            assert!(conflicts.max_way() <= 2);
        }
    }
}

#[test]
fn tree_layers_any_order() {
    let id = ParamSetId::S128f;
    let ctx = ctx(id);
    let pad = padding_solve(16).unwrap();
    let allocs = AllocCounter::new();
    let positions: Vec<(u64, u32)> = (0..22).map(|l| ((l as u64) * 977, (l % 8) as u32)).collect();
    let mut blocks: Vec<_> = (0..22).map(|_| VirtualBlock::new(8, 1024, &allocs).unwrap()).collect();
    let mut auth = vec![0; 22 * 3 * 16];
    let mut roots = vec![0; 22 * 16];
    let report = run_tree_layers(&Executor::new(4).unwrap(), &ctx, &positions, &pad, &mut blocks, &mut auth, &mut roots, false).unwrap();
    assert_eq!((report.blocks, report.max_lanes), (22, 8));
    assert_eq!(report.blocks * report.max_lanes as u64, 176);
    assert_eq!(report.sync_points, 22 * 3);

    let mut auth2 = vec![0; 22 * 3 * 16];
    let mut roots2 = vec![0; 22 * 16];
    for layer in (0..22).rev() {
        let (tree, leaf) = positions[layer];
        tree::run_tree_layer(&ctx, layer as u32, tree, leaf, &pad, &mut blocks[layer], &mut auth2[layer * 48..(layer + 1) * 48], &mut roots2[layer * 16..(layer + 1) * 16], false).unwrap();
    }
    assert_eq!((&auth, &roots), (&auth2, &roots2));
    for (layer, &(tree, leaf)) in positions.iter().enumerate() {
        let (root, path) = merkle::subtree_root(&ctx, layer as u32, tree, leaf);
        assert_eq!(root, &roots[layer * 16..(layer + 1) * 16]);
        assert_eq!(path, &auth[layer * 48..(layer + 1) * 48]);
    }
}

#[test]
fn wots_block_lanes() {
    let id = ParamSetId::S128f;
    let ctx = ctx(id);
    let allocs = AllocCounter::new();
    let mut blocks: Vec<_> = (0..22).map(|_| VirtualBlock::new(35, 0, &allocs).unwrap()).collect();
    let positions: Vec<(u64, u32)> = (0..22).map(|l| (l as u64, 1)).collect();
    let mut out = vec![0; 22 * 35 * 16];
    let roots: Vec<u8> = (0..22 * 16).map(|i| i as u8).collect();
    let report = run_wots_blocks(&Executor::inline(), &ctx, &positions, &[0xab; 16], &roots, &mut blocks, &mut out).unwrap();
    assert_eq!(report.max_lanes, 35);
    let expected = crate::sigcore::wots::wots_sign(&ctx, &roots[16..32], &merkle::keypair_address(2, 2, 1));
    assert_eq!(&out[2 * 560..3 * 560], &expected[..]);
}

#[test]
fn workspace_reuse_allocates_nothing() {
    let id = ParamSetId::S128f;
    let (pk, sk) = keygen(id, &[3; 48]).unwrap();
    let signer = Signer::new(SignerConfig::tuned(id).unwrap()).unwrap();
    let key = signer.load_key(&sk).unwrap();
    let allocs = AllocCounter::new();
    let mut ws = signer.workspace(&allocs).unwrap();
    let before = allocs.get();
    for msg in [&b"a"[..], b"bb", b"ccc"] {
        signer.sign_into(&key, msg, None, &mut ws).unwrap();
        assert!(crate::sigcore::verify(&pk, msg, &ws.out).unwrap());
    }
    assert_eq!(allocs.get(), before);
    assert!(key.pool.is_intact());
}

#[test]
fn executor_preserves_order() {
    let e = Executor::new(3).unwrap();
    assert_eq!(e.map((0..100).collect(), |x: u32| x * 2), (0..100).map(|x| x * 2).collect::<Vec<_>>());
    assert!(Executor::new(0).is_err());
}
