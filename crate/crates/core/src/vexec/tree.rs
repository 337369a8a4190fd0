//! Hypertree work: one block per subtree for the Merkle reductions and one
//! block per layer for the WOTS+ signatures, one lane per chain.

use super::reduce::{reduce_level, NodeRegion};
use super::{ExecReport, Executor, VirtualBlock};
use crate::banksim::{count_conflicts, AccessTrace, ConflictReport};
use crate::error::{Error, Result};
use crate::sigcore::merkle::keypair_address;
use crate::sigcore::wots::{chain_lengths, wots_gen_leaf, wots_sign_chain};
use crate::thash::sha256::count_compressions;
use crate::thash::{AddrType, Address, HashCtx};
use crate::tuner::PaddingScheme;

pub struct LayerResult {
    pub compressions: u64,
    pub sync_points: u64,
    pub scratch: usize,
    pub trace: Option<AccessTrace>,
}

/// Root and authentication path of subtree (`layer`, `tree`) for `leaf_idx`.
#[allow(clippy::too_many_arguments)]
pub fn run_tree_layer(
    ctx: &HashCtx,
    layer: u32,
    tree: u64,
    leaf_idx: u32,
    pad: &PaddingScheme,
    block: &mut VirtualBlock,
    auth: &mut [u8],
    root: &mut [u8],
    instrument: bool,
) -> Result<LayerResult> {
    let dp = ctx.params();
    let n = dp.n();
    let height = dp.subtree_height as u32;
    let leaves = dp.subtree_leaves;
    let (res, compressions) = count_compressions(|| -> Result<_> {
        block.configure(leaves as u32, [NodeRegion::physical_bytes(leaves, n, pad)])?;
        let scratch = block.used_bytes();
        let mut views = block.regions_mut();
        let mut region = NodeRegion::new(views.remove(0), n, height, leaves, *pad, instrument);
        for lane in 0..leaves as u32 {
            region.write(lane as usize, &wots_gen_leaf(ctx, &keypair_address(layer, tree, lane)));
        }
        let mut a = Address::subtree(layer, tree, AddrType::HashTree);
        for level in 1..=height {
            let sibling = ((leaf_idx >> (level - 1)) ^ 1) as usize;
            region.read(sibling, &mut auth[(level as usize - 1) * n..level as usize * n]);
            a.set_tree_height(level);
            reduce_level(&mut region, level, |p, l, r, out| {
                a.set_tree_index(p);
                ctx.thash_pair_into(out, &a, l, r);
            });
        }
        region.read(0, root);
        Ok((region.take_trace(), scratch))
    });
    let (trace, scratch) = res?;
    Ok(LayerResult { compressions, sync_points: height as u64, scratch, trace })
}

/// All `d` subtrees of the signing path, one independent block each.
#[allow(clippy::too_many_arguments)]
pub fn run_tree_layers(
    exec: &Executor,
    ctx: &HashCtx,
    positions: &[(u64, u32)],
    pad: &PaddingScheme,
    blocks: &mut [VirtualBlock],
    auth_out: &mut [u8],
    roots_out: &mut [u8],
    instrument: bool,
) -> Result<ExecReport> {
    let dp = ctx.params();
    let (n, d) = (dp.n(), dp.params.d);
    let auth_len = dp.subtree_height * n;
    if positions.len() != d || auth_out.len() != d * auth_len || roots_out.len() != d * n {
        return Err(Error::Internal("hypertree output buffers do not match the parameter set".into()));
    }
    if blocks.len() < d {
        return Err(Error::Config(format!("{d} tree blocks needed, {} provided", blocks.len())));
    }
    let items: Vec<_> = blocks
        .iter_mut()
        .zip(auth_out.chunks_mut(auth_len))
        .zip(roots_out.chunks_mut(n))
        .zip(positions)
        .enumerate()
        .map(|(layer, (((b, a), r), &pos))| (layer as u32, pos, b, a, r))
        .collect();
    let results = exec.map(items, |(layer, (tree, leaf), block, auth, root)| {
        run_tree_layer(ctx, layer, tree, leaf, pad, block, auth, root, instrument)
    });
    let mut report = ExecReport {
        blocks: d as u64,
        max_lanes: dp.subtree_leaves as u32,
        bottom_scratch_per_tree: dp.subtree_leaves * n,
        conflicts: instrument.then(ConflictReport::default),
        ..Default::default()
    };
    for r in results {
        let r = r?;
        report.compressions += r.compressions;
        report.sync_points += r.sync_points;
        report.peak_scratch_bytes = report.peak_scratch_bytes.max(r.scratch);
        if let (Some(c), Some(t)) = (&mut report.conflicts, &r.trace) {
            c.merge(&count_conflicts(t, pad));
        }
    }
    Ok(report)
}

/// WOTS+ signatures for every layer: layer 0 signs the FORS public key,
/// layer `i` signs the root of layer `i − 1`.
pub fn run_wots_blocks(
    exec: &Executor,
    ctx: &HashCtx,
    positions: &[(u64, u32)],
    fors_root: &[u8],
    tree_roots: &[u8],
    blocks: &mut [VirtualBlock],
    out: &mut [u8],
) -> Result<ExecReport> {
    let dp = ctx.params();
    let (n, d, len) = (dp.n(), dp.params.d, dp.wots_len);
    if positions.len() != d || tree_roots.len() != d * n || out.len() != d * dp.wots_bytes {
        return Err(Error::Internal("WOTS output buffers do not match the parameter set".into()));
    }
    if blocks.len() < d {
        return Err(Error::Config(format!("{d} WOTS blocks needed, {} provided", blocks.len())));
    }
    let items: Vec<_> = blocks
        .iter_mut()
        .zip(out.chunks_mut(dp.wots_bytes))
        .zip(positions)
        .enumerate()
        .map(|(layer, ((b, o), &pos))| (layer, pos, b, o))
        .collect();
    let results = exec.map(items, |(layer, (tree, leaf), block, sig)| {
        count_compressions(|| -> Result<()> {
            block.configure(len as u32, [])?;
            let msg = if layer == 0 { fors_root } else { &tree_roots[(layer - 1) * n..layer * n] };
            let lengths = chain_lengths(dp, msg);
            let kp = keypair_address(layer as u32, tree, leaf);
            for (lane, chunk) in sig.chunks_mut(n).enumerate() {
                wots_sign_chain(ctx, chunk, &kp, lane as u32, lengths[lane]);
            }
            Ok(())
        })
    });
    let mut report = ExecReport { blocks: d as u64, max_lanes: len as u32, ..Default::default() };
    for (r, compressions) in results {
        r?;
        report.compressions += compressions;
    }
    Ok(report)
}
