//! Merkle trees: treehash, root recomputation and hypertree-layer signing.

use super::wots;
use crate::thash::{AddrType, Address, HashCtx, MAX_N};

/// Root and authentication path for `leaf_idx` of a height-`height` tree
/// whose leaves come from `leaf`. Node `j` at height `h` is addressed with
/// index `j + (offset >> h)`.
pub fn treehash(
    ctx: &HashCtx,
    height: u32,
    leaf_idx: u32,
    offset: u32,
    adrs: &Address,
    mut leaf: impl FnMut(u32) -> Vec<u8>,
) -> (Vec<u8>, Vec<u8>) {
    assert!(height < 32 && leaf_idx < (1u32 << height), "leaf index outside tree");
    let n = ctx.n();
    let mut level: Vec<Vec<u8>> = (0..1u32 << height).map(&mut leaf).collect();
    let mut auth = Vec::with_capacity(height as usize * n);
    let mut a = *adrs;
    for h in 1..=height {
        auth.extend_from_slice(&level[((leaf_idx >> (h - 1)) ^ 1) as usize]);
        a.set_tree_height(h);
        level = level
            .chunks_exact(2)
            .enumerate()
            .map(|(j, pair)| {
                a.set_tree_index(j as u32 + (offset >> h));
                let mut out = vec![0u8; n];
                ctx.thash_pair_into(&mut out, &a, &pair[0], &pair[1]);
                out
            })
            .collect();
    }
    (level.pop().expect("one root"), auth)
}

/// Walks `auth` upward from `leaf` at `leaf_idx`.
pub fn compute_root(
    ctx: &HashCtx,
    leaf: &[u8],
    leaf_idx: u32,
    offset: u32,
    auth: &[u8],
    height: u32,
    adrs: &Address,
) -> Vec<u8> {
    let n = ctx.n();
    let mut node = [0u8; MAX_N];
    node[..n].copy_from_slice(leaf);
    let mut a = *adrs;
    for (h, sibling) in (1..=height).zip(auth.chunks_exact(n)) {
        let (idx, off) = (leaf_idx >> h, offset >> h);
        a.set_tree_height(h).set_tree_index(idx + off);
        let cur = node;
        if (leaf_idx >> (h - 1)) & 1 == 1 {
            ctx.thash_pair_into(&mut node, &a, sibling, &cur[..n]);
        } else {
            ctx.thash_pair_into(&mut node, &a, &cur[..n], sibling);
        }
    }
    node[..n].to_vec()
}

/// Key-pair address of leaf `leaf` in subtree (`layer`, `tree`).
pub fn keypair_address(layer: u32, tree: u64, leaf: u32) -> Address {
    let mut a = Address::subtree(layer, tree, AddrType::WotsHash);
    a.set_keypair(leaf);
    a
}

/// Root and authentication path of subtree (`layer`, `tree`) for `leaf_idx`.
pub fn subtree_root(ctx: &HashCtx, layer: u32, tree: u64, leaf_idx: u32) -> (Vec<u8>, Vec<u8>) {
    let height = ctx.params().subtree_height as u32;
    let adrs = Address::subtree(layer, tree, AddrType::HashTree);
    treehash(ctx, height, leaf_idx, 0, &adrs, |i| {
        wots::wots_gen_leaf(ctx, &keypair_address(layer, tree, i))
    })
}

/// Signs `msg` with leaf `leaf_idx` of subtree (`layer`, `tree`).
/// Returns the WOTS+ signature, the authentication path and the root.
pub fn merkle_sign(
    ctx: &HashCtx,
    layer: u32,
    tree: u64,
    leaf_idx: u32,
    msg: &[u8],
) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let sig = wots::wots_sign(ctx, msg, &keypair_address(layer, tree, leaf_idx));
    let (root, auth) = subtree_root(ctx, layer, tree, leaf_idx);
    (sig, auth, root)
}
