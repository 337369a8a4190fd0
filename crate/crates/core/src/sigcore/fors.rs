//! FORS few-time signatures.

use super::merkle;
use crate::params::DerivedParams;
use crate::thash::{AddrType, Address, HashCtx};

/// Splits the digest into `k` indices of `log_t` bits, least significant
/// bit of each byte first.
pub fn message_to_indices(dp: &DerivedParams, mhash: &[u8]) -> Vec<u32> {
    let (k, log_t) = (dp.params.k, dp.params.log_t);
    assert!(mhash.len() * 8 >= k * log_t, "digest too short for {k} indices");
    let mut offset = 0usize;
    (0..k)
        .map(|_| {
            let mut idx = 0u32;
            for j in 0..log_t {
                idx ^= (((mhash[offset >> 3] >> (offset & 7)) & 1) as u32) << j;
                offset += 1;
            }
            idx
        })
        .collect()
}

/// FORS address for the key pair that signs at (`tree`, `leaf_idx`).
pub fn fors_address(tree: u64, leaf_idx: u32) -> Address {
    let mut a = Address::subtree(0, tree, AddrType::ForsTree);
    a.set_keypair(leaf_idx);
    a
}

/// Secret value of global FORS leaf `addr_idx`.
pub fn fors_secret_into(ctx: &HashCtx, out: &mut [u8], fors: &Address, addr_idx: u32) {
    let mut a = fors.keypair_with_type(AddrType::ForsPrf);
    a.set_tree_height(0).set_tree_index(addr_idx);
    ctx.prf_into(out, &a);
}

/// Leaf hash of a FORS secret value.
pub fn fors_leaf_from_secret(ctx: &HashCtx, out: &mut [u8], sk: &[u8], fors: &Address, addr_idx: u32) {
    let mut a = fors.keypair_with_type(AddrType::ForsTree);
    a.set_tree_height(0).set_tree_index(addr_idx);
    ctx.thash_into(out, &a, sk);
}

pub fn fors_gen_leaf(ctx: &HashCtx, fors: &Address, addr_idx: u32) -> Vec<u8> {
    let n = ctx.n();
    let mut sk = vec![0u8; n];
    fors_secret_into(ctx, &mut sk, fors, addr_idx);
    let mut leaf = vec![0u8; n];
    fors_leaf_from_secret(ctx, &mut leaf, &sk, fors, addr_idx);
    leaf
}

/// Compresses the `k` tree roots into the FORS public key.
pub fn roots_to_pk(ctx: &HashCtx, roots: &[u8], fors: &Address) -> Vec<u8> {
    ctx.thash(&fors.keypair_with_type(AddrType::ForsRoots), roots)
}

/// Root and authentication path of FORS tree `tree_i` for leaf `idx`.
pub fn fors_tree(ctx: &HashCtx, fors: &Address, tree_i: u32, idx: u32) -> (Vec<u8>, Vec<u8>) {
    let dp = ctx.params();
    let t = dp.fors_t as u32;
    let offset = tree_i * t;
    let adrs = fors.keypair_with_type(AddrType::ForsTree);
    merkle::treehash(ctx, dp.params.log_t as u32, idx, offset, &adrs, |i| {
        fors_gen_leaf(ctx, fors, offset + i)
    })
}

/// FORS signature (secret ‖ auth path per tree) and public key.
pub fn fors_sign(ctx: &HashCtx, mhash: &[u8], fors: &Address) -> (Vec<u8>, Vec<u8>) {
    let dp = ctx.params();
    let n = ctx.n();
    let t = dp.fors_t as u32;
    let indices = message_to_indices(dp, mhash);
    let mut sig = Vec::with_capacity(dp.fors_bytes);
    let mut roots = Vec::with_capacity(dp.params.k * n);
    for (i, &idx) in indices.iter().enumerate() {
        let mut sk = vec![0u8; n];
        fors_secret_into(ctx, &mut sk, fors, idx + i as u32 * t);
        sig.extend_from_slice(&sk);
        let (root, auth) = fors_tree(ctx, fors, i as u32, idx);
        sig.extend_from_slice(&auth);
        roots.extend_from_slice(&root);
    }
    let pk = roots_to_pk(ctx, &roots, fors);
    (sig, pk)
}

/// Recomputes the FORS public key from a signature.
pub fn fors_pk_from_sig(ctx: &HashCtx, sig: &[u8], mhash: &[u8], fors: &Address) -> Vec<u8> {
    let dp = ctx.params();
    let n = ctx.n();
    let log_t = dp.params.log_t as u32;
    let t = dp.fors_t as u32;
    let adrs = fors.keypair_with_type(AddrType::ForsTree);
    let mut roots = Vec::with_capacity(dp.params.k * n);
    let mut leaf = vec![0u8; n];
    for (i, (&idx, block)) in message_to_indices(dp, mhash)
        .iter()
        .zip(sig.chunks_exact((log_t as usize + 1) * n))
        .enumerate()
    {
        let offset = i as u32 * t;
        let (sk, auth) = block.split_at(n);
        fors_leaf_from_secret(ctx, &mut leaf, sk, fors, idx + offset);
        roots.extend(merkle::compute_root(ctx, &leaf, idx, offset, auth, log_t, &adrs));
    }
    roots_to_pk(ctx, &roots, fors)
}
