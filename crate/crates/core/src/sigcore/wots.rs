//! WOTS+ one-time signatures.

use crate::error::{Error, Result};
use crate::params::DerivedParams;
use crate::thash::{AddrType, Address, HashCtx, MAX_N};

/// Splits `input` into `out_len` base-`w` digits, most significant first.
fn base_w(dp: &DerivedParams, input: &[u8], out_len: usize) -> Vec<u32> {
    let log_w = dp.log_w;
    let mask = (dp.params.w - 1) as u32;
    let mut out = Vec::with_capacity(out_len);
    let (mut pos, mut bits, mut total) = (0usize, 0usize, 0u32);
    for _ in 0..out_len {
        if bits == 0 {
            total = input[pos] as u32;
            pos += 1;
            bits = 8;
        }
        bits -= log_w;
        out.push((total >> bits) & mask);
    }
    out
}

/// Chain lengths for signing `msg`: its base-`w` digits followed by the
/// checksum digits.
pub fn chain_lengths(dp: &DerivedParams, msg: &[u8]) -> Vec<u32> {
    let mut lengths = base_w(dp, msg, dp.len1);
    let w1 = (dp.params.w - 1) as u32;
    let mut csum: u32 = lengths.iter().map(|d| w1 - d).sum();
    let csum_bits = dp.len2 * dp.log_w;
    csum <<= (8 - csum_bits % 8) % 8;
    let csum_bytes = csum.to_be_bytes();
    let tail = &csum_bytes[4 - csum_bits.div_ceil(8)..];
    lengths.extend(base_w(dp, tail, dp.len2));
    lengths
}

/// Applies `steps` chain hashes to `x`, starting at position `start`.
pub fn wots_chain(ctx: &HashCtx, x: &[u8], start: u32, steps: u32, adrs: &Address) -> Result<Vec<u8>> {
    let w = ctx.params().params.w as u32;
    if start.checked_add(steps).is_none_or(|end| end > w - 1) {
        return Err(Error::Usage(format!("chain range {start}+{steps} exceeds w-1 = {}", w - 1)));
    }
    let n = ctx.n();
    let mut buf = [0u8; MAX_N];
    buf[..n].copy_from_slice(x);
    chain_in_place(ctx, &mut buf[..n], start, steps, adrs);
    Ok(buf[..n].to_vec())
}

pub(crate) fn chain_in_place(ctx: &HashCtx, x: &mut [u8], start: u32, steps: u32, adrs: &Address) {
    let n = ctx.n();
    let mut a = *adrs;
    let mut tmp = [0u8; MAX_N];
    for i in start..start + steps {
        a.set_hash(i);
        ctx.thash_into(&mut tmp, &a, x);
        x.copy_from_slice(&tmp[..n]);
    }
}

/// Secret start of chain `chain` for the key pair addressed by `kp`.
pub fn chain_secret_into(ctx: &HashCtx, out: &mut [u8], kp: &Address, chain: u32) {
    let mut a = kp.keypair_with_type(AddrType::WotsPrf);
    a.set_chain(chain).set_hash(0);
    ctx.prf_into(out, &a);
}

/// Signature chain value `chain` of `msg` under key pair `kp`.
pub fn wots_sign_chain(ctx: &HashCtx, out: &mut [u8], kp: &Address, chain: u32, steps: u32) {
    chain_secret_into(ctx, out, kp, chain);
    let mut a = kp.keypair_with_type(AddrType::WotsHash);
    a.set_chain(chain);
    chain_in_place(ctx, out, 0, steps, &a);
}

/// `wots_len · n` signature bytes for the `n`-byte `msg`.
pub fn wots_sign(ctx: &HashCtx, msg: &[u8], kp: &Address) -> Vec<u8> {
    let n = ctx.n();
    let lengths = chain_lengths(ctx.params(), msg);
    let mut sig = vec![0u8; lengths.len() * n];
    for (i, (out, &len)) in sig.chunks_exact_mut(n).zip(&lengths).enumerate() {
        wots_sign_chain(ctx, out, kp, i as u32, len);
    }
    sig
}

/// Public chain end `chain` for key pair `kp`.
pub fn wots_pk_chain(ctx: &HashCtx, out: &mut [u8], kp: &Address, chain: u32) {
    wots_sign_chain(ctx, out, kp, chain, ctx.params().params.w as u32 - 1);
}

fn compress_pk(ctx: &HashCtx, pk: &[u8], kp: &Address) -> Vec<u8> {
    ctx.thash(&kp.keypair_with_type(AddrType::WotsPk), pk)
}

/// Hypertree leaf: the compressed WOTS+ public key of key pair `kp`.
pub fn wots_gen_leaf(ctx: &HashCtx, kp: &Address) -> Vec<u8> {
    let n = ctx.n();
    let len = ctx.params().wots_len;
    let mut pk = vec![0u8; len * n];
    for (i, out) in pk.chunks_exact_mut(n).enumerate() {
        wots_pk_chain(ctx, out, kp, i as u32);
    }
    compress_pk(ctx, &pk, kp)
}

/// Completes every chain of `sig` and compresses the result into a leaf.
pub fn wots_pk_from_sig(ctx: &HashCtx, sig: &[u8], msg: &[u8], kp: &Address) -> Vec<u8> {
    let n = ctx.n();
    let w1 = ctx.params().params.w as u32 - 1;
    let lengths = chain_lengths(ctx.params(), msg);
    let mut pk = sig.to_vec();
    let mut a = kp.keypair_with_type(AddrType::WotsHash);
    for (i, (chunk, &len)) in pk.chunks_exact_mut(n).zip(&lengths).enumerate() {
        a.set_chain(i as u32);
        chain_in_place(ctx, chunk, len, w1 - len, &a);
    }
    compress_pk(ctx, &pk, kp)
}
