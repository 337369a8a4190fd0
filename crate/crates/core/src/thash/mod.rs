//! Tweakable hash functions over SHA-256 (the "simple" instantiation).
//!
//! `F`, `H` and `T_len` are all [`HashCtx::thash`]: the first `n` bytes of
//! `SHA-256(pk_seed ‖ 0^(64-n) ‖ ADRS ‖ M)`. The public-seed block is
//! absorbed once and the midstate reused for every call.

pub mod address;
pub mod sha256;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use self::address::{AddrType, Address, ADDR_BYTES};
pub use self::sha256::{compress, HashBackend};
use self::sha256::{CompressFn, Sha256, BLOCK_BYTES};
use crate::error::{Error, Result};
use crate::params::{DerivedParams, ParamSetId};

/// Largest `n` among the supported sets.
pub const MAX_N: usize = 32;

/// Per-signature hashing context: the public seed midstate, the optional
/// secret seed, and one resolved compression function.
#[derive(Clone)]
pub struct HashCtx {
    dp: DerivedParams,
    pk_seed: Vec<u8>,
    sk_seed: Option<Vec<u8>>,
    seeded: [u32; 8],
    backend: HashBackend,
    compress: CompressFn,
}

impl fmt::Debug for HashCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HashCtx")
            .field("params", &self.dp.id())
            .field("backend", &self.backend)
            .field("has_sk_seed", &self.sk_seed.is_some())
            .finish()
    }
}

impl HashCtx {
    pub fn new(dp: DerivedParams, pk_seed: &[u8], sk_seed: Option<&[u8]>, backend: HashBackend) -> Self {
        let n = dp.n();
        assert_eq!(pk_seed.len(), n, "pk_seed must be n bytes");
        if let Some(sk) = sk_seed {
            assert_eq!(sk.len(), n, "sk_seed must be n bytes");
        }
        let compress = backend.compress_fn();
        let mut block = [0u8; BLOCK_BYTES];
        block[..n].copy_from_slice(pk_seed);
        let mut h = Sha256::with_fn(compress);
        h.update(&block);
        HashCtx {
            dp,
            pk_seed: pk_seed.to_vec(),
            sk_seed: sk_seed.map(<[u8]>::to_vec),
            seeded: h.midstate(),
            backend,
            compress,
        }
    }

    /// Same seeds, different compression backend.
    pub fn with_backend(&self, backend: HashBackend) -> Self {
        HashCtx::new(self.dp, &self.pk_seed, self.sk_seed.as_deref(), backend)
    }

    pub fn params(&self) -> &DerivedParams {
        &self.dp
    }

    pub fn n(&self) -> usize {
        self.dp.n()
    }

    pub fn backend(&self) -> HashBackend {
        self.backend
    }

    pub fn pk_seed(&self) -> &[u8] {
        &self.pk_seed
    }

    fn seeded_hasher(&self) -> Sha256 {
        Sha256::from_midstate(self.seeded, BLOCK_BYTES as u64, self.compress)
    }

    /// Writes `thash(adrs, input)` into `out[..n]`. `input` must be a whole
    /// number of `n`-byte blocks.
    pub fn thash_into(&self, out: &mut [u8], adrs: &Address, input: &[u8]) {
        debug_assert_eq!(input.len() % self.n(), 0);
        let mut h = self.seeded_hasher();
        h.update(&adrs.to_bytes()).update(input);
        let n = self.n();
        out[..n].copy_from_slice(&h.finalize()[..n]);
    }

    pub fn thash(&self, adrs: &Address, input: &[u8]) -> Vec<u8> {
        let mut out = vec![0u8; self.n()];
        self.thash_into(&mut out, adrs, input);
        out
    }

    /// Hash of two concatenated `n`-byte nodes.
    pub fn thash_pair_into(&self, out: &mut [u8], adrs: &Address, left: &[u8], right: &[u8]) {
        let mut h = self.seeded_hasher();
        h.update(&adrs.to_bytes()).update(left).update(right);
        let n = self.n();
        out[..n].copy_from_slice(&h.finalize()[..n]);
    }

    /// Secret-value derivation `PRF(pk_seed, sk_seed, adrs)`.
    ///
    /// Panics if the context was built without a secret seed.
    pub fn prf_into(&self, out: &mut [u8], adrs: &Address) {
        let sk_seed = self.sk_seed.as_deref().expect("PRF requires a signing context");
        let mut h = self.seeded_hasher();
        h.update(&adrs.to_bytes()).update(sk_seed);
        let n = self.n();
        out[..n].copy_from_slice(&h.finalize()[..n]);
    }

    pub fn prf(&self, adrs: &Address) -> Vec<u8> {
        let mut out = vec![0u8; self.n()];
        self.prf_into(&mut out, adrs);
        out
    }

    /// Message randomizer `R = HMAC-SHA-256(sk_prf, opt_rand ‖ msg)[..n]`.
    pub fn prf_msg(&self, sk_prf: &[u8], opt_rand: &[u8], msg: &[u8]) -> Vec<u8> {
        sha256::hmac_sha256(self.backend, sk_prf, &[opt_rand, msg])[..self.n()].to_vec()
    }

    /// Message digest and hypertree position for `msg`.
    pub fn h_msg(&self, randomizer: &[u8], pk_root: &[u8], msg: &[u8]) -> MsgDigest {
        h_msg(&self.dp, self.backend, randomizer, &self.pk_seed, pk_root, msg)
    }
}

/// Output of [`h_msg`]: the FORS digest plus the signing leaf position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MsgDigest {
    pub mhash: Vec<u8>,
    pub tree: u64,
    pub leaf_idx: u32,
}

pub fn h_msg(
    dp: &DerivedParams,
    backend: HashBackend,
    randomizer: &[u8],
    pk_seed: &[u8],
    pk_root: &[u8],
    msg: &[u8],
) -> MsgDigest {
    let tree_bits = dp.tree_bits();
    let tree_bytes = tree_bits.div_ceil(8);
    let leaf_bits = dp.subtree_height;
    let leaf_bytes = leaf_bits.div_ceil(8);

    let mut h = Sha256::new(backend);
    h.update(randomizer).update(pk_seed).update(pk_root).update(msg);
    let inner = h.finalize();

    let mut seed = Vec::with_capacity(2 * dp.n() + inner.len());
    seed.extend_from_slice(randomizer);
    seed.extend_from_slice(pk_seed);
    seed.extend_from_slice(&inner);
    let mut buf = vec![0u8; dp.fors_msg_bytes + tree_bytes + leaf_bytes];
    sha256::mgf1_sha256(backend, &seed, &mut buf);

    let (mhash, rest) = buf.split_at(dp.fors_msg_bytes);
    let (tree_part, leaf_part) = rest.split_at(tree_bytes);
    let tree = bytes_to_u64(tree_part) & (u64::MAX >> (64 - tree_bits));
    let leaf_idx = (bytes_to_u64(leaf_part) as u32) & (u32::MAX >> (32 - leaf_bits));
    MsgDigest { mhash: mhash.to_vec(), tree, leaf_idx }
}

fn bytes_to_u64(b: &[u8]) -> u64 {
    b.iter().fold(0u64, |acc, &x| (acc << 8) | x as u64)
}

/// Stand-alone tweakable hash; see [`HashCtx::thash`].
pub fn thash(
    adrs: &Address,
    pk_seed: &[u8],
    msg: &[u8],
    dp: &DerivedParams,
    backend: HashBackend,
) -> Result<Vec<u8>> {
    let n = dp.n();
    if pk_seed.len() != n {
        return Err(Error::Usage(format!("pk_seed must be {n} bytes, got {}", pk_seed.len())));
    }
    if msg.is_empty() || !msg.len().is_multiple_of(n) {
        return Err(Error::Usage(format!(
            "thash input must be a non-empty multiple of {n} bytes, got {}",
            msg.len()
        )));
    }
    Ok(HashCtx::new(*dp, pk_seed, None, backend).thash(adrs, msg))
}

/// The three signing kernels that each get their own backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kernel {
    #[serde(rename = "fors")]
    ForsSign,
    #[serde(rename = "tree")]
    TreeSign,
    #[serde(rename = "wots")]
    WotsSign,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::ForsSign, Kernel::TreeSign, Kernel::WotsSign];

    pub fn as_str(self) -> &'static str {
        match self {
            Kernel::ForsSign => "FORS_Sign",
            Kernel::TreeSign => "TREE_Sign",
            Kernel::WotsSign => "WOTS_Sign",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One parameter set's row of the selection table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelBackends {
    pub fors: HashBackend,
    pub tree: HashBackend,
    pub wots: HashBackend,
}

impl KernelBackends {
    pub fn uniform(b: HashBackend) -> Self {
        KernelBackends { fors: b, tree: b, wots: b }
    }

    pub fn get(&self, kernel: Kernel) -> HashBackend {
        match kernel {
            Kernel::ForsSign => self.fors,
            Kernel::TreeSign => self.tree,
            Kernel::WotsSign => self.wots,
        }
    }

    pub fn set(&mut self, kernel: Kernel, b: HashBackend) {
        match kernel {
            Kernel::ForsSign => self.fors = b,
            Kernel::TreeSign => self.tree = b,
            Kernel::WotsSign => self.wots = b,
        }
    }

    /// Profiled defaults: the unrolled backend wins FORS everywhere and all
    /// three kernels for 256f.
    pub fn default_for(id: ParamSetId) -> Self {
        use HashBackend::*;
        match id {
            ParamSetId::S256f => KernelBackends::uniform(Tuned),
            _ => KernelBackends { fors: Tuned, tree: Baseline, wots: Baseline },
        }
    }
}

/// Backend per (kernel, parameter set); always total over all nine cells.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendSelection(BTreeMap<ParamSetId, KernelBackends>);

impl BackendSelection {
    pub fn from_rows(rows: impl IntoIterator<Item = (ParamSetId, KernelBackends)>) -> Result<Self> {
        let map: BTreeMap<_, _> = rows.into_iter().collect();
        let missing: Vec<String> = ParamSetId::ALL
            .iter()
            .filter(|id| !map.contains_key(id))
            .flat_map(|id| Kernel::ALL.iter().map(move |k| format!("{k}/{id}")))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Selection(missing));
        }
        Ok(BackendSelection(map))
    }

    pub fn uniform(b: HashBackend) -> Self {
        BackendSelection(ParamSetId::ALL.iter().map(|&id| (id, KernelBackends::uniform(b))).collect())
    }

    pub fn row(&self, id: ParamSetId) -> KernelBackends {
        self.0[&id]
    }

    pub fn get(&self, kernel: Kernel, id: ParamSetId) -> HashBackend {
        self.0[&id].get(kernel)
    }

    pub fn rows(&self) -> impl Iterator<Item = (ParamSetId, KernelBackends)> + '_ {
        self.0.iter().map(|(&id, &row)| (id, row))
    }
}

impl Default for BackendSelection {
    fn default() -> Self {
        BackendSelection(ParamSetId::ALL.iter().map(|&id| (id, KernelBackends::default_for(id))).collect())
    }
}

impl FromStr for HashBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(HashBackend::Baseline),
            "tuned" => Ok(HashBackend::Tuned),
            other => Err(Error::Config(format!("unknown hash backend `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp128() -> DerivedParams {
        ParamSetId::S128f.derived()
    }

    #[test]
    fn length_violations() {
        let dp = dp128();
        let adrs = Address::default();
        assert!(matches!(thash(&adrs, &[0; 16], &[0; 15], &dp, HashBackend::Baseline), Err(Error::Usage(_))));
        assert!(matches!(thash(&adrs, &[0; 16], &[], &dp, HashBackend::Baseline), Err(Error::Usage(_))));
        assert!(matches!(thash(&adrs, &[0; 15], &[0; 16], &dp, HashBackend::Baseline), Err(Error::Usage(_))));
    }

    #[test]
    fn output_is_n_bytes() {
        for id in ParamSetId::ALL {
            let dp = id.derived();
            let n = dp.n();
            for blocks in [1, 2, dp.wots_len] {
                let out = thash(&Address::default(), &vec![1; n], &vec![2; n * blocks], &dp, HashBackend::Tuned).unwrap();
                assert_eq!(out.len(), n);
            }
        }
    }

    #[test]
    fn default_selection_table() {
        let sel = BackendSelection::default();
        for id in ParamSetId::ALL {
            assert_eq!(sel.get(Kernel::ForsSign, id), HashBackend::Tuned);
        }
        assert_eq!(sel.get(Kernel::TreeSign, ParamSetId::S128f), HashBackend::Baseline);
        assert_eq!(sel.get(Kernel::WotsSign, ParamSetId::S192f), HashBackend::Baseline);
        assert_eq!(sel.get(Kernel::TreeSign, ParamSetId::S256f), HashBackend::Tuned);
        assert_eq!(sel.get(Kernel::WotsSign, ParamSetId::S256f), HashBackend::Tuned);
    }

    #[test]
    fn partial_selection_rejected() {
        let err = BackendSelection::from_rows([(ParamSetId::S128f, KernelBackends::uniform(HashBackend::Tuned))])
            .unwrap_err();
        match err {
            Error::Selection(cells) => assert_eq!(cells.len(), 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn h_msg_ranges_and_determinism() {
        for id in ParamSetId::ALL {
            let dp = id.derived();
            let n = dp.n();
            for i in 0..50u8 {
                let r = vec![i; n];
                let d1 = h_msg(&dp, HashBackend::Baseline, &r, &vec![1; n], &vec![2; n], &[i, 3]);
                let d2 = h_msg(&dp, HashBackend::Tuned, &r, &vec![1; n], &vec![2; n], &[i, 3]);
                assert_eq!(d1, d2);
                assert_eq!(d1.mhash.len(), dp.fors_msg_bytes);
                assert!((d1.leaf_idx as usize) < dp.subtree_leaves);
                let bits = dp.tree_bits();
                assert!(bits == 64 || d1.tree < 1u64 << bits);
            }
        }
    }
}
