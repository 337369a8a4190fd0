//! SPHINCS+ signing and verification.
//!
//! The functions here form the naive sequential signer used as ground
//! truth; [`parallel`] produces the same bytes through the virtual-block
//! executor.

pub mod fors;
pub mod merkle;
pub mod parallel;
pub mod wots;

use std::fmt;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::params::{DerivedParams, ParamSetId};
use crate::thash::{HashBackend, HashCtx};

pub use self::parallel::{Signer, SignerConfig};

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub id: ParamSetId,
    pub sk_seed: Vec<u8>,
    pub sk_prf: Vec<u8>,
    pub pk_seed: Vec<u8>,
    pub pk_root: Vec<u8>,
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecretKey").field("id", &self.id).finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    pub id: ParamSetId,
    pub pk_seed: Vec<u8>,
    pub pk_root: Vec<u8>,
}

fn split_fields<const N: usize>(
    what: &'static str,
    id: ParamSetId,
    bytes: &[u8],
) -> Result<[Vec<u8>; N]> {
    let n = id.params().n;
    if bytes.len() != N * n {
        return Err(Error::Format { what, expected: N * n, actual: bytes.len() });
    }
    Ok(std::array::from_fn(|i| bytes[i * n..(i + 1) * n].to_vec()))
}

impl SecretKey {
    pub fn public(&self) -> PublicKey {
        PublicKey { id: self.id, pk_seed: self.pk_seed.clone(), pk_root: self.pk_root.clone() }
    }

    /// `sk_seed ‖ sk_prf ‖ pk_seed ‖ pk_root`.
    pub fn to_bytes(&self) -> Vec<u8> {
        [&self.sk_seed[..], &self.sk_prf, &self.pk_seed, &self.pk_root].concat()
    }

    pub fn from_bytes(id: ParamSetId, bytes: &[u8]) -> Result<Self> {
        let [sk_seed, sk_prf, pk_seed, pk_root] = split_fields("secret key", id, bytes)?;
        Ok(SecretKey { id, sk_seed, sk_prf, pk_seed, pk_root })
    }

    pub(crate) fn hash_ctx(&self, backend: HashBackend) -> HashCtx {
        HashCtx::new(self.id.derived(), &self.pk_seed, Some(&self.sk_seed), backend)
    }
}

impl PublicKey {
    /// `pk_seed ‖ pk_root`.
    pub fn to_bytes(&self) -> Vec<u8> {
        [&self.pk_seed[..], &self.pk_root].concat()
    }

    pub fn from_bytes(id: ParamSetId, bytes: &[u8]) -> Result<Self> {
        let [pk_seed, pk_root] = split_fields("public key", id, bytes)?;
        Ok(PublicKey { id, pk_seed, pk_root })
    }
}

/// A serialized signature: `R ‖ FORS signature ‖ d hypertree layers`.
#[derive(Clone, PartialEq, Eq)]
pub struct Signature {
    pub id: ParamSetId,
    bytes: Vec<u8>,
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}, {} bytes)", self.id, self.bytes.len())
    }
}

impl Signature {
    pub fn from_bytes(id: ParamSetId, bytes: Vec<u8>) -> Result<Self> {
        let expected = id.derived().sig_bytes;
        if bytes.len() != expected {
            return Err(Error::Format { what: "signature", expected, actual: bytes.len() });
        }
        Ok(Signature { id, bytes })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn randomizer(&self) -> &[u8] {
        &self.bytes[..self.id.params().n]
    }

    pub fn fors_part(&self) -> &[u8] {
        let dp = self.id.derived();
        &self.bytes[dp.n()..dp.n() + dp.fors_bytes]
    }

    /// WOTS+ signature and authentication path of hypertree layer `layer`.
    pub fn ht_layer(&self, layer: usize) -> (&[u8], &[u8]) {
        let dp = self.id.derived();
        let start = dp.n() + dp.fors_bytes + layer * dp.ht_layer_bytes;
        let block = &self.bytes[start..start + dp.ht_layer_bytes];
        block.split_at(dp.wots_bytes)
    }
}

/// Position of the signing leaf as it moves up the hypertree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigningState {
    pub mhash: Vec<u8>,
    pub tree: u64,
    pub leaf_idx: u32,
    pub indices: Vec<u32>,
}

impl SigningState {
    pub fn new(dp: &DerivedParams, randomizer: &[u8], pk: &PublicKey, msg: &[u8], backend: HashBackend) -> Self {
        let digest = crate::thash::h_msg(dp, backend, randomizer, &pk.pk_seed, &pk.pk_root, msg);
        let indices = fors::message_to_indices(dp, &digest.mhash);
        debug_assert!(indices.iter().all(|&i| (i as usize) < dp.fors_t));
        SigningState { mhash: digest.mhash, tree: digest.tree, leaf_idx: digest.leaf_idx, indices }
    }

    /// Moves to the next hypertree layer.
    pub fn advance(&mut self, dp: &DerivedParams) {
        let hp = dp.subtree_height as u32;
        let mask = (1u64 << hp) - 1;
        assert!((self.leaf_idx as u64) <= mask, "leaf index {} exceeds subtree", self.leaf_idx);
        let tree = self.tree;
        self.leaf_idx = (tree & mask) as u32;
        self.tree = tree >> hp;
        assert_eq!(self.leaf_idx as u64, tree & mask);
    }

    /// `(tree, leaf_idx)` for every layer, bottom first.
    pub fn layer_positions(&self, dp: &DerivedParams) -> Vec<(u64, u32)> {
        let mut s = self.clone();
        (0..dp.params.d)
            .map(|_| {
                let pos = (s.tree, s.leaf_idx);
                s.advance(dp);
                pos
            })
            .collect()
    }
}

/// Randomizer and signing position for one message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prepared {
    pub randomizer: Vec<u8>,
    pub state: SigningState,
}

/// Derives `R` and the signing state. `opt_rand` defaults to `pk_seed`.
pub fn prepare(sk: &SecretKey, msg: &[u8], opt_rand: Option<&[u8]>, backend: HashBackend) -> Result<Prepared> {
    let dp = sk.id.derived();
    let n = dp.n();
    let opt_rand = opt_rand.unwrap_or(&sk.pk_seed);
    if opt_rand.len() != n {
        return Err(Error::Format { what: "opt_rand", expected: n, actual: opt_rand.len() });
    }
    let ctx = HashCtx::new(dp, &sk.pk_seed, None, backend);
    let randomizer = ctx.prf_msg(&sk.sk_prf, opt_rand, msg);
    let state = SigningState::new(&dp, &randomizer, &sk.public(), msg, backend);
    Ok(Prepared { randomizer, state })
}

/// Derives a key pair from `3n` seed bytes (`sk_seed ‖ sk_prf ‖ pk_seed`).
pub fn keygen(id: ParamSetId, seed: &[u8]) -> Result<(PublicKey, SecretKey)> {
    let [sk_seed, sk_prf, pk_seed] = split_fields("key seed", id, seed)?;
    let dp = id.derived();
    let ctx = HashCtx::new(dp, &pk_seed, Some(&sk_seed), HashBackend::Baseline);
    let (pk_root, _) = merkle::subtree_root(&ctx, dp.params.d as u32 - 1, 0, 0);
    let sk = SecretKey { id, sk_seed, sk_prf, pk_seed, pk_root };
    Ok((sk.public(), sk))
}

pub fn keygen_random(id: ParamSetId, rng: &mut impl RngCore) -> (PublicKey, SecretKey) {
    let mut seed = vec![0u8; 3 * id.params().n];
    rng.fill_bytes(&mut seed);
    keygen(id, &seed).expect("seed length matches")
}

/// Naive sequential signer.
pub fn sign_oracle(sk: &SecretKey, msg: &[u8], opt_rand: Option<&[u8]>) -> Result<Signature> {
    let dp = sk.id.derived();
    let ctx = sk.hash_ctx(HashBackend::Baseline);
    let Prepared { randomizer, mut state } = prepare(sk, msg, opt_rand, HashBackend::Baseline)?;
    let mut out = Vec::with_capacity(dp.sig_bytes);
    out.extend_from_slice(&randomizer);
    let (fors_sig, mut root) = fors::fors_sign(&ctx, &state.mhash, &fors::fors_address(state.tree, state.leaf_idx));
    out.extend_from_slice(&fors_sig);
    for layer in 0..dp.params.d as u32 {
        let (wots_sig, auth, next) = merkle::merkle_sign(&ctx, layer, state.tree, state.leaf_idx, &root);
        out.extend_from_slice(&wots_sig);
        out.extend_from_slice(&auth);
        root = next;
        state.advance(&dp);
    }
    debug_assert_eq!(root, sk.pk_root);
    Signature::from_bytes(sk.id, out)
}

/// Checks `sig` on `msg`. Wrong sizes are a format error; any other
/// mismatch yields `Ok(false)`.
pub fn verify(pk: &PublicKey, msg: &[u8], sig: &[u8]) -> Result<bool> {
    let dp = pk.id.derived();
    let sig = Signature::from_bytes(pk.id, sig.to_vec())?;
    if pk.pk_seed.len() != dp.n() || pk.pk_root.len() != dp.n() {
        return Err(Error::Format { what: "public key", expected: dp.pk_bytes, actual: pk.pk_seed.len() + pk.pk_root.len() });
    }
    let ctx = HashCtx::new(dp, &pk.pk_seed, None, HashBackend::Baseline);
    let mut state = SigningState::new(&dp, sig.randomizer(), pk, msg, HashBackend::Baseline);
    let mut root = fors::fors_pk_from_sig(&ctx, sig.fors_part(), &state.mhash, &fors::fors_address(state.tree, state.leaf_idx));
    let hp = dp.subtree_height as u32;
    for layer in 0..dp.params.d {
        let (wots_sig, auth) = sig.ht_layer(layer);
        let kp = merkle::keypair_address(layer as u32, state.tree, state.leaf_idx);
        let leaf = wots::wots_pk_from_sig(&ctx, wots_sig, &root, &kp);
        let adrs = crate::thash::Address::subtree(layer as u32, state.tree, crate::thash::AddrType::HashTree);
        root = merkle::compute_root(&ctx, &leaf, state.leaf_idx, 0, auth, hp, &adrs);
        state.advance(&dp);
    }
    Ok(root == pk.pk_root)
}
