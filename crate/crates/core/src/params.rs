//! The three SPHINCS+ `-f` parameter sets and every constant derived from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a supported parameter set. Only the fast (`f`) variants are
/// accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamSetId {
    #[serde(rename = "128f")]
    S128f,
    #[serde(rename = "192f")]
    S192f,
    #[serde(rename = "256f")]
    S256f,
}

impl ParamSetId {
    pub const ALL: [ParamSetId; 3] = [ParamSetId::S128f, ParamSetId::S192f, ParamSetId::S256f];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamSetId::S128f => "128f",
            ParamSetId::S192f => "192f",
            ParamSetId::S256f => "256f",
        }
    }

    pub fn params(self) -> ParameterSet {
        ParameterSet::new(self)
    }

    pub fn derived(self) -> DerivedParams {
        ParameterSet::new(self).derive()
    }
}

impl fmt::Display for ParamSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamSetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().trim_start_matches("sphincs+-") {
            "128f" => Ok(ParamSetId::S128f),
            "192f" => Ok(ParamSetId::S192f),
            "256f" => Ok(ParamSetId::S256f),
            other => Err(Error::Config(format!(
                "unknown parameter set `{other}` (expected 128f, 192f or 256f)"
            ))),
        }
    }
}

/// The defining tuple of a parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParameterSet {
    pub id: ParamSetId,
    /// Hash output length in bytes.
    pub n: usize,
    /// Total hypertree height.
    pub h: usize,
    /// Number of hypertree layers.
    pub d: usize,
    /// FORS tree height.
    pub log_t: usize,
    /// Number of FORS trees.
    pub k: usize,
    /// Winternitz parameter.
    pub w: usize,
}

impl ParameterSet {
    pub const fn new(id: ParamSetId) -> Self {
        match id {
            ParamSetId::S128f => ParameterSet { id, n: 16, h: 66, d: 22, log_t: 6, k: 33, w: 16 },
            ParamSetId::S192f => ParameterSet { id, n: 24, h: 66, d: 22, log_t: 8, k: 33, w: 16 },
            ParamSetId::S256f => ParameterSet { id, n: 32, h: 68, d: 17, log_t: 9, k: 35, w: 16 },
        }
    }

    /// Computes the derived constants, rejecting tuples that do not match the
    /// table entry for their id.
    pub fn try_derive(&self) -> Result<DerivedParams> {
        if *self != ParameterSet::new(self.id) {
            return Err(Error::Config(format!(
                "parameter tuple {self:?} does not match the {} table entry",
                self.id
            )));
        }
        Ok(self.derive_unchecked())
    }

    pub fn derive(&self) -> DerivedParams {
        self.try_derive().expect("parameter set built from a table entry")
    }

    fn derive_unchecked(&self) -> DerivedParams {
        let p = *self;
        assert!(p.h.is_multiple_of(p.d), "subtree height must be integral");
        let log_w = p.w.trailing_zeros() as usize;
        let len1 = (8 * p.n).div_ceil(log_w);
        // floor(log2(len1 * (w - 1)) / log2(w)) + 1, in integer arithmetic.
        let max_checksum = len1 * (p.w - 1);
        let len2 = (usize::BITS - 1 - max_checksum.leading_zeros()) as usize / log_w + 1;
        let wots_len = len1 + len2;
        let subtree_height = p.h / p.d;
        let fors_t = 1usize << p.log_t;
        let fors_bytes = p.k * p.n * (p.log_t + 1);
        let ht_layer_bytes = wots_len * p.n + subtree_height * p.n;
        DerivedParams {
            params: p,
            log_w,
            len1,
            len2,
            wots_len,
            wots_bytes: wots_len * p.n,
            subtree_height,
            subtree_leaves: 1 << subtree_height,
            fors_t,
            fors_total_leaves: p.k * fors_t,
            fors_scratch_bytes: p.k * fors_t * p.n,
            fors_msg_bytes: (p.k * p.log_t).div_ceil(8),
            fors_bytes,
            ht_layer_bytes,
            sig_bytes: p.n + fors_bytes + p.d * ht_layer_bytes,
            pk_bytes: 2 * p.n,
            sk_bytes: 4 * p.n,
            chain_hashes_per_leaf: wots_len * p.w,
        }
    }
}

/// Constants derived from a [`ParameterSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivedParams {
    pub params: ParameterSet,
    pub log_w: usize,
    pub len1: usize,
    pub len2: usize,
    pub wots_len: usize,
    /// `wots_len * n`: one WOTS+ signature block.
    pub wots_bytes: usize,
    pub subtree_height: usize,
    pub subtree_leaves: usize,
    /// Leaves per FORS tree.
    pub fors_t: usize,
    pub fors_total_leaves: usize,
    /// Scratch needed to hold every FORS leaf at once (`k * t * n`).
    pub fors_scratch_bytes: usize,
    /// Digest bytes consumed by the FORS index extraction.
    pub fors_msg_bytes: usize,
    /// `k * (log_t + 1) * n`.
    pub fors_bytes: usize,
    /// One hypertree layer: WOTS+ signature plus auth path.
    pub ht_layer_bytes: usize,
    pub sig_bytes: usize,
    pub pk_bytes: usize,
    pub sk_bytes: usize,
    /// Hash evaluations to generate one WOTS+ leaf: a PRF call plus `w - 1`
    /// chain steps for each of the `wots_len` chains.
    pub chain_hashes_per_leaf: usize,
}

impl DerivedParams {
    pub fn id(&self) -> ParamSetId {
        self.params.id
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// Bits of the hypertree index selecting the bottom-layer tree.
    pub fn tree_bits(&self) -> usize {
        self.params.h - self.subtree_height
    }
}

/// Looks up a parameter set and derives its constants.
pub fn derive(p: ParameterSet) -> Result<DerivedParams> {
    p.try_derive()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        let p = ParamSetId::S128f.params();
        assert_eq!((p.n, p.h, p.d, p.log_t, p.k, p.w), (16, 66, 22, 6, 33, 16));
        let p = ParamSetId::S192f.params();
        assert_eq!((p.n, p.h, p.d, p.log_t, p.k, p.w), (24, 66, 22, 8, 33, 16));
        let p = ParamSetId::S256f.params();
        assert_eq!((p.n, p.h, p.d, p.log_t, p.k, p.w), (32, 68, 17, 9, 35, 16));
    }

    #[test]
    fn fors_leaves_and_scratch() {
        let leaves: Vec<_> = ParamSetId::ALL.iter().map(|id| id.derived().fors_total_leaves).collect();
        assert_eq!(leaves, [2112, 8448, 17920]);
        let kb: Vec<_> = ParamSetId::ALL.iter().map(|id| id.derived().fors_scratch_bytes).collect();
        assert_eq!(kb, [33 * 1024, 198 * 1024, 560 * 1024]);
    }

    #[test]
    fn wots_lengths() {
        for (id, len1, wots_len) in [
            (ParamSetId::S128f, 32, 35),
            (ParamSetId::S192f, 48, 51),
            (ParamSetId::S256f, 64, 67),
        ] {
            let dp = id.derived();
            assert_eq!(dp.len1, len1);
            assert_eq!(dp.len2, 3);
            assert_eq!(dp.wots_len, wots_len);
            assert_eq!(dp.wots_bytes, wots_len * dp.n());
        }
    }

    #[test]
    fn signature_sizes() {
        assert_eq!(ParamSetId::S128f.derived().sig_bytes, 17088);
        assert_eq!(ParamSetId::S192f.derived().sig_bytes, 35664);
        assert_eq!(ParamSetId::S256f.derived().sig_bytes, 49856);
    }

    #[test]
    fn chain_hash_counts() {
        let counts: Vec<_> =
            ParamSetId::ALL.iter().map(|id| id.derived().chain_hashes_per_leaf).collect();
        assert_eq!(counts, [560, 816, 1072]);
    }

    #[test]
    fn hypertree_leaf_totals() {
        let totals: Vec<_> = ParamSetId::ALL
            .iter()
            .map(|id| {
                let dp = id.derived();
                dp.params.d * dp.subtree_leaves
            })
            .collect();
        assert_eq!(totals, [176, 176, 272]);
    }

    #[test]
    fn parse_ids() {
        assert_eq!("128f".parse::<ParamSetId>().unwrap(), ParamSetId::S128f);
        assert_eq!("256F".parse::<ParamSetId>().unwrap(), ParamSetId::S256f);
        assert!(matches!("128s".parse::<ParamSetId>(), Err(Error::Config(_))));
        assert!(matches!("".parse::<ParamSetId>(), Err(Error::Config(_))));
    }

    #[test]
    fn tampered_tuple_rejected() {
        let mut p = ParamSetId::S128f.params();
        p.k = 14;
        assert!(matches!(derive(p), Err(Error::Config(_))));
    }

    #[test]
    fn derive_is_pure() {
        for id in ParamSetId::ALL {
            assert_eq!(id.derived(), id.derived());
        }
    }
}
