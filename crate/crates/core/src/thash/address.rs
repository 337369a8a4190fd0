//! Hash addresses: the tweak that domain-separates every hash call.

use serde::{Deserialize, Serialize};

/// Serialized length of an address inside SHA-256 hash inputs.
pub const ADDR_BYTES: usize = 22;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum AddrType {
    #[default]
    WotsHash = 0,
    WotsPk = 1,
    HashTree = 2,
    ForsTree = 3,
    ForsRoots = 4,
    WotsPrf = 5,
    ForsPrf = 6,
}

/// A hash address. Which of the last three fields is meaningful depends on
/// the type: chain/hash for WOTS+, height/index for tree nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Address {
    pub layer: u32,
    pub tree: u64,
    pub type_tag: AddrType,
    pub keypair: u32,
    pub chain_or_height: u32,
    pub hash_or_index: u32,
}

impl Address {
    /// Address of subtree `tree` on hypertree layer `layer`.
    pub fn subtree(layer: u32, tree: u64, type_tag: AddrType) -> Self {
        Address { layer, tree, type_tag, ..Default::default() }
    }

    /// Keeps layer and tree, resets everything else.
    pub fn with_type(&self, type_tag: AddrType) -> Self {
        Address { layer: self.layer, tree: self.tree, type_tag, ..Default::default() }
    }

    /// Keeps layer, tree and key pair, resets everything else.
    pub fn keypair_with_type(&self, type_tag: AddrType) -> Self {
        Address { keypair: self.keypair, ..self.with_type(type_tag) }
    }

    pub fn set_keypair(&mut self, keypair: u32) -> &mut Self {
        self.keypair = keypair;
        self
    }

    pub fn set_chain(&mut self, chain: u32) -> &mut Self {
        self.chain_or_height = chain;
        self
    }

    pub fn set_hash(&mut self, hash: u32) -> &mut Self {
        self.hash_or_index = hash;
        self
    }

    pub fn set_tree_height(&mut self, height: u32) -> &mut Self {
        self.chain_or_height = height;
        self
    }

    pub fn set_tree_index(&mut self, index: u32) -> &mut Self {
        self.hash_or_index = index;
        self
    }

    pub fn set_type(&mut self, type_tag: AddrType) -> &mut Self {
        self.type_tag = type_tag;
        self
    }

    /// Compressed big-endian form: layer (1) ‖ tree (8) ‖ type (1) ‖
    /// keypair (4) ‖ chain/height (4) ‖ hash/index (4).
    pub fn to_bytes(&self) -> [u8; ADDR_BYTES] {
        debug_assert!(self.layer < 256);
        let mut out = [0u8; ADDR_BYTES];
        out[0] = self.layer as u8;
        out[1..9].copy_from_slice(&self.tree.to_be_bytes());
        out[9] = self.type_tag as u8;
        out[10..14].copy_from_slice(&self.keypair.to_be_bytes());
        out[14..18].copy_from_slice(&self.chain_or_height.to_be_bytes());
        out[18..22].copy_from_slice(&self.hash_or_index.to_be_bytes());
        out
    }
}
