use std::collections::BTreeMap;

use super::AllocCounter;
use crate::error::{Error, Result};
use crate::thash::{sha256, HashBackend};

pub const MAX_LANES: u32 = 1024;
pub const DEFAULT_SCRATCH_BYTES: usize = 49152;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub label: u32,
    pub offset: usize,
    pub len: usize,
}

/// One simulated block: a lane count and a fixed scratch buffer carved into
/// disjoint regions.
#[derive(Debug)]
pub struct VirtualBlock {
    lane_count: u32,
    scratch: Vec<u8>,
    regions: Vec<Region>,
}

impl VirtualBlock {
    pub fn new(lane_count: u32, scratch_bytes: usize, allocs: &AllocCounter) -> Result<Self> {
        check_lanes(lane_count)?;
        allocs.record();
        Ok(VirtualBlock { lane_count, scratch: vec![0; scratch_bytes], regions: Vec::with_capacity(64) })
    }

    pub fn lane_count(&self) -> u32 {
        self.lane_count
    }

    pub fn scratch_bytes(&self) -> usize {
        self.scratch.len()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn used_bytes(&self) -> usize {
        self.regions.iter().map(|r| r.len).sum()
    }

    /// Replaces the region map. Fails rather than truncating when the
    /// regions or lanes do not fit.
    pub fn configure(&mut self, lane_count: u32, sizes: impl IntoIterator<Item = usize>) -> Result<()> {
        check_lanes(lane_count)?;
        if lane_count > self.lane_count {
            return Err(Error::Config(format!(
                "block built for {} lanes cannot run {lane_count}",
                self.lane_count
            )));
        }
        self.regions.clear();
        let mut offset = 0;
        for (label, len) in sizes.into_iter().enumerate() {
            self.regions.push(Region { label: label as u32, offset, len });
            offset += len;
        }
        if offset > self.scratch.len() {
            self.regions.clear();
            return Err(Error::Config(format!(
                "regions need {offset} B of scratch, block has {}",
                self.scratch.len()
            )));
        }
        Ok(())
    }

    /// Mutable views of every region, in label order.
    pub fn regions_mut(&mut self) -> Vec<&mut [u8]> {
        let mut rest: &mut [u8] = &mut self.scratch;
        let mut consumed = 0;
        let mut out = Vec::with_capacity(self.regions.len());
        for r in &self.regions {
            let tail = std::mem::take(&mut rest);
            let (_, tail) = tail.split_at_mut(r.offset - consumed);
            let (head, tail) = tail.split_at_mut(r.len);
            out.push(head);
            rest = tail;
            consumed = r.offset + r.len;
        }
        out
    }
}

fn check_lanes(lane_count: u32) -> Result<()> {
    if lane_count == 0 || lane_count > MAX_LANES {
        return Err(Error::Config(format!("lane count {lane_count} outside 1..={MAX_LANES}")));
    }
    Ok(())
}

/// Seeds and other constants shared read-only by all blocks. Contents are
/// fixed at construction; [`ReadOnlyPool::is_intact`] re-checks them.
#[derive(Clone, Debug)]
pub struct ReadOnlyPool {
    entries: BTreeMap<&'static str, Vec<u8>>,
    fingerprint: [u8; 32],
}

impl ReadOnlyPool {
    pub fn new(entries: impl IntoIterator<Item = (&'static str, Vec<u8>)>) -> Self {
        let entries: BTreeMap<_, _> = entries.into_iter().collect();
        let fingerprint = Self::digest(&entries);
        ReadOnlyPool { entries, fingerprint }
    }

    fn digest(entries: &BTreeMap<&'static str, Vec<u8>>) -> [u8; 32] {
        let mut h = sha256::Sha256::new(HashBackend::Baseline);
        for (k, v) in entries {
            h.update(&(k.len() as u64).to_be_bytes()).update(k.as_bytes());
            h.update(&(v.len() as u64).to_be_bytes()).update(v);
        }
        h.finalize()
    }

    pub fn get(&self, label: &str) -> Option<&[u8]> {
        self.entries.get(label).map(Vec::as_slice)
    }

    pub fn labels(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn is_intact(&self) -> bool {
        Self::digest(&self.entries) == self.fingerprint
    }
}
