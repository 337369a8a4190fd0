//! Fused FORS execution: `F` sets of `N_tree` trees share one block.

use serde::{Deserialize, Serialize};

use super::reduce::{reduce_level, store_level, NodeRegion};
use super::{ExecReport, Executor, VirtualBlock, MAX_LANES};
use crate::banksim::{count_conflicts, AccessTrace, ConflictReport};
use crate::error::{Error, Result};
use crate::params::DerivedParams;
use crate::sigcore::fors::{fors_leaf_from_secret, fors_secret_into};
use crate::thash::sha256::count_compressions;
use crate::thash::{AddrType, Address, HashCtx, MAX_N};
use crate::tuner::{FusionCandidate, PaddingScheme};

/// Bottom-layer scheme where each lane derives two leaves in lane-local
/// storage and stores only their parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub enabled: bool,
    /// `R_t`: lane-local bytes available for the leaf pair.
    pub regs_per_lane_budget: usize,
}

impl RelaxConfig {
    pub fn off() -> Self {
        RelaxConfig { enabled: false, regs_per_lane_budget: 0 }
    }

    pub fn on(n: usize) -> Self {
        RelaxConfig { enabled: true, regs_per_lane_budget: 2 * n }
    }
}

/// Grouping of the `k` FORS trees into fused sets. Slot `(pass, f, j)`
/// holds global tree `(pass·F + f)·N_tree + j`; slots past `k` are inactive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusedSetLayout {
    pub trees_per_set: usize,
    pub lanes_per_set: usize,
    pub sets_fused: usize,
    pub relax: bool,
    pub k: usize,
    pub fors_t: usize,
    pub log_t: usize,
    pub n: usize,
}

impl FusedSetLayout {
    pub fn new(dp: &DerivedParams, trees_per_set: usize, sets_fused: usize, relax: bool) -> Result<Self> {
        if trees_per_set == 0 || sets_fused == 0 {
            return Err(Error::Config("fused layout needs at least one tree and one set".into()));
        }
        let per_tree = if relax { dp.fors_t / 2 } else { dp.fors_t };
        let lanes_per_set = trees_per_set * per_tree;
        if lanes_per_set > MAX_LANES as usize {
            return Err(Error::Config(format!(
                "{trees_per_set} trees per set need {lanes_per_set} lanes, limit is {MAX_LANES}"
            )));
        }
        Ok(FusedSetLayout {
            trees_per_set,
            lanes_per_set,
            sets_fused,
            relax,
            k: dp.params.k,
            fors_t: dp.fors_t,
            log_t: dp.params.log_t,
            n: dp.n(),
        })
    }

    pub fn from_candidate(dp: &DerivedParams, c: &FusionCandidate, relax: bool) -> Result<Self> {
        let layout = Self::new(dp, c.trees_per_set, c.sets_fused, relax)?;
        if layout.lanes_per_set != c.lanes_per_set {
            return Err(Error::Config(format!(
                "candidate has {} lanes per set, layout needs {}",
                c.lanes_per_set, layout.lanes_per_set
            )));
        }
        Ok(layout)
    }

    /// One tree per set, one set per block.
    pub fn sequential(dp: &DerivedParams, relax: bool) -> Self {
        Self::new(dp, 1, 1, relax).expect("a single tree always fits the lane limit")
    }

    pub fn trees_per_pass(&self) -> usize {
        self.trees_per_set * self.sets_fused
    }

    /// Blocks needed to cover all `k` trees.
    pub fn passes(&self) -> usize {
        self.k.div_ceil(self.trees_per_set).div_ceil(self.sets_fused)
    }

    /// Global tree index of slot (`pass`, `set`, `local`), if active.
    pub fn slot_tree(&self, pass: usize, set: usize, local: usize) -> Option<usize> {
        assert!(set < self.sets_fused && local < self.trees_per_set);
        let g = (pass * self.sets_fused + set) * self.trees_per_set + local;
        (g < self.k).then_some(g)
    }

    /// OFFSET base of every fused set in `pass`.
    pub fn offsets(&self, pass: usize) -> Vec<usize> {
        (0..self.sets_fused).map(|f| (pass * self.sets_fused + f) * self.trees_per_set).collect()
    }

    /// Nodes a tree keeps in scratch at its widest level.
    pub fn tree_slots(&self) -> usize {
        if self.relax {
            self.fors_t / 2
        } else {
            self.fors_t
        }
    }

    pub fn bottom_scratch_per_tree(&self) -> usize {
        self.tree_slots() * self.n
    }

    pub fn region_bytes(&self, pad: &PaddingScheme) -> usize {
        NodeRegion::physical_bytes(self.tree_slots(), self.n, pad)
    }

    pub fn scratch_bytes(&self, pad: &PaddingScheme) -> usize {
        self.trees_per_pass() * self.region_bytes(pad)
    }

    pub fn sync_points(&self) -> u64 {
        (self.log_t * self.passes()) as u64
    }

    pub fn validate(&self, scratch_capacity: usize, pad: &PaddingScheme) -> Result<()> {
        let need = self.scratch_bytes(pad);
        if need > scratch_capacity {
            return Err(Error::Config(format!(
                "{} fused trees need {need} B of scratch, capacity is {scratch_capacity} B",
                self.trees_per_pass()
            )));
        }
        Ok(())
    }
}

pub struct ForsTrees {
    pub report: ExecReport,
    /// Reduction trace of every tree in global order, when instrumented.
    pub traces: Vec<AccessTrace>,
}

struct PassResult {
    traces: Vec<AccessTrace>,
    compressions: u64,
    sync_points: u64,
    scratch: usize,
}

/// Builds all `k` FORS trees. Writes `sk ‖ auth path` per tree into
/// `sig_out` and the tree roots into `roots_out`.
#[allow(clippy::too_many_arguments)]
pub fn run_fused_fors(
    exec: &Executor,
    layout: &FusedSetLayout,
    relax: RelaxConfig,
    ctx: &HashCtx,
    fors: &Address,
    indices: &[u32],
    pad: &PaddingScheme,
    blocks: &mut [VirtualBlock],
    sig_out: &mut [u8],
    roots_out: &mut [u8],
    instrument: bool,
) -> Result<ForsTrees> {
    let n = layout.n;
    let tree_sig = (layout.log_t + 1) * n;
    if relax.enabled != layout.relax {
        return Err(Error::Config("relax setting disagrees with the fused layout".into()));
    }
    if relax.enabled && relax.regs_per_lane_budget < 2 * n {
        return Err(Error::Config(format!(
            "relax buffer needs {} B per lane, budget is {} B",
            2 * n,
            relax.regs_per_lane_budget
        )));
    }
    if indices.len() != layout.k || sig_out.len() != layout.k * tree_sig || roots_out.len() != layout.k * n {
        return Err(Error::Internal("FORS output buffers do not match the parameter set".into()));
    }
    let passes = layout.passes();
    if blocks.len() < passes {
        return Err(Error::Config(format!("{passes} blocks needed, {} provided", blocks.len())));
    }
    for b in blocks.iter() {
        layout.validate(b.scratch_bytes(), pad)?;
    }

    let per_pass = layout.trees_per_pass();
    let items: Vec<_> = blocks
        .iter_mut()
        .zip(sig_out.chunks_mut(per_pass * tree_sig))
        .zip(roots_out.chunks_mut(per_pass * n))
        .enumerate()
        .map(|(pass, ((b, s), r))| (pass, b, s, r))
        .collect();
    let results = exec.map(items, |(pass, block, sig, roots)| {
        let (res, compressions) =
            count_compressions(|| run_pass(layout, ctx, fors, indices, pad, pass, block, sig, roots, instrument));
        res.map(|mut r| {
            r.compressions = compressions;
            r
        })
    });

    let mut report = ExecReport {
        blocks: passes as u64,
        max_lanes: layout.lanes_per_set as u32,
        bottom_scratch_per_tree: layout.bottom_scratch_per_tree(),
        conflicts: instrument.then(ConflictReport::default),
        ..Default::default()
    };
    let mut traces = Vec::new();
    for r in results {
        let r = r?;
        report.compressions += r.compressions;
        report.sync_points += r.sync_points;
        report.peak_scratch_bytes = report.peak_scratch_bytes.max(r.scratch);
        if let Some(c) = &mut report.conflicts {
            for t in &r.traces {
                c.merge(&count_conflicts(t, pad));
            }
        }
        traces.extend(r.traces);
    }
    Ok(ForsTrees { report, traces })
}

#[allow(clippy::too_many_arguments)]
fn run_pass(
    layout: &FusedSetLayout,
    ctx: &HashCtx,
    fors: &Address,
    indices: &[u32],
    pad: &PaddingScheme,
    pass: usize,
    block: &mut VirtualBlock,
    sig: &mut [u8],
    roots: &mut [u8],
    instrument: bool,
) -> Result<PassResult> {
    let n = layout.n;
    let log_t = layout.log_t as u32;
    let t = layout.fors_t as u32;
    let tree_sig = (layout.log_t + 1) * n;
    let region_bytes = layout.region_bytes(pad);
    block.configure(layout.lanes_per_set as u32, std::iter::repeat_n(region_bytes, layout.trees_per_pass()))?;
    let scratch = block.used_bytes();

    let base = pass * layout.trees_per_pass();
    let mut views = block.regions_mut();
    let mut trees: Vec<_> = views
        .drain(..)
        .zip(sig.chunks_mut(tree_sig))
        .enumerate()
        .map(|(li, (buf, tree_sig))| {
            let g = base + li;
            debug_assert_eq!(
                Some(g),
                layout.slot_tree(pass, li / layout.trees_per_set, li % layout.trees_per_set)
            );
            let region = NodeRegion::new(buf, n, log_t, layout.tree_slots(), *pad, instrument);
            (g as u32, indices[g], region, tree_sig)
        })
        .collect();
    let node_adrs = fors.keypair_with_type(AddrType::ForsTree);

    // Leaf layer.
    for (g, idx, region, tree_sig) in trees.iter_mut() {
        let (idx, offset) = (*idx, *g * t);
        let (sk, auth) = tree_sig.split_at_mut(n);
        fors_secret_into(ctx, sk, fors, idx + offset);
        let mut leaf_sk = [0u8; MAX_N];
        let mut leaf_at = |i: u32, out: &mut [u8]| {
            fors_secret_into(ctx, &mut leaf_sk[..n], fors, offset + i);
            fors_leaf_from_secret(ctx, out, &leaf_sk[..n], fors, offset + i);
            if i == idx ^ 1 {
                auth[..n].copy_from_slice(out);
            }
        };
        if layout.relax {
            let mut a = node_adrs;
            a.set_tree_height(1);
            store_level(region, 1, |lane, out| {
                let mut buffer = [0u8; 2 * MAX_N];
                let (left, right) = buffer[..2 * n].split_at_mut(n);
                leaf_at(2 * lane, left);
                leaf_at(2 * lane + 1, right);
                a.set_tree_index(lane + (offset >> 1));
                ctx.thash_pair_into(out, &a, left, right);
            });
        } else {
            let mut leaf = [0u8; MAX_N];
            for lane in 0..t {
                leaf_at(lane, &mut leaf[..n]);
                region.write(lane as usize, &leaf[..n]);
            }
        }
    }

    // One barrier per reduced level, shared by every tree in the block.
    let first_level = if layout.relax { 2 } else { 1 };
    let mut sync_points = u64::from(layout.relax);
    for level in first_level..=log_t {
        for (g, idx, region, tree_sig) in trees.iter_mut() {
            let offset = *g * t;
            let sibling = ((*idx >> (level - 1)) ^ 1) as usize;
            let at = n + (level as usize - 1) * n;
            region.read(sibling, &mut tree_sig[at..at + n]);
            let mut a = node_adrs;
            a.set_tree_height(level);
            reduce_level(region, level, |p, l, r, out| {
                a.set_tree_index(p + (offset >> level));
                ctx.thash_pair_into(out, &a, l, r);
            });
        }
        sync_points += 1;
    }

    let mut traces = Vec::new();
    for ((_, _, region, _), root) in trees.iter_mut().zip(roots.chunks_mut(n)) {
        region.read(0, root);
        traces.extend(region.take_trace());
    }
    Ok(PassResult { traces, compressions: 0, sync_points, scratch })
}
