//! Offline tuning: FORS fusion search, the register-limited occupancy model,
//! bank-padding solver and per-kernel hash-backend selection.

pub mod padding;
pub mod profile;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use self::padding::{padding_solve, PaddingScheme};
use crate::error::{Error, Result};
use crate::params::{DerivedParams, ParamSetId};
use crate::thash::{BackendSelection, HashBackend, Kernel, KernelBackends};

/// Static per-block scratch capacity (48 KiB).
pub const DEFAULT_SEME_BYTES: usize = 49152;
pub const MAX_LANES: usize = 1024;
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Which saturated configurations the search discards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Saturation {
    /// Drop candidates that use every lane or all scratch.
    #[default]
    Either,
    /// Drop only candidates that use every lane and all scratch at once.
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneInput {
    pub params: DerivedParams,
    pub seme_per_block: usize,
    pub t_max: usize,
    pub alpha: f64,
    pub saturation: Saturation,
    /// Search over the two-leaves-per-lane bottom layer geometry.
    pub relax: bool,
}

impl TuneInput {
    pub fn new(params: DerivedParams) -> Self {
        TuneInput {
            params,
            seme_per_block: DEFAULT_SEME_BYTES,
            t_max: MAX_LANES,
            alpha: DEFAULT_ALPHA,
            saturation: Saturation::Either,
            relax: false,
        }
    }

    /// Lanes needed to cover one tree's bottom layer.
    pub fn lanes_per_tree(&self) -> usize {
        if self.relax {
            self.params.fors_t / 2
        } else {
            self.params.fors_t
        }
    }

    /// Scratch bytes one tree occupies at its widest stored level.
    pub fn tree_scratch_bytes(&self) -> usize {
        self.lanes_per_tree() * self.params.n()
    }
}

/// One feasible fusion configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionCandidate {
    /// `T_set`: lanes per block.
    pub lanes_per_set: usize,
    /// `F`: sets fused into one block.
    pub sets_fused: usize,
    /// `N_tree`: FORS trees per set.
    pub trees_per_set: usize,
    /// `U_T`.
    pub thread_util: f64,
    /// `U_S`.
    pub scratch_util: f64,
    /// Synchronization score `log_t · ceil(k / N_tree) / F`.
    pub sync: f64,
    pub scratch_used: usize,
}

impl FusionCandidate {
    fn sync_ratio(&self, log_t: usize, k: usize) -> (usize, usize) {
        (log_t * k.div_ceil(self.trees_per_set), self.sets_fused)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: FusionCandidate,
    pub candidates: Vec<FusionCandidate>,
}

/// Exhaustive search over lanes-per-set and fused-set counts, ranked by
/// (sync, −U_T, −U_S), then fewer lanes, then fewer fused sets.
pub fn tree_tune(input: &TuneInput) -> Result<TuneResult> {
    let dp = &input.params;
    let (k, log_t) = (dp.params.k, dp.params.log_t);
    let t_min = input.lanes_per_tree();
    let tree_bytes = input.tree_scratch_bytes();
    let s_max = input.seme_per_block;
    if s_max < tree_bytes {
        return Err(Error::Tuning(format!(
            "scratch capacity {s_max} B cannot hold one tree ({tree_bytes} B)"
        )));
    }
    if input.t_max < t_min {
        return Err(Error::Tuning(format!(
            "lane limit {} is below the {t_min} lanes one tree needs",
            input.t_max
        )));
    }

    let mut candidates = Vec::new();
    let mut rejected = BTreeMap::<&str, usize>::new();
    for lanes in (t_min..=input.t_max).step_by(t_min) {
        let trees = lanes / t_min;
        let set_bytes = trees * tree_bytes;
        if set_bytes > s_max {
            *rejected.entry("set exceeds scratch").or_default() += 1;
            continue;
        }
        let f_max = (s_max / set_bytes).min(k / trees);
        if f_max == 0 {
            *rejected.entry("more trees per set than FORS trees").or_default() += 1;
        }
        for fused in 1..=f_max {
            let used = fused * set_bytes;
            if lanes > input.t_max || used > s_max {
                continue;
            }
            let lanes_full = lanes == input.t_max;
            let scratch_full = used == s_max;
            let saturated = match input.saturation {
                Saturation::Either => lanes_full || scratch_full,
                Saturation::Both => lanes_full && scratch_full,
            };
            let thread_util = lanes as f64 / input.t_max as f64;
            if saturated {
                *rejected.entry("saturated").or_default() += 1;
                continue;
            }
            if thread_util < input.alpha {
                *rejected.entry("lane utilization below alpha").or_default() += 1;
                continue;
            }
            candidates.push(FusionCandidate {
                lanes_per_set: lanes,
                sets_fused: fused,
                trees_per_set: trees,
                thread_util,
                scratch_util: used as f64 / s_max as f64,
                sync: (log_t * k.div_ceil(trees)) as f64 / fused as f64,
                scratch_used: used,
            });
        }
    }

    let best = candidates
        .iter()
        .copied()
        .min_by(|a, b| rank(a, b, log_t, k))
        .ok_or_else(|| {
            Error::Tuning(format!(
                "no feasible fusion configuration for {} (S_max={s_max}, T_max={}, alpha={}); eliminated: {rejected:?}",
                dp.id(),
                input.t_max,
                input.alpha
            ))
        })?;
    Ok(TuneResult { best, candidates })
}

fn rank(a: &FusionCandidate, b: &FusionCandidate, log_t: usize, k: usize) -> Ordering {
    let (an, ad) = a.sync_ratio(log_t, k);
    let (bn, bd) = b.sync_ratio(log_t, k);
    (an * bd)
        .cmp(&(bn * ad))
        .then(b.lanes_per_set.cmp(&a.lanes_per_set))
        .then(b.scratch_used.cmp(&a.scratch_used))
        .then(a.lanes_per_set.cmp(&b.lanes_per_set))
        .then(a.sets_fused.cmp(&b.sets_fused))
}

/// Re-checks every feasibility predicate for `c` from scratch.
pub fn is_feasible(input: &TuneInput, c: &FusionCandidate) -> bool {
    let t_min = input.lanes_per_tree();
    let k = input.params.params.k;
    let used = c.sets_fused * c.trees_per_set * input.tree_scratch_bytes();
    let saturated_lanes = c.lanes_per_set == input.t_max;
    let saturated_scratch = used == input.seme_per_block;
    let saturated = match input.saturation {
        Saturation::Either => saturated_lanes || saturated_scratch,
        Saturation::Both => saturated_lanes && saturated_scratch,
    };
    c.lanes_per_set.is_multiple_of(t_min)
        && c.trees_per_set == c.lanes_per_set / t_min
        && c.trees_per_set >= 1
        && c.sets_fused >= 1
        && c.sets_fused * c.trees_per_set <= k
        && used <= input.seme_per_block
        && c.lanes_per_set <= input.t_max
        && !saturated
        && c.lanes_per_set as f64 / input.t_max as f64 >= input.alpha
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyInput {
    /// Registers per SM.
    pub r_total: u32,
    /// Registers per lane.
    pub r_thread: u32,
    /// Lanes per block.
    pub t_block: u32,
    /// Resident warps per SM.
    pub w_max: u32,
}

/// Register-limited occupancy:
/// `(1 / W_max) · floor(R_total / (R_thread · T_block)) · (T_block / 32)`.
pub fn occupancy(input: &OccupancyInput) -> Result<f64> {
    let OccupancyInput { r_total, r_thread, t_block, w_max } = *input;
    if r_total == 0 || r_thread == 0 || t_block == 0 || w_max == 0 {
        return Err(Error::Usage(format!("occupancy inputs must be positive: {input:?}")));
    }
    let blocks = r_total as u64 / (r_thread as u64 * t_block as u64);
    Ok(blocks as f64 * (t_block as f64 / 32.0) / w_max as f64)
}

/// Wall-clock samples (seconds) per (kernel, set, backend).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileSamples {
    pub cells: BTreeMap<String, BTreeMap<HashBackend, Vec<f64>>>,
}

impl ProfileSamples {
    pub fn key(kernel: Kernel, id: ParamSetId) -> String {
        format!("{}/{}", kernel.as_str(), id)
    }

    pub fn record(&mut self, kernel: Kernel, id: ParamSetId, backend: HashBackend, seconds: f64) {
        self.cells.entry(Self::key(kernel, id)).or_default().entry(backend).or_default().push(seconds);
    }

    pub fn samples(&self, kernel: Kernel, id: ParamSetId, backend: HashBackend) -> &[f64] {
        self.cells
            .get(&Self::key(kernel, id))
            .and_then(|c| c.get(&backend))
            .map_or(&[], Vec::as_slice)
    }
}

/// Relative margin the tuned backend must win by to replace the baseline.
pub const TIE_TOLERANCE: f64 = 0.02;
pub const DEFAULT_PROFILE_REPS: usize = 10;

/// Mean after dropping one minimum and one maximum sample.
pub fn trimmed_mean(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let core = if s.len() > 2 { &s[1..s.len() - 1] } else { &s[..] };
    core.iter().sum::<f64>() / core.len() as f64
}

/// Picks the faster backend per cell from profiled timings.
pub fn select_backends(profile: &ProfileSamples, min_reps: usize) -> Result<BackendSelection> {
    let mut missing = Vec::new();
    let mut rows = Vec::new();
    for id in ParamSetId::ALL {
        let mut row = KernelBackends::uniform(HashBackend::Baseline);
        for kernel in Kernel::ALL {
            let base = profile.samples(kernel, id, HashBackend::Baseline);
            let tuned = profile.samples(kernel, id, HashBackend::Tuned);
            if base.len() < min_reps.max(1) || tuned.len() < min_reps.max(1) {
                missing.push(ProfileSamples::key(kernel, id));
                continue;
            }
            if trimmed_mean(tuned) < trimmed_mean(base) * (1.0 - TIE_TOLERANCE) {
                row.set(kernel, HashBackend::Tuned);
            }
        }
        rows.push((id, row));
    }
    if !missing.is_empty() {
        return Err(Error::Selection(missing));
    }
    BackendSelection::from_rows(rows)
}
