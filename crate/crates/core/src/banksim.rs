//! Shared-memory bank model: 32 banks of 4 bytes. A warp-step is one word
//! access per lane; an `n`-byte node access is `n/4` consecutive steps.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::tuner::padding::PaddingScheme;

pub const BANKS: u32 = 32;
pub const BANK_WIDTH: u32 = 4;
pub const WARP_SIZE: u32 = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BankModel {
    pub banks: u32,
    pub bank_width: u32,
    pub rows_per_region: u32,
}

impl BankModel {
    pub fn for_padding(pad: &PaddingScheme) -> Self {
        BankModel { banks: BANKS, bank_width: BANK_WIDTH, rows_per_region: pad.rows.unwrap_or(1) }
    }

    pub fn bank(&self, padded_word: u32) -> u32 {
        padded_word % self.banks
    }
}

/// Physical word index of `word` under `pad`.
pub fn padded_index(word: u32, pad: &PaddingScheme) -> u32 {
    pad.padded_index(word)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Load,
    Store,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Access {
    pub lane: u32,
    pub word: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarpStep {
    pub op: Op,
    /// Tree level the step belongs to (1 = first reduction above the leaves).
    pub level: u32,
    pub accesses: Vec<Access>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessTrace {
    pub steps: Vec<WarpStep>,
}

impl AccessTrace {
    pub fn push(&mut self, step: WarpStep) {
        if !step.accesses.is_empty() {
            self.steps.push(step);
        }
    }

    pub fn extend(&mut self, other: AccessTrace) {
        self.steps.extend(other.steps);
    }

    /// Lanes must be warp-local and each (lane, word) pair unique per step.
    pub fn validate(&self) -> Result<()> {
        for (i, step) in self.steps.iter().enumerate() {
            let mut seen = HashSet::new();
            for a in &step.accesses {
                if a.lane >= WARP_SIZE {
                    return Err(Error::Usage(format!("step {i}: lane {} outside a warp", a.lane)));
                }
                if !seen.insert((a.lane, a.word)) {
                    return Err(Error::Usage(format!(
                        "step {i}: lane {} repeats word {}",
                        a.lane, a.word
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelTally {
    pub load_conflicts: u64,
    pub store_conflicts: u64,
    pub max_way: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub load_conflicts: u64,
    pub store_conflicts: u64,
    /// Largest number of distinct addresses any bank served, per step.
    pub per_step_max_way: Vec<u32>,
    pub per_level: BTreeMap<u32, LevelTally>,
}

impl ConflictReport {
    pub fn total_conflicts(&self) -> u64 {
        self.load_conflicts + self.store_conflicts
    }

    pub fn max_way(&self) -> u32 {
        self.per_step_max_way.iter().copied().max().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &ConflictReport) {
        self.load_conflicts += other.load_conflicts;
        self.store_conflicts += other.store_conflicts;
        self.per_step_max_way.extend_from_slice(&other.per_step_max_way);
        for (level, t) in &other.per_level {
            let e = self.per_level.entry(*level).or_default();
            e.load_conflicts += t.load_conflicts;
            e.store_conflicts += t.store_conflicts;
            e.max_way = e.max_way.max(t.max_way);
        }
    }
}

/// Conflicts of one step: Σ over banks of (distinct addresses − 1), plus the
/// worst bank's address count. Lanes hitting the same address broadcast.
fn step_conflicts(step: &WarpStep, pad: &PaddingScheme, model: &BankModel) -> (u64, u32) {
    let mut per_bank: HashMap<u32, HashSet<u32>> = HashMap::new();
    for a in &step.accesses {
        let addr = pad.padded_index(a.word);
        per_bank.entry(model.bank(addr)).or_default().insert(addr);
    }
    let conflicts = per_bank.values().map(|s| s.len() as u64 - 1).sum();
    let way = per_bank.values().map(|s| s.len() as u32).max().unwrap_or(0);
    (conflicts, way)
}

pub fn count_conflicts(trace: &AccessTrace, pad: &PaddingScheme) -> ConflictReport {
    let model = BankModel::for_padding(pad);
    let mut report = ConflictReport::default();
    for step in &trace.steps {
        let (conflicts, way) = step_conflicts(step, pad, &model);
        let level = report.per_level.entry(step.level).or_default();
        match step.op {
            Op::Load => {
                report.load_conflicts += conflicts;
                level.load_conflicts += conflicts;
            }
            Op::Store => {
                report.store_conflicts += conflicts;
                level.store_conflicts += conflicts;
            }
        }
        level.max_way = level.max_way.max(way);
        report.per_step_max_way.push(way);
    }
    report
}

/// Steps for `lanes` lanes (tree-local numbering starting at `first_lane`)
/// each touching node `node_of(lane)` of `node_words` words.
fn node_steps(
    trace: &mut AccessTrace,
    op: Op,
    level: u32,
    lanes: std::ops::Range<u32>,
    node_words: u32,
    node_of: impl Fn(u32) -> u32,
) {
    for j in 0..node_words {
        let accesses = lanes
            .clone()
            .map(|lane| Access { lane: lane % WARP_SIZE, word: node_of(lane) * node_words + j })
            .collect();
        trace.push(WarpStep { op, level, accesses });
    }
}

/// One warp where lane `i` reads node `i` of `node_bytes`, one word per step.
pub fn node_trace(node_bytes: u32) -> AccessTrace {
    let mut t = AccessTrace::default();
    node_steps(&mut t, Op::Load, 1, 0..WARP_SIZE, node_bytes / BANK_WIDTH, |lane| lane);
    t
}

/// Word accesses of reduction level `level` of a tree of height `height`:
/// lane `i` loads nodes `2i` and `2i+1`, then stores their parent into slot
/// `i`. With `relax_bottom` the children come from lane-local storage and
/// only the store touches scratch.
pub fn level_trace(height: u32, level: u32, node_bytes: u32, relax_bottom: bool) -> AccessTrace {
    let mut trace = AccessTrace::default();
    let node_words = node_bytes / BANK_WIDTH;
    let parents = 1u32 << (height - level);
    let mut first = 0;
    while first < parents {
        let warp = first..(first + WARP_SIZE).min(parents);
        if !(relax_bottom && level == 1) {
            node_steps(&mut trace, Op::Load, level, warp.clone(), node_words, |i| 2 * i);
            node_steps(&mut trace, Op::Load, level, warp.clone(), node_words, |i| 2 * i + 1);
        }
        node_steps(&mut trace, Op::Store, level, warp, node_words, |i| i);
        first += WARP_SIZE;
    }
    trace
}

/// The full reduction access sequence for one tree, level by level.
pub fn reduction_trace(height: u32, node_bytes: u32, relax: bool) -> Result<AccessTrace> {
    if height == 0 {
        return Err(Error::Usage("reduction trace needs height >= 1".into()));
    }
    if node_bytes == 0 || !node_bytes.is_multiple_of(BANK_WIDTH) {
        return Err(Error::Usage(format!("node size {node_bytes} is not a whole number of words")));
    }
    let mut trace = AccessTrace::default();
    for level in 1..=height {
        trace.extend(level_trace(height, level, node_bytes, relax));
    }
    Ok(trace)
}
