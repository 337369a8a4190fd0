//! In-place even-odd tree reduction over a scratch region.
//!
//! Nodes are `n` bytes and stored slot by slot; word `w` of the logical
//! stream lives at physical word `pad.padded_index(w)`. Lane `i` of a level
//! reads slots `2i` and `2i+1` and writes slot `i`. Within a warp all loads
//! precede the stores and a slot `i` is only overwritten after its parent
//! lane `i/2` (same or earlier warp) has consumed it.

use crate::banksim::{Access, AccessTrace, Op, WarpStep, BANK_WIDTH, WARP_SIZE};
use crate::thash::MAX_N;
use crate::tuner::PaddingScheme;

pub struct NodeRegion<'a> {
    buf: &'a mut [u8],
    n: usize,
    height: u32,
    slots: usize,
    pad: PaddingScheme,
    trace: Option<AccessTrace>,
}

impl<'a> NodeRegion<'a> {
    /// Region for a height-`height` tree keeping `slots` nodes.
    pub fn new(buf: &'a mut [u8], n: usize, height: u32, slots: usize, pad: PaddingScheme, instrument: bool) -> Self {
        assert!(n.is_multiple_of(BANK_WIDTH as usize) && n <= MAX_N);
        assert!(
            buf.len() >= Self::physical_bytes(slots, n, &pad),
            "region of {} B cannot hold {slots} nodes",
            buf.len()
        );
        NodeRegion { buf, n, height, slots, pad, trace: instrument.then(AccessTrace::default) }
    }

    pub fn physical_bytes(slots: usize, n: usize, pad: &PaddingScheme) -> usize {
        pad.physical_bytes(slots * n)
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    fn word_offset(&self, slot: usize, j: usize) -> usize {
        let word = (slot * self.n / 4 + j) as u32;
        self.pad.padded_index(word) as usize * 4
    }

    pub fn read(&self, slot: usize, out: &mut [u8]) {
        assert!(slot < self.slots, "slot {slot} outside region of {}", self.slots);
        for j in 0..self.n / 4 {
            let o = self.word_offset(slot, j);
            out[4 * j..4 * j + 4].copy_from_slice(&self.buf[o..o + 4]);
        }
    }

    pub fn write(&mut self, slot: usize, data: &[u8]) {
        assert!(slot < self.slots, "slot {slot} outside region of {}", self.slots);
        for j in 0..self.n / 4 {
            let o = self.word_offset(slot, j);
            self.buf[o..o + 4].copy_from_slice(&data[4 * j..4 * j + 4]);
        }
    }

    pub fn take_trace(&mut self) -> Option<AccessTrace> {
        self.trace.take()
    }

    fn record(&mut self, op: Op, level: u32, lanes: std::ops::Range<u32>, node_of: impl Fn(u32) -> u32) {
        let Some(trace) = &mut self.trace else { return };
        let words = (self.n / 4) as u32;
        for j in 0..words {
            let accesses = lanes
                .clone()
                .map(|lane| Access { lane: lane % WARP_SIZE, word: node_of(lane) * words + j })
                .collect();
            trace.push(WarpStep { op, level, accesses });
        }
    }
}

type Warp = [[u8; MAX_N]; WARP_SIZE as usize];

/// Writes level `level` with lane `i` producing parent `i` via `produce`,
/// warp by warp. The children come from lane-local storage.
pub fn store_level(region: &mut NodeRegion<'_>, level: u32, mut produce: impl FnMut(u32, &mut [u8])) {
    let n = region.n;
    let parents = 1u32 << (region.height - level);
    let mut out: Warp = [[0; MAX_N]; WARP_SIZE as usize];
    for first in (0..parents).step_by(WARP_SIZE as usize) {
        let warp = first..(first + WARP_SIZE).min(parents);
        for lane in warp.clone() {
            produce(lane, &mut out[(lane - first) as usize][..n]);
        }
        store_warp(region, level, warp, &out);
    }
}

fn store_warp(region: &mut NodeRegion<'_>, level: u32, warp: std::ops::Range<u32>, out: &Warp) {
    let n = region.n;
    region.record(Op::Store, level, warp.clone(), |i| i);
    for lane in warp.clone() {
        region.write(lane as usize, &out[(lane - warp.start) as usize][..n]);
    }
}

/// Reduces level `level - 1` into level `level`: `combine(i, left, right,
/// out)` computes parent `i`.
pub fn reduce_level(
    region: &mut NodeRegion<'_>,
    level: u32,
    mut combine: impl FnMut(u32, &[u8], &[u8], &mut [u8]),
) {
    assert!(level >= 1 && level <= region.height, "level {level} outside tree");
    let n = region.n;
    let parents = 1u32 << (region.height - level);
    let mut left: Warp = [[0; MAX_N]; WARP_SIZE as usize];
    let mut right: Warp = [[0; MAX_N]; WARP_SIZE as usize];
    let mut out: Warp = [[0; MAX_N]; WARP_SIZE as usize];
    for first in (0..parents).step_by(WARP_SIZE as usize) {
        let warp = first..(first + WARP_SIZE).min(parents);
        region.record(Op::Load, level, warp.clone(), |i| 2 * i);
        region.record(Op::Load, level, warp.clone(), |i| 2 * i + 1);
        for lane in warp.clone() {
            let s = (lane - first) as usize;
            region.read(2 * lane as usize, &mut left[s][..n]);
            region.read(2 * lane as usize + 1, &mut right[s][..n]);
        }
        for lane in warp.clone() {
            let s = (lane - first) as usize;
            combine(lane, &left[s][..n], &right[s][..n], &mut out[s][..n]);
        }
        store_warp(region, level, warp, &out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banksim::{count_conflicts, reduction_trace};
    use crate::tuner::padding_solve;

    fn xor_combine(_: u32, l: &[u8], r: &[u8], out: &mut [u8]) {
        for ((o, a), b) in out.iter_mut().zip(l).zip(r) {
            *o = a.rotate_left(1) ^ b;
        }
    }

    fn run(height: u32, n: usize, pad: PaddingScheme) -> (Vec<u8>, AccessTrace) {
        let slots = 1usize << height;
        let mut buf = vec![0u8; NodeRegion::physical_bytes(slots, n, &pad)];
        let mut r = NodeRegion::new(&mut buf, n, height, slots, pad, true);
        for s in 0..slots {
            let leaf: Vec<u8> = (0..n).map(|b| (s * 7 + b) as u8).collect();
            r.write(s, &leaf);
        }
        for level in 1..=height {
            reduce_level(&mut r, level, xor_combine);
        }
        let mut root = vec![0u8; n];
        r.read(0, &mut root);
        (root, r.take_trace().unwrap())
    }

    fn fold_root(height: u32, n: usize) -> Vec<u8> {
        let mut level: Vec<Vec<u8>> =
            (0..1usize << height).map(|s| (0..n).map(|b| (s * 7 + b) as u8).collect()).collect();
        while level.len() > 1 {
            level = level
                .chunks(2)
                .map(|p| {
                    let mut o = vec![0; n];
                    xor_combine(0, &p[0], &p[1], &mut o);
                    o
                })
                .collect();
        }
        level.remove(0)
    }

    #[test]
    fn padded_layout_preserves_values() {
        for n in [16, 24, 32] {
            let pad = padding_solve(n as u32).unwrap();
            assert_eq!(run(6, n, pad).0, fold_root(6, n));
            assert_eq!(run(6, n, PaddingScheme::none(n as u32)).0, fold_root(6, n));
        }
    }

    #[test]
    fn trace_matches_model() {
        for (h, n) in [(1, 16), (3, 24), (6, 16), (8, 24), (9, 32)] {
            let (_, trace) = run(h, n, PaddingScheme::none(n as u32));
            assert_eq!(trace, reduction_trace(h, n as u32, false).unwrap());
        }
    }

    #[test]
    fn padded_reduction_conflict_free() {
        let (_, trace) = run(6, 16, padding_solve(16).unwrap());
        let report = count_conflicts(&trace, &padding_solve(16).unwrap());
        assert!(report.per_level.values().all(|l| l.load_conflicts + l.store_conflicts == 0));
    }

    #[test]
    #[should_panic(expected = "outside region")]
    fn out_of_region_write_panics() {
        let pad = PaddingScheme::none(16);
        let mut buf = vec![0u8; 64];
        let mut r = NodeRegion::new(&mut buf, 16, 2, 4, pad, false);
        r.write(4, &[0; 16]);
    }
}
