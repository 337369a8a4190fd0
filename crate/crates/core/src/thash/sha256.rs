//! SHA-256 with two interchangeable compression functions.
//!
//! `Baseline` is the textbook loop with shift-based big-endian loads.
//! `Tuned` unrolls all 64 rounds and converts endianness through a byte
//! permutation table. Both produce identical digests; the choice only
//! changes the code path.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

pub const BLOCK_BYTES: usize = 64;
pub const OUTPUT_BYTES: usize = 32;

pub const IV: [u32; 8] = [
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
];

const K: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
];

thread_local! {
    static COMPRESSIONS: Cell<u64> = const { Cell::new(0) };
}

/// Compression-function invocations performed on the current thread so far.
pub fn compressions() -> u64 {
    COMPRESSIONS.with(Cell::get)
}

/// Runs `f` and returns its result with the number of compressions it
/// performed on this thread.
pub fn count_compressions<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = compressions();
    let out = f();
    (out, compressions() - before)
}

#[inline(always)]
fn bump() {
    COMPRESSIONS.with(|c| c.set(c.get() + 1));
}

/// Which compression-function implementation to run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashBackend {
    #[default]
    Baseline,
    Tuned,
}

pub type CompressFn = fn(&mut [u32; 8], &[u8; BLOCK_BYTES]);

impl HashBackend {
    pub const ALL: [HashBackend; 2] = [HashBackend::Baseline, HashBackend::Tuned];

    /// Resolves the backend to a concrete function once, so hashing loops
    /// never branch on the choice.
    pub fn compress_fn(self) -> CompressFn {
        match self {
            HashBackend::Baseline => compress_baseline,
            HashBackend::Tuned => compress_tuned,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HashBackend::Baseline => "baseline",
            HashBackend::Tuned => "tuned",
        }
    }
}

pub fn compress(state: &mut [u32; 8], block: &[u8; BLOCK_BYTES], backend: HashBackend) {
    (backend.compress_fn())(state, block)
}

#[inline(always)]
fn big_sigma0(x: u32) -> u32 {
    x.rotate_right(2) ^ x.rotate_right(13) ^ x.rotate_right(22)
}
#[inline(always)]
fn big_sigma1(x: u32) -> u32 {
    x.rotate_right(6) ^ x.rotate_right(11) ^ x.rotate_right(25)
}
#[inline(always)]
fn small_sigma0(x: u32) -> u32 {
    x.rotate_right(7) ^ x.rotate_right(18) ^ (x >> 3)
}
#[inline(always)]
fn small_sigma1(x: u32) -> u32 {
    x.rotate_right(17) ^ x.rotate_right(19) ^ (x >> 10)
}
#[inline(always)]
fn ch(x: u32, y: u32, z: u32) -> u32 {
    (x & y) ^ (!x & z)
}
#[inline(always)]
fn maj(x: u32, y: u32, z: u32) -> u32 {
    (x & y) ^ (x & z) ^ (y & z)
}

pub fn compress_baseline(state: &mut [u32; 8], block: &[u8; BLOCK_BYTES]) {
    bump();
    let mut w = [0u32; 64];
    for (i, word) in w.iter_mut().take(16).enumerate() {
        let b = &block[4 * i..4 * i + 4];
        *word = (b[0] as u32) << 24 | (b[1] as u32) << 16 | (b[2] as u32) << 8 | b[3] as u32;
    }
    for i in 16..64 {
        w[i] = small_sigma1(w[i - 2])
            .wrapping_add(w[i - 7])
            .wrapping_add(small_sigma0(w[i - 15]))
            .wrapping_add(w[i - 16]);
    }
    let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut h] = *state;
    for (&k, &wi) in K.iter().zip(w.iter()) {
        let t1 = h
            .wrapping_add(big_sigma1(e))
            .wrapping_add(ch(e, f, g))
            .wrapping_add(k)
            .wrapping_add(wi);
        let t2 = big_sigma0(a).wrapping_add(maj(a, b, c));
        h = g;
        g = f;
        f = e;
        e = d.wrapping_add(t1);
        d = c;
        c = b;
        b = a;
        a = t1.wrapping_add(t2);
    }
    for (s, v) in state.iter_mut().zip([a, b, c, d, e, f, g, h]) {
        *s = s.wrapping_add(v);
    }
}

/// Selector for a big-endian load done as a little-endian gather, the
/// portable counterpart of a `prmt` byte permute.
const BE_PERMUTE: [usize; 4] = [3, 2, 1, 0];

#[inline(always)]
fn load_permuted(chunk: &[u8]) -> u32 {
    u32::from_le_bytes([
        chunk[BE_PERMUTE[0]],
        chunk[BE_PERMUTE[1]],
        chunk[BE_PERMUTE[2]],
        chunk[BE_PERMUTE[3]],
    ])
}

macro_rules! round {
    ($a:ident, $b:ident, $c:ident, $d:ident, $e:ident, $f:ident, $g:ident, $h:ident, $k:expr, $w:expr) => {
        let t1 = $h
            .wrapping_add(big_sigma1($e))
            .wrapping_add(ch($e, $f, $g))
            .wrapping_add($k)
            .wrapping_add($w);
        $d = $d.wrapping_add(t1);
        $h = t1.wrapping_add(big_sigma0($a)).wrapping_add(maj($a, $b, $c));
    };
}

macro_rules! expand {
    ($w:ident, $i:expr) => {{
        let v = small_sigma1($w[($i + 14) & 15])
            .wrapping_add($w[($i + 9) & 15])
            .wrapping_add(small_sigma0($w[($i + 1) & 15]))
            .wrapping_add($w[$i & 15]);
        $w[$i & 15] = v;
        v
    }};
}

macro_rules! eight_rounds {
    ($w:ident, $base:expr, load, $a:ident, $b:ident, $c:ident, $d:ident, $e:ident, $f:ident, $g:ident, $h:ident) => {
        round!($a, $b, $c, $d, $e, $f, $g, $h, K[$base], $w[$base]);
        round!($h, $a, $b, $c, $d, $e, $f, $g, K[$base + 1], $w[$base + 1]);
        round!($g, $h, $a, $b, $c, $d, $e, $f, K[$base + 2], $w[$base + 2]);
        round!($f, $g, $h, $a, $b, $c, $d, $e, K[$base + 3], $w[$base + 3]);
        round!($e, $f, $g, $h, $a, $b, $c, $d, K[$base + 4], $w[$base + 4]);
        round!($d, $e, $f, $g, $h, $a, $b, $c, K[$base + 5], $w[$base + 5]);
        round!($c, $d, $e, $f, $g, $h, $a, $b, K[$base + 6], $w[$base + 6]);
        round!($b, $c, $d, $e, $f, $g, $h, $a, K[$base + 7], $w[$base + 7]);
    };
    ($w:ident, $base:expr, expand, $a:ident, $b:ident, $c:ident, $d:ident, $e:ident, $f:ident, $g:ident, $h:ident) => {
        round!($a, $b, $c, $d, $e, $f, $g, $h, K[$base], expand!($w, $base));
        round!($h, $a, $b, $c, $d, $e, $f, $g, K[$base + 1], expand!($w, $base + 1));
        round!($g, $h, $a, $b, $c, $d, $e, $f, K[$base + 2], expand!($w, $base + 2));
        round!($f, $g, $h, $a, $b, $c, $d, $e, K[$base + 3], expand!($w, $base + 3));
        round!($e, $f, $g, $h, $a, $b, $c, $d, K[$base + 4], expand!($w, $base + 4));
        round!($d, $e, $f, $g, $h, $a, $b, $c, K[$base + 5], expand!($w, $base + 5));
        round!($c, $d, $e, $f, $g, $h, $a, $b, K[$base + 6], expand!($w, $base + 6));
        round!($b, $c, $d, $e, $f, $g, $h, $a, K[$base + 7], expand!($w, $base + 7));
    };
}

#[allow(unused_assignments)]
pub fn compress_tuned(state: &mut [u32; 8], block: &[u8; BLOCK_BYTES]) {
    bump();
    let mut w = [0u32; 16];
    for (i, chunk) in block.chunks_exact(4).enumerate() {
        w[i] = load_permuted(chunk);
    }
    let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut h] = *state;
    eight_rounds!(w, 0, load, a, b, c, d, e, f, g, h);
    eight_rounds!(w, 8, load, a, b, c, d, e, f, g, h);
    eight_rounds!(w, 16, expand, a, b, c, d, e, f, g, h);
    eight_rounds!(w, 24, expand, a, b, c, d, e, f, g, h);
    eight_rounds!(w, 32, expand, a, b, c, d, e, f, g, h);
    eight_rounds!(w, 40, expand, a, b, c, d, e, f, g, h);
    eight_rounds!(w, 48, expand, a, b, c, d, e, f, g, h);
    eight_rounds!(w, 56, expand, a, b, c, d, e, f, g, h);
    state[0] = state[0].wrapping_add(a);
    state[1] = state[1].wrapping_add(b);
    state[2] = state[2].wrapping_add(c);
    state[3] = state[3].wrapping_add(d);
    state[4] = state[4].wrapping_add(e);
    state[5] = state[5].wrapping_add(f);
    state[6] = state[6].wrapping_add(g);
    state[7] = state[7].wrapping_add(h);
}

/// Incremental SHA-256 over a fixed compression function.
#[derive(Clone)]
pub struct Sha256 {
    state: [u32; 8],
    buf: [u8; BLOCK_BYTES],
    buf_len: usize,
    total: u64,
    compress: CompressFn,
}

impl Sha256 {
    pub fn new(backend: HashBackend) -> Self {
        Self::with_fn(backend.compress_fn())
    }

    pub fn with_fn(compress: CompressFn) -> Self {
        Sha256 { state: IV, buf: [0; BLOCK_BYTES], buf_len: 0, total: 0, compress }
    }

    /// Resumes from a midstate that has absorbed `absorbed` bytes (a multiple
    /// of the block size).
    pub fn from_midstate(state: [u32; 8], absorbed: u64, compress: CompressFn) -> Self {
        debug_assert_eq!(absorbed % BLOCK_BYTES as u64, 0);
        Sha256 { state, buf: [0; BLOCK_BYTES], buf_len: 0, total: absorbed, compress }
    }

    pub fn midstate(&self) -> [u32; 8] {
        debug_assert_eq!(self.buf_len, 0);
        self.state
    }

    pub fn update(&mut self, mut data: &[u8]) -> &mut Self {
        self.total += data.len() as u64;
        if self.buf_len > 0 {
            let take = (BLOCK_BYTES - self.buf_len).min(data.len());
            self.buf[self.buf_len..self.buf_len + take].copy_from_slice(&data[..take]);
            self.buf_len += take;
            data = &data[take..];
            if self.buf_len < BLOCK_BYTES {
                return self;
            }
            (self.compress)(&mut self.state, &self.buf);
            self.buf_len = 0;
        }
        let mut blocks = data.chunks_exact(BLOCK_BYTES);
        for block in &mut blocks {
            (self.compress)(&mut self.state, block.try_into().unwrap());
        }
        let rest = blocks.remainder();
        self.buf[..rest.len()].copy_from_slice(rest);
        self.buf_len = rest.len();
        self
    }

    pub fn finalize(mut self) -> [u8; OUTPUT_BYTES] {
        let bit_len = self.total.wrapping_mul(8);
        self.buf[self.buf_len] = 0x80;
        self.buf[self.buf_len + 1..].fill(0);
        if self.buf_len + 1 > BLOCK_BYTES - 8 {
            (self.compress)(&mut self.state, &self.buf);
            self.buf.fill(0);
        }
        self.buf[BLOCK_BYTES - 8..].copy_from_slice(&bit_len.to_be_bytes());
        (self.compress)(&mut self.state, &self.buf);
        let mut out = [0u8; OUTPUT_BYTES];
        for (chunk, word) in out.chunks_exact_mut(4).zip(self.state) {
            chunk.copy_from_slice(&word.to_be_bytes());
        }
        out
    }
}

pub fn sha256(backend: HashBackend, data: &[u8]) -> [u8; OUTPUT_BYTES] {
    let mut h = Sha256::new(backend);
    h.update(data);
    h.finalize()
}

/// HMAC-SHA-256 over the concatenation of `parts`.
pub fn hmac_sha256(backend: HashBackend, key: &[u8], parts: &[&[u8]]) -> [u8; OUTPUT_BYTES] {
    let mut key_block = [0u8; BLOCK_BYTES];
    if key.len() > BLOCK_BYTES {
        key_block[..OUTPUT_BYTES].copy_from_slice(&sha256(backend, key));
    } else {
        key_block[..key.len()].copy_from_slice(key);
    }
    let mut pad = [0u8; BLOCK_BYTES];
    for (p, k) in pad.iter_mut().zip(key_block) {
        *p = k ^ 0x36;
    }
    let mut inner = Sha256::new(backend);
    inner.update(&pad);
    for part in parts {
        inner.update(part);
    }
    let inner = inner.finalize();
    for (p, k) in pad.iter_mut().zip(key_block) {
        *p = k ^ 0x5c;
    }
    let mut outer = Sha256::new(backend);
    outer.update(&pad).update(&inner);
    outer.finalize()
}

/// MGF1 with SHA-256, filling `out`.
pub fn mgf1_sha256(backend: HashBackend, seed: &[u8], out: &mut [u8]) {
    for (counter, chunk) in out.chunks_mut(OUTPUT_BYTES).enumerate() {
        let mut h = Sha256::new(backend);
        h.update(seed).update(&(counter as u32).to_be_bytes());
        let digest = h.finalize();
        chunk.copy_from_slice(&digest[..chunk.len()]);
    }
}
