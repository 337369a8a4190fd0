//! Bank-padding schemes: one 4-byte padding word after every `128·R` data
//! bytes, sized so that `T_h` lanes of `B_n` banks each exactly fill the
//! transaction region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bytes in one shared-memory transaction row.
pub const ROW_BYTES: u32 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PaddingScheme {
    /// Bytes each lane touches per node access (16, 24 or 32).
    pub access_bytes: u32,
    /// `B_n`: banks covered by one lane access.
    pub banks_per_access: u32,
    /// `T_h`: lanes between padding words, when the scheme solves
    /// `128·R = 4·B_n·T_h`.
    pub thread_interval: Option<u32>,
    /// `R`: contiguous 128-byte rows per transaction region. `None` disables
    /// padding entirely.
    pub rows: Option<u32>,
}

impl PaddingScheme {
    /// No padding: word indices map to themselves.
    pub fn none(access_bytes: u32) -> Self {
        PaddingScheme {
            access_bytes,
            banks_per_access: access_bytes / 4,
            thread_interval: None,
            rows: None,
        }
    }

    /// Pads every `128·rows` bytes regardless of whether that solves the
    /// region equation. Used to show what happens without the extension to
    /// multi-row regions.
    pub fn forced_rows(access_bytes: u32, rows: u32) -> Result<Self> {
        if rows == 0 {
            return Err(Error::Usage("padding rows must be positive".into()));
        }
        let mut p = PaddingScheme::none(access_bytes);
        p.rows = Some(rows);
        if (ROW_BYTES * rows).is_multiple_of(access_bytes) {
            p.thread_interval = Some(ROW_BYTES * rows / access_bytes);
        }
        Ok(p)
    }

    pub fn is_padded(&self) -> bool {
        self.rows.is_some()
    }

    /// Data words per padding word (`32·R`), if padded.
    pub fn words_per_pad(&self) -> Option<u32> {
        self.rows.map(|r| 32 * r)
    }

    /// True when `(T_h, R)` is the minimal solution of the region equation.
    pub fn is_minimal_solution(&self) -> bool {
        match (self.thread_interval, self.rows) {
            (Some(th), Some(r)) => {
                ROW_BYTES * r == self.banks_per_access * 4 * th
                    && (1..r).all(|smaller| !(ROW_BYTES * smaller).is_multiple_of(4 * self.banks_per_access))
            }
            _ => false,
        }
    }

    /// Physical word index of logical word `word`.
    pub fn padded_index(&self, word: u32) -> u32 {
        match self.words_per_pad() {
            Some(per) => word + word / per,
            None => word,
        }
    }

    /// Physical bytes needed to store `logical_bytes` of data (a multiple of 4).
    pub fn physical_bytes(&self, logical_bytes: usize) -> usize {
        if logical_bytes == 0 {
            return 0;
        }
        let last_word = (logical_bytes / 4 - 1) as u32;
        (self.padded_index(last_word) as usize + 1) * 4
    }
}

/// Minimal positive `(T_h, R)` with `128·R = 4·B_n·T_h` for the given
/// per-lane access width.
pub fn padding_solve(access_bytes: u32) -> Result<PaddingScheme> {
    if access_bytes == 0 || !access_bytes.is_multiple_of(4) {
        return Err(Error::Usage(format!(
            "access width must be a positive multiple of 4 bytes, got {access_bytes}"
        )));
    }
    let g = gcd(access_bytes, ROW_BYTES);
    Ok(PaddingScheme {
        access_bytes,
        banks_per_access: access_bytes / 4,
        thread_interval: Some(ROW_BYTES / g),
        rows: Some(access_bytes / g),
    })
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
