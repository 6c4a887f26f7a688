//! 64-element tile row patterns and the effective-sparsity rule.
//!
//! A TMUL instruction multiplying a weight row against an input row skips
//! the multiplier lanes where either operand is zero. Only the zero/non-zero
//! structure matters for timing, so patterns are plain 64-bit masks
//! (bit set = element non-zero).

use crate::error::{Result, ThorError};
use rand::RngCore;

pub const TILE_ELEMS: usize = 64;

/// Zero/non-zero pattern of one 64-element tile row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TilePattern(u64);

impl TilePattern {
    pub fn from_bits(bits: u64) -> Self {
        TilePattern(bits)
    }

    /// Builds a pattern from a boolean slice; errors unless it has exactly
    /// 64 entries.
    pub fn from_slice(elems: &[bool]) -> Result<Self> {
        if elems.len() != TILE_ELEMS {
            return Err(ThorError::Argument(format!(
                "tile pattern needs {TILE_ELEMS} elements, got {}",
                elems.len()
            )));
        }
        let mut bits = 0u64;
        for (i, &e) in elems.iter().enumerate() {
            if e {
                bits |= 1 << i;
            }
        }
        Ok(TilePattern(bits))
    }

    pub fn all_set() -> Self {
        TilePattern(u64::MAX)
    }

    pub fn all_clear() -> Self {
        TilePattern(0)
    }

    /// Uniformly random pattern (each element independently zero/non-zero).
    pub fn random<R: RngCore>(rng: &mut R) -> Self {
        TilePattern(rng.next_u64())
    }

    pub fn bits(&self) -> u64 {
        self.0
    }

    pub fn get(&self, idx: usize) -> bool {
        assert!(idx < TILE_ELEMS);
        self.0 >> idx & 1 == 1
    }

    pub fn set(&mut self, idx: usize, nonzero: bool) {
        assert!(idx < TILE_ELEMS);
        if nonzero {
            self.0 |= 1 << idx;
        } else {
            self.0 &= !(1 << idx);
        }
    }

    /// Number of non-zero elements.
    pub fn ones(&self) -> u32 {
        self.0.count_ones()
    }

    /// Flips every element.
    pub fn complement(&self) -> Self {
        TilePattern(!self.0)
    }

    /// Fraction of elements that are zero.
    pub fn sparsity(&self) -> f64 {
        1.0 - self.ones() as f64 / TILE_ELEMS as f64
    }
}

/// Fraction of multiplier lanes skipped when `weights` meets `input`:
/// a lane does work only where both operands are non-zero.
pub fn effective_sparsity(weights: &TilePattern, input: &TilePattern) -> f64 {
    let active = (weights.bits() & input.bits()).count_ones();
    1.0 - active as f64 / TILE_ELEMS as f64
}
