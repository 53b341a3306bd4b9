//! Dense square bit matrix, row-major.
//!
//! The on-disk form is the row-major bit sequence packed LSB-first into bytes:
//! bit `i * n + j` lives in byte `(i * n + j) / 8` at bit position `(i * n + j) % 8`.

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    bits: FixedBitSet,
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BitMatrix")
            .field("n", &self.n)
            .field("ones", &self.count_ones())
            .finish()
    }
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            bits: FixedBitSet::with_capacity(n * n),
        }
    }

    /// Stacks `n` rows of length `n`.
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a FixedBitSet>) -> Result<Self> {
        let rows: Vec<&FixedBitSet> = rows.into_iter().collect();
        let n = rows.len();
        let mut m = Self::new(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::data(format!(
                    "row {i} has length {} but the matrix has {n} rows",
                    row.len()
                )));
            }
            for j in row.ones() {
                m.bits.insert(i * n + j);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits.contains(i * self.n + j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.bits.set(i * self.n + j, value);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn row_count_ones(&self, i: usize) -> usize {
        self.bits.count_ones(i * self.n..(i + 1) * self.n)
    }

    /// Column indices of the set bits in row `i`, ascending.
    pub fn row_ones(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let start = i * self.n;
        let end = start + self.n;
        RangeOnes::new(self.bits.as_slice(), start, end).map(move |k| k - start)
    }

    /// All set positions as `(row, column)` in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.bits.ones().map(move |k| (k / n, k % n))
    }

    pub fn row(&self, i: usize) -> FixedBitSet {
        let mut row = FixedBitSet::with_capacity(self.n);
        for j in self.row_ones(i) {
            row.insert(j);
        }
        row
    }

    pub fn is_symmetric(&self) -> bool {
        self.ones().all(|(i, j)| self.get(j, i))
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| !self.get(i, i))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let len = (self.n * self.n).div_ceil(8);
        let mut out = Vec::with_capacity(len + 8);
        for block in self.bits.as_slice() {
            out.extend_from_slice(&block.to_le_bytes());
        }
        out.truncate(len);
        out.resize(len, 0);
        out
    }

    pub fn from_bytes(n: usize, bytes: &[u8]) -> Result<Self> {
        let len = (n * n).div_ceil(8);
        if bytes.len() != len {
            return Err(Error::data(format!(
                "bit matrix of order {n} needs {len} bytes, got {}",
                bytes.len()
            )));
        }
        let mut m = Self::new(n);
        for (b, &byte) in bytes.iter().enumerate() {
            let mut byte = byte;
            while byte != 0 {
                let k = b * 8 + byte.trailing_zeros() as usize;
                if k >= n * n {
                    return Err(Error::data("padding bits set in bit matrix"));
                }
                m.bits.insert(k);
                byte &= byte - 1;
            }
        }
        Ok(m)
    }
}

/// Set bit positions of a block slice restricted to `[start, end)`.
struct RangeOnes<'a> {
    blocks: &'a [usize],
    block: usize,
    current: usize,
    end: usize,
}

const BLOCK_BITS: usize = usize::BITS as usize;

impl<'a> RangeOnes<'a> {
    fn new(blocks: &'a [usize], start: usize, end: usize) -> Self {
        let block = start / BLOCK_BITS;
        let current = if start < end {
            blocks.get(block).copied().unwrap_or(0) & (!0usize << (start % BLOCK_BITS))
        } else {
            0
        };
        Self {
            blocks,
            block,
            current,
            end,
        }
    }
}

impl Iterator for RangeOnes<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let k = self.block * BLOCK_BITS + self.current.trailing_zeros() as usize;
                if k >= self.end {
                    return None;
                }
                self.current &= self.current - 1;
                return Some(k);
            }
            self.block += 1;
            if self.block * BLOCK_BITS >= self.end || self.block >= self.blocks.len() {
                return None;
            }
            self.current = self.blocks[self.block];
        }
    }
}

/// Packs a bit vector LSB-first into bytes.
pub fn bitset_to_bytes(bits: &FixedBitSet) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for k in bits.ones() {
        out[k / 8] |= 1 << (k % 8);
    }
    out
}

pub fn bitset_from_bytes(len: usize, bytes: &[u8]) -> Result<FixedBitSet> {
    if bytes.len() != len.div_ceil(8) {
        return Err(Error::data(format!(
            "bit vector of length {len} needs {} bytes, got {}",
            len.div_ceil(8),
            bytes.len()
        )));
    }
    let mut bits = FixedBitSet::with_capacity(len);
    for k in 0..len {
        if bytes[k / 8] >> (k % 8) & 1 == 1 {
            bits.insert(k);
        }
    }
    Ok(bits)
}
