//! Word-packed dense matrices over GF(2).

/// Row-major bit matrix with each row padded to a whole number of `u64` words.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

#[inline]
pub(crate) fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self { rows, cols, stride, data: vec![0; rows * stride] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from rows of `0`/`1` characters. Other characters are ignored.
    pub fn from_strs(rows: &[&str]) -> Self {
        let parsed: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| r.chars().filter_map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            }).collect())
            .collect();
        let cols = parsed.first().map_or(0, Vec::len);
        let mut m = Self::zeros(parsed.len(), cols);
        for (i, row) in parsed.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged rows");
            for (j, &b) in row.iter().enumerate() {
                m.set(i, j, b);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.data[r * self.stride + c / 64] >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.data[r * self.stride + c / 64];
        let mask = 1u64 << (c % 64);
        if v {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.data[r * self.stride..(r + 1) * self.stride]
    }

    /// `row[dst] ^= row[src]`.
    #[inline]
    pub fn xor_row(&mut self, src: usize, dst: usize) {
        debug_assert_ne!(src, dst);
        let s = self.stride;
        let (a, b) = if src < dst {
            let (lo, hi) = self.data.split_at_mut(dst * s);
            (&lo[src * s..(src + 1) * s], &mut hi[..s])
        } else {
            let (lo, hi) = self.data.split_at_mut(src * s);
            (&hi[..s], &mut lo[dst * s..(dst + 1) * s])
        };
        for (d, v) in b.iter_mut().zip(a) {
            *d ^= v;
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let s = self.stride;
        let (lo, hi) = (a.min(b), a.max(b));
        let (first, second) = self.data.split_at_mut(hi * s);
        first[lo * s..(lo + 1) * s].swap_with_slice(&mut second[..s]);
    }

    /// In-place reduced row echelon form. Returns the pivot column of each of the
    /// leading `rank` rows; rows past the rank are zero.
    pub fn rref(&mut self) -> Vec<usize> {
        self.rref_columns(self.cols)
    }

    /// Like [`rref`](Self::rref) but only pivots on the first `limit` columns;
    /// later columns ride along as an augmented block.
    pub fn rref_columns(&mut self, limit: usize) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut next = 0;
        for c in 0..limit.min(self.cols) {
            if next == self.rows {
                break;
            }
            let Some(p) = (next..self.rows).find(|&r| self.get(r, c)) else {
                continue;
            };
            self.swap_rows(p, next);
            for r in 0..self.rows {
                if r != next && self.get(r, c) {
                    self.xor_row(next, r);
                }
            }
            pivots.push(c);
            next += 1;
        }
        pivots
    }

    /// Row-echelon elimination (no back substitution), returning the rank.
    pub fn eliminate(&mut self) -> usize {
        let mut rank = 0;
        let stride = self.stride;
        for w in 0..stride {
            loop {
                if rank == self.rows {
                    return rank;
                }
                // lowest set bit in word `w` among remaining rows
                let mut best: Option<(usize, u32)> = None;
                for r in rank..self.rows {
                    let word = self.data[r * stride + w];
                    if word != 0 {
                        let tz = word.trailing_zeros();
                        if best.is_none_or(|(_, t)| tz < t) {
                            best = Some((r, tz));
                            if tz == 0 {
                                break;
                            }
                        }
                    }
                }
                let Some((p, bit)) = best else { break };
                self.swap_rows(p, rank);
                let mask = 1u64 << bit;
                for r in rank + 1..self.rows {
                    if self.data[r * stride + w] & mask != 0 {
                        self.xor_row(rank, r);
                    }
                }
                rank += 1;
            }
        }
        rank
    }
}

/// GF(2) row rank. The input is left untouched.
pub fn gf2_rank(matrix: &BitMatrix) -> usize {
    matrix.clone().eliminate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_full_rank() {
        for n in [1, 5, 64, 65, 130] {
            assert_eq!(gf2_rank(&BitMatrix::identity(n)), n);
        }
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        assert_eq!(gf2_rank(&BitMatrix::zeros(7, 100)), 0);
    }

    #[test]
    fn dependent_third_row() {
        let m = BitMatrix::from_strs(&["110", "011", "101"]);
        assert_eq!(gf2_rank(&m), 2);
        // caller's copy unchanged
        assert_eq!(m, BitMatrix::from_strs(&["110", "011", "101"]));
    }

    #[test]
    fn rref_is_reduced() {
        let mut m = BitMatrix::from_strs(&["0110", "1100", "1010", "0001"]);
        let piv = m.rref();
        assert_eq!(piv, vec![0, 1, 3]);
        for (i, &c) in piv.iter().enumerate() {
            for r in 0..m.rows() {
                assert_eq!(m.get(r, c), r == i);
            }
        }
    }

    #[test]
    fn elimination_agrees_with_rref_across_word_boundaries() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let rows = rng.gen_range(1..90);
            let cols = rng.gen_range(1..200);
            let mut m = BitMatrix::zeros(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    m.set(r, c, rng.gen_bool(0.1));
                }
            }
            let mut a = m.clone();
            assert_eq!(gf2_rank(&m), a.rref().len());
        }
    }
}
