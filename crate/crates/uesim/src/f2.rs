//! Dense bit vectors and matrices over the two-element field, packed 64 bits
//! per word.
//!
//! Everything here is exact arithmetic in GF(2): addition is XOR, inner
//! products reduce by parity. The matrix routines use word-level Gaussian
//! elimination, which is ample at the dimensions this crate works with
//! (tens of columns). Bit `i` of a vector lives at word `i / 64`, bit
//! `i % 64`; displayed strings put index 0 leftmost, and the lexicographic
//! order used throughout compares from index 0 onward.

use rand::Rng;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{BitXor, BitXorAssign, Range};
use thiserror::Error;

/// Errors surfaced by the constrained sampler.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum F2Error {
    #[error("requested rank {target} exceeds the feasible maximum {max} for a {rows}x{cols} matrix under the given constraint")]
    InfeasibleRank {
        rows: usize,
        cols: usize,
        target: usize,
        max: usize,
    },
    #[error("rejection sampling did not reach rank {target} within {tries} tries")]
    RetriesExhausted { target: usize, tries: usize },
    #[error("no row with index {index} satisfies the parity constraint (zero mask with odd parity)")]
    InfeasibleParity { index: usize },
}

const WORD_BITS: usize = 64;

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

/// A fixed-length vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    /// The all-zero vector of the given length (length 0 is allowed).
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = BitVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut v = BitVector::zeros(len);
        for i in 0..len {
            v.set(i, f(i));
        }
        v
    }

    /// Uniformly random vector.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut words: Vec<u64> = (0..words_for(len)).map(|_| rng.gen()).collect();
        mask_tail(&mut words, len);
        BitVector { len, words }
    }

    /// Interpret the low bits of `value` as a vector (bit `i` of `value`
    /// becomes entry `i`). Requires `len <= 64`.
    pub fn from_index(len: usize, value: u64) -> Self {
        assert!(len <= 64, "from_index supports lengths up to 64");
        if len == 0 {
            return BitVector::zeros(0);
        }
        let mut words = vec![value];
        mask_tail(&mut words, len);
        BitVector { len, words }
    }

    /// Pack the vector into an integer index. Requires `len <= 64`.
    pub fn to_index(&self) -> u64 {
        assert!(self.len <= 64, "to_index supports lengths up to 64");
        self.words.first().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        let w = &mut self.words[i / WORD_BITS];
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let cur = self.get(i);
        self.set(i, !cur);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Parity inner product. Lengths must match exactly.
    pub fn dot(&self, other: &BitVector) -> bool {
        assert_eq!(
            self.len, other.len,
            "dot product requires equal lengths ({} vs {})",
            self.len, other.len
        );
        let mut acc = 0u64;
        for (a, b) in self.words.iter().zip(&other.words) {
            acc ^= a & b;
        }
        acc.count_ones() % 2 == 1
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(
            self.len, other.len,
            "xor requires equal lengths ({} vs {})",
            self.len, other.len
        );
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn concat(&self, other: &BitVector) -> BitVector {
        let mut out = BitVector::zeros(self.len + other.len);
        for i in 0..self.len {
            out.set(i, self.get(i));
        }
        for i in 0..other.len {
            out.set(self.len + i, other.get(i));
        }
        out
    }

    pub fn slice(&self, range: Range<usize>) -> BitVector {
        assert!(range.end <= self.len, "slice end past vector length");
        BitVector::from_fn(range.end - range.start, |i| self.get(range.start + i))
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    /// Index of the first position where the two vectors differ.
    pub fn first_diff(&self, other: &BitVector) -> Option<usize> {
        assert_eq!(self.len, other.len, "first_diff requires equal lengths");
        (0..self.len).find(|&i| self.get(i) != other.get(i))
    }

    /// Lexicographic comparison reading bits from index 0, with 0 < 1.
    pub fn lex_cmp(&self, other: &BitVector) -> Ordering {
        assert_eq!(self.len, other.len, "lex_cmp requires equal lengths");
        match self.first_diff(other) {
            None => Ordering::Equal,
            Some(i) => {
                if self.get(i) {
                    Ordering::Greater
                } else {
                    Ordering::Less
                }
            }
        }
    }

    /// Canonical byte layout: a little-endian u64 bit count, then the packed
    /// payload bytes, bit `i` at byte `i / 8`, bit `i % 8` (LSB first).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.len.div_ceil(8));
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        out.extend_from_slice(&self.payload_bytes());
        out
    }

    /// The packed payload without the length header.
    pub fn payload_bytes(&self) -> Vec<u8> {
        let n_bytes = self.len.div_ceil(8);
        let mut out = vec![0u8; n_bytes];
        for (i, byte) in out.iter_mut().enumerate() {
            let word = self.words[i * 8 / WORD_BITS];
            *byte = (word >> ((i * 8) % WORD_BITS)) as u8;
        }
        out
    }
}

fn mask_tail(words: &mut [u64], len: usize) {
    let rem = len % WORD_BITS;
    if rem != 0 {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
    // With len a multiple of 64 (including 0) every word is fully used.
}

impl BitXorAssign<&BitVector> for BitVector {
    fn bitxor_assign(&mut self, rhs: &BitVector) {
        self.xor_assign(rhs);
    }
}

impl BitXor<&BitVector> for &BitVector {
    type Output = BitVector;
    fn bitxor(self, rhs: &BitVector) -> BitVector {
        let mut out = self.clone();
        out.xor_assign(rhs);
        out
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

/// A dense matrix over GF(2), stored row-major with packed rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let wpr = words_for(cols);
        BitMatrix {
            rows,
            cols,
            words_per_row: wpr,
            words: vec![0; rows * wpr],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BitMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut m = BitMatrix::zeros(rows, cols);
        for r in 0..rows {
            let row = BitVector::random(cols, rng);
            m.set_row(r, &row);
        }
        m
    }

    /// Build from rows of equal length. `cols` is explicit so zero-row
    /// matrices keep their shape.
    pub fn from_rows(cols: usize, rows: &[BitVector]) -> Self {
        let mut m = BitMatrix::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "row {r} has length {} != {cols}", row.len());
            m.set_row(r, row);
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
    fn row_words(&self, r: usize) -> &[u64] {
        &self.words[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of range");
        (self.row_words(r)[c / WORD_BITS] >> (c % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of range");
        let idx = r * self.words_per_row + c / WORD_BITS;
        let mask = 1u64 << (c % WORD_BITS);
        if value {
            self.words[idx] |= mask;
        } else {
            self.words[idx] &= !mask;
        }
    }

    pub fn row(&self, r: usize) -> BitVector {
        assert!(r < self.rows, "row {r} out of range");
        BitVector {
            len: self.cols,
            words: self.row_words(r).to_vec(),
        }
    }

    pub fn set_row(&mut self, r: usize, row: &BitVector) {
        assert!(r < self.rows, "row {r} out of range");
        assert_eq!(row.len(), self.cols, "row length mismatch");
        let start = r * self.words_per_row;
        self.words[start..start + self.words_per_row].copy_from_slice(&row.words);
    }

    /// Matrix-vector product over GF(2). `x.len()` must equal `cols`.
    pub fn matvec(&self, x: &BitVector) -> BitVector {
        assert_eq!(
            x.len(),
            self.cols,
            "matvec requires vector length {} to match column count {}",
            x.len(),
            self.cols
        );
        let mut out = BitVector::zeros(self.rows);
        for r in 0..self.rows {
            let mut acc = 0u64;
            for (a, b) in self.row_words(r).iter().zip(&x.words) {
                acc ^= a & b;
            }
            out.set(r, acc.count_ones() % 2 == 1);
        }
        out
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    fn xor_row_into(&mut self, src: usize, dst: usize) {
        let (src_start, dst_start) = (src * self.words_per_row, dst * self.words_per_row);
        for k in 0..self.words_per_row {
            let v = self.words[src_start + k];
            self.words[dst_start + k] ^= v;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for k in 0..self.words_per_row {
            self.words.swap(a * self.words_per_row + k, b * self.words_per_row + k);
        }
    }

    /// Reduced row-echelon form together with the pivot columns.
    pub fn rref(&self) -> (BitMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut next_row = 0;
        for c in 0..m.cols {
            if next_row == m.rows {
                break;
            }
            let Some(p) = (next_row..m.rows).find(|&r| m.get(r, c)) else {
                continue;
            };
            m.swap_rows(p, next_row);
            for r in 0..m.rows {
                if r != next_row && m.get(r, c) {
                    m.xor_row_into(next_row, r);
                }
            }
            pivots.push(c);
            next_row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// A basis of the right kernel: all returned vectors `v` satisfy
    /// `self.matvec(v) = 0`, and the basis has `cols - rank` elements.
    pub fn kernel_basis(&self) -> Vec<BitVector> {
        let (r, pivots) = self.rref();
        let pivot_set: Vec<Option<usize>> = {
            let mut v = vec![None; self.cols];
            for (row_idx, &c) in pivots.iter().enumerate() {
                v[c] = Some(row_idx);
            }
            v
        };
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivot_set[free].is_some() {
                continue;
            }
            let mut v = BitVector::zeros(self.cols);
            v.set(free, true);
            for (row_idx, &pc) in pivots.iter().enumerate() {
                if r.get(row_idx, free) {
                    v.set(pc, true);
                }
            }
            basis.push(v);
        }
        basis
    }

    /// One solution of `self * x = b` with free variables set to zero, or
    /// `None` when the system is inconsistent.
    pub fn solve(&self, b: &BitVector) -> Option<BitVector> {
        assert_eq!(b.len(), self.rows, "solve requires rhs length to match row count");
        // Eliminate on an augmented copy, tracking the rhs separately.
        let mut m = self.clone();
        let mut rhs = b.clone();
        let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
        let mut next_row = 0;
        for c in 0..m.cols {
            if next_row == m.rows {
                break;
            }
            let Some(p) = (next_row..m.rows).find(|&r| m.get(r, c)) else {
                continue;
            };
            m.swap_rows(p, next_row);
            let (bp, bn) = (rhs.get(p), rhs.get(next_row));
            rhs.set(p, bn);
            rhs.set(next_row, bp);
            for r in 0..m.rows {
                if r != next_row && m.get(r, c) {
                    m.xor_row_into(next_row, r);
                    let v = rhs.get(r) ^ rhs.get(next_row);
                    rhs.set(r, v);
                }
            }
            pivots.push((next_row, c));
            next_row += 1;
        }
        // Any leftover nonzero rhs entry on a zero row marks inconsistency.
        for r in next_row..m.rows {
            if rhs.get(r) {
                return None;
            }
        }
        let mut x = BitVector::zeros(self.cols);
        for &(r, c) in &pivots {
            x.set(c, rhs.get(r));
        }
        Some(x)
    }

    /// Canonical byte layout: little-endian u64 row and column counts, then
    /// each row's packed payload in order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for r in 0..self.rows {
            out.extend_from_slice(&self.row(r).payload_bytes());
        }
        out
    }
}

impl fmt::Display for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            writeln!(f, "{}", self.row(r))?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitMatrix({}x{})", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, " {}", self.row(r))?;
        }
        Ok(())
    }
}

/// Sample a uniformly random `rows x cols` matrix `M` with `rank(M) =
/// target_rank`, and (when `annihilated` is a nonzero vector `d`) with
/// `M d = 0`.
///
/// Rows are drawn uniformly from the orthogonal complement of `d` (the whole
/// space when `d` is absent or zero), then the draw is accepted only if the
/// rank matches. For maximal feasible target ranks the acceptance rate is
/// bounded below by prod_{j>=1} (1 - 2^-j) ~ 0.289; the sampler is intended
/// for that regime, and acceptance degrades sharply for lower targets.
pub fn sample_rank_constrained<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    annihilated: Option<&BitVector>,
    target_rank: usize,
    rng: &mut R,
) -> Result<BitMatrix, F2Error> {
    const MAX_TRIES: usize = 1_000_000;
    let constraint = annihilated.filter(|d| {
        assert_eq!(d.len(), cols, "annihilated vector length must equal cols");
        !d.is_zero()
    });
    let effective_cols = cols - usize::from(constraint.is_some());
    let max = rows.min(effective_cols);
    if target_rank > max {
        return Err(F2Error::InfeasibleRank {
            rows,
            cols,
            target: target_rank,
            max,
        });
    }
    let basis: Option<Vec<BitVector>> = constraint.map(|d| {
        let m = BitMatrix::from_rows(cols, std::slice::from_ref(d));
        m.kernel_basis()
    });
    for _ in 0..MAX_TRIES {
        let mut m = BitMatrix::zeros(rows, cols);
        for r in 0..rows {
            let row = match &basis {
                None => BitVector::random(cols, rng),
                Some(basis) => {
                    let coeffs = BitVector::random(basis.len(), rng);
                    let mut acc = BitVector::zeros(cols);
                    for (k, bv) in basis.iter().enumerate() {
                        if coeffs.get(k) {
                            acc.xor_assign(bv);
                        }
                    }
                    acc
                }
            };
            m.set_row(r, &row);
        }
        if m.rank() == target_rank {
            return Ok(m);
        }
    }
    Err(F2Error::RetriesExhausted {
        target: target_rank,
        tries: MAX_TRIES,
    })
}

/// Sample `u` uniformly from `{u : u . x = parity}`. Errors when `x` is zero
/// and `parity` is 1 (the constraint set is empty).
pub fn sample_with_parity<R: Rng + ?Sized>(
    x: &BitVector,
    parity: bool,
    index: usize,
    rng: &mut R,
) -> Result<BitVector, F2Error> {
    if x.is_zero() {
        if parity {
            return Err(F2Error::InfeasibleParity { index });
        }
        return Ok(BitVector::random(x.len(), rng));
    }
    // Fix the last coordinate where x is set; draw the rest freely. This is a
    // bijection between the solution set and assignments of the free bits.
    let anchor = (0..x.len()).rev().find(|&i| x.get(i)).expect("nonzero");
    let mut u = BitVector::random(x.len(), rng);
    u.set(anchor, false);
    let mut need = parity;
    for i in 0..x.len() {
        if i != anchor && x.get(i) && u.get(i) {
            need = !need;
        }
    }
    u.set(anchor, need);
    Ok(u)
}
