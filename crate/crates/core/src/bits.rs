//! Bit-packed GF(2) rows.

/// A fixed-length bit vector stored in 64-bit words, bit `i` in word `i / 64`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitRow {
    len: usize,
    words: Vec<u64>,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        BitRow { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut r = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b & 1 == 1 {
                r.set(i, true);
            }
        }
        r
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        let m = 1u64 << (i & 63);
        if v {
            self.words[i >> 6] |= m;
        } else {
            self.words[i >> 6] &= !m;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    pub fn xor_assign(&mut self, other: &BitRow) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    /// XOR `other` into `self`, skipping the first `start_word` words.
    pub fn xor_assign_from(&mut self, other: &BitRow, start_word: usize) {
        for (a, b) in self.words[start_word..].iter_mut().zip(&other.words[start_word..]) {
            *a ^= *b;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }
}

/// Column-major view of a set of words: column `j` holds bit `j` of every word.
/// Parity of a position set over all words is then a XOR of columns.
#[derive(Clone, Debug)]
pub struct Columns {
    rows: usize,
    cols: Vec<BitRow>,
}

impl Columns {
    pub fn from_rows(rows: &[BitRow], width: usize) -> Self {
        let mut cols = vec![BitRow::zeros(rows.len()); width];
        for (r, row) in rows.iter().enumerate() {
            for j in row.ones() {
                cols[j].set(r, true);
            }
        }
        Columns { rows: rows.len(), cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> &BitRow {
        &self.cols[j]
    }

    /// Number of rows on which the XOR of the given 0-based columns is zero.
    pub fn zero_parity_count(&self, cols: &[usize]) -> usize {
        let nw = self.rows.div_ceil(64);
        let mut ones = 0usize;
        for w in 0..nw {
            let mut acc = 0u64;
            for &c in cols {
                acc ^= self.cols[c].words[w];
            }
            ones += acc.count_ones() as usize;
        }
        self.rows - ones
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_and_ones() {
        let mut r = BitRow::zeros(130);
        for i in [0, 63, 64, 129] {
            r.set(i, true);
        }
        assert_eq!(r.ones().collect::<Vec<_>>(), vec![0, 63, 64, 129]);
        assert_eq!(r.count_ones(), 4);
        r.flip(63);
        assert!(!r.get(63));
    }

    #[test]
    fn columns_parity() {
        let rows = vec![BitRow::from_bits(&[1, 1, 0]), BitRow::from_bits(&[0, 1, 1])];
        let c = Columns::from_rows(&rows, 3);
        assert_eq!(c.zero_parity_count(&[0, 1]), 1);
        assert_eq!(c.zero_parity_count(&[0, 1, 2]), 2);
    }
}
