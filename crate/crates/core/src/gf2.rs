//! Square GF(2) matrices over at most 64 bits, stored by column.

use std::fmt;

#[derive(Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    dim: usize,
    /// `cols[i]` is the image of basis vector `e_i`.
    cols: Vec<u64>,
}

impl Gf2Matrix {
    pub fn identity(dim: usize) -> Self {
        assert!(dim <= 64, "GF(2) matrices are limited to 64 bits");
        Self {
            dim,
            cols: (0..dim).map(|i| 1u64 << i).collect(),
        }
    }

    pub fn from_columns(cols: Vec<u64>) -> Self {
        assert!(cols.len() <= 64);
        Self { dim: cols.len(), cols }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn column(&self, i: usize) -> u64 {
        self.cols[i]
    }

    pub fn apply(&self, x: u64) -> u64 {
        let mut out = 0;
        let mut rest = x;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            out ^= self.cols[i];
            rest &= rest - 1;
        }
        out
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Self) -> Self {
        assert_eq!(self.dim, first.dim);
        Self {
            dim: self.dim,
            cols: first.cols.iter().map(|&c| self.apply(c)).collect(),
        }
    }

    /// Row `i` as a bit mask over input coordinates.
    pub fn row(&self, i: usize) -> u64 {
        self.cols
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &c)| acc | (((c >> i) & 1) << j))
    }

    pub fn rank(&self) -> usize {
        let mut rows: Vec<u64> = self.cols.clone();
        let mut rank = 0;
        for bit in 0..self.dim {
            let Some(p) = (rank..rows.len()).find(|&r| (rows[r] >> bit) & 1 == 1) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && (*row >> bit) & 1 == 1 {
                    *row ^= pivot;
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn is_invertible(&self) -> bool {
        self.rank() == self.dim
    }

    /// Inverse by Gauss-Jordan elimination, `None` when singular.
    pub fn inverse(&self) -> Option<Self> {
        // Row-reduce [M | I] with rows stored as (left, right) bit masks.
        let mut rows: Vec<(u64, u64)> = (0..self.dim).map(|i| (self.row(i), 1u64 << i)).collect();
        for bit in 0..self.dim {
            let p = (bit..self.dim).find(|&r| (rows[r].0 >> bit) & 1 == 1)?;
            rows.swap(bit, p);
            let pivot = rows[bit];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != bit && (row.0 >> bit) & 1 == 1 {
                    row.0 ^= pivot.0;
                    row.1 ^= pivot.1;
                }
            }
        }
        // rows[i].1 is row i of the inverse.
        let cols = (0..self.dim)
            .map(|j| {
                rows.iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, r)| acc | (((r.1 >> j) & 1) << i))
            })
            .collect();
        Some(Self { dim: self.dim, cols })
    }

    /// Byte-indexed lookup tables for fast repeated application.
    pub fn tables(&self) -> ByteTables {
        let chunks = self.dim.div_ceil(8);
        let mut tables = vec![[0u64; 256]; chunks];
        for (c, table) in tables.iter_mut().enumerate() {
            for byte in 0..256u64 {
                table[byte as usize] = self.apply((byte << (8 * c)) & mask(self.dim));
            }
        }
        ByteTables { tables }
    }
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Gf2Matrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row = self.row(i);
            let line: String = (0..self.dim)
                .map(|j| if (row >> j) & 1 == 1 { '1' } else { '.' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

fn mask(dim: usize) -> u64 {
    if dim >= 64 {
        u64::MAX
    } else {
        (1u64 << dim) - 1
    }
}

/// Precomputed per-byte images of a [`Gf2Matrix`].
#[derive(Debug, Clone)]
pub struct ByteTables {
    tables: Vec<[u64; 256]>,
}

impl ByteTables {
    #[inline]
    pub fn apply(&self, x: u64) -> u64 {
        let mut out = 0;
        for (c, table) in self.tables.iter().enumerate() {
            out ^= table[((x >> (8 * c)) & 0xff) as usize];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_composition() {
        let id = Gf2Matrix::identity(6);
        assert_eq!(id.apply(0b101101), 0b101101);
        // x0 ^= x1
        let mut cols: Vec<u64> = (0..6).map(|i| 1u64 << i).collect();
        cols[1] |= 1;
        let m = Gf2Matrix::from_columns(cols);
        assert_eq!(m.apply(0b10), 0b11);
        assert_eq!(m.after(&m), id);
        assert!(m.is_invertible());
        assert_eq!(m.row(0), 0b11);
        assert_eq!(m.inverse().unwrap(), m);
    }

    #[test]
    fn rank_detects_singular() {
        let m = Gf2Matrix::from_columns(vec![0b011, 0b110, 0b101]);
        assert_eq!(m.rank(), 2);
        assert!(!m.is_invertible());
        assert!(m.inverse().is_none());
    }

    #[test]
    fn inverse_round_trips() {
        let m = Gf2Matrix::from_columns(vec![0b0001, 0b0011, 0b1110, 0b1011]);
        let inv = m.inverse().unwrap();
        assert_eq!(inv.after(&m), Gf2Matrix::identity(4));
        assert_eq!(m.after(&inv), Gf2Matrix::identity(4));
    }

    #[test]
    fn tables_match_apply() {
        let m = Gf2Matrix::from_columns(
            (0..20)
                .map(|i| (0x9e37_79b9u64.rotate_left(i) ^ (1 << i)) & 0xfffff)
                .collect(),
        );
        let t = m.tables();
        for x in (0..1u64 << 20).step_by(997) {
            assert_eq!(t.apply(x), m.apply(x));
        }
    }
}
