//! Dense integer matrices: congruence transforms, determinants and
//! integer row echelon forms.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A dense matrix over Z, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMat {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMat {
    pub fn zero(rows: usize, cols: usize) -> IntMat {
        IntMat { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> IntMat {
        let mut m = IntMat::zero(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<IntMat> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidInput("ragged integer matrix".into()));
        }
        Ok(IntMat { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> IntMat {
        let mut t = IntMat::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut out = IntMat::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Exact determinant by expansion over big integers (square matrices).
    pub fn det(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let n = self.rows;
        // fraction-free Gaussian elimination (Bareiss)
        let mut m: Vec<BigInt> = self.data.iter().map(|&v| BigInt::from(v)).collect();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n {
            if m[k * n + k].is_zero() {
                let Some(p) = (k + 1..n).find(|&i| !m[i * n + k].is_zero()) else {
                    return BigInt::zero();
                };
                for j in 0..n {
                    m.swap(k * n + j, p * n + j);
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &m[i * n + j] * &m[k * n + k] - &m[i * n + k] * &m[k * n + j];
                    m[i * n + j] = num / &prev;
                }
                m[i * n + k] = BigInt::zero();
            }
            prev = m[k * n + k].clone();
        }
        sign * m[(n - 1) * n + (n - 1)].clone()
    }

    pub fn is_unimodular(&self) -> bool {
        self.rows == self.cols && self.det().abs().is_one()
    }

    /// Row echelon form over Z via unimodular row operations only
    /// (swaps, negations, integer shears), columns processed left to
    /// right. Returns the echelon matrix and the `(row, col, pivot)`
    /// triples, with pivots positive.
    ///
    /// The product of the pivots does not depend on the row operations
    /// chosen; [`IntMat::row_echelon_alt`] reduces with a different
    /// strategy so the two can be compared.
    pub fn row_echelon(&self) -> (IntMat, Vec<(usize, usize, i64)>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut next_row = 0;
        for col in 0..m.cols {
            if next_row >= m.rows {
                break;
            }
            // euclidean elimination: smallest entry up, reduce below, repeat
            loop {
                let Some(best) = (next_row..m.rows)
                    .filter(|&i| m.get(i, col) != 0)
                    .min_by_key(|&i| m.get(i, col).unsigned_abs())
                else {
                    break;
                };
                if best != next_row {
                    m.swap_rows(next_row, best);
                }
                let p = m.get(next_row, col);
                let mut done = true;
                for i in next_row + 1..m.rows {
                    let v = m.get(i, col);
                    if v != 0 {
                        let q = v.div_euclid(p);
                        for j in 0..m.cols {
                            let w = m.get(i, j) - q * m.get(next_row, j);
                            m.set(i, j, w);
                        }
                        if m.get(i, col) != 0 {
                            done = false;
                        }
                    }
                }
                if done {
                    break;
                }
            }
            if m.get(next_row, col) != 0 {
                if m.get(next_row, col) < 0 {
                    m.negate_row(next_row);
                }
                pivots.push((next_row, col, m.get(next_row, col)));
                next_row += 1;
            }
        }
        (m, pivots)
    }

    /// Alternative echelon reduction (pairwise extended-gcd row
    /// combinations, scanning bottom-up). Same pivot product as
    /// [`IntMat::row_echelon`].
    pub fn row_echelon_alt(&self) -> (IntMat, Vec<(usize, usize, i64)>) {
        use num_integer::Integer;
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut next_row = 0;
        for col in 0..m.cols {
            if next_row >= m.rows {
                break;
            }
            for i in (next_row + 1..m.rows).rev() {
                let (a, b) = (m.get(next_row, col), m.get(i, col));
                if b == 0 {
                    continue;
                }
                if a == 0 {
                    m.swap_rows(next_row, i);
                    continue;
                }
                // unimodular 2x2: (row_nr, row_i) <- (x*row_nr + y*row_i, ...)
                let e = i64::extended_gcd(&a, &b);
                let (g, x, y) = (e.gcd, e.x, e.y);
                for j in 0..m.cols {
                    let (u, v) = (m.get(next_row, j), m.get(i, j));
                    m.set(next_row, j, x * u + y * v);
                    m.set(i, j, -(b / g) * u + (a / g) * v);
                }
            }
            if m.get(next_row, col) != 0 {
                if m.get(next_row, col) < 0 {
                    m.negate_row(next_row);
                }
                pivots.push((next_row, col, m.get(next_row, col)));
                next_row += 1;
            }
        }
        (m, pivots)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            let (x, y) = (self.get(a, j), self.get(b, j));
            self.set(a, j, y);
            self.set(b, j, x);
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            self.set(i, j, -self.get(i, j));
        }
    }
}

impl Serialize for IntMat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[i64]> =
            (0..self.rows).map(|i| &self.data[i * self.cols..(i + 1) * self.cols]).collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntMat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<i64>>::deserialize(deserializer)?;
        IntMat::from_rows(rows).map_err(D::Error::custom)
    }
}

impl std::fmt::Display for IntMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.rows {
            for j in 0..self.cols {
                write!(f, "{:>5}", self.get(i, j))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_and_unimodularity() {
        let id = IntMat::identity(4);
        assert_eq!(id.det(), BigInt::one());
        let m = IntMat::from_rows(vec![vec![2, 1], vec![1, 1]]).unwrap();
        assert!(m.is_unimodular());
        let s = IntMat::from_rows(vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(s.det(), BigInt::from(-1));
        let sing = IntMat::from_rows(vec![vec![1, 2], vec![2, 4]]).unwrap();
        assert_eq!(sing.det(), BigInt::zero());
    }

    #[test]
    fn echelon_pivot_product_is_strategy_independent() {
        let m = IntMat::from_rows(vec![
            vec![4, -1, 1, -6],
            vec![0, 3, 1, 2],
            vec![0, 0, 0, 0],
        ])
        .unwrap();
        let (_, piv) = m.row_echelon();
        let b: i64 = piv.iter().map(|&(_, _, p)| p).product();
        assert_eq!(b, 12);
        let (_, piv2) = m.row_echelon_alt();
        let b2: i64 = piv2.iter().map(|&(_, _, p)| p).product();
        assert_eq!(b2, 12);

        let m = IntMat::from_rows(vec![vec![6, 4, 1], vec![2, 8, 3], vec![4, -4, -2]]).unwrap();
        let p1: i64 = m.row_echelon().1.iter().map(|&(_, _, p)| p).product();
        let p2: i64 = m.row_echelon_alt().1.iter().map(|&(_, _, p)| p).product();
        assert_eq!(p1, p2);
    }
}
