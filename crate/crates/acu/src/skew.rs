//! Skew-symmetric matrices over Q/Z and Z: standard block forms,
//! congruence normal forms with unimodular transform witnesses, row-space
//! orders and the sigma invariant.
//!
//! A matrix `D` in `T(n, Q/Z)` encodes the commutator phases of an
//! almost-commuting tuple; congruence `D -> A^T D A` with `A` in
//! `GL(n, Z)` corresponds to a basis change of `Z^n`. Every such `D` is
//! congruent to a block form with nonzero values `d_1, ..., d_t` at the
//! positions `(t+k, k)` and orders forming a divisibility chain
//! `|d_{k+1}| divides |d_k|`. Over Z the analogous form places positive
//! `c_k` at `(k, t+k)` with the chain running upward, `c_k | c_{k+1}`.

use std::collections::{HashSet, VecDeque};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intmat::IntMat;
use crate::rat1::{mod_inverse, Rat1};

/// An n-by-n skew-symmetric matrix with entries in Q/Z, stored with full
/// redundancy so `entry(j, i) = -entry(i, j)` always holds structurally.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SkewQZ {
    n: usize,
    entries: Vec<Rat1>,
}

impl SkewQZ {
    pub fn zero(n: usize) -> SkewQZ {
        SkewQZ { n, entries: vec![Rat1::ZERO; n * n] }
    }

    /// Validates skew-symmetry (zero diagonal, `e_ji = -e_ij`).
    pub fn from_entries(n: usize, rows: Vec<Vec<Rat1>>) -> Result<SkewQZ> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n}"),
                found: format!("{} rows", rows.len()),
            });
        }
        let m = SkewQZ { n, entries: rows.into_iter().flatten().collect() };
        for i in 0..n {
            // 2-torsion satisfies x = -x, so the diagonal needs its own check
            if !m.entry(i, i).is_zero() {
                return Err(Error::NotSkewSymmetric { row: i, col: i });
            }
            for j in 0..n {
                if m.entry(j, i) != m.entry(i, j).neg() {
                    return Err(Error::NotSkewSymmetric { row: j, col: i });
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> Rat1 {
        self.entries[i * self.n + j]
    }

    /// Sets `(i, j)` to `v` and `(j, i)` to `-v`; `i != j`.
    pub fn set_pair(&mut self, i: usize, j: usize, v: Rat1) {
        assert_ne!(i, j, "diagonal entries of a skew matrix are zero");
        self.entries[i * self.n + j] = v;
        self.entries[j * self.n + i] = v.neg();
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Rat1::is_zero)
    }

    /// Least common multiple of all entry denominators (1 for the zero
    /// matrix); every entry lies in the cyclic subgroup `(1/L) Z / Z`.
    pub fn denominator_lcm(&self) -> u64 {
        self.entries.iter().fold(1u64, |l, e| l.lcm(&(e.den() as u64)))
    }

    pub fn rows(&self) -> Vec<Vec<Rat1>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.entry(i, j)).collect()).collect()
    }
}

/// An n-by-n skew-symmetric integer matrix (a k-invariant coefficient
/// matrix of a central extension).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkewZ {
    n: usize,
    entries: Vec<i64>,
}

impl SkewZ {
    pub fn zero(n: usize) -> SkewZ {
        SkewZ { n, entries: vec![0; n * n] }
    }

    pub fn from_entries(n: usize, rows: Vec<Vec<i64>>) -> Result<SkewZ> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n}"),
                found: format!("{} rows", rows.len()),
            });
        }
        let m = SkewZ { n, entries: rows.into_iter().flatten().collect() };
        for i in 0..n {
            for j in 0..n {
                if m.entry(j, i) != -m.entry(i, j) {
                    return Err(Error::NotSkewSymmetric { row: j, col: i });
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.n + j]
    }

    pub fn set_pair(&mut self, i: usize, j: usize, v: i64) {
        assert_ne!(i, j);
        self.entries[i * self.n + j] = v;
        self.entries[j * self.n + i] = -v;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0)
    }

    /// Gcd of all entries; 0 for the zero matrix.
    pub fn entry_gcd(&self) -> u64 {
        self.entries.iter().fold(0u64, |g, &e| g.gcd(&e.unsigned_abs()))
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.entry(i, j)).collect()).collect()
    }
}

/// The standard block form `D_n(d_1, ..., d_t)`: value `d_k` at position
/// `(t+k, k)`, `-d_k` at `(k, t+k)`, zero elsewhere (0-indexed: `d_k` at
/// `(t+k-1, k-1)`).
pub fn standard_block(ds: &[Rat1], n: usize) -> Result<SkewQZ> {
    let t = ds.len();
    if 2 * t > n {
        return Err(Error::InvalidBlock(format!("2t = {} exceeds n = {n}", 2 * t)));
    }
    if ds.iter().any(Rat1::is_zero) {
        return Err(Error::InvalidBlock("block values must be nonzero".into()));
    }
    Ok(block_matrix(ds, n))
}

/// Like [`standard_block`] but zero block values are permitted (their
/// positions simply hold zero). Used where block data arises formally,
/// e.g. `D_n(-c_1 q, ..., -c_t q)` with some `c_i q` vanishing in Q/Z.
pub(crate) fn block_matrix(ds: &[Rat1], n: usize) -> SkewQZ {
    let t = ds.len();
    assert!(2 * t <= n);
    let mut m = SkewQZ::zero(n);
    for (k, d) in ds.iter().enumerate() {
        if !d.is_zero() {
            m.set_pair(t + k, k, *d);
        }
    }
    m
}

/// The integer block form with `c_k` at `(k, t+k)` above the diagonal.
pub fn standard_block_z(cs: &[u64], n: usize) -> Result<SkewZ> {
    let t = cs.len();
    if 2 * t > n {
        return Err(Error::InvalidBlock(format!("2t = {} exceeds n = {n}", 2 * t)));
    }
    if cs.iter().any(|&c| c == 0) {
        return Err(Error::InvalidBlock("block values must be nonzero".into()));
    }
    let mut m = SkewZ::zero(n);
    for (k, &c) in cs.iter().enumerate() {
        m.set_pair(k, t + k, c as i64);
    }
    Ok(m)
}

/// Result of pushing a skew matrix through a congruence `A^T D A`.
///
/// `congruent` records whether `A` was unimodular, i.e. whether the result
/// is genuinely congruent to the input rather than merely its image.
#[derive(Debug, Clone)]
pub struct CongruenceApplied {
    pub matrix: SkewQZ,
    pub congruent: bool,
}

/// Computes `A^T D A` entrywise in Q/Z. Non-unimodular `A` is accepted
/// but flagged via [`CongruenceApplied::congruent`].
pub fn apply_congruence(d: &SkewQZ, a: &IntMat) -> Result<CongruenceApplied> {
    let n = d.n();
    if a.rows() != n || a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    // two-pass product keeps this O(n^3)
    let mut t = vec![Rat1::ZERO; n * n]; // t = D * A
    for i in 0..n {
        for l in 0..n {
            let mut acc = Rat1::ZERO;
            for j in 0..n {
                acc = acc.add(&d.entry(i, j).scale(a.get(j, l)));
            }
            t[i * n + l] = acc;
        }
    }
    let mut out = SkewQZ::zero(n);
    for k in 0..n {
        for l in 0..n {
            let mut acc = Rat1::ZERO;
            for i in 0..n {
                acc = acc.add(&t[i * n + l].scale(a.get(i, k)));
            }
            out.entries[k * n + l] = acc;
        }
    }
    Ok(CongruenceApplied { matrix: out, congruent: a.is_unimodular() })
}

/// Congruence normal form of a matrix in `T(n, Q/Z)`: block values `ds`
/// with the divisibility chain `|d_{k+1}|` dividing `|d_k|`, and a
/// unimodular `transform` with `transform^T * D * transform`
/// equal to `standard_block(ds, n)` exactly.
///
/// Block values are normalized to the canonical generator `1/|d_k|`
/// whenever a congruence can reach it; when `2t = n` the determinant
/// constraint pins the product of the block values up to sign, so the
/// last value may be a non-canonical generator of its cyclic group.
#[derive(Debug, Clone, Serialize)]
pub struct NormalFormQZ {
    pub t: usize,
    pub ds: Vec<Rat1>,
    pub transform: IntMat,
}

impl NormalFormQZ {
    /// Orders `|d_1|, ..., |d_t|` (non-increasing along the chain).
    pub fn orders(&self) -> Vec<u64> {
        self.ds.iter().map(Rat1::order).collect()
    }

    /// `sigma = |d_1| * ... * |d_t|`.
    pub fn sigma(&self) -> BigUint {
        self.ds.iter().map(|d| BigUint::from(d.order())).product()
    }

    /// Full witness check: unimodularity, the divisibility chain and the
    /// exact round trip onto the standard block.
    pub fn verify(&self, original: &SkewQZ) -> bool {
        let n = original.n();
        if 2 * self.t > n || self.ds.len() != self.t {
            return false;
        }
        if self.ds.iter().any(Rat1::is_zero) {
            return false;
        }
        let chain =
            self.ds.windows(2).all(|w| w[0].order() % w[1].order() == 0);
        let unimodular = self.transform.is_unimodular();
        let target = block_matrix(&self.ds, n);
        let round_trip = match apply_congruence(original, &self.transform) {
            Ok(c) => c.matrix == target,
            Err(_) => false,
        };
        chain && unimodular && round_trip
    }
}

/// Integer congruence normal form: positive `cs` with `c_k | c_{k+1}` and
/// a unimodular `transform` carrying the input onto the block with `c_k`
/// at `(k, t+k)`.
#[derive(Debug, Clone, Serialize)]
pub struct NormalFormZ {
    pub t: usize,
    pub cs: Vec<u64>,
    pub transform: IntMat,
}

impl NormalFormZ {
    pub fn verify(&self, original: &SkewZ) -> bool {
        let n = original.n();
        if 2 * self.t > n || self.cs.len() != self.t {
            return false;
        }
        if self.cs.iter().any(|&c| c == 0) {
            return false;
        }
        let chain = self.cs.windows(2).all(|w| w[1] % w[0] == 0);
        if !chain || !self.transform.is_unimodular() {
            return false;
        }
        // A^T W A computed over Z
        let a = &self.transform;
        let product = a.transpose().mul(&int_of_skew(original)).mul(a);
        let Ok(target) = standard_block_z(&self.cs, n) else { return false };
        int_of_skew(&target) == product
    }
}

fn int_of_skew(w: &SkewZ) -> IntMat {
    let mut m = IntMat::zero(w.n(), w.n());
    for i in 0..w.n() {
        for j in 0..w.n() {
            m.set(i, j, w.entry(i, j));
        }
    }
    m
}

// ---------------------------------------------------------------------
// reduction engine, shared between Q/Z and Z entries
// ---------------------------------------------------------------------

trait SkewEntry: Copy + Eq + std::fmt::Debug {
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, k: i64) -> Self;
    /// Pivot preference; strictly increases on every gcd combination.
    fn pivot_rank(&self) -> u64;
    /// `Some(k)` with `k * pivot = x` when `x` lies in the cyclic group
    /// generated by the pivot, enabling a pure shear.
    fn shear_multiplier(pivot: &Self, x: &Self) -> Option<i64>;
    /// Unimodular `[[s, t], [u, v]]` (det 1) sending the pivot/other pair
    /// to (combined generator, zero).
    fn gcd_pair(pivot: &Self, x: &Self) -> [[i64; 2]; 2];
    /// Chain predicate: does `later` divide `earlier` in the sense of the
    /// ring's normal form ordering?
    fn chain_ok(earlier: &Self, later: &Self) -> bool;
    /// Sort key for arranging blocks before the chain scan.
    fn block_sort_key(&self) -> u64;
}

impl SkewEntry for Rat1 {
    fn is_zero(&self) -> bool {
        Rat1::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        Rat1::add(self, other)
    }
    fn neg(&self) -> Self {
        Rat1::neg(self)
    }
    fn scale(&self, k: i64) -> Self {
        Rat1::scale(self, k)
    }
    fn pivot_rank(&self) -> u64 {
        self.order()
    }
    fn shear_multiplier(pivot: &Self, x: &Self) -> Option<i64> {
        let o = pivot.den();
        let ox = x.den();
        if o % ox != 0 {
            return None;
        }
        let inv = mod_inverse(pivot.num(), o)?;
        let c = (x.num() as i128 * (o / ox) as i128).rem_euclid(o as i128);
        Some((c * inv as i128).rem_euclid(o as i128) as i64)
    }
    fn gcd_pair(pivot: &Self, x: &Self) -> [[i64; 2]; 2] {
        let l = pivot.den().lcm(&x.den());
        let a = pivot.num() * (l / pivot.den());
        let b = x.num() * (l / x.den());
        let e = i64::extended_gcd(&a, &b);
        // op-matrix support: rows transform as (s*pivot + t*other, 0)
        [[e.x, -(b / e.gcd)], [e.y, a / e.gcd]]
    }
    fn chain_ok(earlier: &Self, later: &Self) -> bool {
        earlier.order() % later.order() == 0
    }
    fn block_sort_key(&self) -> u64 {
        // descending order along the chain: larger orders first
        u64::MAX - self.order()
    }
}

impl SkewEntry for i64 {
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, k: i64) -> Self {
        self * k
    }
    fn pivot_rank(&self) -> u64 {
        // smallest absolute value preferred
        u64::MAX - self.unsigned_abs()
    }
    fn shear_multiplier(pivot: &Self, x: &Self) -> Option<i64> {
        (x % pivot == 0).then(|| x / pivot)
    }
    fn gcd_pair(pivot: &Self, x: &Self) -> [[i64; 2]; 2] {
        let e = i64::extended_gcd(pivot, x);
        [[e.x, -(x / e.gcd)], [e.y, pivot / e.gcd]]
    }
    fn chain_ok(earlier: &Self, later: &Self) -> bool {
        later % earlier == 0
    }
    fn block_sort_key(&self) -> u64 {
        // ascending absolute value along the chain
        self.unsigned_abs()
    }
}

struct Reduction<E> {
    n: usize,
    m: Vec<E>,
    a: IntMat,
}

impl<E: SkewEntry> Reduction<E> {
    fn new(n: usize, entries: Vec<E>) -> Self {
        Reduction { n, m: entries, a: IntMat::identity(n) }
    }

    fn at(&self, i: usize, j: usize) -> E {
        self.m[i * self.n + j]
    }

    fn put(&mut self, i: usize, j: usize, v: E) {
        self.m[i * self.n + j] = v;
    }

    /// Congruent index swap i <-> j.
    fn swap(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        let n = self.n;
        for c in 0..n {
            self.m.swap(i * n + c, j * n + c);
        }
        for r in 0..n {
            self.m.swap(r * n + i, r * n + j);
        }
        for r in 0..self.a.rows() {
            let (x, y) = (self.a.get(r, i), self.a.get(r, j));
            self.a.set(r, i, y);
            self.a.set(r, j, x);
        }
    }

    /// Congruent shear: row/col `target += k * (row/col source)`.
    fn shear(&mut self, target: usize, source: usize, k: i64) {
        if k == 0 {
            return;
        }
        let n = self.n;
        for c in 0..n {
            let v = self.at(target, c).add(&self.at(source, c).scale(k));
            self.put(target, c, v);
        }
        for r in 0..n {
            let v = self.at(r, target).add(&self.at(r, source).scale(k));
            self.put(r, target, v);
        }
        for r in 0..self.a.rows() {
            let v = self.a.get(r, target) + k * self.a.get(r, source);
            self.a.set(r, target, v);
        }
    }

    /// Congruent index negation.
    fn negate(&mut self, i: usize) {
        let n = self.n;
        for c in 0..n {
            let v = self.at(i, c).neg();
            self.put(i, c, v);
        }
        for r in 0..n {
            let v = self.at(r, i).neg();
            self.put(r, i, v);
        }
        for r in 0..self.a.rows() {
            self.a.set(r, i, -self.a.get(r, i));
        }
    }

    /// General congruence supported on indices (i, j): the op matrix E is
    /// the identity except `E[i][i], E[i][j], E[j][i], E[j][j] = e[0][0],
    /// e[0][1], e[1][0], e[1][1]`; applies `M <- E^T M E`, `A <- A E`.
    fn two_op(&mut self, i: usize, j: usize, e: [[i64; 2]; 2]) {
        debug_assert_eq!((e[0][0] * e[1][1] - e[0][1] * e[1][0]).abs(), 1);
        let n = self.n;
        for c in 0..n {
            let (x, y) = (self.at(i, c), self.at(j, c));
            self.put(i, c, x.scale(e[0][0]).add(&y.scale(e[1][0])));
            self.put(j, c, x.scale(e[0][1]).add(&y.scale(e[1][1])));
        }
        for r in 0..n {
            let (x, y) = (self.at(r, i), self.at(r, j));
            self.put(r, i, x.scale(e[0][0]).add(&y.scale(e[1][0])));
            self.put(r, j, x.scale(e[0][1]).add(&y.scale(e[1][1])));
        }
        for r in 0..self.a.rows() {
            let (x, y) = (self.a.get(r, i), self.a.get(r, j));
            self.a.set(r, i, e[0][0] * x + e[1][0] * y);
            self.a.set(r, j, e[0][1] * x + e[1][1] * y);
        }
    }

    /// Reduces to consecutive 2x2 blocks at `(1,0), (3,2), ...`; returns
    /// the block values found at `(2b+1, 2b)`.
    fn reduce_consecutive(&mut self) -> Vec<E> {
        let n = self.n;
        let mut blocks = Vec::new();
        let mut bs = 0;
        while bs + 1 < n {
            // pivot: maximal rank, ties to the lexicographically smallest
            // (i, j) in the strict lower triangle of the complement
            let mut pivot: Option<(usize, usize, u64)> = None;
            for i in bs..n {
                for j in bs..i {
                    let v = self.at(i, j);
                    if v.is_zero() {
                        continue;
                    }
                    let rank = v.pivot_rank();
                    if pivot.map_or(true, |(_, _, r)| rank > r) {
                        pivot = Some((i, j, rank));
                    }
                }
            }
            let Some((mut i0, j0, _)) = pivot else { break };
            if j0 != bs {
                self.swap(j0, bs);
                if i0 == bs {
                    i0 = j0;
                }
            }
            if i0 != bs + 1 {
                self.swap(i0, bs + 1);
            }
            debug_assert!(!self.at(bs + 1, bs).is_zero());

            let mut guard = 0usize;
            loop {
                // clear column bs below the block with pivot row bs+1
                for i in bs + 2..n {
                    let x = self.at(i, bs);
                    if x.is_zero() {
                        continue;
                    }
                    let d = self.at(bs + 1, bs);
                    match E::shear_multiplier(&d, &x) {
                        Some(k) => self.shear(i, bs + 1, -k),
                        None => self.two_op(bs + 1, i, E::gcd_pair(&d, &x)),
                    }
                    debug_assert!(self.at(i, bs).is_zero());
                }
                // clear column bs+1 with pivot row bs (entry -d)
                for i in bs + 2..n {
                    let x = self.at(i, bs + 1);
                    if x.is_zero() {
                        continue;
                    }
                    let e = self.at(bs, bs + 1);
                    match E::shear_multiplier(&e, &x) {
                        Some(k) => self.shear(i, bs, -k),
                        None => self.two_op(bs, i, E::gcd_pair(&e, &x)),
                    }
                    debug_assert!(self.at(i, bs + 1).is_zero());
                }
                let clear = (bs + 2..n)
                    .all(|i| self.at(i, bs).is_zero() && self.at(i, bs + 1).is_zero());
                if clear {
                    break;
                }
                guard += 1;
                assert!(guard < 10_000, "block clearing failed to terminate");
            }
            blocks.push(self.at(bs + 1, bs));
            bs += 2;
        }
        blocks
    }

    /// Swap block `i` (indices 2i, 2i+1) with block `j` in the
    /// consecutive layout.
    fn swap_blocks(&mut self, i: usize, j: usize) {
        self.swap(2 * i, 2 * j);
        self.swap(2 * i + 1, 2 * j + 1);
    }

    /// Full reduction: consecutive blocks, sorted, with the divisibility
    /// chain enforced by merge-and-rereduce.
    fn reduce_chain(&mut self) -> Vec<E> {
        let mut guard = 0usize;
        loop {
            let mut blocks = self.reduce_consecutive();
            // selection sort by the ring's chain ordering
            for i in 0..blocks.len() {
                let best = (i..blocks.len())
                    .min_by_key(|&k| blocks[k].block_sort_key())
                    .unwrap();
                if best != i {
                    self.swap_blocks(i, best);
                    blocks.swap(i, best);
                }
            }
            let violation = (0..blocks.len().saturating_sub(1))
                .find(|&k| !E::chain_ok(&blocks[k], &blocks[k + 1]));
            match violation {
                None => return blocks,
                Some(k) => {
                    // couple the two blocks and reduce again; the pair of
                    // orders (a, b) becomes (lcm, gcd)
                    self.shear(2 * k, 2 * (k + 1), 1);
                    guard += 1;
                    assert!(guard < 10_000, "chain normalization failed to terminate");
                }
            }
        }
    }

    /// Moves consecutive blocks `(2k, 2k+1)` to the interleaved layout
    /// `(k, t+k)` used by the standard forms.
    fn interleave(&mut self, t: usize) {
        let n = self.n;
        let mut target: Vec<usize> = (0..n).collect(); // new position of old index
        for k in 0..t {
            target[2 * k] = k;
            target[2 * k + 1] = t + k;
        }
        // realize the permutation as a sequence of swaps
        let mut pos: Vec<usize> = (0..n).collect(); // pos[old] = current index
        let mut at: Vec<usize> = (0..n).collect(); // at[index] = old
        for old in 0..n {
            let want = target[old];
            let cur = pos[old];
            if cur != want {
                self.swap(cur, want);
                let displaced = at[want];
                at.swap(cur, want);
                pos[old] = want;
                pos[displaced] = cur;
            }
        }
    }
}

/// Lifts `u0` mod `modulus` to a representative coprime to `l`.
fn coprime_lift(u0: i64, modulus: i64, l: i64) -> i64 {
    let mut u = u0.rem_euclid(modulus);
    if u == 0 {
        u = modulus; // only when modulus = 1
    }
    let mut k = 0;
    loop {
        let cand = u + k * modulus;
        if cand.gcd(&l) == 1 {
            return cand;
        }
        k += 1;
        assert!(k < 10_000, "no coprime lift found");
    }
}

/// A 2x2 integer matrix with determinant 1 congruent to
/// `diag(u, u^{-1})` mod `l` (Whitehead's lemma made explicit).
fn unit_twist_matrix(u: i64, l: i64) -> [[i64; 2]; 2] {
    let a = u.rem_euclid(l);
    let uinv = mod_inverse(u, l).expect("u must be a unit mod l");
    let b = (-uinv).rem_euclid(l);
    // E12(a) * E21(b) * E12(a) * [[0,-1],[1,0]]
    let m1 = [[1 + a * b, a * (2 + a * b)], [b, 1 + a * b]];
    [[m1[0][1], -m1[0][0]], [m1[1][1], -m1[1][0]]]
}

/// Computes the congruence normal form over Q/Z. See [`NormalFormQZ`].
pub fn congruence_normal_form(d: &SkewQZ) -> NormalFormQZ {
    let n = d.n();
    if d.is_zero() {
        return NormalFormQZ { t: 0, ds: Vec::new(), transform: IntMat::identity(n) };
    }
    let l = d.denominator_lcm() as i64;
    let mut red = Reduction::new(n, d.entries.clone());
    let blocks = red.reduce_chain();
    let t = blocks.len();

    // normalize block values to the canonical generator 1/order where a
    // unimodular congruence can reach it
    for k in 0..t {
        let v = red.at(2 * k + 1, 2 * k);
        let o = v.den();
        if v.num() == 1 {
            continue;
        }
        let helper = if 2 * t < n {
            Some(2 * t) // a radical direction absorbs the unit twist
        } else if k + 1 < t {
            Some(2 * (k + 1)) // push the unit into the next block
        } else {
            None
        };
        match helper {
            Some(z) => {
                let u0 = mod_inverse(v.num(), o).expect("reduced fraction");
                let u = coprime_lift(u0, o, l);
                red.two_op(2 * k, z, unit_twist_matrix(u, l));
                debug_assert_eq!(red.at(2 * k + 1, 2 * k), Rat1::of(1, o));
            }
            None => {
                // determinant-pinned last block: only the sign is free
                if v.num() > o - v.num() {
                    red.negate(2 * k);
                }
            }
        }
    }

    red.interleave(t);
    let ds: Vec<Rat1> = (0..t).map(|k| red.at(t + k, k)).collect();
    let nf = NormalFormQZ { t, ds, transform: red.a };
    debug_assert!(nf.verify(d), "normal form witness check failed");
    nf
}

/// Computes the integer congruence normal form. See [`NormalFormZ`].
pub fn integer_skew_normal_form(w: &SkewZ) -> NormalFormZ {
    let n = w.n();
    if w.is_zero() {
        return NormalFormZ { t: 0, cs: Vec::new(), transform: IntMat::identity(n) };
    }
    let mut red = Reduction::new(n, w.entries.clone());
    let blocks = red.reduce_chain();
    let t = blocks.len();
    // paper layout wants +c_k above the diagonal at (k, t+k), i.e. the
    // consecutive value at (2k+1, 2k) negative
    for k in 0..t {
        if red.at(2 * k + 1, 2 * k) > 0 {
            red.negate(2 * k);
        }
    }
    red.interleave(t);
    let cs: Vec<u64> = (0..t).map(|k| red.at(k, t + k) as u64).collect();
    let nf = NormalFormZ { t, cs, transform: red.a };
    debug_assert!(nf.verify(w), "integer normal form witness check failed");
    nf
}

/// Cardinality of the subgroup of `(Z/l)^k` generated by the given
/// vectors, by breadth-first closure. `cap` bounds the exploration.
pub(crate) fn subgroup_order_mod(gens: &[Vec<u64>], l: u64, cap: u64) -> Result<BigUint> {
    if l <= 1 || gens.is_empty() {
        return Ok(BigUint::one());
    }
    let k = gens[0].len();
    let gens: Vec<&Vec<u64>> = gens.iter().filter(|g| g.iter().any(|&v| v != 0)).collect();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut queue: VecDeque<Vec<u64>> = VecDeque::new();
    seen.insert(vec![0; k]);
    queue.push_back(vec![0; k]);
    while let Some(v) = queue.pop_front() {
        for g in &gens {
            let w: Vec<u64> = v.iter().zip(g.iter()).map(|(&a, &b)| (a + b) % l).collect();
            if !seen.contains(&w) {
                if seen.len() as u64 >= cap {
                    return Err(Error::CapExceeded {
                        required: format!("more than {cap} subgroup elements"),
                        cap,
                    });
                }
                seen.insert(w.clone());
                queue.push_back(w);
            }
        }
    }
    Ok(BigUint::from(seen.len()))
}

/// Cardinality of the subgroup of `(Q/Z)^n` generated by the rows of `D`,
/// computed by subgroup closure over `(Z/L)^n` after clearing
/// denominators. `cap` bounds the number of elements explored.
pub fn row_space_order(d: &SkewQZ, cap: u64) -> Result<BigUint> {
    let n = d.n();
    let l = d.denominator_lcm();
    if l == 1 {
        return Ok(BigUint::one());
    }
    let gens: Vec<Vec<u64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let e = d.entry(i, j);
                    (e.num() as u64 * (l / e.den() as u64)) % l
                })
                .collect()
        })
        .collect();
    subgroup_order_mod(&gens, l, cap)
}

/// `sigma(D) = sqrt(|R(D)|)`, the square root of the row-space order.
/// Always an integer for skew-symmetric `D`; a non-square order means the
/// input was not skew and is reported as an internal invariant violation.
pub fn sigma(d: &SkewQZ, cap: u64) -> Result<BigUint> {
    let order = row_space_order(d, cap)?;
    let root = order.sqrt();
    if &root * &root != order {
        return Err(Error::InternalInvariant(format!(
            "row space order {order} is not a perfect square"
        )));
    }
    Ok(root)
}

/// Default exploration cap used by the CLI and convenience wrappers.
pub const DEFAULT_CAP: u64 = 10_000_000;

/// Serialization shim: `{"n": .., "entries": [[..]]}` with entries as
/// `[num, den]` pairs; deserialization rejects non-skew input.
#[derive(Serialize, Deserialize)]
struct SkewQZWire {
    n: usize,
    entries: Vec<Vec<Rat1>>,
}

impl Serialize for SkewQZ {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SkewQZWire { n: self.n, entries: self.rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SkewQZ {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = SkewQZWire::deserialize(d)?;
        SkewQZ::from_entries(wire.n, wire.entries).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct SkewZWire {
    n: usize,
    entries: Vec<Vec<i64>>,
}

impl Serialize for SkewZ {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SkewZWire { n: self.n, entries: self.rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SkewZ {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = SkewZWire::deserialize(d)?;
        SkewZ::from_entries(wire.n, wire.entries).map_err(serde::de::Error::custom)
    }
}

/// Deterministic multiset signature of the normal-form orders, used to
/// group congruence classes in census reports.
pub fn order_signature(nf: &NormalFormQZ) -> Vec<u64> {
    let mut orders = nf.orders();
    orders.sort_unstable_by(|a, b| b.cmp(a));
    orders
}

/// Seeded random unimodular matrix: a product of `steps` elementary
/// operations (shears with small coefficients, swaps, sign flips).
pub fn random_unimodular(n: usize, steps: usize, rng: &mut impl rand::Rng) -> IntMat {
    let mut a = IntMat::identity(n);
    for _ in 0..steps {
        match rng.random_range(0..4u8) {
            0 | 1 => {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n);
                if i == j {
                    j = (j + 1) % n;
                }
                let k: i64 = rng.random_range(-3..=3);
                for r in 0..n {
                    let v = a.get(r, j) + k * a.get(r, i);
                    a.set(r, j, v);
                }
            }
            2 => {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                for r in 0..n {
                    let (x, y) = (a.get(r, i), a.get(r, j));
                    a.set(r, i, y);
                    a.set(r, j, x);
                }
            }
            _ => {
                let i = rng.random_range(0..n);
                for r in 0..n {
                    a.set(r, i, -a.get(r, i));
                }
            }
        }
    }
    debug_assert!(a.is_unimodular());
    a
}

/// Seeded random skew matrix over Q/Z with entry denominators dividing
/// `den_lcm`.
pub fn random_skew_qz(n: usize, den_lcm: u64, rng: &mut impl rand::Rng) -> SkewQZ {
    let mut m = SkewQZ::zero(n);
    for i in 0..n {
        for j in 0..i {
            let num = rng.random_range(0..den_lcm) as i64;
            m.set_pair(i, j, Rat1::of(num, den_lcm as i64));
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d5_paper() -> SkewQZ {
        standard_block(&[Rat1::of(1, 2), Rat1::of(1, 3)], 5).unwrap()
    }

    #[test]
    fn standard_block_matches_printed_example() {
        // D_5(1/2, 1/3): 1/2 at (3,1), 1/3 at (4,2) in 1-based indexing
        let d = d5_paper();
        assert_eq!(d.entry(2, 0), Rat1::of(1, 2));
        assert_eq!(d.entry(0, 2), Rat1::of(-1, 2));
        assert_eq!(d.entry(3, 1), Rat1::of(1, 3));
        assert_eq!(d.entry(1, 3), Rat1::of(-1, 3));
        assert_eq!(d.entry(4, 0), Rat1::ZERO);
        assert!(standard_block(&[], 3).unwrap().is_zero());
        // canonical Q/Z folds -1/2 to 1/2
        let d2 = standard_block(&[Rat1::of(1, 2)], 2).unwrap();
        assert_eq!(d2.entry(0, 1), Rat1::of(1, 2));
        assert_eq!(d2.entry(1, 0), Rat1::of(1, 2));
        assert!(standard_block(&[Rat1::of(1, 2); 2], 3).is_err());
        assert!(standard_block(&[Rat1::ZERO], 2).is_err());
    }

    #[test]
    fn congruence_identity_and_swap() {
        let d = d5_paper();
        let id = apply_congruence(&d, &IntMat::identity(5)).unwrap();
        assert!(id.congruent);
        assert_eq!(id.matrix, d);

        let d2 = standard_block(&[Rat1::of(1, 2)], 2).unwrap();
        let swap = IntMat::from_rows(vec![vec![0, 1], vec![1, 0]]).unwrap();
        let s = apply_congruence(&d2, &swap).unwrap();
        assert_eq!(s.matrix, d2); // -1/2 = 1/2 in Q/Z

        let d3 = standard_block(&[Rat1::of(1, 3)], 2).unwrap();
        let diag = IntMat::from_rows(vec![vec![2, 0], vec![0, 1]]).unwrap();
        let r = apply_congruence(&d3, &diag).unwrap();
        assert!(!r.congruent); // det 2
        assert_eq!(r.matrix.entry(1, 0), Rat1::of(2, 3));
    }

    #[test]
    fn normal_form_zero_matrix() {
        let nf = congruence_normal_form(&SkewQZ::zero(4));
        assert_eq!(nf.t, 0);
        assert!(nf.ds.is_empty());
        assert_eq!(nf.transform, IntMat::identity(4));
    }

    #[test]
    fn normal_form_of_paper_block_merges_coprime_orders() {
        let d = d5_paper();
        let nf = congruence_normal_form(&d);
        assert!(nf.verify(&d));
        // orders 2 and 3 are coprime, so the chain merges them into one
        // block of order 6; the product of orders must be 6 either way
        let product: u64 = nf.orders().iter().product();
        assert_eq!(product, 6);
        for w in nf.orders().windows(2) {
            assert_eq!(w[0] % w[1], 0);
        }
        assert_eq!(nf.sigma(), BigUint::from(6u32));
        // 2t = 2 < 5 leaves room to canonicalize generators fully
        for d in &nf.ds {
            assert_eq!(d.num(), 1);
        }
    }

    #[test]
    fn normal_form_round_trip_random_congruates() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d0 = standard_block(&[Rat1::of(1, 2)], 4).unwrap();
        for _ in 0..40 {
            let a = random_unimodular(4, 12, &mut rng);
            let d = apply_congruence(&d0, &a).unwrap().matrix;
            let nf = congruence_normal_form(&d);
            assert!(nf.verify(&d));
            assert_eq!(nf.t, 1);
            assert_eq!(nf.orders(), vec![2]);
        }
    }

    #[test]
    fn normal_form_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=5 {
            for &l in &[2u64, 3, 4, 6, 12] {
                for _ in 0..8 {
                    let d = random_skew_qz(n, l, &mut rng);
                    let nf = congruence_normal_form(&d);
                    assert!(nf.verify(&d), "witness failed for n={n} l={l}");
                }
            }
        }
    }

    #[test]
    fn full_rank_block_keeps_pinned_unit() {
        // D_2(2/5): in dimension 2 a unimodular congruence only flips the
        // sign, so the normal form keeps a value of order 5 with the
        // smaller of the two numerators
        let d = standard_block(&[Rat1::of(2, 5)], 2).unwrap();
        let nf = congruence_normal_form(&d);
        assert!(nf.verify(&d));
        assert_eq!(nf.orders(), vec![5]);
        assert_eq!(nf.ds[0], Rat1::of(2, 5));
    }

    #[test]
    fn sigma_via_row_space() {
        assert_eq!(sigma(&SkewQZ::zero(3), DEFAULT_CAP).unwrap(), BigUint::one());
        let d2 = standard_block(&[Rat1::of(1, 2)], 2).unwrap();
        assert_eq!(row_space_order(&d2, DEFAULT_CAP).unwrap(), BigUint::from(4u32));
        assert_eq!(sigma(&d2, DEFAULT_CAP).unwrap(), BigUint::from(2u32));

        let d = d5_paper();
        assert_eq!(row_space_order(&d, DEFAULT_CAP).unwrap(), BigUint::from(36u32));
        assert_eq!(sigma(&d, DEFAULT_CAP).unwrap(), BigUint::from(6u32));

        let d42 = standard_block(&[Rat1::of(1, 4), Rat1::of(1, 2)], 4).unwrap();
        assert_eq!(row_space_order(&d42, DEFAULT_CAP).unwrap(), BigUint::from(64u32));
        assert_eq!(sigma(&d42, DEFAULT_CAP).unwrap(), BigUint::from(8u32));
    }

    #[test]
    fn sigma_is_congruence_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(2..=5);
            let d = random_skew_qz(n, 12, &mut rng);
            let a = random_unimodular(n, 10, &mut rng);
            let d2 = apply_congruence(&d, &a).unwrap().matrix;
            assert_eq!(
                sigma(&d, DEFAULT_CAP).unwrap(),
                sigma(&d2, DEFAULT_CAP).unwrap()
            );
        }
    }

    #[test]
    fn sigma_two_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..60 {
            let n = rng.random_range(2..=5);
            let d = random_skew_qz(n, rng.random_range(2..=12), &mut rng);
            let nf = congruence_normal_form(&d);
            assert_eq!(nf.sigma(), sigma(&d, DEFAULT_CAP).unwrap());
        }
    }

    #[test]
    fn membership_bound() {
        // if sigma(D) divides m then every entry denominator divides m
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..80 {
            let n = rng.random_range(2..=4);
            let d = random_skew_qz(n, rng.random_range(2..=12), &mut rng);
            let s = sigma(&d, DEFAULT_CAP).unwrap();
            for m in 1..=12u64 {
                if (BigUint::from(m) % &s) == BigUint::ZERO {
                    for i in 0..n {
                        for j in 0..n {
                            assert_eq!(m % d.entry(i, j).order(), 0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sigma_additive_over_coprime_parts() {
        // full sweep at n <= 3, seeded sample at n = 4
        let cases: &[(u64, u64)] = &[(2, 3), (3, 4), (2, 5)];
        for &(m1, m2) in cases {
            for n in 2..=3usize {
                let e = n * (n - 1) / 2;
                for idx1 in 0..m1.pow(e as u32) {
                    for idx2 in 0..m2.pow(e as u32) {
                        check_additivity(n, m1, idx1, m2, idx2);
                    }
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(m1 * 100 + m2);
            let e = 4usize * 3 / 2;
            for _ in 0..400 {
                let idx1 = rng.random_range(0..m1.pow(e as u32));
                let idx2 = rng.random_range(0..m2.pow(e as u32));
                check_additivity(4, m1, idx1, m2, idx2);
            }
        }
    }

    fn decode_skew(n: usize, m: u64, mut idx: u64) -> SkewQZ {
        let mut d = SkewQZ::zero(n);
        for i in 0..n {
            for j in 0..i {
                d.set_pair(i, j, Rat1::of((idx % m) as i64, m as i64));
                idx /= m;
            }
        }
        d
    }

    fn check_additivity(n: usize, m1: u64, idx1: u64, m2: u64, idx2: u64) {
        let d1 = decode_skew(n, m1, idx1);
        let d2 = decode_skew(n, m2, idx2);
        let mut sum = SkewQZ::zero(n);
        for i in 0..n {
            for j in 0..i {
                sum.set_pair(i, j, d1.entry(i, j).add(&d2.entry(i, j)));
            }
        }
        let s1 = congruence_normal_form(&d1).sigma();
        let s2 = congruence_normal_form(&d2).sigma();
        let s = congruence_normal_form(&sum).sigma();
        assert_eq!(s, s1 * s2, "additivity failed n={n} m1={m1} m2={m2}");
    }

    #[test]
    fn integer_normal_form_examples() {
        let z = integer_skew_normal_form(&SkewZ::zero(3));
        assert_eq!(z.t, 0);

        // the Heisenberg k-invariant e1* ^ e2*
        let mut w = SkewZ::zero(2);
        w.set_pair(0, 1, 1);
        let nf = integer_skew_normal_form(&w);
        assert!(nf.verify(&w));
        assert_eq!(nf.t, 1);
        assert_eq!(nf.cs, vec![1]);

        // entries (1,2) = 2 and (3,4) = 6 give t = 2, cs = [2, 6]
        let mut w = SkewZ::zero(4);
        w.set_pair(0, 1, 2);
        w.set_pair(2, 3, 6);
        let nf = integer_skew_normal_form(&w);
        assert!(nf.verify(&w));
        assert_eq!(nf.t, 2);
        assert_eq!(nf.cs, vec![2, 6]);
        assert_eq!(w.entry_gcd(), nf.cs[0]);
    }

    #[test]
    fn integer_normal_form_gcd_is_first_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..60 {
            let n = rng.random_range(2..=5);
            let mut w = SkewZ::zero(n);
            for i in 0..n {
                for j in 0..i {
                    w.set_pair(i, j, rng.random_range(-9..=9));
                }
            }
            let nf = integer_skew_normal_form(&w);
            assert!(nf.verify(&w));
            if !w.is_zero() {
                assert_eq!(nf.cs[0], w.entry_gcd());
            }
        }
    }

    #[test]
    fn json_rejects_non_skew() {
        let good = r#"{"n":2,"entries":[[[0,1],[1,2]],[[1,2],[0,1]]]}"#;
        assert!(serde_json::from_str::<SkewQZ>(good).is_ok());
        let bad = r#"{"n":2,"entries":[[[0,1],[1,2]],[[1,3],[0,1]]]}"#;
        assert!(serde_json::from_str::<SkewQZ>(bad).is_err());
        let bad_diag = r#"{"n":2,"entries":[[[1,2],[1,2]],[[1,2],[0,1]]]}"#;
        assert!(serde_json::from_str::<SkewQZ>(bad_diag).is_err());
    }
}
