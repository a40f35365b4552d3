//! Counting the connected components of the space of almost-commuting
//! unitary n-tuples: `N(n, m)` is the number of skew matrices `D` in
//! `T(n, Z/m)` whose invariant `sigma(D)` divides `m`.
//!
//! The closed form proceeds prime by prime: for `q = p^k` the nonzero
//! qualifying matrices fall into congruence classes indexed by the
//! partitions `J(n, k)`, each contributing `N_p(alpha)` matrices, and
//! `N(n, m)` is multiplicative over coprime factors. An independent
//! brute-force census enumerates `T(n, Z/m)` directly and classifies each
//! matrix through its congruence normal form.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rat1::{factorize, Rat1};
use crate::skew::{congruence_normal_form, order_signature, SkewQZ};

/// A partition written as runs `t_i` copies of `a_i` with
/// `a_1 > a_2 > ... > a_j > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Partition {
    /// `(value, multiplicity)` runs with strictly decreasing values.
    pub runs: Vec<(u64, u64)>,
}

impl Partition {
    pub fn from_parts(parts: &[u64]) -> Partition {
        let mut runs: Vec<(u64, u64)> = Vec::new();
        for &p in parts {
            match runs.last_mut() {
                Some((v, t)) if *v == p => *t += 1,
                _ => runs.push((p, 1)),
            }
        }
        debug_assert!(runs.windows(2).all(|w| w[0].0 > w[1].0));
        Partition { runs }
    }

    /// Total `sum t_i * a_i`.
    pub fn weight(&self) -> u64 {
        self.runs.iter().map(|&(a, t)| a * t).sum()
    }

    /// Number of parts `sum t_i`.
    pub fn part_count(&self) -> u64 {
        self.runs.iter().map(|&(_, t)| t).sum()
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .runs
            .iter()
            .flat_map(|&(a, t)| std::iter::repeat(a.to_string()).take(t as usize))
            .collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// `J(n, k)`: every partition of every `k' <= k` with at most `n/2`
/// parts, in graded order (by weight, then largest-part-first within a
/// weight).
pub fn enumerate_j(n: usize, k: u64) -> Vec<Partition> {
    assert!(n >= 2 && k >= 1);
    let max_parts = (n / 2) as u64;
    let mut out = Vec::new();
    for target in 1..=k {
        let mut current = Vec::new();
        gen_partitions(target, target, max_parts, &mut current, &mut out);
    }
    out
}

fn gen_partitions(
    remaining: u64,
    max_part: u64,
    slots: u64,
    current: &mut Vec<u64>,
    out: &mut Vec<Partition>,
) {
    if remaining == 0 {
        out.push(Partition::from_parts(current));
        return;
    }
    if slots == 0 {
        return;
    }
    let hi = remaining.min(max_part);
    for p in (1..=hi).rev() {
        current.push(p);
        gen_partitions(remaining - p, p, slots - 1, current, out);
        current.pop();
    }
}

/// Size of the congruence class of `D_alpha` inside `T(n, Z/p^k)`:
///
/// ```text
///            p^(sum_i t_i a_i (s_{i-1} + s_i - 1)) * prod_{l=s_j+1}^n (1 - p^-l)
/// N_p(a) = ------------------------------------------------------------------
///                      prod_i prod_{l=1}^{t_i} (1 - p^-2l)
/// ```
///
/// with `s_i = n - 2(t_1 + ... + t_i)`. Evaluated with exact rational
/// intermediates; a non-integral result signals a transcription bug and
/// is surfaced as an error.
pub fn n_p_alpha(p: u64, n: usize, alpha: &Partition) -> Result<BigUint> {
    let parts = alpha.part_count();
    if 2 * parts > n as u64 {
        return Err(Error::InvalidInput(format!(
            "partition {alpha} has more than n/2 = {} parts",
            n / 2
        )));
    }
    // prefix part counts determine s_0 = n, s_1, ..., s_j
    let mut s = vec![n as i64];
    for &(_, t) in &alpha.runs {
        s.push(s.last().unwrap() - 2 * t as i64);
    }
    let j = alpha.runs.len();
    let s_j = s[j];

    // the proof's exponent bookkeeping must tie out to n^2
    let e: i64 = s_j * s_j
        + alpha
            .runs
            .iter()
            .enumerate()
            .map(|(i, &(_, t))| t as i64 * (s[i] + s[i + 1] + 1))
            .sum::<i64>();
    let f: i64 = alpha
        .runs
        .iter()
        .enumerate()
        .map(|(i, &(_, t))| t as i64 * (s[i] + s[i + 1] - 1))
        .sum::<i64>();
    if e + f != (n * n) as i64 {
        return Err(Error::InternalInvariant(format!(
            "exponent identity e + sum f_i = n^2 failed for alpha = {alpha}"
        )));
    }

    let exponent: i64 = alpha
        .runs
        .iter()
        .enumerate()
        .map(|(i, &(a, t))| (t * a) as i64 * (s[i] + s[i + 1] - 1))
        .sum();
    if exponent < 0 {
        return Err(Error::InternalInvariant(format!(
            "negative leading exponent for alpha = {alpha}"
        )));
    }

    let big_p = BigInt::from(p);
    let mut value = BigRational::from_integer(big_p.pow(exponent as u32));
    for l in (s_j + 1)..=(n as i64) {
        value *= one_minus_p_pow(&big_p, l as u32);
    }
    for &(_, t) in &alpha.runs {
        for l in 1..=t {
            value /= one_minus_p_pow(&big_p, 2 * l as u32);
        }
    }
    if !value.is_integer() || value.is_negative() {
        return Err(Error::InternalInvariant(format!(
            "N_p(alpha) evaluated to the non-integral value {value} for alpha = {alpha}"
        )));
    }
    Ok(value.to_integer().to_biguint().unwrap())
}

fn one_minus_p_pow(p: &BigInt, l: u32) -> BigRational {
    // 1 - p^-l = (p^l - 1) / p^l
    let pl = p.pow(l);
    BigRational::new(&pl - BigInt::one(), pl)
}

/// `N(n, p^k) = 1 + sum over J(n, k) of N_p(alpha)`; the 1 counts the
/// zero matrix (the commuting component).
pub fn n_prime_power(n: usize, p: u64, k: u64) -> Result<BigUint> {
    let mut total = BigUint::one();
    for alpha in enumerate_j(n, k) {
        total += n_p_alpha(p, n, &alpha)?;
    }
    Ok(total)
}

/// `N(n, m)` for arbitrary `m >= 1`, assembled multiplicatively over the
/// prime powers of `m`.
pub fn n_general(n: usize, m: u64) -> Result<BigUint> {
    assert!(n >= 2 && m >= 1);
    let mut total = BigUint::one();
    for (p, k) in factorize(m) {
        total *= n_prime_power(n, p, k as u64)?;
    }
    Ok(total)
}

/// Outcome of a brute-force census of `T(n, Z/m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusReport {
    pub n: usize,
    pub m: u64,
    /// Number of matrices with `sigma(D) | m`, the zero matrix included.
    pub total: BigUint,
    /// Nonzero qualifying matrices grouped by the multiset of their
    /// normal-form orders (sorted descending).
    pub by_class: BTreeMap<Vec<u64>, BigUint>,
}

impl Serialize for CensusReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Class<'a> {
            orders: &'a [u64],
            count: String,
        }
        let classes: Vec<Class> = self
            .by_class
            .iter()
            .map(|(orders, count)| Class { orders, count: count.to_string() })
            .collect();
        let mut st = s.serialize_struct("CensusReport", 4)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("total", &self.total.to_string())?;
        st.serialize_field("by_class", &classes)?;
        st.end()
    }
}

/// Knobs for the brute-force enumeration.
#[derive(Debug, Clone, Copy)]
pub struct CensusOptions {
    /// Maximum number of matrices to enumerate.
    pub cap: u64,
    /// Worker threads; 1 runs sequentially.
    pub jobs: usize,
}

impl Default for CensusOptions {
    fn default() -> Self {
        CensusOptions { cap: crate::skew::DEFAULT_CAP, jobs: 1 }
    }
}

/// Enumerates every `D` in `T(n, Z/m)` (an odometer over the
/// `n(n-1)/2` above-diagonal entries), computes its congruence normal
/// form and counts the matrices with `sigma(D) | m`.
pub fn brute_force_census(n: usize, m: u64, opts: &CensusOptions) -> Result<CensusReport> {
    assert!(n >= 2 && m >= 1);
    let entries = n * (n - 1) / 2;
    let size = BigUint::from(m).pow(entries as u32);
    let total_count = size.to_u64().filter(|&s| s <= opts.cap).ok_or(Error::CapExceeded {
        required: size.to_string(),
        cap: opts.cap,
    })?;

    let accumulate = |range: std::ops::Range<u64>| -> (BigUint, BTreeMap<Vec<u64>, BigUint>) {
        let mut total = BigUint::zero();
        let mut by_class: BTreeMap<Vec<u64>, BigUint> = BTreeMap::new();
        for idx in range {
            let d = decode_matrix(n, m, idx);
            let nf = congruence_normal_form(&d);
            let sigma = nf.sigma();
            if (BigUint::from(m) % &sigma).is_zero() {
                total += BigUint::one();
                if nf.t > 0 {
                    *by_class.entry(order_signature(&nf)).or_default() += BigUint::one();
                }
            }
        }
        (total, by_class)
    };

    let (total, by_class) = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        let chunk = total_count.div_ceil(opts.jobs as u64).max(1);
        let ranges: Vec<std::ops::Range<u64>> = (0..opts.jobs as u64)
            .map(|w| (w * chunk).min(total_count)..((w + 1) * chunk).min(total_count))
            .collect();
        pool.install(|| {
            use rayon::prelude::*;
            ranges
                .into_par_iter()
                .map(accumulate)
                .reduce(
                    || (BigUint::zero(), BTreeMap::new()),
                    |(t1, mut c1), (t2, c2)| {
                        for (k, v) in c2 {
                            *c1.entry(k).or_default() += v;
                        }
                        (t1 + t2, c1)
                    },
                )
        })
    } else {
        accumulate(0..total_count)
    };

    Ok(CensusReport { n, m, total, by_class })
}

fn decode_matrix(n: usize, m: u64, mut idx: u64) -> SkewQZ {
    let mut d = SkewQZ::zero(n);
    for i in 0..n {
        for j in 0..i {
            let digit = (idx % m) as i64;
            idx /= m;
            if digit != 0 {
                d.set_pair(i, j, Rat1::of(digit, m as i64));
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts(p: &[u64]) -> Partition {
        Partition::from_parts(p)
    }

    #[test]
    fn j_enumeration_matches_worked_example() {
        // J(5, 4) is the eight partitions 1, 2, 1+1, 3, 2+1, 4, 3+1, 2+2
        let j54 = enumerate_j(5, 4);
        let expected = vec![
            parts(&[1]),
            parts(&[2]),
            parts(&[1, 1]),
            parts(&[3]),
            parts(&[2, 1]),
            parts(&[4]),
            parts(&[3, 1]),
            parts(&[2, 2]),
        ];
        assert_eq!(j54, expected);

        // at most one part when n = 2
        assert_eq!(enumerate_j(2, 3), vec![parts(&[1]), parts(&[2]), parts(&[3])]);
        assert_eq!(enumerate_j(4, 2), vec![parts(&[1]), parts(&[2]), parts(&[1, 1])]);
    }

    #[test]
    fn class_sizes_match_printed_formulas() {
        // single part 1: (p^{n-1} - 1)(p^n - 1) / (p^2 - 1)
        for &(n, p) in &[(3usize, 2u64), (4, 2), (4, 3), (5, 2), (5, 5)] {
            let got = n_p_alpha(p, n, &parts(&[1])).unwrap();
            let expected = (p.pow(n as u32 - 1) - 1) * (p.pow(n as u32) - 1) / (p * p - 1);
            assert_eq!(got, BigUint::from(expected), "alpha=1 n={n} p={p}");

            // single part 2 picks up the factor p^{2n-3}
            let got2 = n_p_alpha(p, n, &parts(&[2])).unwrap();
            assert_eq!(got2, BigUint::from(p.pow(2 * n as u32 - 3) * expected));
        }
        assert_eq!(n_p_alpha(2, 3, &parts(&[1])).unwrap(), BigUint::from(7u32));
        // 1+1 at n = 4, p = 2
        assert_eq!(n_p_alpha(2, 4, &parts(&[1, 1])).unwrap(), BigUint::from(28u32));
    }

    #[test]
    fn prime_power_counts() {
        assert_eq!(n_prime_power(3, 2, 1).unwrap(), BigUint::from(8u32));
        assert_eq!(n_prime_power(3, 3, 1).unwrap(), BigUint::from(27u32));
        // N(4, 4) = 1 + 35 + 1120 + 28
        assert_eq!(n_prime_power(4, 2, 2).unwrap(), BigUint::from(1184u32));
    }

    #[test]
    fn general_counts() {
        assert_eq!(n_general(4, 1).unwrap(), BigUint::one());
        assert_eq!(n_general(2, 6).unwrap(), BigUint::from(6u32));
        assert_eq!(n_general(2, 4).unwrap(), BigUint::from(4u32));
    }

    #[test]
    fn stability_against_prime_closed_form() {
        for &n in &[2usize, 3, 4] {
            for &p in &[2u64, 3, 5] {
                let closed = 1 + (p.pow(n as u32 - 1) - 1) * (p.pow(n as u32) - 1) / (p * p - 1);
                assert_eq!(n_general(n, p).unwrap(), BigUint::from(closed));
            }
        }
    }

    #[test]
    fn brute_force_small_cases() {
        let opts = CensusOptions::default();
        let r22 = brute_force_census(2, 2, &opts).unwrap();
        assert_eq!(r22.total, BigUint::from(2u32));
        let r32 = brute_force_census(3, 2, &opts).unwrap();
        assert_eq!(r32.total, BigUint::from(8u32));
        // class breakdown: seven matrices of class {2} over Z/2
        assert_eq!(r32.by_class.get(&vec![2]).unwrap(), &BigUint::from(7u32));
    }

    #[test]
    fn oracle_agrees_with_formula() {
        let opts = CensusOptions::default();
        for n in 2..=4usize {
            for m in 1..=6u64 {
                let brute = brute_force_census(n, m, &opts).unwrap();
                let formula = n_general(n, m).unwrap();
                assert_eq!(brute.total, formula, "N({n}, {m})");
            }
        }
    }

    #[test]
    fn oracle_class_counts_match_n_p_alpha() {
        // prime power case: classes are indexed by J(n, k) with the order
        // multiset {p^{a_i} with multiplicity t_i}
        let opts = CensusOptions::default();
        let report = brute_force_census(4, 4, &opts).unwrap();
        for alpha in enumerate_j(4, 2) {
            let mut orders: Vec<u64> = alpha
                .runs
                .iter()
                .flat_map(|&(a, t)| std::iter::repeat(2u64.pow(a as u32)).take(t as usize))
                .collect();
            orders.sort_unstable_by(|x, y| y.cmp(x));
            let expected = n_p_alpha(2, 4, &alpha).unwrap();
            assert_eq!(report.by_class.get(&orders), Some(&expected), "class {orders:?}");
        }
    }

    #[test]
    fn multiplicativity() {
        for n in 2..=5usize {
            for m1 in 1..=6u64 {
                for m2 in 1..=6u64 {
                    if num_integer::gcd(m1, m2) == 1 {
                        assert_eq!(
                            n_general(n, m1 * m2).unwrap(),
                            n_general(n, m1).unwrap() * n_general(n, m2).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let opts = CensusOptions { cap: 100, jobs: 1 };
        let err = brute_force_census(4, 4, &opts).unwrap_err();
        match err {
            Error::CapExceeded { required, cap } => {
                assert_eq!(required, "4096");
                assert_eq!(cap, 100);
            }
            other => panic!("expected CapExceeded, got {other:?}"),
        }
    }

    #[test]
    fn parallel_census_matches_sequential() {
        let seq = brute_force_census(4, 3, &CensusOptions::default()).unwrap();
        let par = brute_force_census(4, 3, &CensusOptions { cap: 10_000_000, jobs: 4 }).unwrap();
        assert_eq!(seq, par);
    }
}
