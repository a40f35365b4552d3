//! Exact arithmetic substrate: the group Q/Z, Euler's phi function and
//! big-integer binomials.
//!
//! [`Rat1`] is the universal currency of the crate: commutator phases,
//! eigenvalue angles and entries of commutation-data matrices are all
//! elements of Q/Z stored as reduced fractions in `[0, 1)`.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An element of Q/Z as a reduced fraction `num/den` with
/// `0 <= num < den` and `gcd(num, den) = 1`; zero is `0/1`.
///
/// The canonical form makes equality structural, so values can key hash
/// maps directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rat1 {
    num: i64,
    den: i64,
}

impl Rat1 {
    /// The zero element `0/1`.
    pub const ZERO: Rat1 = Rat1 { num: 0, den: 1 };

    /// Builds `a/b` reduced mod 1 into canonical range.
    ///
    /// Fails only when `b == 0`.
    pub fn new(a: i64, b: i64) -> Result<Rat1> {
        if b == 0 {
            return Err(Error::ZeroDenominator);
        }
        let g = a.gcd(&b);
        let (a, b) = (a / g, b / g);
        // force positive denominator, then reduce the numerator mod 1
        let (a, b) = if b < 0 { (-a, -b) } else { (a, b) };
        Ok(Rat1 { num: a.rem_euclid(b), den: b })
    }

    /// Like [`Rat1::new`] but panics on a zero denominator. Intended for
    /// literals in tests and constructions where the denominator is known.
    pub fn of(a: i64, b: i64) -> Rat1 {
        Rat1::new(a, b).expect("nonzero denominator")
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// Additive order: the least `k > 0` with `k * self = 0`, which for a
    /// reduced fraction is just the denominator.
    pub fn order(&self) -> u64 {
        self.den as u64
    }

    pub fn add(&self, other: &Rat1) -> Rat1 {
        let den = self.den.lcm(&other.den);
        let num = self.num * (den / self.den) + other.num * (den / other.den);
        Rat1::of(num, den)
    }

    pub fn neg(&self) -> Rat1 {
        Rat1::of(-self.num, self.den)
    }

    pub fn sub(&self, other: &Rat1) -> Rat1 {
        self.add(&other.neg())
    }

    /// Z-module action `k * self`.
    pub fn scale(&self, k: i64) -> Rat1 {
        // reduce k mod den first so the product cannot overflow at sane sizes
        let k = k.rem_euclid(self.den);
        Rat1::of(self.num * k, self.den)
    }

    /// The angle as a float in `[0, 1)`.
    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Value comparison (as rationals in `[0, 1)`), used for deterministic
    /// orderings. `i128` avoids overflow in the cross product.
    pub fn cmp_value(&self, other: &Rat1) -> std::cmp::Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

impl PartialOrd for Rat1 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rat1 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cmp_value(other)
    }
}

impl std::fmt::Display for Rat1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.num == 0 {
            write!(f, "0")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

// Serialized form everywhere: a two-element integer array [num, den].
impl Serialize for Rat1 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        [self.num, self.den].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Rat1 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [a, b] = <[i64; 2]>::deserialize(deserializer)?;
        Rat1::new(a, b).map_err(D::Error::custom)
    }
}

/// Euler's phi function.
pub fn euler_phi(k: u64) -> u64 {
    assert!(k >= 1, "euler_phi is defined for k >= 1");
    let mut n = k;
    let mut phi = k;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            phi -= phi / p;
        }
        p += 1;
    }
    if n > 1 {
        phi -= phi / n;
    }
    phi
}

/// Binomial coefficient `C(a, b)` as a big integer; `0` when `b > a`.
pub fn binomial(a: u64, b: u64) -> BigUint {
    if b > a {
        return BigUint::ZERO;
    }
    let b = b.min(a - b);
    let mut acc = BigUint::one();
    for i in 0..b {
        acc = acc * BigUint::from(a - i) / BigUint::from(i + 1);
    }
    acc
}

/// Prime factorization of `m` as `(prime, exponent)` pairs in increasing
/// prime order. Trial division; fine at the scales this crate works with.
pub fn factorize(m: u64) -> Vec<(u64, u32)> {
    assert!(m >= 1);
    let mut n = m;
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Modular inverse of `a` mod `m` (requires `gcd(a, m) = 1`).
pub fn mod_inverse(a: i64, m: i64) -> Option<i64> {
    let e = i64::extended_gcd(&a.rem_euclid(m), &m);
    if e.gcd != 1 {
        return None;
    }
    Some(e.x.rem_euclid(m))
}

/// Best rational approximation of `x` (taken mod 1) among all fractions
/// with denominator at most `max_den`, by a Stern-Brocot walk.
///
/// Returns the approximant as a canonical [`Rat1`] together with the
/// circular distance `|x - p/q|` (distance on R/Z).
pub fn snap_to_rational(x: f64, max_den: u64) -> (Rat1, f64) {
    assert!(max_den >= 1);
    let x = x.rem_euclid(1.0);
    // walk the Stern-Brocot tree between 0/1 and 1/1
    let (mut a, mut b) = (0i64, 1i64); // left endpoint a/b
    let (mut c, mut d) = (1i64, 1i64); // right endpoint c/d
    let mut best = (Rat1::ZERO, circ_dist(x, 0.0));
    let consider = |p: i64, q: i64, best: &mut (Rat1, f64)| {
        let dist = circ_dist(x, p as f64 / q as f64);
        if dist < best.1 {
            *best = (Rat1::of(p, q), dist);
        }
    };
    consider(1, 1, &mut best);
    loop {
        let (p, q) = (a + c, b + d);
        if q as u64 > max_den {
            break;
        }
        consider(p, q, &mut best);
        if (p as f64) < x * q as f64 {
            a = p;
            b = q;
        } else {
            c = p;
            d = q;
        }
    }
    best
}

/// Distance between two angles on the circle R/Z.
pub fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn make_reduces_mod_one() {
        assert_eq!(Rat1::of(7, 6), Rat1::of(1, 6));
        assert_eq!(Rat1::of(-1, 2), Rat1::of(1, 2));
        assert_eq!(Rat1::of(0, 5), Rat1 { num: 0, den: 1 });
        assert_eq!(Rat1::of(3, -2), Rat1::of(1, 2));
        assert!(Rat1::new(1, 0).is_err());
    }

    #[test]
    fn group_operations() {
        assert_eq!(Rat1::of(1, 2).add(&Rat1::of(2, 3)), Rat1::of(1, 6));
        assert_eq!(Rat1::of(1, 3).neg(), Rat1::of(2, 3));
        assert_eq!(Rat1::of(3, 4).scale(2), Rat1::of(1, 2));
    }

    #[test]
    fn orders() {
        assert_eq!(Rat1::of(1, 2).order(), 2);
        assert_eq!(Rat1::of(2, 3).order(), 3);
        assert_eq!(Rat1::ZERO.order(), 1);
    }

    #[test]
    fn phi_values() {
        assert_eq!(euler_phi(1), 1);
        assert_eq!(euler_phi(5), 4);
        // direct count of coprime residues
        let direct = (1..=12).filter(|a| num_integer::gcd(*a, 12u64) == 1).count() as u64;
        assert_eq!(euler_phi(12), direct);
        assert_eq!(euler_phi(12), 4);
    }

    #[test]
    fn phi_divisor_sum() {
        for k in 1..=1000u64 {
            let sum: u64 = (1..=k).filter(|d| k % d == 0).map(euler_phi).sum();
            assert_eq!(sum, k, "sum of phi over divisors of {k}");
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), BigUint::from(6u32));
        assert_eq!(binomial(17, 0), BigUint::one());
        assert_eq!(binomial(5, 5), BigUint::one());
        assert_eq!(binomial(3, 5), BigUint::ZERO);
        assert_eq!(binomial(60, 30).to_string(), "118264581564861424");
    }

    #[test]
    fn snapping() {
        let (r, d) = snap_to_rational(1.0 / 3.0 + 1e-12, 10);
        assert_eq!(r, Rat1::of(1, 3));
        assert!(d < 1e-9);
        // wraparound: angles near 1 snap to zero
        let (r, _) = snap_to_rational(0.999_999_999_9, 10);
        assert_eq!(r, Rat1::ZERO);
        let (r, _) = snap_to_rational(0.4, 5);
        assert_eq!(r, Rat1::of(2, 5));
    }

    proptest! {
        #[test]
        fn make_is_periodic(a in -200i64..200, b in 1i64..60) {
            prop_assert_eq!(Rat1::of(a, b), Rat1::of(a + b, b));
        }

        #[test]
        fn add_commutes_and_associates(
            a in -50i64..50, b in 1i64..40,
            c in -50i64..50, d in 1i64..40,
            e in -50i64..50, f in 1i64..40,
        ) {
            let (x, y, z) = (Rat1::of(a, b), Rat1::of(c, d), Rat1::of(e, f));
            prop_assert_eq!(x.add(&y), y.add(&x));
            prop_assert_eq!(x.add(&y).add(&z), x.add(&y.add(&z)));
        }

        #[test]
        fn negation_and_order(a in -50i64..50, b in 1i64..40) {
            let x = Rat1::of(a, b);
            prop_assert_eq!(x.add(&x.neg()), Rat1::ZERO);
            prop_assert_eq!(x.scale(x.order() as i64), Rat1::ZERO);
        }

        #[test]
        fn phi_multiplicative(a in 1u64..60, b in 1u64..60) {
            prop_assume!(num_integer::gcd(a, b) == 1);
            prop_assert_eq!(euler_phi(a * b), euler_phi(a) * euler_phi(b));
        }
    }
}
