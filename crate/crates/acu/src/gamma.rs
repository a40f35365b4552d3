//! Connected components of `Hom(G, U(m))` for central extensions
//! `1 -> Z^r -> G -> Z^n -> 1`.
//!
//! Rank one: after normalizing the k-invariant to
//! `c_1 e_1* ^ e_{t+1}* + ... + c_t e_t* ^ e_{2t}*`, the components are
//! indexed by degree-`m` polynomials whose roots are roots of unity and
//! whose root multiplicities respect the moduli `mu_k = prod k/(k, c_i)`;
//! their number is the `x^m` coefficient of
//! `prod_k (1 - x^{mu_k})^(-phi(k))`, and each component carries explicit
//! block data and a moduli descriptor (a product of symmetric powers of
//! tori).
//!
//! Rank `r > 1`: the coefficient matrix `Omega` (one row per pair
//! `(i, j)`, one column per central generator) controls everything. Its
//! integer echelon pivots give `B`, the torsion generated by the columns
//! of its rational reduced echelon form gives `C`, and `P = B / C` counts
//! the components of every nonempty fiber of the eigenvalue map; the
//! component count of a decomposition `sum l_j D_j` is a product of
//! binomials in `P` and the `l_j`.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::intmat::IntMat;
use crate::rat1::{binomial, euler_phi, Rat1};
use crate::skew::{block_matrix, congruence_normal_form, subgroup_order_mod, SkewQZ, SkewZ};

/// A central extension `1 -> Z^r -> G -> Z^n -> 1` given by the `r`
/// skew-symmetric integer coefficient matrices of its k-invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralExtension {
    pub n: usize,
    pub r: usize,
    pub coeffs: Vec<SkewZ>,
}

impl CentralExtension {
    pub fn new(n: usize, coeffs: Vec<SkewZ>) -> Result<CentralExtension> {
        let r = coeffs.len();
        if r == 0 {
            return Err(Error::InvalidInput("central rank r must be at least 1".into()));
        }
        if coeffs.iter().any(|c| c.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n} coefficient matrices"),
                found: "mixed sizes".into(),
            });
        }
        Ok(CentralExtension { n, r, coeffs })
    }
}

/// Rank-one k-invariant in normal form: `c_1 e_1* ^ e_{t+1}* + ... +
/// c_t e_t* ^ e_{2t}*` on `Z^n`, with `c_i | c_{i+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rank1Form {
    pub n: usize,
    pub t: usize,
    pub cs: Vec<u64>,
}

impl Rank1Form {
    pub fn new(n: usize, cs: Vec<u64>) -> Result<Rank1Form> {
        let t = cs.len();
        if 2 * t > n {
            return Err(Error::InvalidBlock(format!("2t = {} exceeds n = {n}", 2 * t)));
        }
        if cs.iter().any(|&c| c == 0) {
            return Err(Error::InvalidInput("form coefficients must be positive".into()));
        }
        if cs.windows(2).any(|w| w[1] % w[0] != 0) {
            return Err(Error::InvalidInput(
                "coefficients must form a divisibility chain c_i | c_{i+1}".into(),
            ));
        }
        Ok(Rank1Form { n, t, cs })
    }

    /// The integral Heisenberg group's form: `n = 2`, `omega = e1* ^ e2*`.
    pub fn heisenberg() -> Rank1Form {
        Rank1Form::new(2, vec![1]).unwrap()
    }

    /// The higher Heisenberg family: `n = 2t`, all coefficients 1.
    pub fn heisenberg_t(t: usize) -> Rank1Form {
        Rank1Form::new(2 * t, vec![1; t]).unwrap()
    }

    /// View as a rank-1 central extension.
    pub fn to_extension(&self) -> CentralExtension {
        let mut w = SkewZ::zero(self.n);
        for (i, &c) in self.cs.iter().enumerate() {
            w.set_pair(i, self.t + i, c as i64);
        }
        CentralExtension::new(self.n, vec![w]).unwrap()
    }
}

/// `mu_k = prod_i k / gcd(k, c_i)`: the divisor that the multiplicity of
/// a primitive k-th root of unity must respect.
pub fn mu_k(cs: &[u64], k: u64) -> u64 {
    assert!(k >= 1);
    let mut out: u128 = 1;
    for &c in cs {
        out *= (k / k.gcd(&c)) as u128;
    }
    u64::try_from(out).expect("mu_k overflow")
}

/// Number of components of `Hom(G, U(m))` in rank one: the `x^m`
/// coefficient of `prod_{k >= 1} (1 - x^{mu_k})^(-phi(k))`. Factors with
/// `mu_k > m` contribute nothing, so the truncated product is finite.
pub fn count_components_rank1(form: &Rank1Form, m: u64) -> Result<BigUint> {
    if form.t == 0 {
        return Err(Error::InvalidInput(
            "trivial k-invariant: the commuting case has no polynomial decomposition".into(),
        ));
    }
    if m == 0 {
        return Err(Error::InvalidInput("degree m must be positive".into()));
    }
    let mut series = vec![BigUint::zero(); m as usize + 1];
    series[0] = BigUint::one();
    // mu_k >= k / prod(c_i), so factors vanish beyond k = m * prod(c_i)
    let prod_c: u64 = form.cs.iter().product();
    for k in 1..=m.saturating_mul(prod_c) {
        let mu = mu_k(&form.cs, k);
        if mu > m {
            continue;
        }
        for _ in 0..euler_phi(k) {
            for i in mu as usize..=m as usize {
                let prev = series[i - mu as usize].clone();
                series[i] += prev;
            }
        }
    }
    Ok(series[m as usize].clone())
}

/// One root of unity in a polynomial: primitive order `k`, residue `a`
/// (the root is `e^(2 pi i a/k)`, `gcd(a, k) = 1`), multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RootSpec {
    pub k: u64,
    pub a: u64,
    pub mult: u64,
}

/// A degree-`m` polynomial all of whose roots are roots of unity, as a
/// multiset of distinct `(k, a)` roots with multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct PolySpec {
    pub m: u64,
    pub roots: Vec<RootSpec>,
}

impl PolySpec {
    pub fn new(roots: Vec<RootSpec>) -> Result<PolySpec> {
        let mut sorted = roots;
        sorted.sort();
        for w in sorted.windows(2) {
            if (w[0].k, w[0].a) == (w[1].k, w[1].a) {
                return Err(Error::InvalidInput("duplicate root in polynomial".into()));
            }
        }
        for r in &sorted {
            if r.mult == 0 || r.k == 0 || r.a.gcd(&r.k) != 1 || (r.k > 1 && r.a >= r.k) {
                return Err(Error::InvalidInput(format!(
                    "invalid root (k={}, a={}, mult={})",
                    r.k, r.a, r.mult
                )));
            }
        }
        let m = sorted.iter().map(|r| r.mult).sum();
        Ok(PolySpec { m, roots: sorted })
    }

    /// Display form like `(z - 1) (z - w(1/2))^2` where `w(a/k)` is the
    /// root of unity at angle `a/k`.
    pub fn display(&self) -> String {
        self.roots
            .iter()
            .map(|r| {
                let root = if r.k == 1 {
                    "z - 1".to_string()
                } else {
                    format!("z - w({}/{})", r.a, r.k)
                };
                if r.mult == 1 {
                    format!("({root})")
                } else {
                    format!("({root})^{}", r.mult)
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl<'de> Deserialize<'de> for PolySpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            m: u64,
            roots: Vec<RootSpec>,
        }
        let wire = Wire::deserialize(d)?;
        let p = PolySpec::new(wire.roots).map_err(D::Error::custom)?;
        if p.m != wire.m {
            return Err(D::Error::custom("polynomial degree disagrees with roots"));
        }
        Ok(p)
    }
}

/// Enumerates all admissible degree-`m` polynomials for the form: every
/// root of primitive order `k` carries multiplicity divisible by
/// `mu_k`. Deterministic order; the count equals
/// [`count_components_rank1`].
pub fn enumerate_polys(form: &Rank1Form, m: u64) -> Result<Vec<PolySpec>> {
    if form.t == 0 {
        return Err(Error::InvalidInput("trivial k-invariant".into()));
    }
    let prod_c: u64 = form.cs.iter().product();
    let mut roots: Vec<(u64, u64, u64)> = Vec::new(); // (k, a, mu)
    for k in 1..=m.saturating_mul(prod_c) {
        let mu = mu_k(&form.cs, k);
        if mu > m {
            continue;
        }
        if k == 1 {
            roots.push((1, 0, mu));
        } else {
            for a in 1..k {
                if a.gcd(&k) == 1 {
                    roots.push((k, a, mu));
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut current: Vec<RootSpec> = Vec::new();
    assign(&roots, 0, m, &mut current, &mut out);
    out.sort();
    Ok(out)
}

fn assign(
    roots: &[(u64, u64, u64)],
    idx: usize,
    remaining: u64,
    current: &mut Vec<RootSpec>,
    out: &mut Vec<PolySpec>,
) {
    if remaining == 0 {
        out.push(PolySpec::new(current.clone()).expect("constructed roots are valid"));
        return;
    }
    if idx == roots.len() {
        return;
    }
    let (k, a, mu) = roots[idx];
    let mut mult = 0;
    loop {
        if mult > 0 {
            current.push(RootSpec { k, a, mult });
        }
        assign(roots, idx + 1, remaining - mult, current, out);
        if mult > 0 {
            current.pop();
        }
        if mult + mu > remaining {
            break;
        }
        mult += mu;
    }
}

/// Block data of one root's contribution to a component: the skew matrix
/// `D_n(-c_1 q, ..., -c_t q)` for `q = a/k`, its sigma, the block size
/// and the multiplicity `l = m_j / sigma`.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentBlock {
    pub root: RootSpec,
    pub d: SkewQZ,
    pub sigma: u64,
    pub block_size: u64,
    pub l: u64,
}

/// Splits an admissible polynomial into its per-root block data. Errors
/// with [`Error::NotGoodPolynomial`] when some multiplicity is not
/// divisible by the matching sigma.
pub fn component_for_poly(form: &Rank1Form, p: &PolySpec) -> Result<Vec<ComponentBlock>> {
    let mut out = Vec::with_capacity(p.roots.len());
    for &root in &p.roots {
        let q = Rat1::new(root.a as i64, root.k as i64)?;
        let ds: Vec<Rat1> = form.cs.iter().map(|&c| q.scale(-(c as i64))).collect();
        let d = block_matrix(&ds, form.n);
        let sigma_big = congruence_normal_form(&d).sigma();
        let sigma = sigma_big
            .to_u64()
            .ok_or_else(|| Error::InternalInvariant("sigma exceeds u64 at desk scale".into()))?;
        debug_assert_eq!(sigma, mu_k(&form.cs, root.k));
        if root.mult % sigma != 0 {
            return Err(Error::NotGoodPolynomial {
                k: root.k,
                mult: root.mult,
                sigma: sigma.to_string(),
            });
        }
        out.push(ComponentBlock { root, d, sigma, block_size: root.mult, l: root.mult / sigma });
    }
    Ok(out)
}

/// One factor `Sym^{power}(T^{dim})` of a moduli descriptor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModuliFactor {
    pub torus_dim: usize,
    pub sym_power: u64,
}

/// The moduli space (unitary-conjugation quotient) of the component of
/// an admissible polynomial: one factor `Sym^{l_j}(T^n)` per distinct
/// root.
pub fn describe_moduli(form: &Rank1Form, p: &PolySpec) -> Result<Vec<ModuliFactor>> {
    Ok(component_for_poly(form, p)?
        .into_iter()
        .map(|b| ModuliFactor { torus_dim: form.n, sym_power: b.l })
        .collect())
}

/// The `C(n,2) x r` coefficient matrix of the k-invariant: row `(i, j)`
/// (lexicographic, `i < j`) holds the coefficients `omega_{ij}^l`.
pub fn omega_matrix(g: &CentralExtension) -> IntMat {
    let pairs = g.n * (g.n - 1) / 2;
    let mut m = IntMat::zero(pairs, g.r);
    let mut row = 0;
    for i in 0..g.n {
        for j in i + 1..g.n {
            for (l, w) in g.coeffs.iter().enumerate() {
                m.set(row, l, w.entry(i, j));
            }
            row += 1;
        }
    }
    m
}

/// Invariants of the coefficient matrix: `B` (pivot product of an
/// integer row echelon form), `C` (order of the torsion group generated
/// by the rational reduced-echelon columns mod 1), `P = B / C`, rank and
/// nullity.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaAnalysis {
    pub rank: usize,
    pub nullity: usize,
    pub b: BigUint,
    pub c: BigUint,
    pub p: BigUint,
}

impl Serialize for OmegaAnalysis {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("OmegaAnalysis", 5)?;
        st.serialize_field("rank", &self.rank)?;
        st.serialize_field("nullity", &self.nullity)?;
        st.serialize_field("b", &self.b.to_string())?;
        st.serialize_field("c", &self.c.to_string())?;
        st.serialize_field("p", &self.p.to_string())?;
        st.end()
    }
}

/// Reduced row echelon form over Q; returns the rational matrix and the
/// pivot columns.
pub fn rational_rref(m: &IntMat) -> (Vec<Vec<BigRational>>, Vec<usize>) {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<BigRational>> = (0..rows)
        .map(|i| {
            (0..cols).map(|j| BigRational::from_integer(BigInt::from(m.get(i, j)))).collect()
        })
        .collect();
    let mut pivots = Vec::new();
    let mut next_row = 0;
    for col in 0..cols {
        let Some(p) = (next_row..rows).find(|&i| !a[i][col].is_zero()) else { continue };
        a.swap(next_row, p);
        let inv = a[next_row][col].recip();
        for x in a[next_row].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != next_row && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                for j in 0..cols {
                    let delta = &f * &a[next_row][j];
                    a[i][j] -= delta;
                }
            }
        }
        pivots.push(col);
        next_row += 1;
        if next_row == rows {
            break;
        }
    }
    (a, pivots)
}

/// Computes the `(rank, nullity, B, C, P)` analysis of a coefficient
/// matrix. `P = B / C` must divide exactly; a remainder signals an
/// implementation bug and is surfaced as an internal invariant error.
pub fn omega_analysis(omega: &IntMat) -> Result<OmegaAnalysis> {
    let (_, pivots) = omega.row_echelon();
    let b: BigUint = pivots.iter().map(|&(_, _, p)| BigUint::from(p.unsigned_abs())).product();
    let rank = pivots.len();
    let nullity = omega.cols() - rank;

    // torsion generated by the RREF columns mod 1
    let (rref, _) = rational_rref(omega);
    let mut l: u64 = 1;
    for row in &rref {
        for x in row {
            let den = x
                .denom()
                .to_u64()
                .ok_or_else(|| Error::InternalInvariant("rref denominator overflow".into()))?;
            l = l.lcm(&den);
        }
    }
    let big_l = BigInt::from(l);
    let gens: Vec<Vec<u64>> = (0..omega.cols())
        .map(|j| {
            rref.iter()
                .map(|row| {
                    let scaled = &row[j] * &big_l;
                    debug_assert!(scaled.is_integer());
                    scaled.to_integer().mod_floor(&big_l).to_u64().unwrap()
                })
                .collect()
        })
        .collect();
    let c = subgroup_order_mod(&gens, l, crate::skew::DEFAULT_CAP)?;

    let (p, rem) = b.div_rem(&c);
    if !rem.is_zero() {
        return Err(Error::InternalInvariant(format!(
            "P = B/C is not an integer: B = {b}, C = {c}"
        )));
    }
    Ok(OmegaAnalysis { rank, nullity, b, c, p })
}

/// Evaluates the k-invariant at an exact eigenvalue tuple: entry
/// `(i, j)` is `sum_l omega_{ij}^l * lambda_l` in Q/Z.
pub fn omega_lambda(g: &CentralExtension, lam: &[Rat1]) -> Result<SkewQZ> {
    if lam.len() != g.r {
        return Err(Error::DimensionMismatch {
            expected: format!("{} angles", g.r),
            found: format!("{}", lam.len()),
        });
    }
    let mut d = SkewQZ::zero(g.n);
    for i in 0..g.n {
        for j in i + 1..g.n {
            let mut acc = Rat1::ZERO;
            for (l, w) in g.coeffs.iter().enumerate() {
                acc = acc.add(&lam[l].scale(w.entry(i, j)));
            }
            if !acc.is_zero() {
                d.set_pair(i, j, acc);
            }
        }
    }
    Ok(d)
}

/// Joint eigenvalue data of a commuting `r`-tuple: the distinct
/// eigenvalue tuples (as exact angles) with their eigenspace dimensions.
pub type EigenData = Vec<(Vec<Rat1>, u64)>;

/// Does a commuting tuple with this eigenvalue data extend to the
/// central extension? True exactly when `sigma(omega(lambda))` divides
/// `dim E_lambda` for every block.
pub fn hom_membership(g: &CentralExtension, eigendata: &EigenData) -> Result<bool> {
    validate_eigendata(g, eigendata)?;
    for (lam, dim) in eigendata {
        let d = omega_lambda(g, lam)?;
        let sigma = congruence_normal_form(&d).sigma();
        if !(BigUint::from(*dim) % &sigma).is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

fn validate_eigendata(g: &CentralExtension, eigendata: &EigenData) -> Result<()> {
    if eigendata.is_empty() {
        return Err(Error::InvalidInput("empty eigenvalue data".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for (lam, dim) in eigendata {
        if lam.len() != g.r {
            return Err(Error::DimensionMismatch {
                expected: format!("{} angles per tuple", g.r),
                found: format!("{}", lam.len()),
            });
        }
        if *dim == 0 {
            return Err(Error::InvalidInput("eigenspace dimensions must be positive".into()));
        }
        if !seen.insert(lam.clone()) {
            return Err(Error::InvalidInput("duplicate eigenvalue tuple".into()));
        }
    }
    Ok(())
}

/// A formal decomposition `sum_j l_j D_j` with distinct `D_j`, whose
/// weights satisfy `sum_j l_j sigma(D_j) = m`.
#[derive(Debug, Clone, Serialize)]
pub struct FDecomposition {
    pub m: u64,
    pub terms: Vec<FTerm>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FTerm {
    pub d: SkewQZ,
    pub sigma: u64,
    pub l: u64,
}

/// Groups eigenvalue data by the value of the k-invariant: each distinct
/// matrix `D = omega(lambda)` receives `l = sum dim E_lambda / sigma(D)`
/// over the tuples mapping to it. Requires membership.
pub fn f_decompose(g: &CentralExtension, eigendata: &EigenData) -> Result<FDecomposition> {
    if !hom_membership(g, eigendata)? {
        return Err(Error::MembershipFailed(
            "some eigenspace dimension is not divisible by its sigma".into(),
        ));
    }
    let mut groups: BTreeMap<SkewQZ, (u64, u64)> = BTreeMap::new(); // D -> (sigma, l)
    let mut m = 0u64;
    for (lam, dim) in eigendata {
        let d = omega_lambda(g, lam)?;
        let sigma = congruence_normal_form(&d).sigma().to_u64().unwrap();
        let entry = groups.entry(d).or_insert((sigma, 0));
        entry.1 += dim / sigma;
        m += dim;
    }
    let terms: Vec<FTerm> =
        groups.into_iter().map(|(d, (sigma, l))| FTerm { d, sigma, l }).collect();
    debug_assert_eq!(terms.iter().map(|t| t.sigma * t.l).sum::<u64>(), m);
    Ok(FDecomposition { m, terms })
}

/// Structure of one fiber `omega^{-1}(D)` of the eigenvalue map
/// `T^r -> T(n, R/Z)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FiberStructure {
    Empty,
    Components { count: BigUint, torus_dim: usize },
}

impl Serialize for FiberStructure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        match self {
            FiberStructure::Empty => {
                let mut st = s.serialize_struct("FiberStructure", 1)?;
                st.serialize_field("empty", &true)?;
                st.end()
            }
            FiberStructure::Components { count, torus_dim } => {
                let mut st = s.serialize_struct("FiberStructure", 3)?;
                st.serialize_field("empty", &false)?;
                st.serialize_field("components", &count.to_string())?;
                st.serialize_field("torus_dim", torus_dim)?;
                st.end()
            }
        }
    }
}

/// Echelonizes `omega` by unimodular row operations, carrying a Q/Z
/// right-hand side through the same operations.
fn echelon_with_rhs(
    omega: &IntMat,
    rhs: &[Rat1],
) -> (IntMat, Vec<Rat1>, Vec<(usize, usize, i64)>) {
    let mut m = omega.clone();
    let mut d: Vec<Rat1> = rhs.to_vec();
    let (rows, cols) = (m.rows(), m.cols());
    let mut pivots = Vec::new();
    let mut next_row = 0;
    for col in 0..cols {
        if next_row >= rows {
            break;
        }
        loop {
            let Some(best) = (next_row..rows)
                .filter(|&i| m.get(i, col) != 0)
                .min_by_key(|&i| m.get(i, col).unsigned_abs())
            else {
                break;
            };
            if best != next_row {
                for j in 0..cols {
                    let (x, y) = (m.get(next_row, j), m.get(best, j));
                    m.set(next_row, j, y);
                    m.set(best, j, x);
                }
                d.swap(next_row, best);
            }
            let p = m.get(next_row, col);
            let mut done = true;
            for i in next_row + 1..rows {
                let v = m.get(i, col);
                if v != 0 {
                    let q = v.div_euclid(p);
                    for j in 0..cols {
                        let w = m.get(i, j) - q * m.get(next_row, j);
                        m.set(i, j, w);
                    }
                    d[i] = d[i].add(&d[next_row].scale(-q));
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
                for j in 0..cols {
                    m.set(next_row, j, -m.get(next_row, j));
                }
                d[next_row] = d[next_row].neg();
            }
            pivots.push((next_row, col, m.get(next_row, col)));
            next_row += 1;
        }
    }
    (m, d, pivots)
}

/// Decides solvability of `Omega x = D'` over `R/Z` and returns the
/// fiber structure: empty when some zero row of the echelon form meets a
/// nonzero entry of the transformed right-hand side, else `P(Omega)`
/// components, each a torus of dimension `nul(Omega)`. Pivot rows are
/// always solvable over `R/Z`.
pub fn omega_fiber(omega: &IntMat, d: &SkewQZ) -> Result<FiberStructure> {
    let n = d.n();
    if omega.rows() != n * (n - 1) / 2 {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows", n * (n - 1) / 2),
            found: format!("{}", omega.rows()),
        });
    }
    let mut rhs = Vec::with_capacity(omega.rows());
    for i in 0..n {
        for j in i + 1..n {
            rhs.push(d.entry(i, j));
        }
    }
    let (_, transformed, pivots) = echelon_with_rhs(omega, &rhs);
    let pivot_rows: std::collections::BTreeSet<usize> =
        pivots.iter().map(|&(r, _, _)| r).collect();
    for (row, value) in transformed.iter().enumerate() {
        if !pivot_rows.contains(&row) && !value.is_zero() {
            return Ok(FiberStructure::Empty);
        }
    }
    let analysis = omega_analysis(omega)?;
    Ok(FiberStructure::Components { count: analysis.p, torus_dim: analysis.nullity })
}

/// Component count and moduli descriptor of `Hom(G, U(m))` restricted to
/// a decomposition `sum l_j D_j`.
#[derive(Debug, Clone, Serialize)]
pub struct RankRComponents {
    /// `prod_j C(P + l_j - 1, l_j)`, or zero when some fiber is empty.
    #[serde(serialize_with = "ser_biguint")]
    pub count: BigUint,
    /// Per-term factors `Sym^{l_j}` of `P` disjoint tori of dimension
    /// `n + nul(Omega)`; empty when the count is zero.
    pub factors: Vec<RankRFactor>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankRFactor {
    #[serde(serialize_with = "ser_biguint")]
    pub copies: BigUint,
    pub torus_dim: usize,
    pub sym_power: u64,
}

fn ser_biguint<S: Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    x.to_string().serialize(s)
}

/// Counts the components of `Hom(G, U(m))` over a decomposition: zero
/// when some `omega^{-1}(D_j)` is empty, otherwise
/// `prod_j C(P + l_j - 1, l_j)`, with the moduli descriptor
/// `prod_j Sym^{l_j}(P disjoint tori of dimension n + nul)`.
pub fn count_components_rank_r(
    g: &CentralExtension,
    decomp: &FDecomposition,
) -> Result<RankRComponents> {
    let omega = omega_matrix(g);
    let analysis = omega_analysis(&omega)?;
    let p_u64 = analysis
        .p
        .to_u64()
        .ok_or_else(|| Error::InternalInvariant("P exceeds u64 at desk scale".into()))?;
    let mut count = BigUint::one();
    let mut factors = Vec::with_capacity(decomp.terms.len());
    for term in &decomp.terms {
        match omega_fiber(&omega, &term.d)? {
            FiberStructure::Empty => {
                return Ok(RankRComponents { count: BigUint::zero(), factors: Vec::new() });
            }
            FiberStructure::Components { count: p, torus_dim } => {
                count *= binomial(p_u64 + term.l - 1, term.l);
                factors.push(RankRFactor {
                    copies: p,
                    torus_dim: g.n + torus_dim,
                    sym_power: term.l,
                });
            }
        }
    }
    Ok(RankRComponents { count, factors })
}

// --------------------------------------------------------------------
// serialization of CentralExtension:
// {"n": .., "r": .., "coeffs": [[[int, ..] ..] ..]}
// --------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ExtensionWire {
    n: usize,
    r: usize,
    coeffs: Vec<Vec<Vec<i64>>>,
}

impl Serialize for CentralExtension {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ExtensionWire {
            n: self.n,
            r: self.r,
            coeffs: self.coeffs.iter().map(|c| c.rows()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CentralExtension {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = ExtensionWire::deserialize(d)?;
        let coeffs: Result<Vec<SkewZ>> =
            wire.coeffs.into_iter().map(|c| SkewZ::from_entries(wire.n, c)).collect();
        let g =
            coeffs.and_then(|c| CentralExtension::new(wire.n, c)).map_err(D::Error::custom)?;
        if g.r != wire.r {
            return Err(D::Error::custom("rank disagrees with coefficient count"));
        }
        Ok(g)
    }
}

/// The worked 3x4 coefficient-matrix example: its echelon form has
/// pivots 4 and 3, the rational echelon form has thirds in the free
/// columns, and `(B, C, P) = (12, 3, 4)` with nullity 2.
pub fn worked_rank4_extension() -> CentralExtension {
    let mk = |w12: i64, w13: i64| {
        let mut w = SkewZ::zero(3);
        if w12 != 0 {
            w.set_pair(0, 1, w12);
        }
        if w13 != 0 {
            w.set_pair(0, 2, w13);
        }
        w
    };
    CentralExtension::new(3, vec![mk(4, 0), mk(-1, 3), mk(1, 1), mk(-6, 2)]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heis() -> Rank1Form {
        Rank1Form::heisenberg()
    }

    #[test]
    fn mu_values() {
        assert_eq!(mu_k(&[1], 5), 5);
        assert_eq!(mu_k(&[1, 1], 3), 9);
        assert_eq!(mu_k(&[2], 2), 1);
        assert_eq!(mu_k(&[2], 4), 2);
    }

    #[test]
    fn heisenberg_component_counts() {
        let got: Vec<BigUint> =
            (1..=5).map(|m| count_components_rank1(&heis(), m).unwrap()).collect();
        let want: Vec<BigUint> = [1u32, 2, 4, 7, 13].iter().map(|&x| BigUint::from(x)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn higher_heisenberg_thresholds() {
        // the two-component window [2^t, 2^(t+1)) requires t >= 2; at
        // t = 1 roots of order 3 already enter at m = 3
        for t in 2..=3usize {
            let form = Rank1Form::heisenberg_t(t);
            let threshold = 2u64.pow(t as u32);
            for m in 1..=(2 * threshold) {
                let count = count_components_rank1(&form, m).unwrap();
                if m < threshold {
                    assert_eq!(count, BigUint::one(), "t={t} m={m}");
                } else if m < 2 * threshold {
                    assert_eq!(count, BigUint::from(2u32), "t={t} m={m}");
                } else {
                    assert!(count >= BigUint::from(3u32), "t={t} m={m}");
                }
            }
        }
    }

    #[test]
    fn enumeration_matches_generating_function() {
        for cs in [vec![1], vec![2], vec![3], vec![1, 1], vec![1, 2], vec![1, 3], vec![2, 2]] {
            let form = Rank1Form::new(2 * cs.len(), cs).unwrap();
            for m in 1..=8u64 {
                let count = count_components_rank1(&form, m).unwrap();
                let polys = enumerate_polys(&form, m).unwrap();
                assert_eq!(BigUint::from(polys.len()), count, "form {form:?} m={m}");
                for p in &polys {
                    let blocks = component_for_poly(&form, p).unwrap();
                    let total: u64 = blocks.iter().map(|b| b.sigma * b.l).sum();
                    assert_eq!(total, m);
                }
            }
        }
    }

    #[test]
    fn heisenberg_enumeration_small_cases() {
        let polys = enumerate_polys(&heis(), 2).unwrap();
        // (z - 1)^2 and (z + 1)^2
        assert_eq!(polys.len(), 2);
        assert_eq!(polys[0].roots, vec![RootSpec { k: 1, a: 0, mult: 2 }]);
        assert_eq!(polys[1].roots, vec![RootSpec { k: 2, a: 1, mult: 2 }]);

        let polys = enumerate_polys(&heis(), 3).unwrap();
        assert_eq!(polys.len(), 4);
        let displays: Vec<String> = polys.iter().map(PolySpec::display).collect();
        assert!(displays.contains(&"(z - 1)^3".to_string()));
        assert!(displays.contains(&"(z - 1) (z - w(1/2))^2".to_string()));
        assert!(displays.contains(&"(z - w(1/3))^3".to_string()));
        assert!(displays.contains(&"(z - w(2/3))^3".to_string()));
    }

    #[test]
    fn component_blocks_for_heisenberg() {
        // root -1 with multiplicity 2: D_2(1/2), sigma 2, l 1
        let p = PolySpec::new(vec![RootSpec { k: 2, a: 1, mult: 2 }]).unwrap();
        let blocks = component_for_poly(&heis(), &p).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].sigma, 2);
        assert_eq!(blocks[0].l, 1);
        assert_eq!(blocks[0].d.entry(1, 0), Rat1::of(1, 2));

        // root 1: the zero matrix, sigma 1, l = multiplicity
        let p = PolySpec::new(vec![RootSpec { k: 1, a: 0, mult: 3 }]).unwrap();
        let blocks = component_for_poly(&heis(), &p).unwrap();
        assert!(blocks[0].d.is_zero());
        assert_eq!(blocks[0].l, 3);

        // c = [2] and a root of order 4: d = -2/4 = 1/2, sigma 2
        let form = Rank1Form::new(2, vec![2]).unwrap();
        let p = PolySpec::new(vec![RootSpec { k: 4, a: 1, mult: 2 }]).unwrap();
        let blocks = component_for_poly(&form, &p).unwrap();
        assert_eq!(blocks[0].d.entry(1, 0), Rat1::of(1, 2));
        assert_eq!(blocks[0].sigma, 2);

        // a bad polynomial: multiplicity not divisible by sigma
        let p = PolySpec::new(vec![RootSpec { k: 2, a: 1, mult: 3 }]).unwrap();
        assert!(matches!(
            component_for_poly(&heis(), &p),
            Err(Error::NotGoodPolynomial { .. })
        ));
    }

    #[test]
    fn moduli_descriptors() {
        // (z + 1)^2 -> Sym^1 T^2
        let p = PolySpec::new(vec![RootSpec { k: 2, a: 1, mult: 2 }]).unwrap();
        assert_eq!(
            describe_moduli(&heis(), &p).unwrap(),
            vec![ModuliFactor { torus_dim: 2, sym_power: 1 }]
        );
        // (z - 1)^3 -> Sym^3 T^2
        let p = PolySpec::new(vec![RootSpec { k: 1, a: 0, mult: 3 }]).unwrap();
        assert_eq!(
            describe_moduli(&heis(), &p).unwrap(),
            vec![ModuliFactor { torus_dim: 2, sym_power: 3 }]
        );
        // (z - 1)(z + 1)^2 -> Sym^1 T^2 x Sym^1 T^2
        let p = PolySpec::new(vec![
            RootSpec { k: 1, a: 0, mult: 1 },
            RootSpec { k: 2, a: 1, mult: 2 },
        ])
        .unwrap();
        assert_eq!(
            describe_moduli(&heis(), &p).unwrap(),
            vec![
                ModuliFactor { torus_dim: 2, sym_power: 1 },
                ModuliFactor { torus_dim: 2, sym_power: 1 }
            ]
        );
    }

    #[test]
    fn omega_matrix_shapes() {
        let heis_ext = heis().to_extension();
        let m = omega_matrix(&heis_ext);
        assert_eq!((m.rows(), m.cols()), (1, 1));
        assert_eq!(m.get(0, 0), 1);

        let g = worked_rank4_extension();
        let m = omega_matrix(&g);
        assert_eq!((m.rows(), m.cols()), (3, 4));
        assert_eq!(m.get(0, 0), 4);
        assert_eq!(m.get(1, 1), 3);
        assert_eq!(m.get(2, 3), 0);
    }

    #[test]
    fn worked_omega_analysis() {
        let a = omega_analysis(&omega_matrix(&worked_rank4_extension())).unwrap();
        assert_eq!(a.b, BigUint::from(12u32));
        assert_eq!(a.c, BigUint::from(3u32));
        assert_eq!(a.p, BigUint::from(4u32));
        assert_eq!(a.rank, 2);
        assert_eq!(a.nullity, 2);
    }

    #[test]
    fn simple_omega_analyses() {
        // unimodular column space
        let id = IntMat::from_rows(vec![vec![1, 0], vec![0, 1], vec![0, 0]]).unwrap();
        let a = omega_analysis(&id).unwrap();
        assert_eq!(
            (a.b.clone(), a.c.clone(), a.p.clone()),
            (BigUint::one(), BigUint::one(), BigUint::one())
        );
        // single entry q
        let q = IntMat::from_rows(vec![vec![6]]).unwrap();
        let a = omega_analysis(&q).unwrap();
        assert_eq!(a.b, BigUint::from(6u32));
        assert_eq!(a.c, BigUint::one());
        assert_eq!(a.p, BigUint::from(6u32));
        // P * C = B and rank + nullity = r on assorted matrices
        for rows in [
            vec![vec![2, 1], vec![0, 0]],
            vec![vec![4, -1, 1], vec![0, 3, 1], vec![0, 0, 0]],
            vec![vec![2, 4], vec![6, 2]],
        ] {
            let m = IntMat::from_rows(rows).unwrap();
            let a = omega_analysis(&m).unwrap();
            assert_eq!(&a.p * &a.c, a.b);
            assert_eq!(a.rank + a.nullity, m.cols());
        }
    }

    #[test]
    fn omega_lambda_values() {
        let g = heis().to_extension();
        let d = omega_lambda(&g, &[Rat1::of(1, 2)]).unwrap();
        assert_eq!(d.entry(0, 1), Rat1::of(1, 2));
        let d = omega_lambda(&g, &[Rat1::of(1, 3)]).unwrap();
        assert_eq!(d.entry(0, 1), Rat1::of(1, 3));
        let d = omega_lambda(&g, &[Rat1::ZERO]).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn membership_and_decomposition() {
        let g = heis().to_extension();
        assert!(hom_membership(&g, &vec![(vec![Rat1::of(1, 2)], 2)]).unwrap());
        assert!(!hom_membership(&g, &vec![(vec![Rat1::of(1, 2)], 3)]).unwrap());
        assert!(hom_membership(&g, &vec![(vec![Rat1::ZERO], 7)]).unwrap());

        let f = f_decompose(&g, &vec![(vec![Rat1::of(1, 2)], 2)]).unwrap();
        assert_eq!(f.m, 2);
        assert_eq!(f.terms.len(), 1);
        assert_eq!(f.terms[0].l, 1);
        assert_eq!(f.terms[0].sigma, 2);

        let f = f_decompose(&g, &vec![(vec![Rat1::ZERO], 3)]).unwrap();
        assert_eq!(f.terms[0].l, 3);
        assert!(f.terms[0].d.is_zero());

        // two eigenvalue tuples with the same k-invariant value merge
        let mut w1 = SkewZ::zero(2);
        w1.set_pair(0, 1, 1);
        let g2 = CentralExtension::new(2, vec![w1, SkewZ::zero(2)]).unwrap();
        let data = vec![
            (vec![Rat1::of(1, 2), Rat1::ZERO], 2),
            (vec![Rat1::of(1, 2), Rat1::of(1, 3)], 4),
        ];
        let f = f_decompose(&g2, &data).unwrap();
        assert_eq!(f.terms.len(), 1);
        assert_eq!(f.terms[0].l, 3);

        // membership failure raises on decomposition
        assert!(matches!(
            f_decompose(&g, &vec![(vec![Rat1::of(1, 2)], 3)]),
            Err(Error::MembershipFailed(_))
        ));
    }

    #[test]
    fn fibers() {
        // full column rank: never empty
        let omega = IntMat::from_rows(vec![vec![2]]).unwrap();
        let mut d = SkewQZ::zero(2);
        d.set_pair(0, 1, Rat1::of(1, 2));
        let fiber = omega_fiber(&omega, &d).unwrap();
        assert_eq!(
            fiber,
            FiberStructure::Components { count: BigUint::from(2u32), torus_dim: 0 }
        );

        // inconsistent zero row: target entry with no coefficients
        let g = worked_rank4_extension();
        let omega = omega_matrix(&g);
        let mut d = SkewQZ::zero(3);
        d.set_pair(1, 2, Rat1::of(1, 5)); // the (2,3) row of omega is zero
        assert_eq!(omega_fiber(&omega, &d).unwrap(), FiberStructure::Empty);

        // a solvable instance for the worked example
        let d =
            omega_lambda(&g, &[Rat1::of(1, 4), Rat1::ZERO, Rat1::ZERO, Rat1::ZERO]).unwrap();
        let fiber = omega_fiber(&omega, &d).unwrap();
        assert_eq!(
            fiber,
            FiberStructure::Components { count: BigUint::from(4u32), torus_dim: 2 }
        );
    }

    #[test]
    fn rank_r_component_counts() {
        // P = 4, single D with l = 1: C(4, 1) = 4. The angle 1/8 in the
        // first central coordinate makes omega(lambda)_{12} = 4/8 = 1/2,
        // so sigma = 2 and dimension 2 gives l = 1.
        let g = worked_rank4_extension();
        let lam = vec![Rat1::of(1, 8), Rat1::ZERO, Rat1::ZERO, Rat1::ZERO];
        let f = f_decompose(&g, &vec![(lam, 2)]).unwrap();
        assert_eq!(f.terms[0].l, 1);
        let out = count_components_rank_r(&g, &f).unwrap();
        assert_eq!(out.count, BigUint::from(4u32));
        assert_eq!(out.factors.len(), 1);
        assert_eq!(out.factors[0].torus_dim, 3 + 2);

        // P = 2 with l = 2: C(3, 2) = 3
        let omega2 = Rank1Form::new(2, vec![2]).unwrap().to_extension();
        let lam = vec![Rat1::of(1, 4)];
        let f = f_decompose(&omega2, &vec![(lam, 4)]).unwrap();
        assert_eq!(f.terms[0].l, 2);
        let out = count_components_rank_r(&omega2, &f).unwrap();
        assert_eq!(out.count, BigUint::from(3u32));
    }

    #[test]
    fn rank1_consistency_with_rank_r() {
        // as a rank-1 extension the Heisenberg group has P = 1, so every
        // admissible decomposition contributes exactly one component,
        // matching one component per polynomial
        let g = heis().to_extension();
        let analysis = omega_analysis(&omega_matrix(&g)).unwrap();
        assert_eq!(analysis.p, BigUint::one());
        for m in 1..=5u64 {
            for p in enumerate_polys(&heis(), m).unwrap() {
                let blocks = component_for_poly(&heis(), &p).unwrap();
                let eigendata: EigenData = p
                    .roots
                    .iter()
                    .map(|r| (vec![Rat1::of(r.a as i64, r.k as i64)], r.mult))
                    .collect();
                let f = f_decompose(&g, &eigendata).unwrap();
                assert_eq!(f.m, m);
                let mut want: Vec<(SkewQZ, u64)> =
                    blocks.iter().map(|b| (b.d.clone(), b.l)).collect();
                want.sort();
                let mut got: Vec<(SkewQZ, u64)> =
                    f.terms.iter().map(|t| (t.d.clone(), t.l)).collect();
                got.sort();
                assert_eq!(got, want);
                let out = count_components_rank_r(&g, &f).unwrap();
                assert_eq!(out.count, BigUint::one());
            }
        }
    }

    #[test]
    fn extension_json_round_trip() {
        let g = worked_rank4_extension();
        let json = serde_json::to_string(&g).unwrap();
        let back: CentralExtension = serde_json::from_str(&json).unwrap();
        assert_eq!(g, back);
        // non-skew input is rejected
        let bad = r#"{"n":2,"r":1,"coeffs":[[[0,1],[1,0]]]}"#;
        assert!(serde_json::from_str::<CentralExtension>(bad).is_err());
    }
}
