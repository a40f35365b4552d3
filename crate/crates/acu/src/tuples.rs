//! Explicit almost-commuting unitary tuples.
//!
//! For block data `D_n(d_1, ..., d_t)` with `sigma = |d_1| ... |d_t|`
//! dividing `m = l * sigma`, the model family of `D`-commuting tuples
//! consists of `t` shift-with-phase matrices, `t` diagonal matrices with
//! entries `gamma_k^{p_k} * alpha`, and `n - 2t` plain diagonal matrices,
//! all indexed by tuples `(p_1, ..., p_t, j)` with `0 <= p_k < |d_k|` and
//! `1 <= j <= l`. This module builds that family with exact rational
//! phases, classifies arbitrary tuples by their commutator angles,
//! verifies relations numerically, checks characteristic polynomials
//! against their closed forms, and recovers the spectral data
//! `(v_j, alpha, beta)` of any `D`-commuting tuple constructively.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cmatrix::{
    angle_in_turns, complement_basis, normal_eigenpairs, poly_from_roots, poly_mul,
    simultaneous_eigenbasis, unit_phase, CMatrix,
};
use crate::error::{Error, Result};
use crate::rat1::{snap_to_rational, Rat1};
use crate::skew::SkewQZ;

/// Default tolerance for construction-level checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default tolerance for spectral extraction and round trips, where
/// eigenvalue clustering costs digits.
pub const SPECTRAL_TOL: f64 = 1e-6;

/// Default denominator cap for snapping measured angles to rationals:
/// commutator scalars of m-by-m unitaries are m-th roots of unity, and
/// the extra factor leaves room for the eigenvalue angles themselves.
pub fn default_max_den(m: usize) -> u64 {
    (m as u64) * 720
}

/// An ordered tuple of `n` complex `m`-by-`m` matrices, expected (and
/// checked by the operations, not assumed) to be unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct ACTuple {
    pub n: usize,
    pub m: usize,
    pub mats: Vec<CMatrix>,
}

impl ACTuple {
    pub fn new(mats: Vec<CMatrix>) -> Result<ACTuple> {
        let n = mats.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty tuple".into()));
        }
        let m = mats[0].rows();
        if mats.iter().any(|a| a.rows() != m || a.cols() != m) {
            return Err(Error::DimensionMismatch {
                expected: format!("{m}x{m} square matrices"),
                found: "mixed shapes".into(),
            });
        }
        Ok(ACTuple { n, m, mats })
    }

    /// Worst unitarity defect over the member matrices.
    pub fn unitarity_defect(&self) -> f64 {
        self.mats.iter().map(CMatrix::unitarity_defect).fold(0.0, f64::max)
    }
}

/// Spectral data of a `D`-commuting tuple: block values and their
/// orders, the multiplicity `l = m / sigma`, the snapped eigenvalue
/// angles `alpha_{i'j}` (for `t < i' <= n`) and `beta_{ij}` (for
/// `i <= t`), and the orthonormal basis of shifted vectors in index
/// order.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralData {
    pub t: usize,
    pub ds: Vec<Rat1>,
    pub orders: Vec<u64>,
    pub l: usize,
    /// `l` rows; row `j` holds the angles of `alpha_{i'j}` for
    /// `i' = t+1, ..., n`.
    pub alphas: Vec<Vec<Rat1>>,
    /// `l` rows; row `j` holds the angles of `beta_{ij}` for
    /// `i = 1, ..., t`.
    pub betas: Vec<Vec<Rat1>>,
    #[serde(serialize_with = "serialize_cmatrix")]
    pub basis: CMatrix,
}

impl SpectralData {
    /// Canonical representative of the torus-action orbit: the angles
    /// `alpha_{k+t, j}` are only defined up to multiples of `d_k`, so
    /// they are reduced mod `1/|d_k|`, and rows are sorted. Two tuples
    /// carry the same component data exactly when these agree.
    pub fn normalized_orbit(&self) -> Vec<(Vec<Rat1>, Vec<Rat1>)> {
        let mut rows: Vec<(Vec<Rat1>, Vec<Rat1>)> = (0..self.l)
            .map(|j| {
                let mut alpha = self.alphas[j].clone();
                for (k, a) in alpha.iter_mut().enumerate().take(self.t) {
                    *a = reduce_mod(a, self.orders[k]);
                }
                (alpha, self.betas[j].clone())
            })
            .collect();
        rows.sort();
        rows
    }
}

/// `x mod (1/o)`, landing in `[0, 1/o)`.
fn reduce_mod(x: &Rat1, o: u64) -> Rat1 {
    let num = (x.num() as i128 * o as i128).rem_euclid(x.den() as i128) as i64;
    Rat1::of(num, x.den() * o as i64)
}

fn index_of(ps: &[u64], j: usize, orders: &[u64]) -> usize {
    let mut idx = 0usize;
    let mut stride = 1usize;
    for (p, o) in ps.iter().zip(orders) {
        idx += *p as usize * stride;
        stride *= *o as usize;
    }
    idx + stride * j
}

fn decode_index(mut idx: usize, orders: &[u64]) -> (Vec<u64>, usize) {
    let ps: Vec<u64> = orders
        .iter()
        .map(|&o| {
            let p = (idx % o as usize) as u64;
            idx /= o as usize;
            p
        })
        .collect();
    (ps, idx)
}

/// Builds the model `D`-commuting tuple for block values `ds`, ambient
/// tuple length `n`, multiplicity `l` and exact phase angles.
///
/// `alphas` has `l` rows of `n - t` angles (`alpha_{i'j}` for
/// `i' = t+1, ..., n`), `betas` has `l` rows of `t` angles. The matrix
/// dimension is `m = l * |d_1| * ... * |d_t|`. Every matrix is unitary
/// by construction up to floating-point rounding, and classifying the
/// result returns `standard_block(ds, n)` exactly. The chain condition
/// on the orders is not required here; any nonzero block values do.
pub fn build_zd(
    ds: &[Rat1],
    n: usize,
    l: usize,
    alphas: &[Vec<Rat1>],
    betas: &[Vec<Rat1>],
) -> Result<ACTuple> {
    let t = ds.len();
    if 2 * t > n || n == 0 {
        return Err(Error::InvalidBlock(format!("2t = {} exceeds n = {n}", 2 * t)));
    }
    if ds.iter().any(Rat1::is_zero) {
        return Err(Error::InvalidBlock("block values must be nonzero".into()));
    }
    if l == 0 {
        return Err(Error::InvalidInput("multiplicity l must be positive".into()));
    }
    if alphas.len() != l || alphas.iter().any(|row| row.len() != n - t) {
        return Err(Error::DimensionMismatch {
            expected: format!("{l} alpha rows of length {}", n - t),
            found: format!("{} rows", alphas.len()),
        });
    }
    if betas.len() != l || betas.iter().any(|row| row.len() != t) {
        return Err(Error::DimensionMismatch {
            expected: format!("{l} beta rows of length {t}"),
            found: format!("{} rows", betas.len()),
        });
    }
    let orders: Vec<u64> = ds.iter().map(Rat1::order).collect();
    let sigma: usize = orders.iter().product::<u64>() as usize;
    let m = sigma * l;

    let mut mats = Vec::with_capacity(n);
    for i in 0..n {
        let mut a = CMatrix::zero(m, m);
        for nu in 0..m {
            let (ps, j) = decode_index(nu, &orders);
            if i < t {
                // shift in the p_i coordinate, beta phase on wraparound
                let mut target = ps.clone();
                if ps[i] + 1 < orders[i] {
                    target[i] += 1;
                    a.set(index_of(&target, j, &orders), nu, Complex64::ONE);
                } else {
                    target[i] = 0;
                    let phase = unit_phase(betas[j][i].to_f64());
                    a.set(index_of(&target, j, &orders), nu, phase);
                }
            } else {
                // diagonal entry gamma_k^{p_k} * alpha (no gamma beyond 2t)
                let mut angle = alphas[j][i - t];
                if i < 2 * t {
                    let k = i - t;
                    angle = angle.add(&ds[k].scale(ps[k] as i64));
                }
                a.set(nu, nu, unit_phase(angle.to_f64()));
            }
        }
        mats.push(a);
    }
    ACTuple::new(mats)
}

fn commutator_scalar(a: &CMatrix, b: &CMatrix) -> (Complex64, f64) {
    let m = a.rows();
    let comm = a.mul(b).mul(&a.adjoint()).mul(&b.adjoint());
    let c = comm.trace() / m as f64;
    let mut defect: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let expected = if i == j { c } else { Complex64::ZERO };
            defect = defect.max((comm.get(i, j) - expected).norm());
        }
    }
    (c / c.norm().max(1e-300), defect)
}

/// Classifies an almost-commuting tuple: measures every commutator
/// `[A_i, A_j] = A_i A_j A_i^{-1} A_j^{-1}`, checks it is scalar within
/// `tol`, snaps the scalar's angle to a rational with denominator at
/// most `max_den` and assembles the skew matrix of phases.
pub fn rho_classify(tuple: &ACTuple, tol: f64, max_den: u64) -> Result<SkewQZ> {
    for (i, a) in tuple.mats.iter().enumerate() {
        let defect = a.unitarity_defect();
        if defect > tol {
            return Err(Error::NotUnitary { index: i, defect });
        }
    }
    let mut d = SkewQZ::zero(tuple.n);
    for i in 0..tuple.n {
        for j in i + 1..tuple.n {
            let (c, defect) = commutator_scalar(&tuple.mats[i], &tuple.mats[j]);
            if defect > tol {
                return Err(Error::CommutatorNotScalar { i, j, defect });
            }
            let angle = angle_in_turns(c);
            let (snapped, dist) = snap_to_rational(angle, max_den);
            if dist > tol {
                return Err(Error::SnapFailed { angle, max_den, distance: dist });
            }
            if !snapped.is_zero() {
                d.set_pair(i, j, snapped);
            }
        }
    }
    Ok(d)
}

/// Numerical verification report for a tuple against commutation data.
#[derive(Debug, Clone, Serialize)]
pub struct RelationReport {
    /// `max |(A^H A - I)|` over the tuple.
    pub unitarity_defect: f64,
    /// Worst distance of a commutator from the nearest scalar matrix.
    pub commutator_defect: f64,
    /// Worst distance of a commutator scalar from `e^(2 pi i d_ij)`.
    pub angle_defect: f64,
    /// Pair attaining the worst defect when the check fails.
    pub worst_pair: Option<(usize, usize)>,
    pub tol: f64,
    pub pass: bool,
}

/// Checks that `tuple` is `D`-commuting at tolerance `tol`: all members
/// unitary, all commutators scalar, all scalar angles matching `D`.
/// Failures are reported, not raised.
pub fn verify_relations(tuple: &ACTuple, d: &SkewQZ, tol: f64) -> RelationReport {
    let unitarity_defect = tuple.unitarity_defect();
    let mut commutator_defect: f64 = 0.0;
    let mut angle_defect: f64 = 0.0;
    let mut worst_pair = None;
    let mut worst: f64 = 0.0;
    if d.n() == tuple.n {
        for i in 0..tuple.n {
            for j in i + 1..tuple.n {
                let (c, defect) = commutator_scalar(&tuple.mats[i], &tuple.mats[j]);
                let expected = unit_phase(d.entry(i, j).to_f64());
                let adev = (c - expected).norm();
                commutator_defect = commutator_defect.max(defect);
                angle_defect = angle_defect.max(adev);
                if defect.max(adev) > worst {
                    worst = defect.max(adev);
                    worst_pair = Some((i, j));
                }
            }
        }
    }
    let pass = d.n() == tuple.n
        && unitarity_defect <= tol
        && commutator_defect <= tol
        && angle_defect <= tol;
    RelationReport {
        unitarity_defect,
        commutator_defect,
        angle_defect,
        worst_pair: if pass { None } else { worst_pair },
        tol,
        pass,
    }
}

/// Conjugates every member: `A_i -> U A_i U^H`. `U` must be unitary
/// within `tol`.
pub fn conjugate(tuple: &ACTuple, u: &CMatrix, tol: f64) -> Result<ACTuple> {
    if u.rows() != tuple.m || u.cols() != tuple.m {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0}", tuple.m),
            found: format!("{}x{}", u.rows(), u.cols()),
        });
    }
    let defect = u.unitarity_defect();
    if defect > tol {
        return Err(Error::NotUnitary { index: 0, defect });
    }
    let uh = u.adjoint();
    let mats = tuple.mats.iter().map(|a| u.mul(a).mul(&uh)).collect();
    ACTuple::new(mats)
}

/// Reads the block data `(t, ds)` off a matrix in standard block form;
/// errors if the matrix is not `D_n(d_1, ..., d_t)` on the nose.
pub fn block_data(d: &SkewQZ) -> Result<(usize, Vec<Rat1>)> {
    let n = d.n();
    let nonzero: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .filter(|&(i, j)| !d.entry(i, j).is_zero())
        .collect();
    let t = nonzero.len();
    let expected: Vec<(usize, usize)> = (0..t).map(|k| (t + k, k)).collect();
    if nonzero != expected {
        return Err(Error::InvalidBlock(
            "matrix is not in standard block form; reduce it first".into(),
        ));
    }
    Ok((t, (0..t).map(|k| d.entry(t + k, k)).collect()))
}

/// Constructive spectral decomposition of a `D`-commuting tuple, for `D`
/// in standard block form.
///
/// Follows the structure theorem's procedure: simultaneously
/// diagonalize the commuting tail `A_{t+1}, ..., A_n`, pick a joint
/// eigenspace `W`, find a common eigenvector of the commuting
/// restrictions `A_i^{|d_i|}` on `W`, span a block with its shifted
/// images and recurse on the orthogonal complement. Angles are snapped
/// to rationals with denominators at most `max_den`.
pub fn extract_canonical_basis(
    tuple: &ACTuple,
    d: &SkewQZ,
    tol: f64,
    max_den: u64,
) -> Result<SpectralData> {
    let report = verify_relations(tuple, d, tol);
    if !report.pass {
        return Err(Error::InvalidInput(format!(
            "tuple is not D-commuting for the given block data \
             (unitarity {:.2e}, commutator {:.2e}, angle {:.2e})",
            report.unitarity_defect, report.commutator_defect, report.angle_defect
        )));
    }
    let (t, ds) = block_data(d)?;
    let orders: Vec<u64> = ds.iter().map(Rat1::order).collect();
    let sigma: usize = orders.iter().product::<u64>() as usize;
    if tuple.m % sigma != 0 {
        return Err(Error::InvalidInput(format!(
            "sigma = {sigma} does not divide m = {}; no such tuple exists",
            tuple.m
        )));
    }
    let l = tuple.m / sigma;
    let m = tuple.m;
    let n = tuple.n;

    let powered: Vec<CMatrix> = (0..t).map(|i| tuple.mats[i].pow(orders[i])).collect();

    let mut remaining = CMatrix::identity(m);
    let mut basis = CMatrix::zero(m, m);
    let mut alpha_rows: Vec<Vec<Complex64>> = Vec::with_capacity(l);
    let mut beta_rows: Vec<Vec<Complex64>> = Vec::with_capacity(l);

    for j in 0..l {
        // joint eigenspace of the commuting tail within the remaining
        // subspace; clusters come back sorted, take the first
        let tail: Vec<CMatrix> = (t..n)
            .map(|i| remaining.adjoint().mul(&tuple.mats[i]).mul(&remaining))
            .collect();
        let tail_refs: Vec<&CMatrix> = tail.iter().collect();
        let clusters = simultaneous_eigenbasis(&tail_refs, tol)?;
        let (alpha_tuple, w_compressed) = clusters
            .into_iter()
            .next()
            .ok_or_else(|| Error::NonConvergence("no joint eigenspace found".into()))?;
        let w_basis = remaining.mul(&w_compressed);

        // common eigenvector of the commuting powers A_i^{|d_i|} on W
        let v = if t > 0 {
            let powers: Vec<CMatrix> =
                powered.iter().map(|p| w_basis.adjoint().mul(p).mul(&w_basis)).collect();
            let power_refs: Vec<&CMatrix> = powers.iter().collect();
            let clusters = simultaneous_eigenbasis(&power_refs, tol)?;
            let (beta_tuple, z) = clusters
                .into_iter()
                .next()
                .ok_or_else(|| Error::NonConvergence("no common eigenvector".into()))?;
            beta_rows.push(beta_tuple);
            w_basis.mul(&z).col(0)
        } else {
            beta_rows.push(Vec::new());
            w_basis.col(0)
        };
        alpha_rows.push(alpha_tuple);

        // span the block by shifted images of v, in index order
        let mut block_cols: Vec<Vec<Complex64>> = Vec::with_capacity(sigma);
        block_cols.push(v);
        for lin in 1..sigma {
            let (ps, _) = decode_index(lin, &orders);
            let k = ps.iter().position(|&p| p > 0).unwrap();
            let stride: usize = orders[..k].iter().product::<u64>() as usize;
            let prev = &block_cols[lin - stride];
            block_cols.push(tuple.mats[k].mat_vec(prev));
        }
        let block = CMatrix::from_cols(m, &block_cols);
        let ortho_defect = block.unitarity_defect();
        if ortho_defect > 100.0 * tol {
            return Err(Error::NonConvergence(format!(
                "shifted vectors lost orthonormality (defect {ortho_defect:.2e})"
            )));
        }
        for (lin, col) in block_cols.iter().enumerate() {
            let (ps, _) = decode_index(lin, &orders);
            basis.set_col(index_of(&ps, j, &orders), col);
        }
        if j + 1 < l {
            remaining = complement_basis(&remaining, &block)?;
        }
    }

    let snap = |z: Complex64| -> Result<Rat1> {
        let angle = angle_in_turns(z);
        let (r, dist) = snap_to_rational(angle, max_den);
        if dist > tol {
            return Err(Error::SnapFailed { angle, max_den, distance: dist });
        }
        Ok(r)
    };
    let alphas: Vec<Vec<Rat1>> = alpha_rows
        .iter()
        .map(|row| row.iter().copied().map(snap).collect())
        .collect::<Result<_>>()?;
    let betas: Vec<Vec<Rat1>> = beta_rows
        .iter()
        .map(|row| row.iter().copied().map(snap).collect())
        .collect::<Result<_>>()?;

    Ok(SpectralData { t, ds, orders, l, alphas, betas, basis })
}

/// Rebuilds the model tuple from extracted spectral data.
pub fn rebuild(sd: &SpectralData, n: usize) -> Result<ACTuple> {
    build_zd(&sd.ds, n, sd.l, &sd.alphas, &sd.betas)
}

/// Per-matrix comparison of the numerically computed characteristic
/// polynomial against its closed form in terms of the spectral data.
#[derive(Debug, Clone, Serialize)]
pub struct CharPolyReport {
    /// Worst coefficient deviation per matrix.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Checks the three-case closed form of the characteristic polynomials:
/// `prod_j (z^{o_i} - beta_ij)^(m / (o_i l))` for the shift matrices,
/// `prod_j (z^{o_{i-t}} - alpha_ij^{o_{i-t}})^(m / (o_{i-t} l))` for the
/// paired diagonals, and `prod_j (z - alpha_ij)^(m/l)` for the rest.
pub fn char_poly_check(tuple: &ACTuple, sd: &SpectralData, tol: f64) -> Result<CharPolyReport> {
    let m = tuple.m;
    let t = sd.t;
    let l = sd.l;
    if sd.alphas.len() != l || m != sd.orders.iter().product::<u64>() as usize * l {
        return Err(Error::DimensionMismatch {
            expected: "spectral data consistent with the tuple".into(),
            found: format!("m = {m}, l = {l}"),
        });
    }
    let mut deviations = Vec::with_capacity(tuple.n);
    for (i, a) in tuple.mats.iter().enumerate() {
        let mut roots: Vec<Complex64> = Vec::with_capacity(m);
        for (lambda, basis) in normal_eigenpairs(a)? {
            for _ in 0..basis.cols() {
                roots.push(lambda);
            }
        }
        let numeric = poly_from_roots(&roots);

        let mut closed = vec![Complex64::ONE];
        if i < t {
            let o = sd.orders[i];
            let mult = m / (o as usize * l);
            for j in 0..l {
                let factor = cyclic_factor(o as usize, unit_phase(sd.betas[j][i].to_f64()));
                for _ in 0..mult {
                    closed = poly_mul(&closed, &factor);
                }
            }
        } else if i < 2 * t {
            let o = sd.orders[i - t];
            let mult = m / (o as usize * l);
            for j in 0..l {
                let alpha_pow = unit_phase(sd.alphas[j][i - t].scale(o as i64).to_f64());
                let factor = cyclic_factor(o as usize, alpha_pow);
                for _ in 0..mult {
                    closed = poly_mul(&closed, &factor);
                }
            }
        } else {
            let mult = m / l;
            for j in 0..l {
                let root = unit_phase(sd.alphas[j][i - t].to_f64());
                for _ in 0..mult {
                    closed = poly_mul(&closed, &[-root, Complex64::ONE]);
                }
            }
        }

        let dev =
            numeric.iter().zip(&closed).map(|(x, y)| (x - y).norm()).fold(0.0f64, f64::max);
        deviations.push(dev);
    }
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(CharPolyReport { deviations, max_deviation, tol, pass: max_deviation <= tol })
}

/// `z^o - w` in ascending coefficients.
fn cyclic_factor(o: usize, w: Complex64) -> Vec<Complex64> {
    let mut f = vec![Complex64::ZERO; o + 1];
    f[0] = -w;
    f[o] = Complex64::ONE;
    f
}

// --------------------------------------------------------------------
// serialization: {"n": .., "m": .., "mats": [[[re, im], ..] ..]}
// --------------------------------------------------------------------

fn serialize_cmatrix<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    cmatrix_rows(m).serialize(s)
}

fn cmatrix_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect())
        .collect()
}

fn cmatrix_from_rows(rows: Vec<Vec<[f64; 2]>>) -> Result<CMatrix> {
    CMatrix::from_rows(
        rows.into_iter()
            .map(|r| r.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
            .collect(),
    )
}

#[derive(Serialize, Deserialize)]
struct TupleWire {
    n: usize,
    m: usize,
    mats: Vec<Vec<Vec<[f64; 2]>>>,
}

impl Serialize for ACTuple {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TupleWire { n: self.n, m: self.m, mats: self.mats.iter().map(cmatrix_rows).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ACTuple {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = TupleWire::deserialize(d)?;
        let mats: Result<Vec<CMatrix>> = wire.mats.into_iter().map(cmatrix_from_rows).collect();
        let tuple = mats.and_then(ACTuple::new).map_err(D::Error::custom)?;
        if tuple.n != wire.n || tuple.m != wire.m {
            return Err(D::Error::custom("tuple header disagrees with matrix data"));
        }
        Ok(tuple)
    }
}
