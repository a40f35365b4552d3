//! Dense complex matrices and the numerical routines the tuple
//! constructions need: products, adjoints, a Jacobi eigensolver for
//! Hermitian matrices, eigenspaces of (near-)unitary matrices and
//! simultaneous diagonalization of commuting unitary families.
//!
//! Everything here is plain `O(m^3)` dense arithmetic. The matrices this
//! crate handles are small (tens of rows), eigenvalues of the relevant
//! operators sit on the unit circle at rational angles, and determinism
//! matters more than speed, so a self-contained Jacobi solver beats
//! pulling in an external linear-algebra stack.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rat1::circ_dist;

/// Row-major dense complex matrix; also used for orthonormal column
/// bases of subspaces (then `cols` is the subspace dimension).
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zero(rows: usize, cols: usize) -> CMatrix {
        CMatrix { rows, cols, data: vec![Complex64::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> CMatrix {
        let mut m = CMatrix::zero(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::ONE);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<CMatrix> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidInput("ragged complex matrix".into()));
        }
        Ok(CMatrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut out = CMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Complex64::ZERO {
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

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn pow(&self, e: u64) -> CMatrix {
        assert_eq!(self.rows, self.cols);
        let mut acc = CMatrix::identity(self.rows);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn mat_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn col(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[Complex64]) {
        assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self.set(i, j, x);
        }
    }

    pub fn from_cols(rows: usize, cols: &[Vec<Complex64>]) -> CMatrix {
        let mut m = CMatrix::zero(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_col(j, c);
        }
        m
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |(A^H A - I)_{ij}|` for square matrices; for column bases the
    /// same expression measures loss of orthonormality.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.adjoint().mul(self);
        let mut defect: f64 = 0.0;
        for i in 0..gram.rows {
            for j in 0..gram.cols {
                let expected = if i == j { Complex64::ONE } else { Complex64::ZERO };
                defect = defect.max((gram.get(i, j) - expected).norm());
            }
        }
        defect
    }

    pub fn trace(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn approx_eq(&self, other: &CMatrix, tol: f64) -> bool {
        (self.rows, self.cols) == (other.rows, other.cols) && self.sub(other).max_abs() <= tol
    }
}

/// Unit complex number at angle `2*pi*theta` for `theta` in turns.
pub fn unit_phase(theta: f64) -> Complex64 {
    let a = 2.0 * std::f64::consts::PI * theta;
    Complex64::new(a.cos(), a.sin())
}

/// Angle of a complex number in turns, in `[0, 1)`.
pub fn angle_in_turns(z: Complex64) -> f64 {
    (z.arg() / (2.0 * std::f64::consts::PI)).rem_euclid(1.0)
}

/// Box-Muller standard normal from two uniforms.
fn gaussian(rng: &mut impl rand::Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Seeded random unitary: complex Gaussian matrix followed by
/// Gram-Schmidt. Good enough for conjugation tests.
pub fn random_unitary(m: usize, rng: &mut impl rand::Rng) -> CMatrix {
    let cols: Vec<Vec<Complex64>> = (0..m)
        .map(|_| (0..m).map(|_| Complex64::new(gaussian(rng), gaussian(rng))).collect())
        .collect();
    orthonormalize(m, &cols).expect("random Gaussian columns are independent")
}

/// Modified Gram-Schmidt with one reorthogonalization pass; errors when a
/// column drops rank.
pub fn orthonormalize(rows: usize, cols: &[Vec<Complex64>]) -> Result<CMatrix> {
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(cols.len());
    for c in cols {
        let mut v = c.clone();
        for _ in 0..2 {
            for b in &basis {
                let inner: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= inner * bi;
                }
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return Err(Error::NonConvergence("rank-deficient basis".into()));
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        basis.push(v);
    }
    Ok(CMatrix::from_cols(rows, &basis))
}

/// Orthonormal basis of the part of `span(ambient)` orthogonal to
/// `span(excluded)`; the dimensions must work out exactly.
pub fn complement_basis(ambient: &CMatrix, excluded: &CMatrix) -> Result<CMatrix> {
    let want = ambient.cols() - excluded.cols();
    let mut cols: Vec<Vec<Complex64>> = (0..ambient.cols()).map(|j| ambient.col(j)).collect();
    // project off the excluded subspace
    for c in cols.iter_mut() {
        for j in 0..excluded.cols() {
            let b = excluded.col(j);
            let inner: Complex64 = b.iter().zip(c.iter()).map(|(x, y)| x.conj() * y).sum();
            for (vi, bi) in c.iter_mut().zip(&b) {
                *vi -= inner * bi;
            }
        }
    }
    // pivoted Gram-Schmidt: take the largest remaining column each round
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(want);
    for _ in 0..want {
        let (best, norm) = cols
            .iter()
            .enumerate()
            .map(|(idx, c)| (idx, c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::NonConvergence("complement dimension mismatch".into()))?;
        if norm < 0.3 {
            return Err(Error::NonConvergence(
                "complement basis collapsed; subspace not contained in ambient".into(),
            ));
        }
        let mut v = cols.swap_remove(best);
        for x in v.iter_mut() {
            *x /= norm;
        }
        for b in &out {
            let inner: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for (vi, bi) in v.iter_mut().zip(b.iter()) {
                *vi -= inner * bi;
            }
        }
        let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for x in v.iter_mut() {
            *x /= n2;
        }
        for c in cols.iter_mut() {
            let inner: Complex64 = v.iter().zip(c.iter()).map(|(x, y)| x.conj() * y).sum();
            for (ci, vi) in c.iter_mut().zip(&v) {
                *ci -= inner * vi;
            }
        }
        out.push(v);
    }
    Ok(CMatrix::from_cols(ambient.rows(), &out))
}

/// Cyclic Jacobi for complex Hermitian matrices. Returns the real
/// eigenvalues and the unitary matrix of eigenvectors, unsorted.
pub fn jacobi_hermitian(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    assert_eq!(h.rows(), h.cols());
    let n = h.rows();
    let mut a = h.clone();
    let mut v = CMatrix::identity(n);
    let scale = a.max_abs().max(1e-300);
    for _sweep in 0..60 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a.get(p, q).norm());
            }
        }
        if off <= 1e-14 * scale {
            let vals = (0..n).map(|i| a.get(i, i).re).collect();
            return Ok((vals, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let beta = a.get(p, q);
                if beta.norm() <= 1e-300 {
                    continue;
                }
                let alpha = a.get(p, p).re;
                let delta = a.get(q, q).re;
                let theta = (delta - alpha) / (2.0 * beta.norm());
                // smaller root of t^2 - 2*theta*t - 1 in cancellation-free form
                let t = if theta >= 0.0 {
                    -1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sigma = t * c;
                let phase = beta / beta.norm();
                let s = sigma * phase.conj();
                // A <- J^H A J with J = [[c, -conj(s)], [s, c]] on (p, q)
                for k in 0..n {
                    let (x, y) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * x + s.conj() * y);
                    a.set(q, k, -s * x + c * y);
                }
                for k in 0..n {
                    let (x, y) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * x + s * y);
                    a.set(k, q, -s.conj() * x + c * y);
                }
                for k in 0..n {
                    let (x, y) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * x + s * y);
                    v.set(k, q, -s.conj() * x + c * y);
                }
            }
        }
    }
    Err(Error::NonConvergence("Jacobi sweep limit reached".into()))
}

/// Eigen-decomposition of a (near-)normal matrix with unit-circle
/// spectrum: Hermitian Jacobi on the real part, then on the imaginary
/// part within each real-eigenvalue cluster. Returns fine-grained
/// `(eigenvalue, orthonormal basis)` pairs sorted by angle.
pub fn normal_eigenpairs(a: &CMatrix) -> Result<Vec<(Complex64, CMatrix)>> {
    let n = a.rows();
    let adj = a.adjoint();
    let re_op = {
        let mut m = a.clone();
        for (x, y) in m.data.iter_mut().zip(&adj.data) {
            *x = (*x + y) * 0.5;
        }
        m
    };
    let im_op = {
        let mut m = a.clone();
        for (x, y) in m.data.iter_mut().zip(&adj.data) {
            *x = (*x - y) * Complex64::new(0.0, -0.5);
        }
        m
    };
    let (vals, v) = jacobi_hermitian(&re_op)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));

    // merge only numerically identical real parts here; semantic
    // clustering happens later at the caller's tolerance
    let merge_gap = 1e-9;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &idx in &order {
        match groups.last_mut() {
            Some(g) if (vals[idx] - vals[*g.last().unwrap()]).abs() <= merge_gap => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }

    let mut pairs: Vec<(Complex64, CMatrix)> = Vec::new();
    for g in groups {
        let basis = CMatrix::from_cols(n, &g.iter().map(|&i| v.col(i)).collect::<Vec<_>>());
        let compressed = basis.adjoint().mul(&im_op).mul(&basis);
        let (ivals, w) = jacobi_hermitian(&compressed)?;
        let mut iorder: Vec<usize> = (0..g.len()).collect();
        iorder.sort_by(|&i, &j| ivals[i].total_cmp(&ivals[j]));
        let mut igroups: Vec<Vec<usize>> = Vec::new();
        for &idx in &iorder {
            match igroups.last_mut() {
                Some(h) if (ivals[idx] - ivals[*h.last().unwrap()]).abs() <= merge_gap => {
                    h.push(idx)
                }
                _ => igroups.push(vec![idx]),
            }
        }
        for h in igroups {
            let sub =
                CMatrix::from_cols(g.len(), &h.iter().map(|&i| w.col(i)).collect::<Vec<_>>());
            let eigbasis = basis.mul(&sub);
            let compressed_a = eigbasis.adjoint().mul(a).mul(&eigbasis);
            let lambda = compressed_a.trace() / h.len() as f64;
            pairs.push((lambda, eigbasis));
        }
    }
    pairs.sort_by(|x, y| angle_in_turns(x.0).total_cmp(&angle_in_turns(y.0)));
    Ok(pairs)
}

/// Groups fine-grained eigenpairs into angle clusters: sorted by angle
/// and split at circular gaps larger than `10 * tol`. A cluster whose
/// own diameter exceeds the split threshold means two genuine
/// eigenvalues cannot be told apart; that is an error, not a guess.
pub fn cluster_by_angle(
    pairs: Vec<(Complex64, CMatrix)>,
    tol: f64,
) -> Result<Vec<(Complex64, CMatrix)>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let split = 10.0 * tol;
    let n = pairs[0].1.rows();
    let angles: Vec<f64> = pairs.iter().map(|(l, _)| angle_in_turns(*l)).collect();
    // angles are sorted; start the walk after the largest circular gap
    let k = pairs.len();
    let start = (0..k)
        .max_by(|&i, &j| {
            let gi = (angles[(i + 1) % k] - angles[i]).rem_euclid(1.0);
            let gj = (angles[(j + 1) % k] - angles[j]).rem_euclid(1.0);
            gi.total_cmp(&gj)
        })
        .unwrap();
    let mut clusters: Vec<Vec<usize>> = vec![vec![(start + 1) % k]];
    for step in 2..=k {
        let idx = (start + step) % k;
        let prev = *clusters.last().unwrap().last().unwrap();
        let gap = (angles[idx] - angles[prev]).rem_euclid(1.0);
        if gap <= split {
            clusters.last_mut().unwrap().push(idx);
        } else {
            clusters.push(vec![idx]);
        }
    }
    let mut out = Vec::with_capacity(clusters.len());
    for c in &clusters {
        let first = angles[c[0]];
        let diameter = c.iter().map(|&i| circ_dist(angles[i], first)).fold(0.0, f64::max);
        if c.len() > 1 && diameter > split {
            return Err(Error::ClusterAmbiguity { gap: diameter, tol });
        }
        let mut cols: Vec<Vec<Complex64>> = Vec::new();
        for &i in c {
            for j in 0..pairs[i].1.cols() {
                cols.push(pairs[i].1.col(j));
            }
        }
        let dim = cols.len();
        let basis = orthonormalize(n, &cols)?;
        let mean: Complex64 =
            c.iter().map(|&i| pairs[i].0 * pairs[i].1.cols() as f64).sum::<Complex64>()
                / dim as f64;
        out.push((mean / mean.norm(), basis));
    }
    out.sort_by(|x, y| angle_in_turns(x.0).total_cmp(&angle_in_turns(y.0)));
    Ok(out)
}

/// Simultaneous eigenspace decomposition of a family of commuting
/// (near-)unitary matrices: `(eigenvalue tuple, orthonormal basis)` per
/// joint eigenspace, sorted lexicographically by angle tuple.
pub fn simultaneous_eigenbasis(
    mats: &[&CMatrix],
    tol: f64,
) -> Result<Vec<(Vec<Complex64>, CMatrix)>> {
    let Some(first) = mats.first() else {
        return Err(Error::InvalidInput("empty matrix family".into()));
    };
    let n = first.rows();
    let mut clusters: Vec<(Vec<Complex64>, CMatrix)> = vec![(Vec::new(), CMatrix::identity(n))];
    for a in mats {
        let mut next = Vec::new();
        for (tuple, basis) in clusters {
            let compressed = basis.adjoint().mul(a).mul(&basis);
            let fine = normal_eigenpairs(&compressed)?;
            for (lambda, w) in cluster_by_angle(fine, tol)? {
                let mut t = tuple.clone();
                t.push(lambda);
                next.push((t, basis.mul(&w)));
            }
        }
        clusters = next;
    }
    clusters.sort_by(|x, y| {
        let ax: Vec<f64> = x.0.iter().map(|&l| angle_in_turns(l)).collect();
        let ay: Vec<f64> = y.0.iter().map(|&l| angle_in_turns(l)).collect();
        ax.partial_cmp(&ay).unwrap()
    });
    Ok(clusters)
}

/// Monic polynomial with the given roots; coefficients in ascending
/// degree order (constant first, leading 1 last).
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::ONE];
    for &r in roots {
        let mut next = vec![Complex64::ZERO; coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k] -= r * c;
            next[k + 1] += c;
        }
        coeffs = next;
    }
    coeffs
}

/// Product of two polynomials in ascending-degree coefficient form.
pub fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn jacobi_diagonalizes_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=8 {
            let mut h = CMatrix::zero(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    if i == j {
                        h.set(i, i, c(v.re, 0.0));
                    } else {
                        h.set(i, j, v);
                        h.set(j, i, v.conj());
                    }
                }
            }
            let (vals, v) = jacobi_hermitian(&h).unwrap();
            assert!(v.unitarity_defect() < 1e-12);
            let hv = h.mul(&v);
            for j in 0..n {
                for i in 0..n {
                    let expected = v.get(i, j) * vals[j];
                    assert!((hv.get(i, j) - expected).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn eigenpairs_of_diagonal_unitary() {
        // eigenvalues i, i, -1: one 2-dim cluster and one simple
        let d = CMatrix::from_rows(vec![
            vec![c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        ])
        .unwrap();
        let pairs = normal_eigenpairs(&d).unwrap();
        let clustered = cluster_by_angle(pairs, 1e-9).unwrap();
        assert_eq!(clustered.len(), 2);
        let dims: Vec<usize> = clustered.iter().map(|(_, b)| b.cols()).collect();
        assert_eq!(dims.iter().sum::<usize>(), 3);
        assert!(clustered
            .iter()
            .any(|(l, b)| (l - c(0.0, 1.0)).norm() < 1e-9 && b.cols() == 2));
    }

    #[test]
    fn eigenpairs_survive_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(6, &mut rng);
        assert!(u.unitarity_defect() < 1e-12);
        let mut d = CMatrix::zero(6, 6);
        let phases = [0.0, 0.0, 0.25, 0.25, 0.5, 2.0 / 3.0];
        for (i, &p) in phases.iter().enumerate() {
            d.set(i, i, unit_phase(p));
        }
        let a = u.mul(&d).mul(&u.adjoint());
        let clustered = cluster_by_angle(normal_eigenpairs(&a).unwrap(), 1e-9).unwrap();
        assert_eq!(clustered.len(), 4);
        let find = |angle: f64| {
            clustered
                .iter()
                .find(|(l, _)| crate::rat1::circ_dist(angle_in_turns(*l), angle) < 1e-9)
                .map(|(_, b)| b.cols())
        };
        assert_eq!(find(0.0), Some(2));
        assert_eq!(find(0.25), Some(2));
        assert_eq!(find(0.5), Some(1));
        assert_eq!(find(2.0 / 3.0), Some(1));
        for (l, b) in &clustered {
            let res = a.mul(b).sub(&b.scale(*l)).max_abs();
            assert!(res < 1e-9, "residual {res}");
        }
    }

    #[test]
    fn simultaneous_diagonalization_of_commuting_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_unitary(4, &mut rng);
        let mk = |phases: [f64; 4]| {
            let mut d = CMatrix::zero(4, 4);
            for (i, &p) in phases.iter().enumerate() {
                d.set(i, i, unit_phase(p));
            }
            u.mul(&d).mul(&u.adjoint())
        };
        let a = mk([0.0, 0.0, 0.5, 0.5]);
        let b = mk([0.25, 0.75, 0.25, 0.25]);
        let joint = simultaneous_eigenbasis(&[&a, &b], 1e-9).unwrap();
        // joint spectra: (1, i), (1, -i), (-1, i) with dims 1, 1, 2
        assert_eq!(joint.len(), 3);
        let total: usize = joint.iter().map(|(_, b)| b.cols()).sum();
        assert_eq!(total, 4);
        for (tuple, basis) in &joint {
            for (mat, lambda) in [(&a, tuple[0]), (&b, tuple[1])] {
                let res = mat.mul(basis).sub(&basis.scale(lambda)).max_abs();
                assert!(res < 1e-9);
            }
        }
    }

    #[test]
    fn complement_and_orthonormalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_unitary(5, &mut rng);
        let sub = CMatrix::from_cols(5, &[u.col(0), u.col(3)]);
        let comp = complement_basis(&CMatrix::identity(5), &sub).unwrap();
        assert_eq!(comp.cols(), 3);
        assert!(comp.unitarity_defect() < 1e-10);
        let cross = sub.adjoint().mul(&comp);
        assert!(cross.max_abs() < 1e-10);
    }

    #[test]
    fn poly_from_roots_expands() {
        // (z - 1)(z + 1) = z^2 - 1
        let p = poly_from_roots(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        assert!((p[0] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!(p[1].norm() < 1e-14);
        assert!((p[2] - c(1.0, 0.0)).norm() < 1e-14);
        let q = poly_mul(&p, &[c(2.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(q.len(), 4);
        assert!((q[0] - c(-2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn ambiguous_clusters_error() {
        let mut d = CMatrix::zero(4, 4);
        // pairwise gaps below 10*tol but total diameter above it
        for (i, p) in [0.0, 4e-6, 8e-6, 12e-6].iter().enumerate() {
            d.set(i, i, unit_phase(*p));
        }
        let pairs = normal_eigenpairs(&d).unwrap();
        let err = cluster_by_angle(pairs, 1e-6);
        assert!(matches!(err, Err(Error::ClusterAmbiguity { .. })));
    }
}
