//! Seeded sampling of Haar orthogonal/unitary matrices, permutations and
//! Gaussian ensembles, plus eigenvector localization measurements and the
//! closed-form Haar moment table.
//!
//! All sampling is driven by an explicit [`RngSeed`]: a ChaCha8 counter-based
//! generator keyed by (seed, stream). Same seed and stream reproduce the same
//! samples bit-exactly; parallel workers should use distinct streams.

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;
use nalgebra::{Complex, DMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;

pub type C64 = Complex<f64>;

/// Deterministic RNG key: a 64-bit seed plus a stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        RngSeed { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Haar,
    Permutation,
    Hermitian,
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entries {
    Real(DMatrix<f64>),
    Complex(DMatrix<C64>),
}

/// A dense square matrix sample with its field (beta = 1 real, 2 complex)
/// and a tag describing how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    pub entries: Entries,
    pub beta: u8,
    pub kind: MatrixKind,
}

fn check_beta(beta: u8) -> Result<()> {
    match beta {
        1 | 2 => Ok(()),
        other => Err(Error::UnsupportedBeta(other)),
    }
}

impl MatrixSample {
    pub fn real(m: DMatrix<f64>, kind: MatrixKind) -> Self {
        MatrixSample {
            entries: Entries::Real(m),
            beta: 1,
            kind,
        }
    }

    pub fn complex(m: DMatrix<C64>, kind: MatrixKind) -> Self {
        MatrixSample {
            entries: Entries::Complex(m),
            beta: 2,
            kind,
        }
    }

    /// Real diagonal matrix from a list of entries.
    pub fn diagonal(values: &[f64]) -> Self {
        MatrixSample::real(
            DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)),
            MatrixKind::Hermitian,
        )
    }

    pub fn dim(&self) -> usize {
        match &self.entries {
            Entries::Real(m) => m.nrows(),
            Entries::Complex(m) => m.nrows(),
        }
    }

    pub fn as_real(&self) -> Option<&DMatrix<f64>> {
        match &self.entries {
            Entries::Real(m) => Some(m),
            Entries::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&DMatrix<C64>> {
        match &self.entries {
            Entries::Complex(m) => Some(m),
            Entries::Real(_) => None,
        }
    }

    pub fn to_complex(&self) -> DMatrix<C64> {
        match &self.entries {
            Entries::Real(m) => m.map(|v| C64::new(v, 0.0)),
            Entries::Complex(m) => m.clone(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        match &self.entries {
            Entries::Real(m) => C64::new(m[(i, j)], 0.0),
            Entries::Complex(m) => m[(i, j)],
        }
    }

    /// Largest |a_ij - conj(a_ji)| over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.entry(i, j) - self.entry(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Largest |(A^H A - I)_ij|.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.dim();
        match &self.entries {
            Entries::Real(m) => {
                let g = m.transpose() * m - DMatrix::<f64>::identity(n, n);
                g.iter().fold(0.0f64, |a, v| a.max(v.abs()))
            }
            Entries::Complex(m) => {
                let g = m.adjoint() * m - DMatrix::<C64>::identity(n, n);
                g.iter().fold(0.0f64, |a, v| a.max(v.norm()))
            }
        }
    }

    fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.entry(i, j).norm() == 0.0))
    }

    /// Eigenvalues of a Hermitian sample as an unweighted spectrum.
    pub fn eigenvalues(&self) -> Result<Spectrum> {
        if self.is_diagonal() {
            let vals: Vec<f64> = (0..self.dim()).map(|i| self.entry(i, i).re).collect();
            return Spectrum::from_eigenvalues(vals);
        }
        let vals = match &self.entries {
            Entries::Real(m) => m
                .clone()
                .try_symmetric_eigen(f64::EPSILON, 10_000)
                .ok_or_else(|| Error::EigenFailure("symmetric eigensolver did not converge".into()))?
                .eigenvalues
                .iter()
                .cloned()
                .collect::<Vec<f64>>(),
            Entries::Complex(m) => m
                .clone()
                .try_symmetric_eigen(f64::EPSILON, 10_000)
                .ok_or_else(|| Error::EigenFailure("hermitian eigensolver did not converge".into()))?
                .eigenvalues
                .iter()
                .cloned()
                .collect::<Vec<f64>>(),
        };
        Spectrum::from_eigenvalues(vals)
    }

    /// Row-major CSV, complex entries as "re+imj" pairs.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = String::new();
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(',');
                }
                match &self.entries {
                    Entries::Real(m) => write!(out, "{}", m[(i, j)]).unwrap(),
                    Entries::Complex(m) => {
                        let c = m[(i, j)];
                        if c.im >= 0.0 {
                            write!(out, "{}+{}j", c.re, c.im).unwrap()
                        } else {
                            write!(out, "{}{}j", c.re, c.im).unwrap()
                        }
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Haar-distributed beta-orthogonal matrix: QR of an i.i.d. Gaussian matrix
/// with the R-diagonal phase correction applied (plain QR alone is not Haar).
pub fn sample_haar(m: usize, beta: u8, rng: &mut ChaCha8Rng) -> Result<MatrixSample> {
    check_beta(beta)?;
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    match beta {
        1 => {
            let g = DMatrix::from_fn(m, m, |_, _| standard_normal(rng));
            let qr = g.qr();
            let r = qr.r();
            let mut q = qr.q();
            for j in 0..m {
                if r[(j, j)] < 0.0 {
                    for i in 0..m {
                        q[(i, j)] = -q[(i, j)];
                    }
                }
            }
            Ok(MatrixSample {
                entries: Entries::Real(q),
                beta,
                kind: MatrixKind::Haar,
            })
        }
        _ => {
            // complex standard Gaussians: re and im each of variance 1/2
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let g = DMatrix::from_fn(m, m, |_, _| {
                C64::new(s * standard_normal(rng), s * standard_normal(rng))
            });
            let qr = g.qr();
            let r = qr.r();
            let mut q = qr.q();
            for j in 0..m {
                let d = r[(j, j)];
                let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
                for i in 0..m {
                    q[(i, j)] *= phase;
                }
            }
            Ok(MatrixSample {
                entries: Entries::Complex(q),
                beta,
                kind: MatrixKind::Haar,
            })
        }
    }
}

/// Uniformly random m x m permutation matrix.
pub fn sample_permutation(m: usize, rng: &mut ChaCha8Rng) -> Result<MatrixSample> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(rng);
    let mut p = DMatrix::<f64>::zeros(m, m);
    for (j, &i) in perm.iter().enumerate() {
        p[(i, j)] = 1.0;
    }
    Ok(MatrixSample {
        entries: Entries::Real(p),
        beta: 1,
        kind: MatrixKind::Permutation,
    })
}

/// Symmetric (beta = 1) or Hermitian (beta = 2) Gaussian block B = (G + G^H)/2
/// with diagonal entry variance 1 and off-diagonal variance beta/2.
pub fn sample_goe_block(ell: usize, beta: u8, rng: &mut ChaCha8Rng) -> Result<MatrixSample> {
    check_beta(beta)?;
    if ell == 0 {
        return Err(Error::InvalidArgument("ell must be >= 1".into()));
    }
    match beta {
        1 => {
            let g = DMatrix::from_fn(ell, ell, |_, _| standard_normal(rng));
            let b = (&g + g.transpose()) * 0.5;
            Ok(MatrixSample {
                entries: Entries::Real(b),
                beta,
                kind: MatrixKind::Hermitian,
            })
        }
        _ => {
            let g = DMatrix::from_fn(ell, ell, |_, _| {
                C64::new(standard_normal(rng), standard_normal(rng))
            });
            let b = (&g + g.adjoint()) * C64::new(0.5, 0.0);
            Ok(MatrixSample {
                entries: Entries::Complex(b),
                beta,
                kind: MatrixKind::Hermitian,
            })
        }
    }
}

/// Inverse participation ratio 1 - (1/m) sum_ij |u_ij|^4 of an orthogonal or
/// unitary matrix. 0 for permutation-like (most localized) eigenvectors,
/// 1 - 1/m for maximally delocalized ones.
pub fn ipr(u: &MatrixSample) -> Result<f64> {
    let n = u.dim();
    let is_square = match &u.entries {
        Entries::Real(m) => m.nrows() == m.ncols(),
        Entries::Complex(m) => m.nrows() == m.ncols(),
    };
    if !is_square {
        return Err(Error::DimensionMismatch("ipr needs a square matrix".into()));
    }
    let sum4: f64 = match &u.entries {
        Entries::Real(m) => m.iter().map(|v| v * v * v * v).sum(),
        Entries::Complex(m) => m.iter().map(|v| v.norm_sqr() * v.norm_sqr()).sum(),
    };
    Ok(1.0 - sum4 / n as f64)
}

/// Haar moment table value E|q_ij|^4 = (beta + 2) / (m (m beta + 2)).
pub fn haar_fourth_moment(m: usize, beta: u8) -> Result<f64> {
    check_beta(beta)?;
    let (m, b) = (m as f64, beta as f64);
    Ok((b + 2.0) / (m * (m * b + 2.0)))
}

/// Closed-form expected IPR of a Haar matrix: (m - 1) beta / (m beta + 2).
pub fn haar_ipr_closed(m: usize, beta: u8) -> Result<f64> {
    check_beta(beta)?;
    let (m, b) = (m as f64, beta as f64);
    Ok((m - 1.0) * b / (m * b + 2.0))
}

/// Haar moment table cross terms:
/// e22 = E(|q_ij|^2 |q_ik|^2) = beta / (m (m beta + 2)) for j != k, and
/// e_cross = E(conj(q_ji) q_jk conj(q_pk) q_pi) = -beta / (m (m beta + 2)(m - 1))
/// for i != k and j != p.
pub fn haar_cross_moments(m: usize, beta: u8) -> Result<(f64, f64)> {
    check_beta(beta)?;
    if m < 2 {
        return Err(Error::InvalidArgument("cross moments need m >= 2".into()));
    }
    let (mf, b) = (m as f64, beta as f64);
    let e22 = b / (mf * (mf * b + 2.0));
    let e_cross = -b / (mf * (mf * b + 2.0) * (mf - 1.0));
    Ok((e22, e_cross))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        RngSeed::new(seed).rng()
    }

    #[test]
    fn haar_m1_is_plus_minus_one() {
        let mut r = rng(11);
        let mut seen = [false, false];
        for _ in 0..64 {
            let q = sample_haar(1, 1, &mut r).unwrap();
            let v = q.as_real().unwrap()[(0, 0)];
            assert!((v.abs() - 1.0).abs() < 1e-12);
            seen[if v > 0.0 { 0 } else { 1 }] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn haar_is_orthonormal() {
        let mut r = rng(7);
        for beta in [1u8, 2] {
            let q = sample_haar(9, beta, &mut r).unwrap();
            assert!(q.orthogonality_defect() <= 1e-10);
        }
    }

    #[test]
    fn haar_second_moment_matches_table() {
        // mean of |q_11|^2 over 10^4 samples at m = 8 within 3 std errors of 1/m
        let m = 8;
        let n = 10_000;
        let mut r = rng(2024);
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let q = sample_haar(m, 1, &mut r).unwrap();
            let v = q.as_real().unwrap()[(0, 0)].powi(2);
            acc += v;
            acc2 += v * v;
        }
        let mean = acc / n as f64;
        let var = (acc2 / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0 / m as f64).abs() <= 3.0 * se, "mean={mean} se={se}");
    }

    #[test]
    fn haar_fourth_moment_mc() {
        // MC estimate of E|q|^4 at m = 6, beta = 1, averaged over all entries
        let m = 6;
        let n = 2_000;
        let expect = haar_fourth_moment(m, 1).unwrap();
        let mut r = rng(5);
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let q = sample_haar(m, 1, &mut r).unwrap();
            let s: f64 = q.as_real().unwrap().iter().map(|v| v.powi(4)).sum();
            vals.push(s / (m * m) as f64);
        }
        let mean: f64 = vals.iter().sum::<f64>() / n as f64;
        let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - expect).abs() <= 3.0 * se, "mean={mean} expect={expect} se={se}");
    }

    #[test]
    fn haar_cross_moment_mc() {
        // E(q_ji q_jk q_pk q_pi) for fixed distinct indices, m = 6 beta = 1
        let m = 6;
        let n = 100_000;
        let (_, e_cross) = haar_cross_moments(m, 1).unwrap();
        let mut r = rng(17);
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            let q = sample_haar(m, 1, &mut r).unwrap();
            let q = q.as_real().unwrap();
            vals.push(q[(0, 1)] * q[(0, 2)] * q[(3, 2)] * q[(3, 1)]);
        }
        let mean: f64 = vals.iter().sum::<f64>() / n as f64;
        let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - e_cross).abs() <= 3.0 * se, "mean={mean} expect={e_cross} se={se}");
    }

    #[test]
    fn cross_moment_row_sum_identity() {
        for beta in [1u8, 2] {
            for m in [2usize, 3, 6, 17] {
                let (e22, _) = haar_cross_moments(m, beta).unwrap();
                let e4 = haar_fourth_moment(m, beta).unwrap();
                let lhs = e22 * (m as f64 - 1.0) + e4;
                assert!((lhs - 1.0 / m as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn permutation_uniform_m3() {
        let m = 3;
        let n = 60_000;
        let mut counts = std::collections::HashMap::new();
        let mut r = rng(3);
        for _ in 0..n {
            let p = sample_permutation(m, &mut r).unwrap();
            let key: Vec<usize> = (0..m)
                .map(|j| (0..m).find(|&i| p.as_real().unwrap()[(i, j)] == 1.0).unwrap())
                .collect();
            *counts.entry(key).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let expect = n as f64 / 6.0;
        let se = (n as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for (_, c) in counts {
            assert!((c as f64 - expect).abs() <= 3.0 * se);
        }
    }

    #[test]
    fn permutation_row_col_sums() {
        let mut r = rng(9);
        let p = sample_permutation(1, &mut r).unwrap();
        assert_eq!(p.as_real().unwrap()[(0, 0)], 1.0);
        let p = sample_permutation(7, &mut r).unwrap();
        let m = p.as_real().unwrap();
        for i in 0..7 {
            assert_eq!(m.row(i).sum(), 1.0);
            assert_eq!(m.column(i).sum(), 1.0);
        }
    }

    #[test]
    fn ipr_extremes() {
        let id = MatrixSample::real(DMatrix::identity(5, 5), MatrixKind::Permutation);
        assert_eq!(ipr(&id).unwrap(), 0.0);
        let h = 1.0 / 2f64.sqrt();
        let had = MatrixSample::real(
            DMatrix::from_row_slice(2, 2, &[h, h, h, -h]),
            MatrixKind::Haar,
        );
        assert!((ipr(&had).unwrap() - 0.5).abs() < 1e-14);
        let mut r = rng(1);
        let p = sample_permutation(6, &mut r).unwrap();
        assert_eq!(ipr(&p).unwrap(), 0.0);
    }

    #[test]
    fn ipr_range_and_sign_symmetry() {
        let mut r = rng(15);
        for beta in [1u8, 2] {
            for _ in 0..20 {
                let q = sample_haar(5, beta, &mut r).unwrap();
                let v = ipr(&q).unwrap();
                assert!((0.0..=1.0 - 1.0 / 5.0 + 1e-12).contains(&v));
                // negating a column leaves ipr unchanged
                let mut flipped = q.clone();
                match &mut flipped.entries {
                    Entries::Real(m) => {
                        for i in 0..5 {
                            m[(i, 2)] = -m[(i, 2)];
                        }
                    }
                    Entries::Complex(m) => {
                        for i in 0..5 {
                            m[(i, 2)] = -m[(i, 2)];
                        }
                    }
                }
                assert_eq!(ipr(&flipped).unwrap(), v);
            }
        }
    }

    #[test]
    fn ipr_mean_matches_closed_form() {
        let m = 16;
        for beta in [1u8, 2] {
            let expect = haar_ipr_closed(m, beta).unwrap();
            let n = 400;
            let mut r = rng(100 + beta as u64);
            let mut vals = Vec::with_capacity(n);
            for _ in 0..n {
                vals.push(ipr(&sample_haar(m, beta, &mut r).unwrap()).unwrap());
            }
            let mean: f64 = vals.iter().sum::<f64>() / n as f64;
            let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - expect).abs() <= 3.0 * se, "beta={beta} mean={mean} expect={expect}");
        }
    }

    #[test]
    fn closed_form_values() {
        assert!((haar_fourth_moment(2, 1).unwrap() - 3.0 / 8.0).abs() < 1e-15);
        assert!((haar_ipr_closed(2, 1).unwrap() - 0.25).abs() < 1e-15);
        let (e22, e_cross) = haar_cross_moments(2, 1).unwrap();
        assert!((e22 - 1.0 / 8.0).abs() < 1e-15);
        assert!((e_cross + 1.0 / 8.0).abs() < 1e-15);
        assert_eq!(haar_ipr_closed(1, 2).unwrap(), 0.0);
        assert!((haar_ipr_closed(1_000_000, 2).unwrap() - 1.0).abs() < 1e-5);
        assert!(haar_fourth_moment(3, 4).is_err());
    }

    #[test]
    fn goe_block_statistics() {
        for beta in [1u8, 2] {
            let mut r = rng(33 + beta as u64);
            let b = sample_goe_block(4, beta, &mut r).unwrap();
            assert!(b.hermiticity_defect() <= 1e-12);
            let n = 40_000;
            let mut diag = Vec::with_capacity(n);
            let mut off = Vec::with_capacity(n);
            for _ in 0..n {
                let b = sample_goe_block(2, beta, &mut r).unwrap();
                diag.push(b.entry(0, 0).re);
                off.push(b.entry(0, 1).norm_sqr());
            }
            let dvar: f64 = diag.iter().map(|v| v * v).sum::<f64>() / n as f64;
            let ovar: f64 = off.iter().sum::<f64>() / n as f64;
            // variance-of-variance gives std error ~ sqrt(2/n) for gaussians
            let se = (2.0 / n as f64).sqrt() * 2.0;
            assert!((dvar - 1.0).abs() <= 3.0 * se, "beta={beta} dvar={dvar}");
            assert!((ovar - beta as f64 / 2.0).abs() <= 3.0 * se, "beta={beta} ovar={ovar}");
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let a = sample_haar(6, 1, &mut RngSeed::with_stream(42, 3).rng()).unwrap();
        let b = sample_haar(6, 1, &mut RngSeed::with_stream(42, 3).rng()).unwrap();
        assert_eq!(a, b);
        let c = sample_haar(6, 1, &mut RngSeed::with_stream(42, 4).rng()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn csv_formats_complex() {
        let m = DMatrix::from_row_slice(1, 2, &[C64::new(1.5, 0.25), C64::new(0.0, -1.0)]);
        // pad to square for MatrixSample
        let sq = DMatrix::from_fn(2, 2, |i, j| if i == 0 { m[(0, j)] } else { C64::new(0.0, 0.0) });
        let s = MatrixSample::complex(sq, MatrixKind::General);
        let csv = s.to_csv();
        assert!(csv.starts_with("1.5+0.25j,0-1j\n"));
    }
}
