//! Generators for the matrix families used in the worked examples: diagonal
//! Gaussian disorder, block-diagonal GOE/GUE, the Kac-Murdock-Szego Toeplitz
//! matrix, the periodic hopping matrix, and nearest-neighbour spin chains
//! with their odd/even bond splitting.

use crate::ensembles::{sample_goe_block, MatrixKind, MatrixSample, RngSeed, C64};
use crate::error::{Error, Result};
use crate::mixture::SummandPair;
use crate::spectrum::Spectrum;
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Diagonal matrix with i.i.d. normal(0, variance) entries.
pub fn diag_gaussian(m: usize, variance: f64, rng: &mut ChaCha8Rng) -> Result<MatrixSample> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    if !(variance > 0.0) {
        return Err(Error::InvalidArgument("variance must be > 0".into()));
    }
    let sd = variance.sqrt();
    let vals: Vec<f64> = (0..m)
        .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    Ok(MatrixSample::diagonal(&vals))
}

/// Block-diagonal matrix with m/ell independent ell x ell G(O/U)E blocks.
pub fn block_goe(m: usize, ell: usize, beta: u8, rng: &mut ChaCha8Rng) -> Result<MatrixSample> {
    if ell == 0 || m == 0 || m % ell != 0 {
        return Err(Error::InvalidArgument(format!(
            "block size {ell} must divide m = {m}"
        )));
    }
    let k = m / ell;
    match beta {
        1 => {
            let mut out = DMatrix::<f64>::zeros(m, m);
            for b in 0..k {
                let block = sample_goe_block(ell, 1, rng)?;
                let block = block.as_real().expect("beta=1 block is real");
                out.view_mut((b * ell, b * ell), (ell, ell)).copy_from(block);
            }
            Ok(MatrixSample::real(out, MatrixKind::Hermitian))
        }
        2 => {
            let mut out = DMatrix::<C64>::zeros(m, m);
            for b in 0..k {
                let block = sample_goe_block(ell, 2, rng)?;
                let block = block.as_complex().expect("beta=2 block is complex");
                out.view_mut((b * ell, b * ell), (ell, ell)).copy_from(block);
            }
            Ok(MatrixSample::complex(out, MatrixKind::Hermitian))
        }
        other => Err(Error::UnsupportedBeta(other)),
    }
}

/// Kac-Murdock-Szego matrix: entries rho^|i-j|, positive definite for
/// 0 < rho < 1.
pub fn kms_matrix(m: usize, rho: f64) -> Result<MatrixSample> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho = {rho} must lie in (0, 1)"
        )));
    }
    let mat = DMatrix::from_fn(m, m, |i, j| rho.powi((i as i64 - j as i64).unsigned_abs() as i32));
    Ok(MatrixSample::real(mat, MatrixKind::Hermitian))
}

/// Nearest-neighbour hopping matrix with periodic boundary: 0/1 circulant
/// with ones on the super/sub diagonal and the two corners. Its eigenvalues
/// are 2 cos(2 pi k / m).
pub fn anderson_hopping(m: usize) -> Result<MatrixSample> {
    if m < 3 {
        return Err(Error::InvalidArgument("hopping matrix needs m >= 3".into()));
    }
    let mut mat = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let j = (i + 1) % m;
        mat[(i, j)] = 1.0;
        mat[(j, i)] = 1.0;
    }
    Ok(MatrixSample::real(mat, MatrixKind::Hermitian))
}

/// diag-gauss + block-GOE summand pair.
pub fn block_pair(m: usize, ell: usize, beta: u8, variance: f64) -> Result<SummandPair> {
    block_goe(m, ell, beta, &mut RngSeed::new(0).rng())?; // validate parameters up front
    Ok(SummandPair::sampler(Box::new(move |rng| {
        Ok((diag_gaussian(m, variance, rng)?, block_goe(m, ell, beta, rng)?))
    })))
}

/// diag-gauss + periodic hopping summand pair (the tight-binding model with
/// diagonal disorder).
pub fn anderson_pair(m: usize, variance: f64) -> Result<SummandPair> {
    let hop = anderson_hopping(m)?;
    Ok(SummandPair::sampler(Box::new(move |rng| {
        Ok((diag_gaussian(m, variance, rng)?, hop.clone()))
    })))
}

/// diag-gauss + Kac-Murdock-Szego summand pair.
pub fn kms_pair(m: usize, rho: f64, variance: f64) -> Result<SummandPair> {
    let kms = kms_matrix(m, rho)?;
    Ok(SummandPair::sampler(Box::new(move |rng| {
        Ok((diag_gaussian(m, variance, rng)?, kms.clone()))
    })))
}

/// Local-bond ensemble for the spin chain.
pub enum LocalEnsemble {
    Goe,
    Gue,
    /// One fixed d^2 x d^2 Hermitian matrix per bond (n - 1 of them).
    Fixed(Vec<DMatrix<C64>>),
}

pub struct SpinChainSpec {
    /// Number of sites.
    pub n: usize,
    /// Local dimension per site.
    pub d: usize,
    pub ensemble: LocalEnsemble,
    pub seed: RngSeed,
    /// Upper bound on the total dimension d^n.
    pub cap: usize,
}

pub const SPIN_CHAIN_DEFAULT_CAP: usize = 1 << 14;

impl SpinChainSpec {
    pub fn new(n: usize, d: usize, ensemble: LocalEnsemble, seed: RngSeed) -> Self {
        SpinChainSpec {
            n,
            d,
            ensemble,
            seed,
            cap: SPIN_CHAIN_DEFAULT_CAP,
        }
    }

    fn total_dim(&self) -> Result<usize> {
        if self.n < 2 || self.d < 2 {
            return Err(Error::InvalidArgument("spin chain needs n >= 2, d >= 2".into()));
        }
        let mut dim: usize = 1;
        for _ in 0..self.n {
            dim = dim
                .checked_mul(self.d)
                .filter(|&v| v <= self.cap)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "d^n = {}^{} exceeds the cap {}",
                        self.d, self.n, self.cap
                    ))
                })?;
        }
        Ok(dim)
    }
}

/// The n - 1 bond terms, deterministic in the seed.
fn local_terms(spec: &SpinChainSpec) -> Result<Vec<DMatrix<C64>>> {
    let bonds = spec.n - 1;
    let d2 = spec.d * spec.d;
    match &spec.ensemble {
        LocalEnsemble::Fixed(terms) => {
            if terms.len() != bonds {
                return Err(Error::InvalidArgument(format!(
                    "expected {bonds} bond terms, got {}",
                    terms.len()
                )));
            }
            for t in terms {
                if t.nrows() != d2 || t.ncols() != d2 {
                    return Err(Error::DimensionMismatch(format!(
                        "bond term must be {d2} x {d2}"
                    )));
                }
                let defect = (t - t.adjoint()).norm() / (1.0 + t.norm());
                if defect > 1e-12 {
                    return Err(Error::InvalidArgument("bond term is not Hermitian".into()));
                }
            }
            Ok(terms.clone())
        }
        LocalEnsemble::Goe | LocalEnsemble::Gue => {
            let beta = if matches!(spec.ensemble, LocalEnsemble::Goe) { 1 } else { 2 };
            let mut rng = spec.seed.rng();
            (0..bonds)
                .map(|_| Ok(sample_goe_block(d2, beta, &mut rng)?.to_complex()))
                .collect()
        }
    }
}

/// I_{d^(k-1)} (x) h (x) I_{d^(n-k-1)} for the bond (k, k+1), k 1-based.
fn embed_bond(h: &DMatrix<C64>, k: usize, n: usize, d: usize) -> DMatrix<C64> {
    let left = DMatrix::<C64>::identity(d.pow((k - 1) as u32), d.pow((k - 1) as u32));
    let right = DMatrix::<C64>::identity(d.pow((n - k - 1) as u32), d.pow((n - k - 1) as u32));
    left.kronecker(h).kronecker(&right)
}

/// Dense H together with its odd-bond and even-bond parts; H = H_odd + H_even
/// holds exactly because H is assembled as that sum.
pub fn spin_chain_build(
    spec: &SpinChainSpec,
) -> Result<(MatrixSample, MatrixSample, MatrixSample)> {
    let dim = spec.total_dim()?;
    let terms = local_terms(spec)?;
    let mut h_odd = DMatrix::<C64>::zeros(dim, dim);
    let mut h_even = DMatrix::<C64>::zeros(dim, dim);
    for (idx, term) in terms.iter().enumerate() {
        let k = idx + 1;
        let embedded = embed_bond(term, k, spec.n, spec.d);
        if k % 2 == 1 {
            h_odd += embedded;
        } else {
            h_even += embedded;
        }
    }
    let h = &h_odd + &h_even;
    Ok((
        MatrixSample::complex(h, MatrixKind::Hermitian),
        MatrixSample::complex(h_odd, MatrixKind::Hermitian),
        MatrixSample::complex(h_even, MatrixKind::Hermitian),
    ))
}

struct BondEigen {
    values: DVector<f64>,
    vectors: DMatrix<C64>,
}

fn bond_eigen(h: &DMatrix<C64>) -> Result<BondEigen> {
    let eig = h
        .clone()
        .try_symmetric_eigen(1e-13, 100_000)
        .ok_or_else(|| Error::EigenFailure("bond eigendecomposition failed".into()))?;
    Ok(BondEigen {
        values: eig.eigenvalues,
        vectors: eig.eigenvectors,
    })
}

/// Kronecker product over one parity class: eigenvector factors for its bonds
/// and identity factors for uncovered edge sites.
fn parity_unitary(eigs: &[Option<&BondEigen>], n: usize, d: usize, odd: bool) -> DMatrix<C64> {
    let mut u = DMatrix::<C64>::identity(1, 1);
    let mut site = 1usize;
    let start = if odd { 1 } else { 2 };
    if !odd {
        u = u.kronecker(&DMatrix::<C64>::identity(d, d));
        site = 2;
    }
    let mut k = start;
    while k + 1 <= n {
        debug_assert_eq!(site, k);
        let e = eigs[k - 1].expect("bond of this parity");
        u = u.kronecker(&e.vectors);
        site = k + 2;
        k += 2;
    }
    while site <= n {
        u = u.kronecker(&DMatrix::<C64>::identity(d, d));
        site += 1;
    }
    u
}

/// Diagonal of the parity Hamiltonian in its product eigenbasis: the Kronecker
/// sum of the local eigenvalue vectors.
fn parity_diagonal(eigs: &[Option<&BondEigen>], n: usize, d: usize, odd: bool, dim: usize) -> Vec<f64> {
    let mut diag = vec![0.0f64; dim];
    let start = if odd { 1 } else { 2 };
    let mut k = start;
    while k + 1 <= n {
        let e = eigs[k - 1].expect("bond of this parity");
        let left = d.pow((k - 1) as u32);
        let mid = d * d;
        let right = d.pow((n - k - 1) as u32);
        for a in 0..left {
            for b in 0..mid {
                let v = e.values[b];
                for c in 0..right {
                    diag[(a * mid + b) * right + c] += v;
                }
            }
        }
        k += 2;
    }
    diag
}

fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// Spectra of the two commuting parity classes plus the relative eigenvector
/// matrix Q_s, built from d^2 x d^2 local solves and Kronecker assembly only.
/// The returned objects satisfy: Lambda_odd + Q_s^H Lambda_even Q_s is
/// unitarily similar to H, with both Lambdas in ascending order.
pub fn spin_chain_spectra(
    spec: &SpinChainSpec,
) -> Result<(Spectrum, Spectrum, MatrixSample)> {
    let dim = spec.total_dim()?;
    let terms = local_terms(spec)?;
    let eigs: Vec<BondEigen> = terms.iter().map(bond_eigen).collect::<Result<_>>()?;
    let slots: Vec<Option<&BondEigen>> = eigs.iter().map(Some).collect();

    let u_odd = parity_unitary(&slots, spec.n, spec.d, true);
    let u_even = parity_unitary(&slots, spec.n, spec.d, false);
    let diag_odd = parity_diagonal(&slots, spec.n, spec.d, true, dim);
    let diag_even = parity_diagonal(&slots, spec.n, spec.d, false, dim);

    // In the odd eigenbasis H becomes Lambda_odd + (U_even^H U_odd)^H
    // Lambda_even (U_even^H U_odd). Reorder rows/columns so both diagonals
    // can be reported sorted without breaking the similarity.
    let qs = u_even.adjoint() * &u_odd;
    let po = argsort(&diag_odd);
    let pe = argsort(&diag_even);
    let qs_sorted = DMatrix::from_fn(dim, dim, |i, j| qs[(pe[i], po[j])]);

    let lambda_odd = Spectrum::from_eigenvalues(diag_odd)?;
    let lambda_even = Spectrum::from_eigenvalues(diag_even)?;
    Ok((
        lambda_odd,
        lambda_even,
        MatrixSample::complex(qs_sorted, MatrixKind::Haar),
    ))
}
