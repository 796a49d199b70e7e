//! Fourth-moment bookkeeping for the exact/classical/free variants of a sum
//! of two Hermitian matrices, the mixing-parameter estimators, and the
//! end-to-end convex-combination density pipeline.

use crate::classical::{classical_moment, classical_sample_sum, classical_sum};
use crate::density::{
    density_from_spectrum, mix_densities, DensityCurve, GridSpec, SmoothingSpec,
};
use crate::ensembles::{
    haar_cross_moments, haar_fourth_moment, haar_ipr_closed, ipr, sample_haar,
    sample_permutation, Entries, MatrixKind, MatrixSample, C64,
};
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;
use itertools::Itertools;
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// How the two summands are coupled.
pub enum Coupling {
    /// Two concrete matrices in a common basis.
    Fixed { m1: MatrixSample, m2: MatrixSample },
    /// Fixed eigenvalues, relative eigenvector matrix redrawn per sample.
    Conjugation {
        lambda1: Spectrum,
        lambda2: Spectrum,
        kind: ConjKind,
    },
    /// Fixed eigenvalues with a fixed relative eigenvector matrix Q_s.
    Eigenvector {
        lambda1: Spectrum,
        lambda2: Spectrum,
        q: MatrixSample,
    },
    /// Arbitrary generator of matrix pairs.
    Sampler(PairSampler),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjKind {
    Permutation,
    Haar { beta: u8 },
}

pub type PairSampler = Box<dyn Fn(&mut ChaCha8Rng) -> Result<(MatrixSample, MatrixSample)> + Send + Sync>;

/// A pair of summands with their coupling.
pub struct SummandPair {
    pub coupling: Coupling,
}

fn conjugated(lambda: &Spectrum, u: &MatrixSample) -> MatrixSample {
    let vals: Vec<f64> = lambda.values().collect();
    match &u.entries {
        Entries::Real(q) => {
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&vals));
            MatrixSample::real(q.transpose() * d * q, MatrixKind::Hermitian)
        }
        Entries::Complex(q) => {
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                vals.len(),
                vals.iter().map(|&v| C64::new(v, 0.0)),
            ));
            MatrixSample::complex(q.adjoint() * d * q, MatrixKind::Hermitian)
        }
    }
}

impl SummandPair {
    pub fn fixed(m1: MatrixSample, m2: MatrixSample) -> Result<Self> {
        if m1.dim() != m2.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {}",
                m1.dim(),
                m2.dim()
            )));
        }
        Ok(SummandPair {
            coupling: Coupling::Fixed { m1, m2 },
        })
    }

    pub fn conjugation(lambda1: Spectrum, lambda2: Spectrum, kind: ConjKind) -> Result<Self> {
        if lambda1.len() != lambda2.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} atoms",
                lambda1.len(),
                lambda2.len()
            )));
        }
        Ok(SummandPair {
            coupling: Coupling::Conjugation {
                lambda1,
                lambda2,
                kind,
            },
        })
    }

    pub fn eigenvector(lambda1: Spectrum, lambda2: Spectrum, q: MatrixSample) -> Result<Self> {
        if lambda1.len() != lambda2.len() || lambda1.len() != q.dim() {
            return Err(Error::DimensionMismatch("pair members must share m".into()));
        }
        Ok(SummandPair {
            coupling: Coupling::Eigenvector {
                lambda1,
                lambda2,
                q,
            },
        })
    }

    pub fn sampler(f: PairSampler) -> Self {
        SummandPair {
            coupling: Coupling::Sampler(f),
        }
    }

    /// True when the exact summands do not change between draws.
    pub fn is_deterministic(&self) -> bool {
        matches!(
            self.coupling,
            Coupling::Fixed { .. } | Coupling::Eigenvector { .. }
        )
    }

    /// One draw of the concrete matrix pair.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(MatrixSample, MatrixSample)> {
        match &self.coupling {
            Coupling::Fixed { m1, m2 } => Ok((m1.clone(), m2.clone())),
            Coupling::Eigenvector { lambda1, lambda2, q } => {
                let vals: Vec<f64> = lambda1.values().collect();
                Ok((MatrixSample::diagonal(&vals), conjugated(lambda2, q)))
            }
            Coupling::Conjugation {
                lambda1,
                lambda2,
                kind,
            } => {
                let m = lambda1.len();
                let u = match kind {
                    ConjKind::Permutation => sample_permutation(m, rng)?,
                    ConjKind::Haar { beta } => sample_haar(m, *beta, rng)?,
                };
                let vals: Vec<f64> = lambda1.values().collect();
                Ok((MatrixSample::diagonal(&vals), conjugated(lambda2, &u)))
            }
            Coupling::Sampler(f) => f(rng),
        }
    }
}

/// phi[S^k] for k = 1..4 of a Hermitian matrix: (1/m) Tr S^k, with
/// Tr S^4 = ||S^2||_F^2 so only one matrix product is needed.
pub fn phi_moments(sample: &MatrixSample) -> [f64; 4] {
    let m = sample.dim() as f64;
    match &sample.entries {
        Entries::Real(s) => {
            let a = s * s;
            let t1 = s.trace();
            let t2 = a.trace();
            let t3: f64 = a
                .iter()
                .zip(s.transpose().iter())
                .map(|(x, y)| x * y)
                .sum();
            let t4: f64 = a.iter().map(|x| x * x).sum();
            [t1 / m, t2 / m, t3 / m, t4 / m]
        }
        Entries::Complex(s) => {
            let a = s * s;
            let t1 = s.trace().re;
            let t2 = a.trace().re;
            let t3: f64 = a
                .iter()
                .zip(s.adjoint().iter())
                .map(|(x, y)| (x * y.conj()).re)
                .sum();
            let t4: f64 = a.iter().map(|x| x.norm_sqr()).sum();
            [t1 / m, t2 / m, t3 / m, t4 / m]
        }
    }
}

/// Sum of two Hermitian samples (promoting to complex if the fields differ).
pub fn hermitian_sum(m1: &MatrixSample, m2: &MatrixSample) -> Result<MatrixSample> {
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            m1.dim(),
            m2.dim()
        )));
    }
    Ok(match (&m1.entries, &m2.entries) {
        (Entries::Real(a), Entries::Real(b)) => MatrixSample::real(a + b, MatrixKind::Hermitian),
        _ => MatrixSample::complex(m1.to_complex() + m2.to_complex(), MatrixKind::Hermitian),
    })
}

/// (1/m) E Tr[(M1 + M2)^4], averaging over `samples` draws of the pair
/// (one draw when the pair is deterministic).
pub fn exact_fourth_moment(
    pair: &SummandPair,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let n = if pair.is_deterministic() { 1 } else { samples };
    let mut acc = 0.0;
    for _ in 0..n {
        let (m1, m2) = pair.draw(rng)?;
        acc += phi_moments(&hermitian_sum(&m1, &m2)?)[3];
    }
    Ok(acc / n as f64)
}

/// phi of the crossing term (Lambda1 Q^H Lambda2 Q)^2 averaged over Haar Q,
/// by the four-case Weingarten sum with the Haar moment table constants.
pub fn haar_crossing_term(s1: &Spectrum, s2: &Spectrum, beta: u8) -> Result<f64> {
    if !s1.is_unweighted() || !s2.is_unweighted() || s1.len() != s2.len() {
        return Err(Error::InvalidArgument(
            "haar_crossing_term needs equal unweighted spectra".into(),
        ));
    }
    let m = s1.len();
    if m < 2 {
        return Err(Error::InvalidArgument("m must be >= 2".into()));
    }
    let e4 = haar_fourth_moment(m, beta)?;
    let (e22, e_cross) = haar_cross_moments(m, beta)?;
    let sl: f64 = s1.values().sum();
    let sl2: f64 = s1.values().map(|v| v * v).sum();
    let sm: f64 = s2.values().sum();
    let sm2: f64 = s2.values().map(|v| v * v).sum();
    let off_l = sl * sl - sl2; // sum over i != k of lambda_i lambda_k
    let off_m = sm * sm - sm2;
    let etr = off_l * off_m * e_cross + sl2 * off_m * e22 + off_l * sm2 * e22 + sl2 * sm2 * e4;
    Ok(etr / m as f64)
}

/// Fourth moment of the free coupling: the non-crossing expansion plus twice
/// the Haar-averaged crossing term.
pub fn free_fourth_moment(s1: &Spectrum, s2: &Spectrum, beta: u8) -> Result<f64> {
    let cross = haar_crossing_term(s1, s2, beta)?;
    Ok(s1.moment(4)
        + s2.moment(4)
        + 4.0 * s1.moment(3) * s2.moment(1)
        + 4.0 * s1.moment(1) * s2.moment(3)
        + 4.0 * s1.moment(2) * s2.moment(2)
        + 2.0 * cross)
}

/// Fourth moment of the classical coupling (binomial expansion at n = 4).
pub fn classical_fourth_moment(s1: &Spectrum, s2: &Spectrum) -> f64 {
    classical_moment(s1, s2, 4)
}

/// phi of the crossing term for a fixed coupling matrix U:
/// (1/m) Tr[(Lambda1 U^H Lambda2 U)^2].
pub fn matrix_crossing_term(s1: &Spectrum, s2: &Spectrum, u: &MatrixSample) -> Result<f64> {
    if s1.len() != s2.len() || s1.len() != u.dim() {
        return Err(Error::DimensionMismatch("crossing term needs equal m".into()));
    }
    let v2: Vec<f64> = s2.values().collect();
    let v1: Vec<f64> = s1.values().collect();
    let m = u.dim();
    match &u.entries {
        Entries::Real(q) => {
            let d2 = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&v2));
            let mut t = q.transpose() * d2 * q;
            for i in 0..m {
                for j in 0..m {
                    t[(i, j)] *= v1[i];
                }
            }
            let sq = &t * &t;
            Ok(sq.trace() / m as f64)
        }
        Entries::Complex(q) => {
            let d2 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                m,
                v2.iter().map(|&v| C64::new(v, 0.0)),
            ));
            let mut t = q.adjoint() * d2 * q;
            for i in 0..m {
                for j in 0..m {
                    t[(i, j)] *= C64::new(v1[i], 0.0);
                }
            }
            let sq = &t * &t;
            Ok(sq.trace().re / m as f64)
        }
    }
}

/// phi of the crossing term averaged over all m! permutation couplings,
/// exhaustively: (1/m!) sum_pi (1/m) sum_i lambda_i^2 mu_{pi(i)}^2.
/// Limited to m <= 6.
pub fn permutation_crossing_term(s1: &Spectrum, s2: &Spectrum) -> Result<f64> {
    if s1.len() != s2.len() {
        return Err(Error::DimensionMismatch("equal m required".into()));
    }
    let m = s1.len();
    if m > 6 {
        return Err(Error::InvalidArgument(
            "exhaustive permutation averaging is limited to m <= 6".into(),
        ));
    }
    let l2: Vec<f64> = s1.values().map(|v| v * v).collect();
    let mu2: Vec<f64> = s2.values().map(|v| v * v).collect();
    let mut acc = 0.0;
    let mut count = 0usize;
    for perm in (0..m).permutations(m) {
        acc += l2
            .iter()
            .zip(perm.iter())
            .map(|(&a, &j)| a * mu2[j])
            .sum::<f64>()
            / m as f64;
        count += 1;
    }
    Ok(acc / count as f64)
}

/// phi of the crossing term averaged over Haar O(2) by quadrature: rotations
/// and reflections each integrated over the angle with a periodic trapezoid
/// rule (exact for the trigonometric-polynomial integrand). m = 2 only.
pub fn haar_crossing_term_m2_quadrature(s1: &Spectrum, s2: &Spectrum) -> Result<f64> {
    if s1.len() != 2 || s2.len() != 2 {
        return Err(Error::InvalidArgument("quadrature route is m = 2 only".into()));
    }
    let n = 64usize;
    let mut acc = 0.0;
    for reflect in [false, true] {
        for k in 0..n {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let (c, s) = (theta.cos(), theta.sin());
            let u = if reflect {
                DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
            } else {
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
            };
            let u = MatrixSample::real(u, MatrixKind::Haar);
            acc += matrix_crossing_term(s1, s2, &u)?;
        }
    }
    Ok(acc / (2 * n) as f64)
}

/// Which coupling the crossing-term gap is measured against.
pub enum CrossingCoupling<'a> {
    /// A fixed coupling matrix.
    Matrix(&'a MatrixSample),
    /// Haar average via the moment-table closed form.
    HaarClosedForm { beta: u8 },
    /// Haar average via O(2) angular quadrature (m = 2, beta = 1).
    HaarQuadrature,
}

/// Gap phi[(Lambda1 Pi^H Lambda2 Pi)^2] - phi[(Lambda1 U^H Lambda2 U)^2],
/// with the permutation expectation exhaustive (m <= 6). For Haar-averaged U
/// this equals kappa2(s1) kappa2(s2) (1 - m E|q|^4).
pub fn crossing_term_gap(
    s1: &Spectrum,
    s2: &Spectrum,
    coupling: CrossingCoupling<'_>,
) -> Result<f64> {
    let perm = permutation_crossing_term(s1, s2)?;
    let u_term = match coupling {
        CrossingCoupling::Matrix(u) => matrix_crossing_term(s1, s2, u)?,
        CrossingCoupling::HaarClosedForm { beta } => haar_crossing_term(s1, s2, beta)?,
        CrossingCoupling::HaarQuadrature => haar_crossing_term_m2_quadrature(s1, s2)?,
    };
    Ok(perm - u_term)
}

/// A p estimate: the raw matched value and its clamp into [0, 1].
#[derive(Debug, Clone, Serialize)]
pub struct PEstimate {
    pub raw: f64,
    pub clamped: f64,
    pub warning: Option<String>,
}

/// Fourth-moment matching: p = (m4c - m4) / (m4c - m4f). Values outside
/// [0, 1] are numerically legitimate byproducts and are clamped with a
/// warning rather than rejected.
pub fn p_from_moments(m4: f64, m4c: f64, m4f: f64) -> Result<PEstimate> {
    let scale = m4c.abs().max(m4f.abs()).max(1.0);
    if (m4c - m4f).abs() < 1e-12 * scale {
        return Err(Error::DegenerateDenominator);
    }
    let raw = (m4c - m4) / (m4c - m4f);
    let clamped = raw.clamp(0.0, 1.0);
    let warning = if clamped != raw {
        Some(format!("raw p = {raw} outside [0, 1]; clamped"))
    } else {
        None
    };
    Ok(PEstimate {
        raw,
        clamped,
        warning,
    })
}

/// IPR-ratio estimator: ipr_s / haar_ipr_closed(m, beta), or ipr_s itself in
/// the asymptotic (m -> infinity) form.
pub fn p_from_ipr(ipr_s: f64, m: usize, beta: u8, asymptotic: bool) -> Result<f64> {
    if m < 2 {
        return Err(Error::InvalidArgument("p_from_ipr needs m >= 2".into()));
    }
    if asymptotic {
        Ok(ipr_s)
    } else {
        Ok(ipr_s / haar_ipr_closed(m, beta)?)
    }
}

/// Closed-form p for the diagonal-plus-block-GOE model:
/// (l - 1)(m beta + 2) / [(l - 1)(m beta + 2) + 2 (m - l)].
pub fn p_block_closed(m: usize, ell: usize, beta: u8) -> Result<f64> {
    if ell == 0 || m == 0 || m % ell != 0 {
        return Err(Error::InvalidArgument(format!(
            "block size {ell} must divide m = {m}"
        )));
    }
    let _ = haar_ipr_closed(2, beta)?; // beta validity
    let (mf, lf, bf) = (m as f64, ell as f64, beta as f64);
    let num = (lf - 1.0) * (mf * bf + 2.0);
    Ok(num / (num + 2.0 * (mf - lf)))
}

/// The naive IPR formula for the block model, (l - 1)/(l + 2). It disagrees
/// with the closed form above because the block coupling is not permutation
/// invariant; exposed to demonstrate that failure.
pub fn block_ipr_mismatch(ell: usize) -> f64 {
    (ell as f64 - 1.0) / (ell as f64 + 2.0)
}

/// First three moments of Lambda1 + U^H Lambda2 U averaged over the
/// permutation-invariance orbit of U (all Pi1 U Pi2). The orbit average of
/// every |u_ij|^2 is sum_kl |u_kl|^2 / m^2, so the result is a closed form in
/// the spectra and that single scalar; for an orthonormal U it reproduces the
/// classical moments exactly.
pub fn coupled_low_moments(s1: &Spectrum, s2: &Spectrum, u: &MatrixSample) -> Result<[f64; 3]> {
    if s1.len() != s2.len() || s1.len() != u.dim() {
        return Err(Error::DimensionMismatch("equal m required".into()));
    }
    let m = u.dim();
    let mf = m as f64;
    let total_sq: f64 = match &u.entries {
        Entries::Real(q) => q.iter().map(|v| v * v).sum(),
        Entries::Complex(q) => q.iter().map(|v| v.norm_sqr()).sum(),
    };
    let w = total_sq / (mf * mf); // orbit-averaged |u_ij|^2, equals 1/m for orthonormal U
    // phi[Lambda1^a U^H Lambda2^b U] averaged over the orbit
    let dep = |a: u32, b: u32| mf * w * s1.moment(a) * s2.moment(b);
    let m1 = s1.moment(1) + s2.moment(1);
    let m2 = s1.moment(2) + 2.0 * dep(1, 1) + s2.moment(2);
    let m3 = s1.moment(3) + 3.0 * dep(2, 1) + 3.0 * dep(1, 2) + s2.moment(3);
    Ok([m1, m2, m3])
}

/// phi[Lambda1^k1 U^H Lambda2^k2 U] averaged exhaustively over Pi1 U Pi2 for
/// all permutation pairs. Limited to m <= 5.
pub fn departure_orbit_average(
    s1: &Spectrum,
    s2: &Spectrum,
    u: &MatrixSample,
    k1: u32,
    k2: u32,
) -> Result<f64> {
    let m = u.dim();
    if m > 5 {
        return Err(Error::InvalidArgument("exhaustive orbit average needs m <= 5".into()));
    }
    if s1.len() != m || s2.len() != m {
        return Err(Error::DimensionMismatch("equal m required".into()));
    }
    let l: Vec<f64> = s1.values().map(|v| v.powi(k1 as i32)).collect();
    let mu: Vec<f64> = s2.values().map(|v| v.powi(k2 as i32)).collect();
    let abs2 = |i: usize, j: usize| u.entry(i, j).norm_sqr();
    let mut acc = 0.0;
    let mut count = 0usize;
    for p1 in (0..m).permutations(m) {
        for p2 in (0..m).permutations(m) {
            // phi = (1/m) sum_ij lambda_i^k1 mu_j^k2 |(Pi1 U Pi2)_{ji}|^2; row
            // and column permutations relabel the entries of U.
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += l[i] * mu[j] * abs2(p1[j], p2[i]);
                }
            }
            acc += s / m as f64;
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PMethod {
    Moments,
    Ipr,
    /// Closed-form p supplied by the model.
    Closed(f64),
}

pub struct EstimateConfig {
    pub samples: usize,
    pub beta: u8,
    pub method: PMethod,
    pub grid: Option<GridSpec>,
    pub smoothing: SmoothingSpec,
    /// Skip density construction (moment/p report only).
    pub build_densities: bool,
    /// Random pairings per sample used for the classical density when the
    /// full product measure would be too large.
    pub classical_pairings: usize,
}

impl EstimateConfig {
    pub fn new(samples: usize, beta: u8) -> Self {
        EstimateConfig {
            samples,
            beta,
            method: PMethod::Moments,
            grid: None,
            smoothing: SmoothingSpec::default(),
            build_densities: true,
            classical_pairings: 4,
        }
    }
}

/// Moment and p report for one estimation run. Serialized as JSON by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m4_exact: f64,
    pub m4_classical: f64,
    pub m4_free: f64,
    pub kappa2_1: f64,
    pub kappa2_2: f64,
    pub p_raw: f64,
    pub p_clamped: f64,
    pub p_method: String,
    pub warnings: Vec<String>,
}

/// Output of the end-to-end pipeline: the report, the mixed density and the
/// two endpoint densities (when densities were requested).
pub struct EstimateOutcome {
    pub report: MomentReport,
    pub mixed: Option<DensityCurve>,
    pub classical: Option<DensityCurve>,
    pub free: Option<DensityCurve>,
}

/// End-to-end pipeline: exact/classical/free fourth moments, p by the selected
/// method, and the convex-combination density built from MC endpoint densities.
pub fn estimate(
    pair: &SummandPair,
    config: &EstimateConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EstimateOutcome> {
    if config.samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let mut warnings = Vec::new();
    let mut acc = [0.0f64; 4];
    let (mut acc_m4c, mut acc_m4f) = (0.0, 0.0);
    let (mut acc_k1, mut acc_k2) = (0.0, 0.0);
    let mut classical_atoms: Vec<f64> = Vec::new();
    let mut free_atoms: Vec<f64> = Vec::new();
    let deterministic = pair.is_deterministic();
    let mut cached_exact: Option<([f64; 4], Spectrum, Spectrum)> = None;
    let mut ipr_value: Option<f64> = None;

    if let Coupling::Eigenvector { q, .. } = &pair.coupling {
        ipr_value = Some(ipr(q)?);
    }

    for _ in 0..config.samples {
        let (phis, s1, s2) = if let (true, Some((p, a, b))) = (deterministic, cached_exact.as_ref())
        {
            (*p, a.clone(), b.clone())
        } else {
            let (m1, m2) = pair.draw(rng)?;
            let s1 = m1.eigenvalues()?;
            let s2 = m2.eigenvalues()?;
            let phis = phi_moments(&hermitian_sum(&m1, &m2)?);
            if deterministic {
                cached_exact = Some((phis, s1.clone(), s2.clone()));
            }
            (phis, s1, s2)
        };
        for (a, p) in acc.iter_mut().zip(phis.iter()) {
            *a += p;
        }
        acc_m4c += classical_fourth_moment(&s1, &s2);
        acc_m4f += free_fourth_moment(&s1, &s2, config.beta)?;
        acc_k1 += s1.kappa2()?;
        acc_k2 += s2.kappa2()?;

        if config.build_densities {
            let m = s1.len();
            if m * m <= 16_384 {
                classical_atoms.extend(classical_sum(&s1, &s2, false).values());
            } else {
                for _ in 0..config.classical_pairings.max(1) {
                    classical_atoms.extend(classical_sample_sum(&s1, &s2, rng)?.values());
                }
            }
            let free_draw = crate::free::free_sum_mc(&s1, &s2, config.beta, 1, rng)?;
            free_atoms.extend(free_draw.values());
        }
    }

    let n = config.samples as f64;
    let m4 = acc[3] / n;
    let m4c = acc_m4c / n;
    let m4f = acc_m4f / n;

    let (p_raw, p_clamped, p_method) = match config.method {
        PMethod::Moments => {
            let est = p_from_moments(m4, m4c, m4f)?;
            if let Some(w) = est.warning {
                warnings.push(w);
            }
            (est.raw, est.clamped, "moments".to_string())
        }
        PMethod::Ipr => {
            let ipr_s = ipr_value.ok_or_else(|| {
                Error::InvalidArgument(
                    "the IPR method needs an eigenvector coupling with a concrete Q_s".into(),
                )
            })?;
            let m = match &pair.coupling {
                Coupling::Eigenvector { q, .. } => q.dim(),
                _ => unreachable!(),
            };
            let raw = p_from_ipr(ipr_s, m, config.beta, false)?;
            let clamped = raw.clamp(0.0, 1.0);
            if clamped != raw {
                warnings.push(format!("raw IPR p = {raw} outside [0, 1]; clamped"));
            }
            (raw, clamped, "ipr".to_string())
        }
        PMethod::Closed(p) => (p, p.clamp(0.0, 1.0), "closed".to_string()),
    };

    let (mixed, classical, free) = if config.build_densities {
        let s_classical = Spectrum::from_eigenvalues(classical_atoms)?;
        let s_free = Spectrum::from_eigenvalues(free_atoms)?;
        let grid = match config.grid {
            Some(g) => g,
            None => GridSpec::default_for(&[&s_classical, &s_free])?,
        };
        let classical = density_from_spectrum(&s_classical, &grid, &config.smoothing)?;
        let free = density_from_spectrum(&s_free, &grid, &config.smoothing)?;
        let mix = mix_densities(p_raw, &free, &classical)?;
        if mix.clamped && !warnings.iter().any(|w| w.contains("clamped")) {
            warnings.push(format!("p = {p_raw} clamped to {} for mixing", mix.p_used));
        }
        (Some(mix.curve), Some(classical), Some(free))
    } else {
        (None, None, None)
    };

    Ok(EstimateOutcome {
        report: MomentReport {
            m1: acc[0] / n,
            m2: acc[1] / n,
            m3: acc[2] / n,
            m4,
            m4_exact: m4,
            m4_classical: m4c,
            m4_free: m4f,
            kappa2_1: acc_k1 / n,
            kappa2_2: acc_k2 / n,
            p_raw,
            p_clamped,
            p_method,
            warnings,
        },
        mixed,
        classical,
        free,
    })
}
