//! Free-sum densities.
//!
//! Two routes: a Monte Carlo path that conjugates one summand by Haar
//! matrices and pools eigenvalues, and an analytic pipeline for N-fold
//! self-sums of a discrete spectrum. The analytic route inverts the discrete
//! Cauchy transform through a rank-one-update companion matrix (the
//! nonsymmetric generalization of the secular-equation method), then reads
//! the density off the complex root pair by the Plemelj-Sokhotsky formula.

use crate::density::{density_from_spectrum, DensityCurve, GridSpec, SmoothingSpec};
use crate::ensembles::{sample_haar, C64};
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Default relative tolerance for calling a root complex: eigensolvers return
/// tiny imaginary dust on real roots.
pub const DEFAULT_ROOT_TOL: f64 = 1e-9;

const SCHUR_MAX_ITER: usize = 100_000;

/// An N-fold free self-sum request: the base spectrum, the fold count, the
/// evaluation grid and the root-classification tolerance.
#[derive(Debug, Clone)]
pub struct FreeSumQuery {
    pub base: Spectrum,
    pub folds: u32,
    pub grid: GridSpec,
    pub root_tolerance: f64,
}

impl FreeSumQuery {
    pub fn new(base: Spectrum, folds: u32, grid: GridSpec) -> Result<Self> {
        if folds == 0 {
            return Err(Error::InvalidArgument("folds must be >= 1".into()));
        }
        Ok(FreeSumQuery {
            base,
            folds,
            grid,
            root_tolerance: DEFAULT_ROOT_TOL,
        })
    }

    /// Grid covering [N * min - margin, N * max + margin] for the fold count.
    pub fn default_grid(base: &Spectrum, folds: u32, points: usize) -> Result<GridSpec> {
        let n = folds as f64;
        let spread = (base.max() - base.min()).max(1e-6);
        let margin = 0.25 * n.sqrt() * spread + 1e-6;
        GridSpec::new(n * base.min() - margin, n * base.max() + margin, points)
    }
}

/// Discrete Cauchy transform G(z) = sum_i w_i / (z - lambda_i).
pub fn cauchy_transform(s: &Spectrum, z: C64) -> Result<C64> {
    let scale = 1.0 + s.max().abs().max(s.min().abs());
    let mut g = C64::new(0.0, 0.0);
    for &(v, w) in s.atoms() {
        let d = z - C64::new(v, 0.0);
        if d.norm() < 1e-14 * scale {
            return Err(Error::PoleCollision { z: z.re });
        }
        g += C64::new(w, 0.0) / d;
    }
    Ok(g)
}

/// Per-grid-point root diagnostics for the analytic engine.
#[derive(Debug, Clone, Serialize)]
pub struct PointDiagnostics {
    pub x: f64,
    pub n_real: usize,
    pub n_complex: usize,
    pub max_residual: f64,
    /// Set when the point was skipped (pole collision or solver failure).
    pub skipped: bool,
}

/// Roots of the N-fold pole equation sum_i v_i / (w - v_i) = alpha at real z,
/// with v_i = (N-1)/(N lambda_i - z) and alpha = -m (N-1)/N. Atoms repeated
/// c times contribute (c-1) exact roots at the shared pole plus a weight-c
/// term in the secular equation; the remaining roots are the eigenvalues of
/// the d x d rank-one update diag(v) + (1/alpha) c v^T over distinct poles.
/// Collapsing the multiplicity first keeps the companion non-defective (the
/// full m x m matrix stalls the Schur iteration for heavily repeated atoms).
/// At most one complex-conjugate pair exists.
pub fn nfold_roots(s: &Spectrum, z: f64, folds: u32) -> Result<Vec<C64>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(
            "nfold_roots needs folds >= 2 (the N = 1 equation is singular)".into(),
        ));
    }
    if !s.is_unweighted() {
        return Err(Error::InvalidArgument(
            "the analytic engine works on unweighted spectra".into(),
        ));
    }
    let n = folds as f64;
    let scale = 1.0 + s.max().abs().max(s.min().abs());
    for val in s.values() {
        if (n * val - z).abs() < 1e-12 * n * scale {
            return Err(Error::PoleCollision { z });
        }
    }
    let system = PoleSystem::new(s, z, folds);
    let d = system.dpoles.len();
    let alpha = system.alpha;
    let companion = DMatrix::from_fn(d, d, |i, j| {
        let diag = if i == j { system.dpoles[i].0 } else { 0.0 };
        diag + system.dpoles[i].1 * system.dpoles[j].0 / alpha
    });
    let schur = companion
        .try_schur(1e-14, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::EigenFailure(format!("Schur iteration stalled at z = {z}")))?;
    // Schur eigenvalues carry O(cond * eps) error; a few Newton steps on the
    // secular function push the residual to solver precision
    let mut roots: Vec<C64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|&w| system.polish(w))
        .collect();
    for &(p, c) in &system.dpoles {
        for _ in 1..(c as usize) {
            roots.push(C64::new(p, 0.0));
        }
    }
    Ok(roots)
}

struct PoleSystem {
    /// Distinct pole values with their multiplicities.
    dpoles: Vec<(f64, f64)>,
    alpha: f64,
    scale: f64,
}

impl PoleSystem {
    fn new(s: &Spectrum, z: f64, folds: u32) -> Self {
        let n = folds as f64;
        let m = s.len() as f64;
        let mut poles: Vec<f64> = s.values().map(|val| (n - 1.0) / (n * val - z)).collect();
        let scale = poles.iter().fold(1.0f64, |a, p| a.max(p.abs()));
        poles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut dpoles: Vec<(f64, f64)> = Vec::new();
        for p in poles {
            match dpoles.last_mut() {
                Some(last) if last.0 == p => last.1 += 1.0,
                _ => dpoles.push((p, 1.0)),
            }
        }
        PoleSystem {
            dpoles,
            alpha: -m * (n - 1.0) / n,
            scale,
        }
    }

    /// Backward-error residual |sum_i v_i/(w - v_i) - alpha| over the
    /// magnitude of the summed terms. For well-separated roots this is the
    /// plain residual relative to |alpha|; for a root pinched between two
    /// near-coincident poles it accounts for the fact that one ulp of w moves
    /// the sum by far more than machine precision, so no representable root
    /// can do better. Multiplicity roots sitting exactly on a repeated pole
    /// are exact and reported as zero.
    fn residual(&self, w: C64) -> f64 {
        if w.im == 0.0
            && self
                .dpoles
                .iter()
                .any(|&(p, c)| c > 1.5 && (w.re - p).abs() <= 1e-14 * self.scale)
        {
            return 0.0;
        }
        let mut acc = C64::new(-self.alpha, 0.0);
        let mut mag = self.alpha.abs();
        for &(p, c) in &self.dpoles {
            let t = C64::new(c * p, 0.0) / (w - C64::new(p, 0.0));
            acc += t;
            mag += t.norm();
        }
        acc.norm() / mag
    }

    /// Secular function f(w) = sum_i v_i/(w - v_i) - alpha and its derivative,
    /// with repeated poles folded into weights.
    fn secular(&self, w: C64) -> (C64, C64) {
        let mut f = C64::new(-self.alpha, 0.0);
        let mut fp = C64::new(0.0, 0.0);
        for &(p, c) in &self.dpoles {
            let d = w - C64::new(p, 0.0);
            let t = C64::new(c * p, 0.0) / d;
            f += t;
            fp -= t / d;
        }
        (f, fp)
    }

    /// Newton-polish an approximate secular root, keeping the best iterate.
    /// Real iterates stay real, so the complex-pair structure is preserved.
    fn polish(&self, w0: C64) -> C64 {
        let mut best = w0;
        let mut best_res = self.secular(best).0.norm();
        let mut w = w0;
        for _ in 0..10 {
            let (f, fp) = self.secular(w);
            if !f.norm().is_finite() || fp.norm() == 0.0 {
                break;
            }
            w -= f / fp;
            let r = self.secular(w).0.norm();
            if r < best_res {
                best_res = r;
                best = w;
            } else {
                break;
            }
            if best_res <= 1e-13 * self.alpha.abs() {
                break;
            }
        }
        best
    }
}

/// Residual of the pole equation for a candidate root of [`nfold_roots`].
pub fn nfold_root_residual(s: &Spectrum, z: f64, folds: u32, w: C64) -> f64 {
    PoleSystem::new(s, z, folds).residual(w)
}

/// Output of [`nfold_free_density`]: the renormalized curve, the pointwise
/// (un-renormalized) boundary values which are exact up to root-finder
/// precision, the raw trapezoid integral, and per-point diagnostics.
#[derive(Debug, Clone)]
pub struct FreeDensityResult {
    pub curve: DensityCurve,
    pub pointwise: DensityCurve,
    pub raw_integral: f64,
    pub diagnostics: Vec<PointDiagnostics>,
}

/// Density of the N-fold free self-sum of a discrete spectrum, evaluated on
/// the query grid. At each x the density is Im(w+)/pi for the complex root
/// with the largest positive imaginary part, or 0 when all roots are real.
/// N = 1 returns the kernel-smoothed base spectrum.
pub fn nfold_free_density(q: &FreeSumQuery) -> Result<FreeDensityResult> {
    let xs = q.grid.xs();
    if q.folds == 1 {
        let curve = density_from_spectrum(&q.base, &q.grid, &SmoothingSpec::default())?;
        let raw = curve.integral();
        return Ok(FreeDensityResult {
            pointwise: curve.clone(),
            curve,
            raw_integral: raw,
            diagnostics: Vec::new(),
        });
    }
    let mut values = Vec::with_capacity(xs.len());
    let mut diagnostics = Vec::with_capacity(xs.len());
    for &x in &xs {
        match nfold_roots(&q.base, x, q.folds) {
            Ok(roots) => {
                let system = PoleSystem::new(&q.base, x, q.folds);
                let mut n_complex = 0;
                let mut max_residual = 0.0f64;
                let mut best_im = 0.0f64;
                for &w in &roots {
                    let res = system.residual(w);
                    max_residual = max_residual.max(res);
                    if w.im.abs() > q.root_tolerance * (1.0 + w.norm()) {
                        n_complex += 1;
                        best_im = best_im.max(w.im);
                    }
                }
                if n_complex > 2 {
                    return Err(Error::EigenFailure(format!(
                        "{n_complex} complex roots at x = {x}; at most one conjugate pair may exist"
                    )));
                }
                diagnostics.push(PointDiagnostics {
                    x,
                    n_real: roots.len() - n_complex,
                    n_complex,
                    max_residual,
                    skipped: false,
                });
                values.push(best_im / std::f64::consts::PI);
            }
            Err(Error::PoleCollision { .. }) | Err(Error::EigenFailure(_)) => {
                diagnostics.push(PointDiagnostics {
                    x,
                    n_real: 0,
                    n_complex: 0,
                    max_residual: f64::NAN,
                    skipped: true,
                });
                values.push(0.0);
            }
            Err(e) => return Err(e),
        }
    }
    let raw = DensityCurve::new(xs.clone(), values.clone())?;
    let raw_integral = raw.integral();
    Ok(FreeDensityResult {
        curve: raw.normalized()?,
        pointwise: raw,
        raw_integral,
        diagnostics,
    })
}

/// Monte Carlo free sum: pools the eigenvalues of Lambda_1 + Q^H Lambda_2 Q
/// over independent Haar draws. Both spectra must be unweighted with equal m.
pub fn free_sum_mc(
    s1: &Spectrum,
    s2: &Spectrum,
    beta: u8,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Spectrum> {
    if s1.len() != s2.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} atoms",
            s1.len(),
            s2.len()
        )));
    }
    if !s1.is_unweighted() || !s2.is_unweighted() {
        return Err(Error::InvalidArgument("free_sum_mc needs unweighted spectra".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let m = s1.len();
    let l1: Vec<f64> = s1.values().collect();
    let l2: Vec<f64> = s2.values().collect();
    let mut pooled = Vec::with_capacity(m * samples);
    match beta {
        1 => {
            let d2 = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&l2));
            for _ in 0..samples {
                let q = sample_haar(m, 1, rng)?;
                let q = q.as_real().unwrap();
                let mut sum = q.transpose() * &d2 * q;
                for i in 0..m {
                    sum[(i, i)] += l1[i];
                }
                let eig = sum
                    .try_symmetric_eigen(f64::EPSILON, 10_000)
                    .ok_or_else(|| Error::EigenFailure("symmetric eigensolver stalled".into()))?;
                pooled.extend(eig.eigenvalues.iter().cloned());
            }
        }
        2 => {
            let d2 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                m,
                l2.iter().map(|&v| C64::new(v, 0.0)),
            ));
            for _ in 0..samples {
                let q = sample_haar(m, 2, rng)?;
                let q = q.as_complex().unwrap();
                let mut sum = q.adjoint() * &d2 * q;
                for i in 0..m {
                    sum[(i, i)] += C64::new(l1[i], 0.0);
                }
                let eig = sum
                    .try_symmetric_eigen(f64::EPSILON, 10_000)
                    .ok_or_else(|| Error::EigenFailure("hermitian eigensolver stalled".into()))?;
                pooled.extend(eig.eigenvalues.iter().cloned());
            }
        }
        other => return Err(Error::UnsupportedBeta(other)),
    }
    Spectrum::from_eigenvalues(pooled)
}

/// Inverse Cauchy transform G^{-1}(w) of a discrete spectrum, computed through
/// the same companion machinery: the candidates are the eigenvalues of
/// diag(lambda) + (1/(m w)) * ones * ones^T, and the branch consistent with
/// w ~ 1/z at infinity is the one nearest 1/w + m1.
pub fn inverse_cauchy(s: &Spectrum, w: C64) -> Result<C64> {
    if w.norm() == 0.0 {
        return Err(Error::InvalidArgument("w must be nonzero".into()));
    }
    if !s.is_unweighted() {
        return Err(Error::InvalidArgument("inverse_cauchy needs an unweighted spectrum".into()));
    }
    let m = s.len();
    let c = C64::new(1.0, 0.0) / (C64::new(m as f64, 0.0) * w);
    let lambdas: Vec<f64> = s.values().collect();
    let companion = DMatrix::from_fn(m, m, |i, j| {
        let diag = if i == j { C64::new(lambdas[i], 0.0) } else { C64::new(0.0, 0.0) };
        diag + c
    });
    let schur = companion
        .try_schur(1e-14, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::EigenFailure("Schur iteration stalled in inverse_cauchy".into()))?;
    let target = C64::new(1.0, 0.0) / w + C64::new(s.moment(1), 0.0);
    let candidates = schur
        .eigenvalues()
        .ok_or_else(|| Error::EigenFailure("no eigenvalues from complex Schur".into()))?;
    let z = candidates
        .iter()
        .cloned()
        .min_by(|a, b| (a - target).norm().partial_cmp(&(b - target).norm()).unwrap())
        .ok_or_else(|| Error::BranchSelection(format!("{w}")))?;
    // the selected branch must actually invert G
    let g = cauchy_transform(s, z).map_err(|_| Error::BranchSelection(format!("{w}")))?;
    if (g - w).norm() > 1e-8 * w.norm().max(1e-8) {
        return Err(Error::BranchSelection(format!("{w}")));
    }
    Ok(z)
}

/// R-transform probe R(w) = G^{-1}(w) - 1/w.
pub fn r_transform_probe(s: &Spectrum, w: C64) -> Result<C64> {
    let z = inverse_cauchy(s, w)?;
    Ok(z - C64::new(1.0, 0.0) / w)
}

/// R-transform of the N-fold free self-sum at w, derived from the N-fold
/// inverse Cauchy transform z = N G^{-1}(w) - (N - 1)/w.
pub fn nfold_r_transform(s: &Spectrum, w: C64, folds: u32) -> Result<C64> {
    if folds == 0 {
        return Err(Error::InvalidArgument("folds must be >= 1".into()));
    }
    let n = folds as f64;
    let zsum = C64::new(n, 0.0) * inverse_cauchy(s, w)? - C64::new(n - 1.0, 0.0) / w;
    Ok(zsum - C64::new(1.0, 0.0) / w)
}

/// Closed-form arcsine density on (-2, 2): the free convolution of two
/// symmetric Bernoulli (+-1) spectra. Test oracle.
pub fn arcsine_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        1.0 / (std::f64::consts::PI * (4.0 - x * x).sqrt())
    }
}

/// Closed-form semicircle density of radius r. Test oracle.
pub fn semicircle_density(x: f64, r: f64) -> f64 {
    if x.abs() >= r {
        0.0
    } else {
        2.0 / (std::f64::consts::PI * r * r) * (r * r - x * x).sqrt()
    }
}
