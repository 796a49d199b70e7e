//! Discrete spectra: finite weighted sets of real eigenvalue atoms.

use crate::error::{Error, Result};
use std::fmt::Write as _;

const WEIGHT_TOL: f64 = 1e-12;

/// The empirical measure of one Hermitian matrix: a finite list of real
/// eigenvalue atoms with nonnegative weights summing to one. `m` records the
/// dimension of the underlying matrix, which enters several finite-size
/// formulas explicitly. Duplicate atoms are retained, never merged.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    atoms: Vec<(f64, f64)>,
    m: usize,
}

impl Spectrum {
    /// Unweighted spectrum of an m x m matrix: m atoms of weight 1/m each.
    pub fn from_eigenvalues(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty spectrum".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite eigenvalue".into()));
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = values.len();
        let w = 1.0 / m as f64;
        Ok(Spectrum {
            atoms: values.into_iter().map(|v| (v, w)).collect(),
            m,
        })
    }

    /// Weighted spectrum. Weights must be nonnegative and sum to 1 within 1e-12.
    /// `m` is the matrix dimension the measure refers to.
    pub fn from_weighted(mut atoms: Vec<(f64, f64)>, m: usize) -> Result<Self> {
        if atoms.is_empty() || m == 0 {
            return Err(Error::InvalidArgument("empty spectrum".into()));
        }
        if atoms.iter().any(|(v, w)| !v.is_finite() || !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "atoms must be finite with nonnegative weights".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(Spectrum { atoms, m })
    }

    /// The two-atom spectrum {+1, -1} with equal weights, dimension `m`
    /// (m must be even so the unweighted form exists).
    pub fn pm_one(m: usize) -> Result<Self> {
        if m < 2 || m % 2 != 0 {
            return Err(Error::InvalidArgument("pm_one needs even m >= 2".into()));
        }
        let mut v = vec![-1.0; m / 2];
        v.extend(std::iter::repeat(1.0).take(m / 2));
        Self::from_eigenvalues(v)
    }

    /// Constant spectrum {c, ..., c} of dimension m.
    pub fn constant(c: f64, m: usize) -> Result<Self> {
        Self::from_eigenvalues(vec![c; m])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|&(v, _)| v)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// True when the spectrum is the plain empirical measure of an m x m
    /// matrix: exactly m atoms, each of weight 1/m.
    pub fn is_unweighted(&self) -> bool {
        let w = 1.0 / self.m as f64;
        self.atoms.len() == self.m && self.atoms.iter().all(|&(_, wi)| (wi - w).abs() <= WEIGHT_TOL)
    }

    pub fn min(&self) -> f64 {
        self.atoms.first().unwrap().0
    }

    pub fn max(&self) -> f64 {
        self.atoms.last().unwrap().0
    }

    /// k-th empirical moment: sum_i w_i lambda_i^k.
    pub fn moment(&self, k: u32) -> f64 {
        assert!(k >= 1, "moment order must be >= 1");
        self.atoms.iter().map(|&(v, w)| w * v.powi(k as i32)).sum()
    }

    /// Moment with the k = 0 convention moment(s, 0) = 1.
    pub fn moment0(&self, k: u32) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.moment(k)
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Population variance sum w_i (lambda_i - mean)^2, computed centered so
    /// it cannot go negative by cancellation.
    pub fn population_variance(&self) -> f64 {
        let m1 = self.moment(1);
        self.atoms
            .iter()
            .map(|&(v, w)| w * (v - m1) * (v - m1))
            .sum()
    }

    /// kappa_2 = m_2 - m_{1,1} with m_{1,1} = (1/(m(m-1))) sum_{i != j} lambda_i lambda_j.
    /// Requires an unweighted spectrum with m >= 2 atoms. Equals
    /// (m/(m-1)) * population variance, and vanishes iff all atoms are equal.
    pub fn kappa2(&self) -> Result<f64> {
        if self.m < 2 {
            return Err(Error::InvalidArgument(
                "kappa2 requires m >= 2 (m_{1,1} undefined otherwise)".into(),
            ));
        }
        if !self.is_unweighted() {
            return Err(Error::InvalidArgument(
                "kappa2 is defined for unweighted spectra".into(),
            ));
        }
        let m = self.m as f64;
        // m_2 - m_{1,1} = (m/(m-1)) * population variance; the centered form
        // avoids the cancellation of the raw power sums
        Ok(m / (m - 1.0) * self.population_variance())
    }

    /// New spectrum with every atom shifted by `c`.
    pub fn shift(&self, c: f64) -> Spectrum {
        Spectrum {
            atoms: self.atoms.iter().map(|&(v, w)| (v + c, w)).collect(),
            m: self.m,
        }
    }

    /// New spectrum with every atom scaled by `a` (re-sorted if a < 0).
    pub fn scale(&self, a: f64) -> Spectrum {
        let mut atoms: Vec<(f64, f64)> = self.atoms.iter().map(|&(v, w)| (a * v, w)).collect();
        atoms.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        Spectrum { atoms, m: self.m }
    }

    /// Merge atoms whose values coincide within `tol`, accumulating weights.
    pub fn merged(&self, tol: f64) -> Spectrum {
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(self.atoms.len());
        for &(v, w) in &self.atoms {
            match atoms.last_mut() {
                Some((lv, lw)) if (v - *lv).abs() <= tol => *lw += w,
                _ => atoms.push((v, w)),
            }
        }
        Spectrum { atoms, m: self.m }
    }

    /// Parse the spectrum text format: one real per line (weight 1/m implied),
    /// or "value,weight" CSV lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Spectrum> {
        let mut plain: Vec<f64> = Vec::new();
        let mut weighted: Vec<(f64, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Parse(format!("line {}: {}", lineno + 1, what));
            match line.split_once(',') {
                Some((v, w)) => {
                    let v: f64 = v.trim().parse().map_err(|_| bad("bad value"))?;
                    let w: f64 = w.trim().parse().map_err(|_| bad("bad weight"))?;
                    weighted.push((v, w));
                }
                None => plain.push(line.parse().map_err(|_| bad("bad value"))?),
            }
        }
        match (plain.is_empty(), weighted.is_empty()) {
            (false, true) => Spectrum::from_eigenvalues(plain),
            (true, false) => {
                let m = weighted.len();
                Spectrum::from_weighted(weighted, m)
            }
            (true, true) => Err(Error::Parse("no atoms in spectrum file".into())),
            (false, false) => Err(Error::Parse(
                "mixed plain and value,weight lines in spectrum file".into(),
            )),
        }
    }

    /// Inverse of [`Spectrum::parse`] for unweighted spectra; weighted spectra
    /// are written as "value,weight" lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.is_unweighted() {
            for &(v, _) in &self.atoms {
                writeln!(out, "{v}").unwrap();
            }
        } else {
            for &(v, w) in &self.atoms {
                writeln!(out, "{v},{w}").unwrap();
            }
        }
        out
    }
}
