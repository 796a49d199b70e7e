//! Densities sampled on uniform grids: construction from discrete spectra,
//! convex mixing, and comparison metrics.

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;
use std::fmt::Write as _;

/// A uniform evaluation grid on the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub xmin: f64,
    pub xmax: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(xmin: f64, xmax: f64, points: usize) -> Result<Self> {
        if !(xmin.is_finite() && xmax.is_finite()) || xmax <= xmin || points < 2 {
            return Err(Error::InvalidArgument(format!(
                "bad grid [{xmin}, {xmax}] with {points} points"
            )));
        }
        Ok(GridSpec { xmin, xmax, points })
    }

    /// Default grid for a set of spectra: [min atom - 3 sigma, max atom + 3 sigma]
    /// with 512 points, sigma the population standard deviation of the pooled atoms.
    pub fn default_for(spectra: &[&Spectrum]) -> Result<Self> {
        if spectra.is_empty() {
            return Err(Error::InvalidArgument("no spectra for default grid".into()));
        }
        let mut total_w = 0.0;
        let (mut s1, mut s2) = (0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in spectra {
            for &(v, w) in s.atoms() {
                total_w += w;
                s1 += w * v;
                s2 += w * v * v;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let mean = s1 / total_w;
        let var = (s2 / total_w - mean * mean).max(0.0);
        let sigma = var.sqrt().max(1e-12 * (1.0 + hi.abs().max(lo.abs())));
        GridSpec::new(lo - 3.0 * sigma, hi + 3.0 * sigma, 512)
    }

    pub fn step(&self) -> f64 {
        (self.xmax - self.xmin) / (self.points - 1) as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points).map(|i| self.xmin + h * i as f64).collect()
    }
}

/// How atoms are spread onto a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothingSpec {
    /// Gaussian kernel. `None` bandwidth means Silverman's rule
    /// 1.06 * sigma * n^(-1/5) on the atom population.
    Gaussian { bandwidth: Option<f64> },
    /// Plain histogram with grid-step bins centered on grid points.
    Histogram,
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        SmoothingSpec::Gaussian { bandwidth: None }
    }
}

/// A probability density sampled on a uniform grid. Values are nonnegative and
/// the trapezoid integral is 1 after [`DensityCurve::normalized`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    xs: Vec<f64>,
    values: Vec<f64>,
}

const GRID_REL_TOL: f64 = 1e-12;

impl DensityCurve {
    pub fn new(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() != values.len() || xs.len() < 2 {
            return Err(Error::InvalidArgument(
                "density needs matching grid/value lengths >= 2".into(),
            ));
        }
        let h = xs[1] - xs[0];
        if h <= 0.0 {
            return Err(Error::InvalidArgument("grid must be increasing".into()));
        }
        for i in 1..xs.len() {
            let d = xs[i] - xs[i - 1];
            if (d - h).abs() > GRID_REL_TOL * h.abs().max(1.0) {
                return Err(Error::InvalidArgument("grid step must be constant".into()));
            }
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidArgument(
                "density values must be finite and nonnegative".into(),
            ));
        }
        Ok(DensityCurve { xs, values })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn step(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    /// Trapezoid integral of the curve.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.step())
    }

    /// Rescaled so the trapezoid integral is exactly 1.
    pub fn normalized(&self) -> Result<DensityCurve> {
        let z = self.integral();
        if z <= 0.0 || !z.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cannot normalize curve with integral {z}"
            )));
        }
        Ok(DensityCurve {
            xs: self.xs.clone(),
            values: self.values.iter().map(|v| v / z).collect(),
        })
    }

    fn check_same_grid(&self, other: &DensityCurve) -> Result<()> {
        if self.xs.len() != other.xs.len() {
            return Err(Error::GridMismatch(format!(
                "{} vs {} points",
                self.xs.len(),
                other.xs.len()
            )));
        }
        let scale = self.step().abs().max(1.0);
        for (a, b) in self.xs.iter().zip(&other.xs) {
            if (a - b).abs() > GRID_REL_TOL * scale {
                return Err(Error::GridMismatch("grids differ".into()));
            }
        }
        Ok(())
    }

    /// Cumulative distribution by trapezoid accumulation, clipped to [0, 1].
    pub fn cdf(&self) -> Vec<f64> {
        let h = self.step();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        out.push(0.0);
        for i in 1..self.values.len() {
            acc += 0.5 * h * (self.values[i - 1] + self.values[i]);
            out.push(acc.min(1.0));
        }
        out
    }

    /// CSV with header "x,density", full double precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,density\n");
        for (x, v) in self.xs.iter().zip(&self.values) {
            writeln!(out, "{x},{v}").unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<DensityCurve> {
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line.trim() != "x,density" {
                    return Err(Error::Parse("expected header x,density".into()));
                }
                continue;
            }
            let (x, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected x,density", i + 1)))?;
            xs.push(x.trim().parse().map_err(|_| Error::Parse(format!("line {}", i + 1)))?);
            values.push(v.trim().parse().map_err(|_| Error::Parse(format!("line {}", i + 1)))?);
        }
        DensityCurve::new(xs, values)
    }
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * values[0] + inner + 0.5 * values[values.len() - 1])
}

/// Silverman's rule bandwidth for the atoms of a spectrum.
pub fn silverman_bandwidth(s: &Spectrum) -> f64 {
    let sigma = s.population_variance().sqrt();
    let n = s.len() as f64;
    let h = 1.06 * sigma * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        // all atoms equal; pick a bandwidth tied to the value scale
        1e-3 * (1.0 + s.min().abs())
    }
}

/// Smooth a discrete spectrum onto a grid. Errors if any atom falls outside
/// the grid. The output is normalized to unit trapezoid integral.
pub fn density_from_spectrum(
    s: &Spectrum,
    grid: &GridSpec,
    smoothing: &SmoothingSpec,
) -> Result<DensityCurve> {
    let h = grid.step();
    let half = 0.5 * h;
    if s.min() < grid.xmin - half || s.max() > grid.xmax + half {
        return Err(Error::InvalidArgument(format!(
            "grid [{}, {}] excludes atoms in [{}, {}]",
            grid.xmin,
            grid.xmax,
            s.min(),
            s.max()
        )));
    }
    let xs = grid.xs();
    let mut values = vec![0.0; xs.len()];
    match smoothing {
        SmoothingSpec::Histogram => {
            for &(v, w) in s.atoms() {
                let idx = ((v - grid.xmin) / h).round() as isize;
                let idx = idx.clamp(0, xs.len() as isize - 1) as usize;
                values[idx] += w / h;
            }
        }
        SmoothingSpec::Gaussian { bandwidth } => {
            let bw = bandwidth.unwrap_or_else(|| silverman_bandwidth(s));
            if bw <= 0.0 {
                return Err(Error::InvalidArgument("bandwidth must be positive".into()));
            }
            let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * bw);
            for (i, &x) in xs.iter().enumerate() {
                let mut acc = 0.0;
                for &(v, w) in s.atoms() {
                    let t = (x - v) / bw;
                    acc += w * (-0.5 * t * t).exp();
                }
                values[i] = norm * acc;
            }
        }
    }
    DensityCurve::new(xs, values)?.normalized()
}

/// Result of mixing two densities: the mixed curve, the weight actually used,
/// and whether the requested weight had to be clamped into [0, 1].
#[derive(Debug, Clone)]
pub struct MixedDensity {
    pub curve: DensityCurve,
    pub p_used: f64,
    pub clamped: bool,
}

/// Pointwise convex combination p * free + (1 - p) * classical, renormalized.
/// p outside [0, 1] is clamped and flagged rather than rejected.
pub fn mix_densities(p: f64, free: &DensityCurve, classical: &DensityCurve) -> Result<MixedDensity> {
    if !p.is_finite() {
        return Err(Error::InvalidArgument("p must be finite".into()));
    }
    free.check_same_grid(classical)?;
    let p_used = p.clamp(0.0, 1.0);
    let values: Vec<f64> = free
        .values
        .iter()
        .zip(&classical.values)
        .map(|(f, c)| p_used * f + (1.0 - p_used) * c)
        .collect();
    let curve = DensityCurve::new(free.xs.clone(), values)?.normalized()?;
    Ok(MixedDensity {
        curve,
        p_used,
        clamped: p_used != p,
    })
}

/// Trapezoid integral of |a - b|.
pub fn l1_distance(a: &DensityCurve, b: &DensityCurve) -> Result<f64> {
    a.check_same_grid(b)?;
    let diff: Vec<f64> = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .collect();
    Ok(trapezoid(&diff, a.step()))
}

/// Kolmogorov-Smirnov distance max |CDF_a - CDF_b|.
pub fn ks_distance(a: &DensityCurve, b: &DensityCurve) -> Result<f64> {
    a.check_same_grid(b)?;
    let ca = a.cdf();
    let cb = b.cdf();
    Ok(ca
        .iter()
        .zip(&cb)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// KS distance between a sampled density curve and the empirical CDF of a
/// discrete spectrum, evaluated at the curve's grid points.
pub fn ks_distance_to_spectrum(curve: &DensityCurve, s: &Spectrum) -> f64 {
    let cdf = curve.cdf();
    let mut max = 0.0f64;
    for (x, c) in curve.xs.iter().zip(&cdf) {
        let emp: f64 = s
            .atoms()
            .iter()
            .take_while(|&&(v, _)| v <= *x)
            .map(|&(_, w)| w)
            .sum();
        max = max.max((emp - c).abs());
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(lo: f64, hi: f64, grid: &GridSpec) -> DensityCurve {
        let xs = grid.xs();
        let values: Vec<f64> = xs
            .iter()
            .map(|&x| if x >= lo && x <= hi { 1.0 / (hi - lo) } else { 0.0 })
            .collect();
        DensityCurve::new(xs, values).unwrap().normalized().unwrap()
    }

    #[test]
    fn histogram_single_atom() {
        let s = Spectrum::from_eigenvalues(vec![0.0]).unwrap();
        let grid = GridSpec::new(-1.0, 1.0, 21).unwrap();
        let d = density_from_spectrum(&s, &grid, &SmoothingSpec::Histogram).unwrap();
        // all mass in the bin containing 0
        let peak = d.values().iter().cloned().fold(0.0, f64::max);
        let total: f64 = d.values().iter().filter(|&&v| v > 0.0).count() as f64;
        assert_eq!(total, 1.0);
        assert!((peak * d.step() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kernel_symmetry_and_closed_form() {
        let s = Spectrum::pm_one(2).unwrap();
        let grid = GridSpec::new(-3.0, 3.0, 121).unwrap();
        let bw = 0.5;
        let d = density_from_spectrum(&s, &grid, &SmoothingSpec::Gaussian { bandwidth: Some(bw) })
            .unwrap();
        let n = d.values().len();
        for i in 0..n {
            assert!((d.values()[i] - d.values()[n - 1 - i]).abs() < 1e-12);
        }
        // value at 0 before normalization: two kernels at distance 1
        let raw = 2.0 * 0.5 / ((2.0 * std::f64::consts::PI).sqrt() * bw)
            * (-1.0 / (2.0 * bw * bw)).exp();
        // the normalized curve differs only by the (near-1) integral factor
        let mid = n / 2;
        assert!((d.values()[mid] - raw).abs() / raw < 2e-2);
    }

    #[test]
    fn kernel_moments_converge_with_bandwidth() {
        let s = Spectrum::from_eigenvalues(vec![-1.0, 0.3, 2.0]).unwrap();
        let grid = GridSpec::new(-8.0, 9.0, 2001).unwrap();
        let mut errs = Vec::new();
        for bw in [0.4, 0.1] {
            let d =
                density_from_spectrum(&s, &grid, &SmoothingSpec::Gaussian { bandwidth: Some(bw) })
                    .unwrap();
            let h = d.step();
            for k in 1..=2u32 {
                let quad: f64 = d
                    .xs()
                    .iter()
                    .zip(d.values())
                    .map(|(x, v)| x.powi(k as i32) * v * h)
                    .sum();
                errs.push((bw, k, (quad - s.moment(k)).abs()));
            }
        }
        for k in 1..=2u32 {
            let wide = errs.iter().find(|e| e.0 == 0.4 && e.1 == k).unwrap().2;
            let narrow = errs.iter().find(|e| e.0 == 0.1 && e.1 == k).unwrap().2;
            assert!(narrow <= wide + 1e-9, "k={k}: {narrow} vs {wide}");
        }
    }

    #[test]
    fn mix_endpoints() {
        let grid = GridSpec::new(0.0, 1.0, 51).unwrap();
        let a = unit_box(0.0, 0.5, &grid);
        let b = unit_box(0.5, 1.0, &grid);
        let close = |got: &DensityCurve, want: &DensityCurve| {
            got.values()
                .iter()
                .zip(want.values())
                .all(|(x, y)| (x - y).abs() < 1e-12)
        };
        let m0 = mix_densities(0.0, &a, &b).unwrap();
        assert!(close(&m0.curve, &b));
        let m1 = mix_densities(1.0, &a, &b).unwrap();
        assert!(close(&m1.curve, &a));
        let half = mix_densities(0.5, &a, &a).unwrap();
        assert!(close(&half.curve, &a));
        assert!(!half.clamped);
        let over = mix_densities(1.7, &a, &b).unwrap();
        assert!(over.clamped);
        assert_eq!(over.p_used, 1.0);
    }

    #[test]
    fn mix_integrates_to_one() {
        let grid = GridSpec::new(-2.0, 2.0, 101).unwrap();
        let a = unit_box(-2.0, 0.0, &grid);
        let b = unit_box(0.0, 2.0, &grid);
        for p in [0.0, 0.25, 0.6, 1.0] {
            let m = mix_densities(p, &a, &b).unwrap();
            assert!((m.curve.integral() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn distances() {
        let grid = GridSpec::new(0.0, 4.0, 401).unwrap();
        let a = unit_box(0.0, 1.0, &grid);
        let b = unit_box(3.0, 4.0, &grid);
        assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
        // disjoint unit boxes: total variation 2, KS 1
        assert!((l1_distance(&a, &b).unwrap() - 2.0).abs() < 0.02);
        assert!((ks_distance(&a, &b).unwrap() - 1.0).abs() < 0.01);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = unit_box(0.0, 1.0, &GridSpec::new(0.0, 1.0, 11).unwrap());
        let b = unit_box(0.0, 1.0, &GridSpec::new(0.0, 1.0, 21).unwrap());
        assert!(l1_distance(&a, &b).is_err());
        assert!(mix_densities(0.5, &a, &b).is_err());
    }

    #[test]
    fn grid_excluding_atom_is_an_error() {
        let s = Spectrum::from_eigenvalues(vec![0.0, 5.0]).unwrap();
        let grid = GridSpec::new(-1.0, 1.0, 11).unwrap();
        assert!(density_from_spectrum(&s, &grid, &SmoothingSpec::Histogram).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let grid = GridSpec::new(-1.0, 1.0, 33).unwrap();
        let d = unit_box(-0.5, 0.5, &grid);
        let back = DensityCurve::from_csv(&d.to_csv()).unwrap();
        assert_eq!(d, back);
    }
}
