//! Free central limit theorem: the 1/sqrt(N)-rescaled N-fold free self-sum
//! of +-1 converges to the radius-2 semicircle.

use freemix::density::ks_distance;
use freemix::free::{nfold_free_density, semicircle_density, FreeSumQuery};
use freemix::{DensityCurve, GridSpec, Spectrum};

fn main() -> freemix::Result<()> {
    for folds in [2u32, 5, 10, 20] {
        let scale = (folds as f64).sqrt();
        let grid = GridSpec::new(-2.2 * scale, 2.2 * scale, 2001)?;
        let out = nfold_free_density(&FreeSumQuery::new(Spectrum::pm_one(2)?, folds, grid)?)?;

        let xs: Vec<f64> = out.curve.xs().iter().map(|x| x / scale).collect();
        let vals: Vec<f64> = out.curve.values().iter().map(|v| v * scale).collect();
        let rescaled = DensityCurve::new(xs.clone(), vals)?;
        let sc: Vec<f64> = xs.iter().map(|&x| semicircle_density(x, 2.0)).collect();
        let semicircle = DensityCurve::new(xs, sc)?.normalized()?;

        println!("N = {folds:2}: KS distance to the semicircle = {:.4}", ks_distance(&rescaled, &semicircle)?);
    }
    Ok(())
}
