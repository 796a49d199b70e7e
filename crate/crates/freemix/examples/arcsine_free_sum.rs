//! Two-fold free self-sum of the +-1 spectrum vs the arcsine law.
//!
//! The free convolution of two symmetric Bernoulli spectra has the closed
//! density 1 / (pi sqrt(4 - x^2)); the analytic engine should reproduce it
//! to root-finder precision at every interior grid point.

use freemix::free::{arcsine_density, nfold_free_density, FreeSumQuery};
use freemix::{GridSpec, Spectrum};

fn main() -> freemix::Result<()> {
    let base = Spectrum::pm_one(2)?;
    let grid = GridSpec::new(-2.5, 2.5, 1001)?;
    let out = nfold_free_density(&FreeSumQuery::new(base, 2, grid)?)?;

    let mut worst = 0.0f64;
    for (&x, &v) in out.pointwise.xs().iter().zip(out.pointwise.values()) {
        if x.abs() < 1.999 {
            worst = worst.max((v - arcsine_density(x)).abs());
        }
    }
    println!("grid points: {}", out.pointwise.xs().len());
    println!("worst pointwise deviation from arcsine: {worst:.3e}");
    println!("raw trapezoid integral: {:.4} (hard edges converge like sqrt(h))", out.raw_integral);
    for x in [0.0, 1.0, 1.9] {
        let i = out.pointwise.xs().iter().position(|&g| (g - x).abs() < 1e-9).unwrap();
        println!("f({x:4.1}) = {:.10}  closed form {:.10}", out.pointwise.values()[i], arcsine_density(x));
    }
    Ok(())
}
