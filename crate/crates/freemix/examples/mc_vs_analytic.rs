//! Monte Carlo free convolution (Haar conjugation of one summand) against
//! the analytic companion-matrix engine, for the two-fold +-1 self-sum.

use freemix::density::ks_distance_to_spectrum;
use freemix::free::{free_sum_mc, nfold_free_density, FreeSumQuery};
use freemix::{GridSpec, RngSeed, Spectrum};

fn main() -> freemix::Result<()> {
    let grid = GridSpec::new(-2.5, 2.5, 2001)?;
    let analytic = nfold_free_density(&FreeSumQuery::new(Spectrum::pm_one(200)?, 2, grid)?)?;

    let mut rng = RngSeed::new(8).rng();
    for (beta, label) in [(1u8, "orthogonal"), (2, "unitary")] {
        let pm = Spectrum::pm_one(200)?;
        let pooled = free_sum_mc(&pm, &pm, beta, 50, &mut rng)?;
        println!(
            "beta = {beta} ({label}): {} pooled eigenvalues, KS distance to analytic = {:.4}",
            pooled.len(),
            ks_distance_to_spectrum(&analytic.curve, &pooled)
        );
    }
    Ok(())
}
