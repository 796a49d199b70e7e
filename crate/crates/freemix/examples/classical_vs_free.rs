//! Classical vs free convolution of two +-1 spectra, through moments.
//!
//! Even moments of the classical sum count all pairings (central binomial);
//! the free sum only keeps the non-crossing ones, so m4 drops from 8 to 6.
//! The term counts of the expanded trace monomials are necklace numbers.

use freemix::classical::{classical_moment, classical_sum, necklace_count};
use freemix::free::{nfold_free_density, FreeSumQuery};
use freemix::{GridSpec, Spectrum};

fn main() -> freemix::Result<()> {
    let s = Spectrum::pm_one(2)?;
    let classical = classical_sum(&s, &s, true);
    println!("classical atoms of (+-1) + (+-1): {:?}", classical.atoms());

    let grid = GridSpec::new(-2.5, 2.5, 4001)?;
    let free = nfold_free_density(&FreeSumQuery::new(s.clone(), 2, grid)?)?;
    for k in [2u32, 4] {
        let mk_classical = classical_moment(&s, &s, k);
        let mk_free: f64 = free
            .curve
            .xs()
            .iter()
            .zip(free.curve.values())
            .map(|(&x, &v)| x.powi(k as i32) * v)
            .sum::<f64>()
            * free.curve.step();
        println!("m{k}: classical = {mk_classical:.3}, free (numeric) = {mk_free:.3}");
    }

    println!("binary necklace counts (trace monomial classes):");
    for n in 1..=8u32 {
        print!(" {}", necklace_count(n, 2)?);
    }
    println!();
    Ok(())
}
