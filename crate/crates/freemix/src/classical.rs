//! Classical (commuting) convolution of spectra and the combinatorics of
//! moment expansions: binomial moment formula, necklace counts, and the
//! classical/crossing classification of trace monomials.

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Full product measure of two spectra: all pairwise sums lambda_i + mu_j with
/// weights w_i * v_j. This is the expected empirical measure over a uniform
/// random permutation pairing. Duplicates are retained; pass `merge` to
/// coalesce equal atoms (tolerance 1e-12).
pub fn classical_sum(s1: &Spectrum, s2: &Spectrum, merge: bool) -> Spectrum {
    let mut atoms = Vec::with_capacity(s1.len() * s2.len());
    for &(v1, w1) in s1.atoms() {
        for &(v2, w2) in s2.atoms() {
            atoms.push((v1 + v2, w1 * w2));
        }
    }
    let m = s1.dim() * s2.dim();
    let out = Spectrum::from_weighted(atoms, m).expect("product weights sum to 1");
    if merge {
        out.merged(1e-12)
    } else {
        out
    }
}

/// One draw of the permutation coupling: pairs lambda_i with mu_{pi(i)} for a
/// uniform random permutation pi. Both spectra must be unweighted with equal
/// atom counts.
pub fn classical_sample_sum(
    s1: &Spectrum,
    s2: &Spectrum,
    rng: &mut ChaCha8Rng,
) -> Result<Spectrum> {
    if s1.len() != s2.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} atoms",
            s1.len(),
            s2.len()
        )));
    }
    let mut idx: Vec<usize> = (0..s2.len()).collect();
    idx.shuffle(rng);
    let v2: Vec<f64> = s2.values().collect();
    let sums: Vec<f64> = s1
        .values()
        .zip(idx.iter())
        .map(|(v1, &j)| v1 + v2[j])
        .collect();
    Spectrum::from_eigenvalues(sums)
}

/// n-th moment of the classical sum by the binomial expansion
/// sum_j C(n, j) m_j(s1) m_{n-j}(s2), with moment(., 0) = 1.
pub fn classical_moment(s1: &Spectrum, s2: &Spectrum, n: u32) -> f64 {
    assert!(n >= 1);
    let mut total = 0.0;
    let mut binom = 1.0f64;
    for j in 0..=n {
        total += binom * s1.moment0(j) * s2.moment0(n - j);
        binom *= (n - j) as f64 / (j + 1) as f64;
    }
    total
}

fn euler_phi(mut n: u64) -> u64 {
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// Number of (n, k)-necklaces: length-n words over k letters up to rotation,
/// a(n, k) = (1/n) sum_{d | n} phi(d) k^{n/d}. Errors on 64-bit overflow.
pub fn necklace_count(n: u32, k: u64) -> Result<u64> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("necklace_count needs n, k >= 1".into()));
    }
    let overflow = || Error::NecklaceOverflow { n, k };
    let mut total: u128 = 0;
    for d in 1..=n as u64 {
        if n as u64 % d != 0 {
            continue;
        }
        let power = (k as u128)
            .checked_pow((n as u64 / d) as u32)
            .ok_or_else(overflow)?;
        total = total
            .checked_add((euler_phi(d) as u128).checked_mul(power).ok_or_else(overflow)?)
            .ok_or_else(overflow)?;
    }
    let a = total / n as u128;
    u64::try_from(a).map_err(|_| overflow())
}

/// Counts from the 2^n two-letter trace monomials of (M1 + M2)^n: how many
/// monomials are classical (cyclically a single block of each letter, so their
/// expected trace reduces to phi_c[M1^j M2^(n-j)]), how many are crossing, and
/// the number of distinct cyclic classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonomialCensus {
    pub classical_monomials: u64,
    pub crossing_monomials: u64,
    pub classes: u64,
}

/// Canonical representative: lexicographically minimal rotation of a word.
fn min_rotation(word: u32, n: u32) -> u32 {
    let mask = if n == 32 { u32::MAX } else { (1 << n) - 1 };
    let mut best = word;
    let mut w = word;
    for _ in 1..n {
        w = ((w >> 1) | (w << (n - 1))) & mask;
        if w < best {
            best = w;
        }
    }
    best
}

/// True when the cyclic word is a single block of ones followed by a single
/// block of zeros (in some rotation), i.e. the monomial is cyclically equal to
/// M1^j M2^(n-j).
fn is_block_word(word: u32, n: u32) -> bool {
    let ones = word.count_ones();
    if ones == 0 || ones == n {
        return true;
    }
    // count cyclic 01 boundaries; a single block has exactly one
    let mask = if n == 32 { u32::MAX } else { (1 << n) - 1 };
    let rotated = ((word >> 1) | (word << (n - 1))) & mask;
    (word & !rotated).count_ones() == 1
}

/// Brute-force enumeration of all 2^n words in two letters, classifying each
/// cyclic class as classical or crossing. n is capped at 20.
pub fn classify_monomials(n: u32) -> Result<MonomialCensus> {
    if n == 0 || n > 20 {
        return Err(Error::InvalidArgument("classify_monomials needs 1 <= n <= 20".into()));
    }
    let mut classical = 0u64;
    let mut crossing = 0u64;
    let mut reps = std::collections::HashSet::new();
    for word in 0..(1u32 << n) {
        reps.insert(min_rotation(word, n));
        if is_block_word(word, n) {
            classical += 1;
        } else {
            crossing += 1;
        }
    }
    Ok(MonomialCensus {
        classical_monomials: classical,
        crossing_monomials: crossing,
        classes: reps.len() as u64,
    })
}

/// The closed form (n-1)^2 + 1 stated in the source analysis for the number of
/// classical terms; exposed separately because brute-force enumeration counts
/// n(n-1) + 2 monomials instead (see `classify_monomials`).
pub fn classical_term_count_paper(n: u64) -> u64 {
    (n - 1) * (n - 1) + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::RngSeed;

    #[test]
    fn two_fair_coins() {
        let s = Spectrum::from_eigenvalues(vec![0.0, 1.0]).unwrap();
        let sum = classical_sum(&s, &s, false);
        let vals: Vec<f64> = sum.values().collect();
        assert_eq!(vals, vec![0.0, 1.0, 1.0, 2.0]);
        assert!(sum.atoms().iter().all(|&(_, w)| (w - 0.25).abs() < 1e-15));
        let merged = classical_sum(&s, &s, true);
        assert_eq!(merged.len(), 3);
        assert!((merged.atoms()[1].1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn singleton_sum() {
        let a = Spectrum::from_eigenvalues(vec![2.0]).unwrap();
        let b = Spectrum::from_eigenvalues(vec![-0.5]).unwrap();
        let sum = classical_sum(&a, &b, false);
        assert_eq!(sum.values().collect::<Vec<_>>(), vec![1.5]);
    }

    #[test]
    fn fourth_moment_of_pm_one_sum() {
        let s = Spectrum::pm_one(2).unwrap();
        let sum = classical_sum(&s, &s, false);
        assert!((sum.moment(4) - 8.0).abs() < 1e-12);
        assert!((classical_moment(&s, &s, 4) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn first_moment_is_linear() {
        let a = Spectrum::from_eigenvalues(vec![1.0, 2.0, 4.0]).unwrap();
        let b = Spectrum::from_eigenvalues(vec![-3.0, 0.5, 0.5]).unwrap();
        assert!((classical_moment(&a, &b, 1) - (a.moment(1) + b.moment(1))).abs() < 1e-14);
    }

    #[test]
    fn binomial_formula_matches_pairwise_oracle() {
        let a = Spectrum::from_eigenvalues(vec![0.3, -1.2, 2.0, 0.7, -0.1]).unwrap();
        let b = Spectrum::from_eigenvalues(vec![1.1, -0.4, 0.0, 2.5, -2.2]).unwrap();
        let sum = classical_sum(&a, &b, false);
        for n in 1..=8u32 {
            let expect = sum.moment(n);
            let got = classical_moment(&a, &b, n);
            assert!(
                (got - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                "n={n}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn sample_sum_shift_and_mean() {
        let a = Spectrum::from_eigenvalues(vec![0.0, 1.0, 5.0]).unwrap();
        let c = Spectrum::constant(2.0, 3).unwrap();
        let mut rng = RngSeed::new(4).rng();
        let s = classical_sample_sum(&a, &c, &mut rng).unwrap();
        assert_eq!(s.values().collect::<Vec<_>>(), vec![2.0, 3.0, 7.0]);
        // m1 is permutation invariant
        let b = Spectrum::from_eigenvalues(vec![-1.0, 0.5, 0.5]).unwrap();
        let s = classical_sample_sum(&a, &b, &mut rng).unwrap();
        assert!((s.moment(1) - (a.moment(1) + b.moment(1))).abs() < 1e-14);
        // size mismatch
        let short = Spectrum::from_eigenvalues(vec![1.0]).unwrap();
        assert!(classical_sample_sum(&a, &short, &mut rng).is_err());
    }

    #[test]
    fn exhaustive_permutation_average_m2() {
        // m = 2: average of both permutations' m4 equals classical_sum m4
        let a = Spectrum::from_eigenvalues(vec![0.4, -1.3]).unwrap();
        let b = Spectrum::from_eigenvalues(vec![2.0, 0.7]).unwrap();
        let av: Vec<f64> = a.values().collect();
        let bv: Vec<f64> = b.values().collect();
        let perm1 = Spectrum::from_eigenvalues(vec![av[0] + bv[0], av[1] + bv[1]]).unwrap();
        let perm2 = Spectrum::from_eigenvalues(vec![av[0] + bv[1], av[1] + bv[0]]).unwrap();
        let avg = 0.5 * (perm1.moment(4) + perm2.moment(4));
        let expect = classical_sum(&a, &b, false).moment(4);
        assert!((avg - expect).abs() < 1e-12);
    }

    fn necklace_brute(n: u32, k: u64) -> u64 {
        // enumerate all k^n words, count distinct minimal rotations
        let mut reps = std::collections::HashSet::new();
        let total = (k as u128).pow(n);
        for idx in 0..total {
            let mut word = Vec::with_capacity(n as usize);
            let mut v = idx;
            for _ in 0..n {
                word.push((v % k as u128) as u8);
                v /= k as u128;
            }
            let mut best = word.clone();
            for r in 1..n as usize {
                let mut rot = word[r..].to_vec();
                rot.extend_from_slice(&word[..r]);
                if rot < best {
                    best = rot;
                }
            }
            reps.insert(best);
        }
        reps.len() as u64
    }

    #[test]
    fn necklace_examples() {
        assert_eq!(necklace_count(1, 5).unwrap(), 5);
        assert_eq!(necklace_count(3, 2).unwrap(), 4);
        assert_eq!(necklace_count(4, 2).unwrap(), 6);
    }

    #[test]
    fn necklace_matches_brute_force() {
        for n in 1..=12u32 {
            for k in 1..=3u64 {
                assert_eq!(necklace_count(n, k).unwrap(), necklace_brute(n, k), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn necklace_overflow_guarded() {
        assert!(necklace_count(64, 1_000_000).is_err());
    }

    #[test]
    fn monomial_classification() {
        let c2 = classify_monomials(2).unwrap();
        assert_eq!(c2.classical_monomials, 4);
        assert_eq!(c2.crossing_monomials, 0);
        let c3 = classify_monomials(3).unwrap();
        assert_eq!(c3.crossing_monomials, 0);
        let c4 = classify_monomials(4).unwrap();
        assert_eq!(c4.crossing_monomials, 2); // ABAB and BABA
        assert_eq!(c4.classical_monomials, 14);
        assert_eq!(c4.classes, necklace_count(4, 2).unwrap());
        assert!(classify_monomials(21).is_err());
    }

    #[test]
    fn paper_count_vs_enumeration() {
        // the stated closed form and the enumerated truth disagree at n = 4
        assert_eq!(classical_term_count_paper(4), 10);
        assert_eq!(classify_monomials(4).unwrap().classical_monomials, 14);
    }
}
