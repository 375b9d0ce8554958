//! Exact-law sampling of a μ_α path's residues at the rows `q^n - 2` (or
//! `q^n`) without walking every edge.
//!
//! On row `q^n - 2` the residue `(-1)^k (k+1) mod q` only depends on
//! `k mod 2q`, and between two tested rows `k` grows by an independent
//! Binomial(N, α) increment. So each level costs one categorical draw from
//! the law of Binomial(N, α) mod `2q`, computed by repeated squaring under
//! cyclic convolution (all terms nonnegative, so no cancellation, and `N`
//! may be as large as `u128` allows).
//!
//! On row `q^n` the residue is 1 at `k = 0` and `k = q^n` and 0 elsewhere,
//! so only the "all zeros so far" and "all ones so far" flags matter.

use crate::residue_engine::{signed_successor_residue, Prime, ResidueError, RowRule};
use crate::rng::PathRng;

/// Law of `Binomial(n, alpha) mod m`.
pub fn binomial_mod_pmf(n: u128, alpha: f64, m: usize) -> Vec<f64> {
    assert!(m >= 1, "modulus must be positive");
    let mut result = vec![0.0; m];
    result[0] = 1.0;
    let mut base = vec![0.0; m];
    base[0] += 1.0 - alpha;
    base[1 % m] += alpha;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = cyclic_convolve(&result, &base);
        }
        e >>= 1;
        if e > 0 {
            base = cyclic_convolve(&base, &base);
        }
    }
    result
}

fn cyclic_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let m = a.len();
    let mut out = vec![0.0; m];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[(i + j) % m] += x * y;
        }
    }
    // squaring doubles any rounding drift in the total, so pin it to 1
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

#[derive(Clone, Debug)]
enum Jump {
    Modular(Vec<f64>),
    Edge { stay_zero: f64, stay_one: f64 },
}

/// Sampler for the residue sequence at levels `1..=max_level`.
#[derive(Clone, Debug)]
pub struct RowSampler {
    q: Prime,
    rule: RowRule,
    jumps: Vec<Jump>,
}

impl RowSampler {
    pub fn new(q: Prime, rule: RowRule, alpha: f64, max_level: u32) -> Result<Self, ResidueError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ResidueError::OutOfRange(format!(
                "alpha = {alpha} not in (0,1)"
            )));
        }
        let m = 2 * q.get() as usize;
        let mut jumps = Vec::with_capacity(max_level as usize);
        let mut prev_row = 0u128;
        for level in 1..=max_level {
            let row = rule.row_u128(q, level).ok_or_else(|| {
                ResidueError::OutOfRange(format!("row for level {level} of q = {q} overflows u128"))
            })?;
            let n = row - prev_row;
            jumps.push(match rule {
                RowRule::QPowMinusTwo => Jump::Modular(binomial_mod_pmf(n, alpha, m)),
                RowRule::QPow => Jump::Edge {
                    stay_zero: ((1.0 - alpha).ln() * n as f64).exp(),
                    stay_one: (alpha.ln() * n as f64).exp(),
                },
            });
            prev_row = row;
        }
        Ok(Self { q, rule, jumps })
    }

    pub fn q(&self) -> Prime {
        self.q
    }

    pub fn rule(&self) -> RowRule {
        self.rule
    }

    pub fn max_level(&self) -> u32 {
        self.jumps.len() as u32
    }

    /// Overwrites `out` with the residues at levels `1..=max_level`.
    pub fn sample_into(&self, rng: &mut PathRng, out: &mut Vec<u64>) {
        out.clear();
        let q = self.q.get();
        let m = 2 * q;
        let mut k_mod = 0u64;
        let (mut all_zero, mut all_one) = (true, true);
        for jump in &self.jumps {
            match jump {
                Jump::Modular(pmf) => {
                    k_mod = (k_mod + rng.categorical(pmf) as u64) % m;
                    out.push(signed_successor_residue(k_mod, q));
                }
                Jump::Edge {
                    stay_zero,
                    stay_one,
                } => {
                    let u = rng.uniform();
                    let zero = all_zero && u < *stay_zero;
                    let one = all_one && u >= 1.0 - stay_one;
                    all_zero = zero;
                    all_one = one;
                    out.push(u64::from(all_zero || all_one));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_pmf(n: u64, alpha: f64, m: usize) -> Vec<f64> {
        let mut row = vec![1.0];
        for _ in 0..n {
            let mut next = vec![0.0; row.len() + 1];
            for (k, &p) in row.iter().enumerate() {
                next[k] += p * (1.0 - alpha);
                next[k + 1] += p * alpha;
            }
            row = next;
        }
        let mut out = vec![0.0; m];
        for (k, p) in row.into_iter().enumerate() {
            out[k % m] += p;
        }
        out
    }

    #[test]
    fn pmf_matches_direct_sum() {
        for &(n, alpha, m) in &[
            (0u64, 0.5, 6),
            (1, 0.3, 4),
            (7, 0.5, 6),
            (79, 0.2, 10),
            (241, 0.7, 14),
        ] {
            let a = binomial_mod_pmf(n as u128, alpha, m);
            let b = exact_pmf(n, alpha, m);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "n={n} {a:?} {b:?}");
            }
        }
    }

    #[test]
    fn huge_jumps_are_near_uniform() {
        let pmf = binomial_mod_pmf(7u128.pow(30), 0.5, 14);
        for (r, p) in pmf.iter().enumerate() {
            assert!((p - 1.0 / 14.0).abs() < 1e-9, "{r}: {p}");
        }
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn qpow_rule_only_emits_edge_residues() {
        let s = RowSampler::new(Prime::new(3).unwrap(), RowRule::QPow, 0.5, 6).unwrap();
        let mut rng = PathRng::new(5);
        let mut out = Vec::new();
        for _ in 0..200 {
            s.sample_into(&mut rng, &mut out);
            assert_eq!(out.len(), 6);
            assert!(out.iter().all(|&r| r <= 1));
            // once off the boundary a path never returns to it
            assert!(out.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn overflow_is_reported() {
        assert!(RowSampler::new(Prime::new(11).unwrap(), RowRule::QPowMinusTwo, 0.5, 40).is_err());
        assert!(RowSampler::new(Prime::new(7).unwrap(), RowRule::QPowMinusTwo, 0.5, 40).is_ok());
    }
}
