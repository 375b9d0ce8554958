//! Bounded searches for powers of two that are sums of distinct powers of
//! three, and for integers whose digits are restricted in several bases at
//! once (integer Cantor sets `H(p)`).
//!
//! `2^r = 3^{s_1} + … + 3^{s_m}` with distinct `s_i` holds exactly when every
//! base-3 digit of `2^r` is 0 or 1, so the search reads off base-3 digits.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiophantineError {
    #[error("base must be at least 2, got {0}")]
    BadBase(u32),
    #[error("digit set for base {base} is empty or has a digit >= base")]
    BadDigits { base: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub r: u32,
    /// Strictly increasing.
    pub exponents: Vec<u32>,
}

impl SolutionRecord {
    /// `"256 = 1+3+9+243"`.
    pub fn render(&self) -> String {
        let terms: Vec<String> = self
            .exponents
            .iter()
            .map(|&s| BigUint::from(3u32).pow(s).to_string())
            .collect();
        format!("{} = {}", BigUint::one() << self.r, terms.join("+"))
    }
}

/// Base-`base` digits of `n`, least significant first.
pub fn digits(n: &BigUint, base: u32) -> Vec<u32> {
    n.to_radix_le(base).into_iter().map(u32::from).collect()
}

/// Every `r <= r_max` with `2^r` a sum of distinct powers of three.
pub fn search_pow2_sum_pow3(r_max: u32) -> Vec<SolutionRecord> {
    let mut power = BigUint::one();
    let mut out = Vec::new();
    for r in 0..=r_max {
        let ds = digits(&power, 3);
        if ds.iter().all(|&d| d <= 1) {
            let exponents = ds
                .iter()
                .enumerate()
                .filter(|(_, &d)| d == 1)
                .map(|(i, _)| i as u32)
                .collect();
            out.push(SolutionRecord { r, exponents });
        }
        power <<= 1;
    }
    out
}

/// Allowed digits in one base.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitSet {
    base: u32,
    /// Sorted, deduplicated.
    allowed: Vec<u32>,
}

impl DigitSet {
    pub fn new(
        base: u32,
        allowed: impl IntoIterator<Item = u32>,
    ) -> Result<Self, DiophantineError> {
        if base < 2 {
            return Err(DiophantineError::BadBase(base));
        }
        let mut allowed: Vec<u32> = allowed.into_iter().collect();
        allowed.sort_unstable();
        allowed.dedup();
        if allowed.is_empty() || allowed.iter().any(|&d| d >= base) {
            return Err(DiophantineError::BadDigits { base });
        }
        Ok(Self { base, allowed })
    }

    /// Digits `0..=⌊p/2⌋`.
    pub fn lower_half(base: u32) -> Result<Self, DiophantineError> {
        Self::new(base, 0..=base / 2)
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn allowed(&self) -> &[u32] {
        &self.allowed
    }

    pub fn contains(&self, n: &BigUint) -> bool {
        digits(n, self.base)
            .iter()
            .all(|d| self.allowed.binary_search(d).is_ok())
    }

    /// Members `<= bound` in increasing order, grown from the leading digit
    /// so no integer outside the set is ever visited.
    pub fn members_up_to(&self, bound: &BigUint) -> Vec<BigUint> {
        let mut out = Vec::new();
        if self.allowed[0] == 0 {
            out.push(BigUint::zero());
        }
        let mut frontier: Vec<BigUint> = self
            .allowed
            .iter()
            .filter(|&&d| d != 0)
            .map(|&d| BigUint::from(d))
            .filter(|v| v <= bound)
            .collect();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for v in &frontier {
                let shifted = v * self.base;
                for &d in &self.allowed {
                    let w = &shifted + d;
                    if &w > bound {
                        break;
                    }
                    next.push(w);
                }
            }
            out.append(&mut frontier);
            frontier = next;
        }
        out.sort_unstable();
        out
    }
}

/// Integers `<= bound` admissible for every digit set. Members of the first
/// set are generated and filtered by the rest.
pub fn cantor_intersect(sets: &[DigitSet], bound: &BigUint) -> Vec<BigUint> {
    let Some((first, rest)) = sets.split_first() else {
        return Vec::new();
    };
    first
        .members_up_to(bound)
        .into_iter()
        .filter(|n| rest.iter().all(|s| s.contains(n)))
        .collect()
}

/// Small-integer convenience used by the tests and the CLI table.
pub fn to_u64s(v: &[BigUint]) -> Option<Vec<u64>> {
    v.iter().map(ToPrimitive::to_u64).collect()
}

/// `n` has only digits `{0,1}` in base `base` (used by oracle checks).
pub fn is_01_digits(mut n: u64, base: u64) -> bool {
    while n > 0 {
        let (q, r) = n.div_rem(&base);
        if r > 1 {
            return false;
        }
        n = q;
    }
    true
}
