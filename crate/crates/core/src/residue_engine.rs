//! Binomial coefficients modulo a prime through base-q digits.
//!
//! * Lucas: `C(n,k) mod q` is the product of the digitwise `C(n_i, k_i)`.
//! * Kummer: the q-adic valuation of `C(n,k)` is the number of carries when
//!   `k` and `n-k` are added in base q.
//! * Legendre: `v_q(m!) = Σ_i ⌊m/q^i⌋`, used as an independent oracle for
//!   Kummer.
//!
//! The [`ResidueOdometer`] maintains both quantities along a path in
//! amortized constant time per step. It keeps the base-q digits of `k`,
//! `m = n-k` and `n` (least significant first) together with their digit
//! sums, so the valuation is `(s(k) + s(m) - s(n)) / (q-1)`. For the residue
//! it keeps, per digit position, the factor `C(k_i + m_i, k_i) mod q` when
//! `k_i + m_i < q` and otherwise counts the position as *overflowing*. A
//! carry happens iff some position overflows; with no overflow the digits of
//! `n` are exactly `k_i + m_i` and the product of factors is the Lucas
//! residue.
//!
//! Row `q^n - 2` has the closed form `C(q^n-2, k) ≡ (-1)^k (k+1) (mod q)`,
//! which [`row_formula_residue`] evaluates directly.

use thiserror::Error;

use crate::pascal_path::PathPrefix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResidueError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("k = {k} exceeds n = {n}")]
    KExceedsN { n: u64, k: u64 },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
}

/// A verified prime modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prime(u64);

impl Prime {
    pub fn new(q: u64) -> Result<Self, ResidueError> {
        if is_prime(q) {
            Ok(Prime(q))
        } else {
            Err(ResidueError::NotPrime(q))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }

    /// `q^n` if it fits in a `u64`.
    pub fn checked_pow(self, n: u32) -> Option<u64> {
        self.0.checked_pow(n)
    }
}

impl std::fmt::Display for Prime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin.
///
/// Below 2^31 the bases {2, 3, 5, 7} already decide primality; the seven
/// bases of Jim Sinclair's set make the test exact on all of `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let bases: &[u64] = if n < 1 << 31 {
        &[2, 3, 5, 7]
    } else {
        &[2, 325, 9375, 28178, 450775, 9780504, 1795265022]
    };
    'witness: for &a in bases {
        let a = a % n;
        if a == 0 {
            continue;
        }
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn check_nk(n: u64, k: u64) -> Result<(), ResidueError> {
    if k > n {
        Err(ResidueError::KExceedsN { n, k })
    } else {
        Ok(())
    }
}

/// `C(a, b) mod q` for digits `b <= a < q`.
fn digit_binomial(a: u64, b: u64, q: u64) -> u64 {
    let b = b.min(a - b);
    let mut num = 1u64;
    let mut den = 1u64;
    for i in 0..b {
        num = mul_mod(num, a - i, q);
        den = mul_mod(den, i + 1, q);
    }
    mul_mod(num, pow_mod(den, q - 2, q), q)
}

/// `C(n, k) mod q` by Lucas' digit product.
pub fn lucas_residue(n: u64, k: u64, q: Prime) -> Result<u64, ResidueError> {
    check_nk(n, k)?;
    let q = q.get();
    let (mut n, mut k) = (n, k);
    let mut acc = 1 % q;
    while k > 0 {
        let (ni, ki) = (n % q, k % q);
        if ki > ni {
            return Ok(0);
        }
        acc = mul_mod(acc, digit_binomial(ni, ki, q), q);
        n /= q;
        k /= q;
    }
    Ok(acc)
}

/// Carries when adding `k` and `n - k` in base q.
pub fn kummer_carries(n: u64, k: u64, q: Prime) -> Result<u32, ResidueError> {
    check_nk(n, k)?;
    let q = q.get();
    let (mut a, mut b) = (k, n - k);
    let mut carry = 0u64;
    let mut carries = 0u32;
    while a > 0 || b > 0 || carry > 0 {
        let s = a % q + b % q + carry;
        carry = (s >= q) as u64;
        carries += carry as u32;
        a /= q;
        b /= q;
    }
    Ok(carries)
}

/// `v_q(n!) - v_q(k!) - v_q((n-k)!)` with Legendre's formula.
pub fn legendre_valuation(n: u64, k: u64, q: Prime) -> Result<u32, ResidueError> {
    check_nk(n, k)?;
    fn factorial_valuation(mut m: u64, q: u64) -> u64 {
        let mut v = 0;
        while m > 0 {
            m /= q;
            v += m;
        }
        v
    }
    let q = q.get();
    let v = factorial_valuation(n, q) - factorial_valuation(k, q) - factorial_valuation(n - k, q);
    Ok(v as u32)
}

/// Which row a "level" `n` refers to when testing residue hits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowRule {
    /// Row `q^n - 2`, where the closed form `(-1)^k (k+1)` holds.
    QPowMinusTwo,
    /// Row `q^n`, whose residues are 1 at the two ends and 0 elsewhere.
    QPow,
}

impl RowRule {
    pub fn row(self, q: Prime, n: u32) -> Option<u64> {
        let p = q.checked_pow(n)?;
        match self {
            RowRule::QPowMinusTwo => p.checked_sub(2),
            RowRule::QPow => Some(p),
        }
    }

    pub fn row_u128(self, q: Prime, n: u32) -> Option<u128> {
        let p = (q.get() as u128).checked_pow(n)?;
        match self {
            RowRule::QPowMinusTwo => p.checked_sub(2),
            RowRule::QPow => Some(p),
        }
    }
}

impl std::str::FromStr for RowRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "q^n-2" | "qn-2" | "q-pow-minus-two" => Ok(RowRule::QPowMinusTwo),
            "q^n" | "qn" | "q-pow" => Ok(RowRule::QPow),
            other => Err(format!(
                "unknown row rule '{other}' (expected q^n-2 or q^n)"
            )),
        }
    }
}

/// `(-1)^k (k+1) mod q` on row `q^n - 2`, for `0 <= k <= q^n - 2`.
pub fn row_formula_residue(q: Prime, n: u32, k: u64) -> Result<u64, ResidueError> {
    let row = RowRule::QPowMinusTwo
        .row(q, n)
        .ok_or_else(|| ResidueError::OutOfRange(format!("row {q}^{n}-2 does not fit in u64")))?;
    if n == 0 || k > row {
        return Err(ResidueError::OutOfRange(format!(
            "k = {k} outside row {q}^{n}-2"
        )));
    }
    Ok(signed_successor_residue(k, q.get()))
}

/// `(-1)^k (k+1)` reduced into `0..q`; only depends on `k mod 2q`.
pub(crate) fn signed_successor_residue(k: u64, q: u64) -> u64 {
    let v = (k % q + 1) % q;
    if k.is_multiple_of(2) || v == 0 {
        v
    } else {
        q - v
    }
}

/// Number of `i` in `k..=k+2q-1` with `C(q^n-2, i) ≡ p (mod q)`.
///
/// Residues come from Lucas' theorem, not the closed form, so the count is
/// an independent check of the window property (always 2).
pub fn window_residue_count(q: Prime, n: u32, k: u64, p: u64) -> Result<u32, ResidueError> {
    let qv = q.get();
    let row = RowRule::QPowMinusTwo
        .row(q, n)
        .ok_or_else(|| ResidueError::OutOfRange(format!("row {q}^{n}-2 does not fit in u64")))?;
    if p >= qv {
        return Err(ResidueError::OutOfRange(format!("class {p} >= q = {qv}")));
    }
    if row < 2 * qv - 1 || k > row - (2 * qv - 1) {
        return Err(ResidueError::OutOfRange(format!(
            "window start {k} exceeds {q}^{n} - 2q - 1"
        )));
    }
    let mut count = 0;
    for i in k..k + 2 * qv {
        if lucas_residue(row, i, q)? == p {
            count += 1;
        }
    }
    Ok(count)
}

/// Positions of row `q^n - 2` whose binomial falls in class `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidueClassSet {
    pub q: Prime,
    pub level: u32,
    pub class: u64,
    members: Vec<u64>,
}

impl ResidueClassSet {
    pub fn build(q: Prime, level: u32, class: u64) -> Result<Self, ResidueError> {
        let row = RowRule::QPowMinusTwo
            .row(q, level)
            .ok_or_else(|| ResidueError::OutOfRange("row does not fit in u64".into()))?;
        if class >= q.get() {
            return Err(ResidueError::OutOfRange(format!("class {class} >= q")));
        }
        let mut members = Vec::new();
        for m in 0..=row {
            if lucas_residue(row, m, q)? == class {
                members.push(m);
            }
        }
        Ok(Self {
            q,
            level,
            class,
            members,
        })
    }

    pub fn row(&self) -> u64 {
        RowRule::QPowMinusTwo.row(self.q, self.level).unwrap()
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn contains(&self, m: u64) -> bool {
        self.members.binary_search(&m).is_ok()
    }
}

/// Residue and valuation of `C(n, k)` tracked along a path.
#[derive(Clone, Debug)]
pub struct ResidueOdometer {
    q: u64,
    digits_k: Vec<u32>,
    digits_m: Vec<u32>,
    digits_n: Vec<u32>,
    sum_k: u64,
    sum_m: u64,
    sum_n: u64,
    level: u64,
    position: u64,
    /// product of `C(k_i + m_i, k_i)` over non-overflowing positions
    product: u64,
    overflowing: u32,
    tables: Option<std::sync::Arc<FactorialTables>>,
}

/// Factorials and inverse factorials mod q, for `q` up to [`TABLE_LIMIT`].
#[derive(Debug)]
struct FactorialTables {
    fact: Vec<u32>,
    inv_fact: Vec<u32>,
}

const TABLE_LIMIT: u64 = 1 << 20;

impl FactorialTables {
    fn new(q: u64) -> Self {
        let n = q as usize;
        let mut fact = vec![1u32; n];
        for i in 1..n {
            fact[i] = mul_mod(fact[i - 1] as u64, i as u64, q) as u32;
        }
        let mut inv_fact = vec![1u32; n];
        inv_fact[n - 1] = pow_mod(fact[n - 1] as u64, q - 2, q) as u32;
        for i in (1..n).rev() {
            inv_fact[i - 1] = mul_mod(inv_fact[i] as u64, i as u64, q) as u32;
        }
        Self { fact, inv_fact }
    }
}

impl ResidueOdometer {
    /// Odometer at the root `(0, 0)`.
    pub fn new(q: Prime) -> Self {
        let q = q.get();
        let tables = (q <= TABLE_LIMIT).then(|| std::sync::Arc::new(FactorialTables::new(q)));
        Self {
            q,
            digits_k: Vec::new(),
            digits_m: Vec::new(),
            digits_n: Vec::new(),
            sum_k: 0,
            sum_m: 0,
            sum_n: 0,
            level: 0,
            position: 0,
            product: 1 % q,
            overflowing: 0,
            tables,
        }
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    /// `C(level, position) mod q`.
    pub fn residue(&self) -> u64 {
        if self.overflowing > 0 {
            0
        } else {
            self.product
        }
    }

    /// q-adic valuation of `C(level, position)`.
    pub fn valuation(&self) -> u64 {
        (self.sum_k + self.sum_m - self.sum_n) / (self.q - 1)
    }

    /// `C(a+b, a) mod q` and its inverse, for `a + b < q`.
    fn factor(&self, a: u64, b: u64) -> (u64, u64) {
        match &self.tables {
            Some(t) => {
                let q = self.q;
                let c = mul_mod(
                    mul_mod(
                        t.fact[(a + b) as usize] as u64,
                        t.inv_fact[a as usize] as u64,
                        q,
                    ),
                    t.inv_fact[b as usize] as u64,
                    q,
                );
                let inv = mul_mod(
                    mul_mod(
                        t.inv_fact[(a + b) as usize] as u64,
                        t.fact[a as usize] as u64,
                        q,
                    ),
                    t.fact[b as usize] as u64,
                    q,
                );
                (c, inv)
            }
            None => {
                let c = digit_binomial(a + b, a, self.q);
                (c, pow_mod(c, self.q - 2, self.q))
            }
        }
    }

    /// Replace the factor of one digit position, `(a_old, b) -> (a_new, b)`.
    fn swap_factor(&mut self, a_old: u64, a_new: u64, b: u64) {
        let q = self.q;
        if a_old + b >= q {
            self.overflowing -= 1;
        } else {
            let (_, inv) = self.factor(a_old, b);
            self.product = mul_mod(self.product, inv, q);
        }
        if a_new + b >= q {
            self.overflowing += 1;
        } else {
            let (c, _) = self.factor(a_new, b);
            self.product = mul_mod(self.product, c, q);
        }
    }

    /// Take one edge: `true` increments `k`, `false` increments `n - k`.
    pub fn step(&mut self, bit: bool) {
        let q = self.q;
        let mut i = 0;
        loop {
            let (own, other) = if bit {
                (&self.digits_k, &self.digits_m)
            } else {
                (&self.digits_m, &self.digits_k)
            };
            let a = own.get(i).copied().unwrap_or(0) as u64;
            let b = other.get(i).copied().unwrap_or(0) as u64;
            let wraps = a + 1 == q;
            let a_new = if wraps { 0 } else { a + 1 };
            self.swap_factor(a, a_new, b);
            let (own, sum) = if bit {
                (&mut self.digits_k, &mut self.sum_k)
            } else {
                (&mut self.digits_m, &mut self.sum_m)
            };
            if i == own.len() {
                own.push(0);
            }
            own[i] = a_new as u32;
            *sum = *sum + a_new - a;
            if !wraps {
                break;
            }
            i += 1;
        }
        if bit {
            self.position += 1;
        }
        let mut i = 0;
        loop {
            if i == self.digits_n.len() {
                self.digits_n.push(0);
            }
            let d = self.digits_n[i] as u64;
            if d + 1 < q {
                self.digits_n[i] += 1;
                self.sum_n += 1;
                break;
            }
            self.digits_n[i] = 0;
            self.sum_n -= q - 1;
            i += 1;
        }
        self.level += 1;
    }
}

/// `d_j mod q` for `j = 0..=N` along the prefix.
pub fn path_residue_stream(prefix: &PathPrefix, q: Prime) -> Vec<u64> {
    let mut odo = ResidueOdometer::new(q);
    let mut out = Vec::with_capacity(prefix.len() + 1);
    out.push(odo.residue());
    for &b in prefix.bits() {
        odo.step(b);
        out.push(odo.residue());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pascal_path::{binomial, sample_path, BernoulliParam};
    use num_bigint::BigUint;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn pr(q: u64) -> Prime {
        Prime::new(q).unwrap()
    }

    fn brute_mod(n: u64, k: u64, q: u64) -> u64 {
        (binomial(n, k) % BigUint::from(q)).to_u64().unwrap()
    }

    fn brute_valuation(n: u64, k: u64, q: u64) -> u32 {
        let mut c = binomial(n, k);
        let qq = BigUint::from(q);
        let mut v = 0;
        while (&c % &qq) == BigUint::default() {
            c /= &qq;
            v += 1;
        }
        v
    }

    #[test]
    fn primality_small_and_edges() {
        let primes: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(
            primes,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
        );
        assert!(is_prime(2_147_483_647));
        assert!(!is_prime(2_147_483_649));
        // strong pseudoprime to bases 2, 3, 5, 7
        assert!(!is_prime(3_215_031_751));
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(Prime::new(9).is_err());
    }

    #[test]
    fn primality_matches_trial_division() {
        for n in 0..20_000u64 {
            let trial = n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(is_prime(n), trial, "n = {n}");
        }
    }

    #[test]
    fn lucas_examples() {
        assert_eq!(lucas_residue(4, 2, pr(2)).unwrap(), 0);
        assert_eq!(lucas_residue(123, 0, pr(7)).unwrap(), 1);
        assert_eq!(lucas_residue(7, 3, pr(3)).unwrap(), 2);
        assert_eq!(brute_mod(7, 3, 3), 2);
        assert_eq!(
            lucas_residue(3, 4, pr(5)),
            Err(ResidueError::KExceedsN { n: 3, k: 4 })
        );
    }

    #[test]
    fn kummer_and_legendre_examples() {
        assert_eq!(kummer_carries(4, 2, pr(2)).unwrap(), 1);
        assert_eq!(kummer_carries(99, 0, pr(3)).unwrap(), 0);
        assert_eq!(legendre_valuation(4, 2, pr(2)).unwrap(), 1);
        assert_eq!(legendre_valuation(17, 17, pr(5)).unwrap(), 0);
        // 126 = 2 * 3^2 * 7
        assert_eq!(brute_valuation(9, 4, 3), 2);
        assert_eq!(kummer_carries(9, 4, pr(3)).unwrap(), 2);
        assert_eq!(legendre_valuation(9, 4, pr(3)).unwrap(), 2);
        assert_eq!(
            kummer_carries(100, 50, pr(7)).unwrap(),
            legendre_valuation(100, 50, pr(7)).unwrap()
        );
    }

    #[test]
    fn oracle_agreement_to_120() {
        // the full n <= 300 sweep lives in the acceptance suite
        for q in [2, 3, 5, 7, 11] {
            let p = pr(q);
            for n in 0..=120 {
                for k in 0..=n {
                    let r = lucas_residue(n, k, p).unwrap();
                    assert_eq!(r, brute_mod(n, k, q));
                    let v = kummer_carries(n, k, p).unwrap();
                    assert_eq!(v, legendre_valuation(n, k, p).unwrap());
                    assert_eq!(r == 0, v >= 1);
                }
            }
        }
    }

    #[test]
    fn row_formula_examples() {
        assert_eq!(row_formula_residue(pr(3), 2, 3).unwrap(), 2);
        assert_eq!(row_formula_residue(pr(3), 2, 0).unwrap(), 1);
        assert_eq!(row_formula_residue(pr(2), 3, 5).unwrap(), 0);
        assert!(row_formula_residue(pr(3), 2, 8).is_err());
    }

    #[test]
    fn row_formula_against_lucas_small() {
        for (q, nmax) in [(2u64, 8u32), (3, 5), (5, 3), (7, 3)] {
            for n in 1..=nmax {
                let row = q.pow(n) - 2;
                for k in 0..=row {
                    assert_eq!(
                        row_formula_residue(pr(q), n, k).unwrap(),
                        lucas_residue(row, k, pr(q)).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn blocking_line() {
        // C(q^n - 1, k) ≡ (-1)^k
        for (q, nmax) in [(2u64, 10u32), (3, 6), (5, 4), (7, 3)] {
            for n in 1..=nmax {
                let row = q.pow(n) - 1;
                for k in 0..=row {
                    let expected = if k % 2 == 0 { 1 % q } else { q - 1 };
                    assert_eq!(lucas_residue(row, k, pr(q)).unwrap(), expected);
                }
            }
        }
    }

    #[test]
    fn window_examples() {
        assert_eq!(window_residue_count(pr(3), 2, 0, 1).unwrap(), 2);
        assert_eq!(window_residue_count(pr(2), 3, 0, 0).unwrap(), 2);
        assert_eq!(window_residue_count(pr(3), 2, 1, 0).unwrap(), 2);
        // q^n - 2q - 1 = 2 is the last valid start for q=3, n=2
        assert!(window_residue_count(pr(3), 2, 3, 0).is_err());
        assert!(window_residue_count(pr(3), 2, 0, 3).is_err());
    }

    #[test]
    fn window_exhaustive_small() {
        for (q, nmax) in [(2u64, 11u32), (3, 7), (5, 4)] {
            for n in 1..=nmax {
                if q.pow(n) < 2 * q + 1 {
                    continue;
                }
                let last = q.pow(n) - 2 * q - 1;
                for k in 0..=last {
                    for p in 0..q {
                        assert_eq!(window_residue_count(pr(q), n, k, p).unwrap(), 2);
                    }
                }
            }
        }
    }

    #[test]
    fn residue_class_sets_partition_row() {
        let q = pr(3);
        let sets: Vec<_> = (0..3)
            .map(|p| ResidueClassSet::build(q, 3, p).unwrap())
            .collect();
        let total: usize = sets.iter().map(|s| s.members().len()).sum();
        assert_eq!(total as u64, sets[0].row() + 1);
        for m in 0..=sets[0].row() {
            let formula = row_formula_residue(q, 3, m).unwrap();
            for s in &sets {
                assert_eq!(s.contains(m), s.class == formula);
            }
        }
    }

    #[test]
    fn stream_examples() {
        let ones = PathPrefix::from_labels(&[1; 30]);
        assert!(path_residue_stream(&ones, pr(5)).iter().all(|&r| r == 1));
        // vertices (0,0) (1,0) (2,1) (3,1) (4,2): d = 1, 1, 2, 3, 6
        let prefix = PathPrefix::from_labels(&[0, 1, 0, 1]);
        assert_eq!(path_residue_stream(&prefix, pr(2)), vec![1, 1, 0, 1, 0]);
        assert_eq!(path_residue_stream(&prefix, pr(3))[0], 1);
    }

    #[test]
    fn odometer_with_untabulated_prime() {
        let q = pr(1_048_583);
        let path = sample_path(BernoulliParam::new(0.5, 11).unwrap(), 3000).unwrap();
        let stream = path_residue_stream(&path, q);
        for j in (0..=3000).step_by(37) {
            let k = path.ones_at(j).unwrap();
            assert_eq!(stream[j], lucas_residue(j as u64, k, q).unwrap());
        }
    }

    proptest! {
        #[test]
        fn odometer_matches_lucas_and_kummer(
            seed in any::<u64>(),
            alpha in 0.05f64..0.95,
            qi in 0usize..6,
        ) {
            let q = pr([2, 3, 5, 7, 11, 13][qi]);
            let path = sample_path(BernoulliParam::new(alpha, seed).unwrap(), 1500).unwrap();
            let mut odo = ResidueOdometer::new(q);
            for j in 0..=path.len() {
                let k = path.ones_at(j).unwrap();
                prop_assert_eq!(odo.level(), j as u64);
                prop_assert_eq!(odo.position(), k);
                prop_assert_eq!(odo.residue(), lucas_residue(j as u64, k, q).unwrap());
                prop_assert_eq!(odo.valuation() as u32, kummer_carries(j as u64, k, q).unwrap());
                if j < path.len() {
                    odo.step(path.bits()[j]);
                }
            }
        }
    }
}
