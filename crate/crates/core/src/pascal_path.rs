//! Finite path prefixes in the Pascal graph.
//!
//! A path from the root `(0,0)` is a 0/1 sequence: label 0 moves `(n,k)` to
//! `(n+1,k)`, label 1 moves it to `(n+1,k+1)`. After `n` labels the path sits
//! at vertex `(n, k_n)` where `k_n` counts the ones so far, and carries the
//! binomial coefficient `d_n = C(n, k_n)`.
//!
//! Infinite paths are never materialized. Long experiments stream bits from a
//! [`PathRng`] and feed them to incremental trackers instead.

use num_bigint::BigUint;
use num_traits::One;
use thiserror::Error;

use crate::rng::PathRng;

/// Level cap for experiments that carry exact `d_n` values. `d_n < 2^n`, so
/// a tracker at this level holds at most 4096 bits.
pub const DEFAULT_MAX_EXACT_LEVEL: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("prefix is maximal for its vertex (of the form 1^p 0^q); no successor")]
    NoSuccessor,
    #[error("level {n} out of range for prefix of length {len}")]
    OutOfRange { n: usize, len: usize },
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("path length must be at least 1")]
    ZeroLength,
}

/// Finite 0/1 prefix with its running ones-count `k_0..=k_N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PathPrefix {
    bits: Vec<bool>,
    ones: Vec<u32>,
}

impl PathPrefix {
    pub fn from_bits<I>(bits: I) -> Self
    where
        I: IntoIterator<Item = bool>,
    {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut ones = Vec::with_capacity(bits.len() + 1);
        let mut k = 0u32;
        ones.push(0);
        for &b in &bits {
            k += b as u32;
            ones.push(k);
        }
        Self { bits, ones }
    }

    /// Convenience for tests and literals: any nonzero entry is a 1.
    pub fn from_labels(labels: &[u8]) -> Self {
        Self::from_bits(labels.iter().map(|&b| b != 0))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn labels(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| b as u8).collect()
    }

    /// `k_n`, the number of ones among the first `n` labels.
    pub fn ones_at(&self, n: usize) -> Result<u64, PathError> {
        self.ones
            .get(n)
            .map(|&k| k as u64)
            .ok_or(PathError::OutOfRange { n, len: self.len() })
    }

    pub fn total_ones(&self) -> u64 {
        *self.ones.last().unwrap_or(&0) as u64
    }

    /// Vertex reached after `n` labels.
    pub fn vertex_at(&self, n: usize) -> Result<Vertex, PathError> {
        Ok(Vertex {
            level: n as u64,
            position: self.ones_at(n)?,
        })
    }

    /// Image under the Pascal adic map: `1^p 0^q 0 1 w -> 0^q 1^p 1 0 w`.
    ///
    /// The rewritten block is everything up to and including the first
    /// `01` pair; the tail `w` is untouched.
    pub fn adic_successor(&self) -> Result<PathPrefix, PathError> {
        let i = self
            .bits
            .windows(2)
            .position(|w| !w[0] && w[1])
            .ok_or(PathError::NoSuccessor)?;
        let p = self.ones[i] as usize;
        let q = i - p;
        let mut out = Vec::with_capacity(self.bits.len());
        out.extend(std::iter::repeat_n(false, q));
        out.extend(std::iter::repeat_n(true, p));
        out.push(true);
        out.push(false);
        out.extend_from_slice(&self.bits[i + 2..]);
        Ok(PathPrefix::from_bits(out))
    }
}

/// Vertex `(n, k)` of the Pascal graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    pub level: u64,
    pub position: u64,
}

impl Vertex {
    pub const ROOT: Vertex = Vertex {
        level: 0,
        position: 0,
    };

    pub fn new(level: u64, position: u64) -> Option<Self> {
        (position <= level).then_some(Self { level, position })
    }

    pub fn child(self, bit: bool) -> Vertex {
        Vertex {
            level: self.level + 1,
            position: self.position + bit as u64,
        }
    }
}

/// Exact `d = C(level, position)` carried along a path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinomialTracker {
    vertex: Vertex,
    value: BigUint,
}

impl Default for BinomialTracker {
    fn default() -> Self {
        Self::root()
    }
}

impl BinomialTracker {
    pub fn root() -> Self {
        Self {
            vertex: Vertex::ROOT,
            value: BigUint::one(),
        }
    }

    /// Tracker at an arbitrary vertex, seeded by a from-scratch evaluation.
    pub fn at(vertex: Vertex) -> Self {
        Self {
            vertex,
            value: binomial(vertex.level, vertex.position),
        }
    }

    pub fn vertex(&self) -> Vertex {
        self.vertex
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    /// Move one edge down.
    ///
    /// `C(n+1,k) = C(n,k)(n+1)/(n+1-k)` and `C(n+1,k+1) = C(n,k)(n+1)/(k+1)`;
    /// both quotients are exact.
    pub fn advance(&mut self, bit: bool) {
        let n = self.vertex.level;
        let k = self.vertex.position;
        let divisor = if bit { k + 1 } else { n + 1 - k };
        self.value *= n + 1;
        self.value /= divisor;
        self.vertex = self.vertex.child(bit);
    }

    pub fn advanced(mut self, bit: bool) -> Self {
        self.advance(bit);
        self
    }
}

/// Bernoulli(α) path measure together with the seed of its stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BernoulliParam {
    alpha: f64,
    seed: u64,
}

impl BernoulliParam {
    pub fn new(alpha: f64, seed: u64) -> Result<Self, PathError> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self { alpha, seed })
        } else {
            Err(PathError::InvalidAlpha(alpha))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Slope of the line a μ_α-typical path tracks in the unit triangle.
    pub fn slope(&self) -> f64 {
        (1.0 - self.alpha) / self.alpha
    }
}

/// I.i.d. Bernoulli(α) labels from the seeded stream.
pub fn sample_path(params: BernoulliParam, length: usize) -> Result<PathPrefix, PathError> {
    if length == 0 {
        return Err(PathError::ZeroLength);
    }
    let mut rng = PathRng::new(params.seed);
    Ok(sample_with(&mut rng, params.alpha, length))
}

/// Same as [`sample_path`] but drawing from a caller-owned stream.
pub fn sample_with(rng: &mut PathRng, alpha: f64, length: usize) -> PathPrefix {
    PathPrefix::from_bits((0..length).map(|_| rng.bernoulli(alpha)))
}

/// `C(n, k)` by the multiplicative formula.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::default();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}
