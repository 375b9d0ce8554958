//! Distribution statistics for residue and fractional-part sequences.
//!
//! Circle statistics take fractional parts `t ∈ [0,1)` rather than angles and
//! use `|e^{2πit} - 1| = 2|sin πt|`.
//!
//! Monte Carlo estimators run one independent stream per replica (see
//! [`crate::rng`]) and report a normal-approximation standard error.
//! Replicas are evaluated in parallel but results are gathered in replica
//! order, so every estimate is a pure function of its seed.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pascal_path::PathPrefix;
use crate::residue_engine::{
    path_residue_stream, signed_successor_residue, Prime, ResidueError, ResidueOdometer, RowRule,
};
use crate::rng::PathRng;
use crate::row_sampler::RowSampler;

/// Stream identifiers that keep experiments sharing a seed independent.
pub mod streams {
    pub const DIVISIBILITY: u64 = 1;
    pub const SWEEP: u64 = 2;
    pub const MIXING: u64 = 3;
    pub const CALIBRATION: u64 = 4;
    pub const THETA_PATHS: u64 = 5;
    pub const FIXED_POINT: u64 = 6;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error(transparent)]
    Residue(#[from] ResidueError),
    #[error("invalid argument: {0}")]
    InvalidArgs(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
}

/// Fractional parts of a sequence, all in `[0,1)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FracSeries {
    values: Vec<f64>,
}

impl FracSeries {
    pub fn new(values: Vec<f64>) -> Result<Self, StatsError> {
        if let Some(v) = values.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return Err(StatsError::InvalidArgs(format!("{v} is not in [0,1)")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `|e^{2πit} - 1|`.
pub fn weyl_term(t: f64) -> f64 {
    2.0 * (std::f64::consts::PI * t).sin().abs()
}

/// `(1/n) Σ_{j<n} |e^{2πi t_j} - 1|`.
pub fn weyl_average(s: &[f64], n: usize) -> Result<f64, StatsError> {
    if n == 0 || n > s.len() {
        return Err(StatsError::OutOfRange(format!(
            "n = {n} with {} values",
            s.len()
        )));
    }
    Ok(s[..n].iter().map(|&t| weyl_term(t)).sum::<f64>() / n as f64)
}

/// Weyl averages of every prefix: entry `i` averages `t_0..=t_i`.
pub fn prefix_weyl_averages(s: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    s.iter()
        .enumerate()
        .map(|(i, &t)| {
            acc += weyl_term(t);
            acc / (i + 1) as f64
        })
        .collect()
}

/// Some prefix average falls below `first`, and a strictly longer prefix
/// then falls below `second`: a finite stand-in for `liminf = 0`.
pub fn descending_prefix_windows(s: &[f64], first: f64, second: f64) -> bool {
    let avgs = prefix_weyl_averages(s);
    match avgs.iter().position(|&a| a < first) {
        Some(i) => avgs[i + 1..].iter().any(|&a| a < second),
        None => false,
    }
}

/// Fraction of `j < n` with `q | d_j` along the prefix; `n <= len + 1`.
pub fn divisible_fraction(
    prefix: &PathPrefix,
    q: Prime,
    n: usize,
) -> Result<Ratio<u64>, StatsError> {
    if n == 0 || n > prefix.len() + 1 {
        return Err(StatsError::OutOfRange(format!(
            "n = {n} for a prefix of length {}",
            prefix.len()
        )));
    }
    let zeros = path_residue_stream(prefix, q)[..n]
        .iter()
        .filter(|&&r| r == 0)
        .count();
    Ok(Ratio::new(zeros as u64, n as u64))
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            stderr: (var / n).sqrt(),
            samples: xs.len() as u64,
        }
    }
}

/// Mean divisible fraction over `paths` sampled paths, reported at each
/// checkpoint `n` (fraction of `j < n`). Residues come from the odometer.
pub fn divisibility_curve(
    q: Prime,
    alpha: f64,
    seed: u64,
    paths: usize,
    checkpoints: &[usize],
) -> Result<Vec<Estimate>, StatsError> {
    if paths == 0 || checkpoints.is_empty() || checkpoints.contains(&0) {
        return Err(StatsError::InvalidArgs(
            "need paths and positive checkpoints".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidArgs(format!(
            "alpha = {alpha} not in (0,1)"
        )));
    }
    let mut sorted = checkpoints.to_vec();
    sorted.sort_unstable();
    let horizon = *sorted.last().expect("nonempty");
    let per_path: Vec<Vec<u64>> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = PathRng::for_replica(seed, streams::DIVISIBILITY, i);
            let mut odo = ResidueOdometer::new(q);
            let mut zeros = 0u64;
            let mut counts = Vec::with_capacity(sorted.len());
            let mut next = 0;
            for j in 0..horizon {
                if odo.residue() == 0 {
                    zeros += 1;
                }
                while next < sorted.len() && sorted[next] == j + 1 {
                    counts.push(zeros);
                    next += 1;
                }
                odo.step(rng.bernoulli(alpha));
            }
            counts
        })
        .collect();
    Ok(checkpoints
        .iter()
        .map(|c| {
            let idx = sorted.binary_search(c).expect("checkpoint present");
            let fractions: Vec<f64> = per_path.iter().map(|v| v[idx] as f64 / *c as f64).collect();
            Estimate::from_samples(&fractions)
        })
        .collect())
}

/// Counts of `t_j` in `[i/bins, (i+1)/bins)`.
pub fn arc_histogram(s: &[f64], bins: usize) -> Result<Vec<u64>, StatsError> {
    if bins == 0 {
        return Err(StatsError::InvalidArgs("bins must be positive".into()));
    }
    let mut counts = vec![0u64; bins];
    for &t in s {
        let i = ((t * bins as f64) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(counts)
}

/// Every closed circular arc of length `eps` contains a point, i.e. no
/// circular gap exceeds `eps`.
pub fn epsilon_dense(s: &[f64], eps: f64) -> bool {
    if s.is_empty() {
        return false;
    }
    let mut v = s.to_vec();
    v.sort_by(f64::total_cmp);
    let wrap = v[0] + 1.0 - v[v.len() - 1];
    let max_gap = v.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max);
    max_gap <= eps
}

/// Residue of one path at each tested level `1..=max_level`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HitMatrix {
    q: Prime,
    rule: RowRule,
    residues: Vec<u64>,
}

impl HitMatrix {
    pub fn max_level(&self) -> u32 {
        self.residues.len() as u32
    }

    pub fn q(&self) -> Prime {
        self.q
    }

    pub fn rule(&self) -> RowRule {
        self.rule
    }

    /// Residue class hit at `level` (1-based).
    pub fn class_at(&self, level: u32) -> u64 {
        self.residues[level as usize - 1]
    }

    pub fn hit(&self, level: u32, p: u64) -> bool {
        self.class_at(level) == p
    }

    /// `hit[n-1][p]`.
    pub fn rows(&self) -> Vec<Vec<bool>> {
        let q = self.q.get();
        self.residues
            .iter()
            .map(|&r| (0..q).map(|p| p == r).collect())
            .collect()
    }
}

pub fn residue_hit_levels(
    prefix: &PathPrefix,
    q: Prime,
    max_level: u32,
    rule: RowRule,
) -> Result<HitMatrix, StatsError> {
    let rows: Vec<u64> = (1..=max_level)
        .map(|n| {
            rule.row(q, n)
                .filter(|&r| r as usize <= prefix.len())
                .ok_or_else(|| {
                    StatsError::OutOfRange(format!(
                        "level {n} row exceeds prefix length {}",
                        prefix.len()
                    ))
                })
        })
        .collect::<Result<_, _>>()?;
    let stream = path_residue_stream(prefix, q);
    Ok(HitMatrix {
        q,
        rule,
        residues: rows.iter().map(|&r| stream[r as usize]).collect(),
    })
}

/// First level at which each sampled path hits each class.
#[derive(Clone, Debug)]
pub struct FirstHits {
    q: usize,
    max_level: u32,
    /// `samples * q` entries; `u32::MAX` for "not by `max_level`".
    first: Vec<u32>,
}

impl FirstHits {
    pub fn sample(
        q: Prime,
        rule: RowRule,
        alpha: f64,
        max_level: u32,
        samples: usize,
        seed: u64,
        stream: u64,
    ) -> Result<Self, StatsError> {
        if samples == 0 {
            return Err(StatsError::InvalidArgs("samples must be positive".into()));
        }
        let sampler = RowSampler::new(q, rule, alpha, max_level)?;
        let qq = q.get() as usize;
        let first: Vec<u32> = (0..samples as u64)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut rng = PathRng::for_replica(seed, stream, i);
                let mut residues = Vec::with_capacity(max_level as usize);
                sampler.sample_into(&mut rng, &mut residues);
                let mut first = vec![u32::MAX; qq];
                for (j, &r) in residues.iter().enumerate() {
                    let slot = &mut first[r as usize];
                    if *slot == u32::MAX {
                        *slot = j as u32 + 1;
                    }
                }
                first
            })
            .collect();
        Ok(Self {
            q: qq,
            max_level,
            first,
        })
    }

    pub fn samples(&self) -> usize {
        self.first.len() / self.q
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    fn per_path(&self) -> impl Iterator<Item = &[u32]> {
        self.first.chunks(self.q)
    }

    /// Fraction of paths hitting class `p` at some level `<= r`.
    pub fn class_mass(&self, p: u64, r: u32) -> Estimate {
        self.indicator_mean(|f| f[p as usize] <= r)
    }

    /// Fraction of paths hitting every class by level `r`.
    pub fn all_classes_mass(&self, r: u32) -> Estimate {
        self.indicator_mean(|f| f.iter().all(|&l| l <= r))
    }

    fn indicator_mean(&self, pred: impl Fn(&[u32]) -> bool) -> Estimate {
        let hits = self.per_path().filter(|f| pred(f)).count() as f64;
        let n = self.samples() as f64;
        let p = hits / n;
        Estimate {
            value: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
            samples: self.samples() as u64,
        }
    }
}

/// `μ_α(⋃_{n<=R} F_n(q,p))` for `R = 1..=r`; the last entry is the mass at `r`.
pub fn sweep_out_mass(
    q: Prime,
    p: u64,
    r: u32,
    samples: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<Estimate>, StatsError> {
    if p >= q.get() || r == 0 {
        return Err(StatsError::InvalidArgs(format!(
            "p = {p}, R = {r} for q = {q}"
        )));
    }
    let hits = FirstHits::sample(
        q,
        RowRule::QPowMinusTwo,
        alpha,
        r,
        samples,
        seed,
        streams::SWEEP,
    )?;
    Ok((1..=r).map(|rr| hits.class_mass(p, rr)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingEstimate {
    /// `μ(F_n(q,p) ∩ F_m(q,r))`.
    pub joint: f64,
    /// `μ(F_m(q,r))`.
    pub marginal: f64,
    /// Standard error of `joint - marginal/q`.
    pub stderr: f64,
    pub samples: u64,
}

impl MixingEstimate {
    pub fn discrepancy(&self, q: u64) -> f64 {
        self.joint - self.marginal / q as f64
    }
}

#[allow(clippy::too_many_arguments)]
pub fn mixing_pair_estimate(
    q: Prime,
    p: u64,
    r: u64,
    m: u32,
    n: u32,
    samples: usize,
    alpha: f64,
    seed: u64,
) -> Result<MixingEstimate, StatsError> {
    if m == 0 || m >= n || p >= q.get() || r >= q.get() || samples == 0 {
        return Err(StatsError::InvalidArgs(format!(
            "need 0 < m < n and classes below q (m={m}, n={n}, p={p}, r={r})"
        )));
    }
    let sampler = RowSampler::new(q, RowRule::QPowMinusTwo, alpha, n)?;
    let pairs: Vec<(bool, bool)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = PathRng::for_replica(seed, streams::MIXING, i);
            let mut residues = Vec::with_capacity(n as usize);
            sampler.sample_into(&mut rng, &mut residues);
            let in_m = residues[m as usize - 1] == r;
            (in_m && residues[n as usize - 1] == p, in_m)
        })
        .collect();
    let inv_q = 1.0 / q.get() as f64;
    let z: Vec<f64> = pairs
        .iter()
        .map(|&(j, m)| f64::from(u8::from(j)) - inv_q * f64::from(u8::from(m)))
        .collect();
    let count = samples as f64;
    Ok(MixingEstimate {
        joint: pairs.iter().filter(|p| p.0).count() as f64 / count,
        marginal: pairs.iter().filter(|p| p.1).count() as f64 / count,
        stderr: Estimate::from_samples(&z).stderr,
        samples: samples as u64,
    })
}

/// Binomial(`N`, α) masses of the residue classes of row `N = q^n - 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMasses {
    pub masses: Vec<f64>,
    /// Largest single point mass `max_m f_n(m)`.
    pub max_point_mass: f64,
}

/// Row `q^n - 2` may have at most this many entries.
pub const MAX_ENUMERATED_ROW: u64 = 100_000;

pub fn class_masses(q: Prime, n: u32, alpha: f64) -> Result<ClassMasses, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidArgs(format!(
            "alpha = {alpha} not in (0,1)"
        )));
    }
    let row = RowRule::QPowMinusTwo
        .row(q, n)
        .filter(|&r| n >= 1 && r <= MAX_ENUMERATED_ROW)
        .ok_or_else(|| StatsError::OutOfRange(format!("row {q}^{n}-2 is not enumerable")))?;
    let weights = binomial_weights(row, alpha);
    let total: f64 = weights.iter().sum();
    let mut masses = vec![0.0; q.get() as usize];
    for (m, w) in weights.iter().enumerate() {
        masses[signed_successor_residue(m as u64, q.get()) as usize] += w / total;
    }
    let peak = weights.iter().cloned().fold(0.0, f64::max);
    Ok(ClassMasses {
        masses,
        max_point_mass: peak / total,
    })
}

pub fn class_mass(q: Prime, n: u32, alpha: f64, p: u64) -> Result<f64, StatsError> {
    let cm = class_masses(q, n, alpha)?;
    cm.masses
        .get(p as usize)
        .copied()
        .ok_or_else(|| StatsError::InvalidArgs(format!("class {p} for q = {q}")))
}

/// Binomial(`n`, α) weights scaled so the mode has weight 1; ratios between
/// neighbours are exact, so normalizing recovers the pmf without overflow.
fn binomial_weights(n: u64, alpha: f64) -> Vec<f64> {
    let len = n as usize + 1;
    let mode = (((n + 1) as f64 * alpha).floor() as usize).min(n as usize);
    let odds = alpha / (1.0 - alpha);
    let mut w = vec![0.0; len];
    w[mode] = 1.0;
    for k in mode..n as usize {
        // f(k+1)/f(k) = (n-k)/(k+1) * α/(1-α)
        w[k + 1] = w[k] * (n as f64 - k as f64) / (k as f64 + 1.0) * odds;
    }
    for k in (1..=mode).rev() {
        w[k - 1] = w[k] * k as f64 / (n as f64 - k as f64 + 1.0) / odds;
    }
    w
}
