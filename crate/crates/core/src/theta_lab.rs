//! Staged construction of `θ` for which `{d_j(x) θ}` is dense but far from
//! uniformly distributed, plus two evaluators for `{d θ}`.
//!
//! Stage `n` takes a prime `q_n`, calibrates a horizon `R_n` by Monte Carlo,
//! bounds an admissible radius `δ_n`, and picks a numerator `p_n` so that
//! `θ` lies within `δ_n` of `p_n/q_n`. Radii are powers of two
//! `δ_n = 2^{-e_n}`, with `e_n` chosen so the bound holds strictly.
//!
//! With nonzero numerators, consecutive stages can only nest when
//! `|p/q - p'/q'| >= 1/(q q')` is below `δ_n + δ_{n+1}`, and the calibrated
//! radii are usually far smaller than that. [`NestingPolicy::Tail`] therefore
//! lets a later stage override an incompatible earlier one and records which
//! stages the final value still honors; [`NestingPolicy::Strict`] refuses.
//!
//! `θ` is stored as `bits / 2^B`. Along a path only `d_j mod q_N` and the
//! exact offset `θ - p_N/q_N` are needed, so series evaluation never
//! materializes `d_j`.

use std::f64::consts::{LN_2, PI};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::residue_engine::{Prime, ResidueError, ResidueOdometer, RowRule};
use crate::rng::PathRng;
use crate::stats::{self, streams, FirstHits, StatsError};

pub const DEFAULT_PRECISION: u32 = 8192;
pub const MAX_PRECISION: u32 = 1 << 20;
/// Bits kept beyond every stage demand.
pub const GUARD_BITS: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThetaError {
    #[error("invalid argument: {0}")]
    InvalidArgs(String),
    #[error(
        "no R <= {r_max} reaches mass {target} for q = {q} (best {achieved:.4} at R = {best_r})"
    )]
    CalibrationFailed {
        q: u64,
        target: f64,
        achieved: f64,
        best_r: u32,
        r_max: u32,
    },
    #[error("precision {needed} bits exceeds the cap of {max}")]
    PrecisionOverflow { needed: u64, max: u32 },
    #[error("stage {stage} (q = {q}) has no numerator whose interval meets the earlier stages")]
    StagesIncompatible { stage: usize, q: u64 },
    #[error("{bits}-bit multiplier needs more than {precision} bits of θ")]
    InsufficientPrecision { bits: u64, precision: u32 },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Residue(#[from] ResidueError),
}

macro_rules! kebab_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl std::str::FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown {} '{other}' (expected one of: {})",
                        stringify!($name),
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(match self { $($name::$variant => $text,)+ })
            }
        }
    };
}

/// How a stage horizon is calibrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMode {
    /// `R` steps; every Weyl average `(1/R) Σ_{j<R} |e^{2πi d_j p/q} - 1|`
    /// must fall below the threshold.
    Weyl,
    /// `R` levels; every residue class must be hit on a row `q^j - 2`, `j <= R`.
    Sweep,
}
kebab_enum!(CalibrationMode { Weyl => "weyl", Sweep => "sweep" });

/// Radius rule for a stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaMode {
    /// Small enough that `d_j δ_n < 1/n` over the whole calibrated horizon.
    Strict,
    /// `δ_n = q_n^{-R_n}`. Much weaker; lets three or more stages fit.
    Relaxed,
}
kebab_enum!(DeltaMode { Strict => "strict", Relaxed => "relaxed" });

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NestingPolicy {
    /// Every stage interval must meet all earlier ones.
    Strict,
    /// A stage that misses the running interval replaces it.
    Tail,
}
kebab_enum!(NestingPolicy { Strict => "strict", Tail => "tail" });

/// Monte Carlo calibration of one stage horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub q: u64,
    pub target_mass: f64,
    pub alpha: f64,
    pub seed: u64,
    pub mode: CalibrationMode,
    pub samples: usize,
    pub r_max: u32,
    /// Weyl threshold; defaults to `1/stage`.
    pub threshold: Option<f64>,
    pub row_rule: RowRule,
    /// 1-based; selects the random stream and the default threshold.
    pub stage: usize,
}

impl CalibrationConfig {
    pub fn new(q: u64, target_mass: f64, alpha: f64, seed: u64, mode: CalibrationMode) -> Self {
        let (samples, r_max) = match mode {
            CalibrationMode::Weyl => (2_000, 4_096),
            CalibrationMode::Sweep => (10_000, 40),
        };
        Self {
            q,
            target_mass,
            alpha,
            seed,
            mode,
            samples,
            r_max,
            threshold: None,
            row_rule: RowRule::QPowMinusTwo,
            stage: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub r: u32,
    pub mass: f64,
    /// Estimated mass for `R = 1..=r_max` (possibly truncated by overflow).
    pub masses: Vec<f64>,
}

/// Smallest tested `R` whose estimated mass strictly exceeds the target.
pub fn calibrate_r(cfg: &CalibrationConfig) -> Result<Calibration, ThetaError> {
    let q = Prime::new(cfg.q)?;
    if !(cfg.target_mass > 0.0 && cfg.target_mass < 1.0) {
        return Err(ThetaError::InvalidArgs(format!(
            "target mass {} not in (0,1)",
            cfg.target_mass
        )));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(ThetaError::InvalidArgs(format!(
            "alpha = {} not in (0,1)",
            cfg.alpha
        )));
    }
    if cfg.samples == 0 || cfg.r_max == 0 || cfg.stage == 0 {
        return Err(ThetaError::InvalidArgs(
            "samples, r_max and stage must be positive".into(),
        ));
    }
    let stream = streams::CALIBRATION << 32 | cfg.stage as u64;
    let masses = match cfg.mode {
        CalibrationMode::Sweep => {
            // stop where rows no longer fit in u128
            let r_max = (1..=cfg.r_max)
                .take_while(|&r| cfg.row_rule.row_u128(q, r).is_some())
                .last()
                .unwrap_or(0);
            if r_max == 0 {
                return Err(ThetaError::InvalidArgs("no level row fits".into()));
            }
            let hits = FirstHits::sample(
                q,
                cfg.row_rule,
                cfg.alpha,
                r_max,
                cfg.samples,
                cfg.seed,
                stream,
            )?;
            (1..=r_max)
                .map(|r| hits.all_classes_mass(r).value)
                .collect::<Vec<_>>()
        }
        CalibrationMode::Weyl => {
            let threshold = cfg.threshold.unwrap_or(1.0 / cfg.stage as f64);
            weyl_pass_masses(
                q,
                cfg.alpha,
                cfg.seed,
                stream,
                cfg.samples,
                cfg.r_max,
                threshold,
            )
        }
    };
    match masses.iter().position(|&m| m > cfg.target_mass) {
        Some(i) => Ok(Calibration {
            r: i as u32 + 1,
            mass: masses[i],
            masses,
        }),
        None => {
            let (best, &achieved) = masses
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("at least one level");
            Err(ThetaError::CalibrationFailed {
                q: cfg.q,
                target: cfg.target_mass,
                achieved,
                best_r: best as u32 + 1,
                r_max: masses.len() as u32,
            })
        }
    }
}

/// Fraction of paths whose Weyl averages for every `p` are below
/// `threshold` at horizon `R`, for each `R = 1..=r_max`.
fn weyl_pass_masses(
    q: Prime,
    alpha: f64,
    seed: u64,
    stream: u64,
    samples: usize,
    r_max: u32,
    threshold: f64,
) -> Vec<f64> {
    let qq = q.get() as usize;
    // term[p][c] = |e^{2πi c p / q} - 1|
    let term: Vec<Vec<f64>> = (0..qq)
        .map(|p| {
            (0..qq)
                .map(|c| stats::weyl_term(((c * p) % qq) as f64 / qq as f64))
                .collect()
        })
        .collect();
    let len = r_max as usize;
    let counts = (0..samples as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; len],
            |mut acc, i| {
                let mut rng = PathRng::for_replica(seed, stream, i);
                let mut odo = ResidueOdometer::new(q);
                let mut sums = vec![0.0; qq];
                for (r, slot) in acc.iter_mut().enumerate() {
                    let c = odo.residue() as usize;
                    for (s, t) in sums.iter_mut().zip(&term) {
                        *s += t[c];
                    }
                    let bound = threshold * (r + 1) as f64;
                    if sums.iter().all(|&s| s < bound) {
                        *slot += 1;
                    }
                    odo.step(rng.bernoulli(alpha));
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; len],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    counts.iter().map(|&c| c as f64 / samples as f64).collect()
}

/// `log2 C(n, ⌊n/2⌋)`.
///
/// Log-gamma up to `2^24`; beyond that the Stirling series for the central
/// binomial, since differences of huge log-gamma values cancel badly.
pub fn log2_central_binomial(n: u128) -> f64 {
    if n <= 1 << 24 {
        let nf = n as f64;
        let k = (n / 2) as f64;
        return (ln_gamma(nf + 1.0) - ln_gamma(k + 1.0) - ln_gamma(nf - k + 1.0)) / LN_2;
    }
    if n % 2 == 1 {
        // C(n, (n-1)/2) = C(n+1, (n+1)/2) / 2
        return log2_central_binomial(n + 1) - 1.0;
    }
    let m = (n / 2) as f64;
    let ln = -0.5 * (PI * m).ln() - 1.0 / (8.0 * m) + 1.0 / (192.0 * m * m * m);
    n as f64 + ln / LN_2
}

/// `-log2 n - log2 C(q^R - 2, ⌊(q^R - 2)/2⌋)`, a strict upper bound for
/// `log2 δ_n` on a sweep horizon.
pub fn delta_log_bound(q: u64, r: u32, n: usize) -> Result<f64, ThetaError> {
    if n == 0 {
        return Err(ThetaError::InvalidArgs(
            "stage index must be positive".into(),
        ));
    }
    let pow = (q as u128)
        .checked_pow(r)
        .filter(|&p| p >= 4)
        .ok_or_else(|| ThetaError::InvalidArgs(format!("need 4 <= {q}^{r} < 2^128")))?;
    Ok(-(n as f64).log2() - log2_central_binomial(pow - 2))
}

/// Bound for a Weyl horizon of `R` steps: `d_j <= C(R-1, ⌊(R-1)/2⌋)` and
/// `|e^{2πia} - e^{2πib}| <= 2π|a - b|`, so `δ` below
/// `1/(2π n C(R-1, ·))` moves every term by less than `1/n`.
pub fn weyl_delta_log_bound(r: u32, n: usize) -> Result<f64, ThetaError> {
    if r == 0 || n == 0 {
        return Err(ThetaError::InvalidArgs(
            "R and stage index must be positive".into(),
        ));
    }
    Ok(-(2.0 * PI * n as f64).log2() - log2_central_binomial(r as u128 - 1))
}

/// Binary fraction `bits / 2^precision` in `[0,1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointReal {
    bits: BigUint,
    precision: u32,
}

impl FixedPointReal {
    pub fn new(bits: BigUint, precision: u32) -> Result<Self, ThetaError> {
        if precision == 0 || bits.bits() > precision as u64 {
            return Err(ThetaError::InvalidArgs(format!(
                "{}-bit value does not fit {precision} fractional bits",
                bits.bits()
            )));
        }
        Ok(Self { bits, precision })
    }

    /// `floor(p 2^B / q) / 2^B` for `0 <= p < q`.
    pub fn from_ratio(p: u64, q: u64, precision: u32) -> Result<Self, ThetaError> {
        if q == 0 || p >= q {
            return Err(ThetaError::InvalidArgs(format!("{p}/{q} not in [0,1)")));
        }
        Self::new((BigUint::from(p) << precision) / q, precision)
    }

    pub fn bits(&self) -> &BigUint {
        &self.bits
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn to_f64(&self) -> f64 {
        let shift = self.bits.bits().saturating_sub(64);
        let top = (&self.bits >> shift).to_f64().unwrap_or(0.0);
        top * 2f64.powi(shift as i32 - self.precision as i32)
    }

    /// Zero-padded lowercase hex of `bits`, `⌈B/4⌉` digits.
    pub fn to_hex(&self) -> String {
        let width = self.precision.div_ceil(4) as usize;
        format!("{:0>width$}", self.bits.to_str_radix(16))
    }

    /// Exact `θ - p/q` as `numerator / (q 2^B)`.
    pub fn offset_numerator(&self, p: u64, q: u64) -> BigInt {
        BigInt::from(self.bits.clone()) * q - (BigInt::from(p) << self.precision)
    }

    /// `|θ - p/q| < 2^{-e}`, decided exactly.
    pub fn within(&self, p: u64, q: u64, e: u32) -> bool {
        let lhs = self.offset_numerator(p, q).abs();
        let rhs = BigInt::from(q) << self.precision.saturating_sub(e);
        if e > self.precision {
            // compare lhs * 2^e < q * 2^B
            (lhs << e) < (BigInt::from(q) << self.precision)
        } else {
            lhs < rhs
        }
    }
}

/// `{d θ}` from the fixed-point bits, with `log2` of the error bound it
/// carries when `θ` itself is only known to `2^{-B}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedFrac {
    pub value: FixedPointReal,
    pub log2_error_bound: i64,
}

/// `{d θ}` by one big multiply, keeping the low `B` bits.
pub fn frac_fixed_point(d: &BigUint, theta: &FixedPointReal) -> Result<FixedFrac, ThetaError> {
    let len = d.bits().max(1);
    if len + 53 > theta.precision as u64 {
        return Err(ThetaError::InsufficientPrecision {
            bits: len,
            precision: theta.precision,
        });
    }
    let mask = (BigUint::one() << theta.precision) - 1u32;
    let low = (d * &theta.bits) & mask;
    Ok(FixedFrac {
        value: FixedPointReal {
            bits: low,
            precision: theta.precision,
        },
        log2_error_bound: len as i64 - theta.precision as i64,
    })
}

/// `{d p / q}` from `d mod q`.
pub fn frac_via_residue(d_mod_q: u64, p: u64, q: u64) -> Result<Ratio<u64>, ThetaError> {
    if q == 0 || d_mod_q >= q {
        return Err(ThetaError::InvalidArgs(format!(
            "residue {d_mod_q} mod {q}"
        )));
    }
    let prod = (d_mod_q as u128 * p as u128 % q as u128) as u64;
    Ok(Ratio::new(prod, q))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    /// 1-based.
    pub index: usize,
    pub q: u64,
    pub p: u64,
    pub r: u32,
    /// `log2 δ_n = -e_n`.
    pub log2_delta: f64,
    pub delta_exponent: u32,
    /// The bound `log2 δ_n` must stay under.
    pub log2_delta_bound: f64,
    pub epsilon: f64,
    pub calibrated_mass: f64,
    /// Path steps covered by the bound.
    pub horizon: u128,
    /// `|θ - p/q| < δ_n` holds for the final value.
    pub honored: bool,
}

impl Stage {
    pub fn convergent(&self) -> Ratio<u64> {
        Ratio::new(self.p, self.q)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub primes: Vec<u64>,
    pub alpha: f64,
    pub seed: u64,
    pub mode: CalibrationMode,
    pub delta_mode: DeltaMode,
    pub policy: NestingPolicy,
    pub samples: Option<usize>,
    pub r_max: Option<u32>,
    pub threshold: Option<f64>,
    /// Skip calibration and use these horizons.
    pub horizons: Option<Vec<u32>>,
    pub precision: u32,
    pub max_precision: u32,
}

impl BuildConfig {
    pub fn new(primes: Vec<u64>, alpha: f64, seed: u64) -> Self {
        Self {
            primes,
            alpha,
            seed,
            mode: CalibrationMode::Sweep,
            delta_mode: DeltaMode::Strict,
            policy: NestingPolicy::Tail,
            samples: None,
            r_max: None,
            threshold: None,
            horizons: None,
            precision: DEFAULT_PRECISION,
            max_precision: MAX_PRECISION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaConstruction {
    pub stages: Vec<Stage>,
    pub value: FixedPointReal,
    pub config: BuildConfig,
}

/// Serializable digest of a construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaSummary {
    pub stages: Vec<StageSummary>,
    pub precision: u32,
    pub theta_hex: String,
    pub theta_approx: f64,
    pub mode: CalibrationMode,
    pub delta_mode: DeltaMode,
    pub policy: NestingPolicy,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub q: u64,
    pub p: u64,
    pub r: u32,
    pub log2_delta: f64,
    pub epsilon: f64,
    pub honored: bool,
}

impl ThetaConstruction {
    pub fn last(&self) -> &Stage {
        self.stages.last().expect("at least two stages")
    }

    /// Steps over which series evaluation is exact to `2^-64`.
    pub fn default_horizon(&self) -> usize {
        let cap = (self.value.precision - GUARD_BITS) as u128;
        self.last().horizon.min(cap) as usize
    }

    pub fn summary(&self) -> ThetaSummary {
        ThetaSummary {
            stages: self
                .stages
                .iter()
                .map(|s| StageSummary {
                    q: s.q,
                    p: s.p,
                    r: s.r,
                    log2_delta: s.log2_delta,
                    epsilon: s.epsilon,
                    honored: s.honored,
                })
                .collect(),
            precision: self.value.precision,
            theta_hex: self.value.to_hex(),
            theta_approx: self.value.to_f64(),
            mode: self.config.mode,
            delta_mode: self.config.delta_mode,
            policy: self.config.policy,
            alpha: self.config.alpha,
            seed: self.config.seed,
        }
    }
}

/// Closed integer range of admissible `bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct BitRange {
    lo: BigInt,
    hi: BigInt,
}

impl BitRange {
    fn intersect(&self, other: &BitRange) -> Option<BitRange> {
        let lo = (&self.lo).max(&other.lo).clone();
        let hi = (&self.hi).min(&other.hi).clone();
        (lo <= hi).then_some(BitRange { lo, hi })
    }

    /// Distance between the ranges (0 if they overlap).
    fn gap(&self, other: &BitRange) -> BigInt {
        if other.lo > self.hi {
            &other.lo - &self.hi
        } else if self.lo > other.hi {
            &self.lo - &other.hi
        } else {
            BigInt::zero()
        }
    }

    fn clamp(&self, v: BigInt) -> BigInt {
        v.max(self.lo.clone()).min(self.hi.clone())
    }
}

/// Integers `b` in `[0, 2^B)` with `|b q - p 2^B| < q 2^{B-e}`.
fn stage_range(p: u64, q: u64, e: u32, precision: u32) -> BitRange {
    let a = BigInt::from(p) << precision;
    let w = BigInt::from(q) << (precision - e);
    let qb = BigInt::from(q);
    let lo: BigInt = Integer::div_floor(&(&a - &w), &qb) + 1;
    let hi: BigInt = Integer::div_ceil(&(&a + &w), &qb) - 1;
    let top = (BigInt::one() << precision) - 1;
    BitRange {
        lo: lo.max(BigInt::zero()),
        hi: hi.min(top),
    }
}

pub fn build_theta(cfg: &BuildConfig) -> Result<ThetaConstruction, ThetaError> {
    if cfg.primes.len() < 2 {
        return Err(ThetaError::InvalidArgs("need at least two stages".into()));
    }
    if cfg.primes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ThetaError::InvalidArgs(
            "primes must be strictly increasing".into(),
        ));
    }
    for &q in &cfg.primes {
        Prime::new(q)?;
    }
    if let Some(h) = &cfg.horizons {
        if h.len() != cfg.primes.len() || h.contains(&0) {
            return Err(ThetaError::InvalidArgs(
                "one positive horizon per prime".into(),
            ));
        }
    }

    let mut stages = Vec::with_capacity(cfg.primes.len());
    for (i, &q) in cfg.primes.iter().enumerate() {
        let index = i + 1;
        let epsilon = 0.5f64.powi(index as i32);
        let (r, calibrated_mass) = match &cfg.horizons {
            Some(h) => (h[i], f64::NAN),
            None => {
                let mut cc =
                    CalibrationConfig::new(q, 1.0 - epsilon, cfg.alpha, cfg.seed, cfg.mode);
                cc.stage = index;
                cc.threshold = cfg.threshold;
                if let Some(s) = cfg.samples {
                    cc.samples = s;
                }
                if let Some(r) = cfg.r_max {
                    cc.r_max = r;
                }
                let cal = calibrate_r(&cc)?;
                (cal.r, cal.mass)
            }
        };
        let (bound, horizon) = match (cfg.delta_mode, cfg.mode) {
            (DeltaMode::Relaxed, _) => (-(r as f64) * (q as f64).log2(), sweep_horizon(q, r)),
            (DeltaMode::Strict, CalibrationMode::Sweep) => {
                (delta_log_bound(q, r, index)?, sweep_horizon(q, r))
            }
            (DeltaMode::Strict, CalibrationMode::Weyl) => {
                (weyl_delta_log_bound(r, index)?, r as u128)
            }
        };
        // 2^{-e} < 2^{bound}; relaxed radii may touch the bound
        let e = match cfg.delta_mode {
            DeltaMode::Strict => (-bound).ceil() as u64 + 1,
            DeltaMode::Relaxed => (-bound).ceil() as u64,
        };
        stages.push(Stage {
            index,
            q,
            p: 0,
            r,
            log2_delta: -(e as f64),
            delta_exponent: e.min(u32::MAX as u64) as u32,
            log2_delta_bound: bound,
            epsilon,
            calibrated_mass,
            horizon,
            honored: false,
        });
    }

    let demand: u64 =
        stages.iter().map(|s| s.delta_exponent as u64).sum::<u64>() + GUARD_BITS as u64;
    let needed = demand.max(cfg.precision as u64);
    if needed > cfg.max_precision as u64 {
        return Err(ThetaError::PrecisionOverflow {
            needed,
            max: cfg.max_precision,
        });
    }
    let precision = needed as u32;

    let mut running = BitRange {
        lo: BigInt::zero(),
        hi: (BigInt::one() << precision) - 1,
    };
    for stage in stages.iter_mut() {
        let ranges: Vec<(u64, BitRange)> = (1..stage.q)
            .map(|p| (p, stage_range(p, stage.q, stage.delta_exponent, precision)))
            .collect();
        match ranges
            .iter()
            .find_map(|(p, r)| running.intersect(r).map(|x| (*p, x)))
        {
            Some((p, joined)) => {
                stage.p = p;
                running = joined;
            }
            None => match cfg.policy {
                NestingPolicy::Strict => {
                    return Err(ThetaError::StagesIncompatible {
                        stage: stage.index,
                        q: stage.q,
                    })
                }
                NestingPolicy::Tail => {
                    // nearest interval, smaller p on ties
                    let (p, r) = ranges
                        .iter()
                        .min_by(|a, b| {
                            running
                                .gap(&a.1)
                                .cmp(&running.gap(&b.1))
                                .then(a.0.cmp(&b.0))
                        })
                        .expect("q >= 2");
                    stage.p = *p;
                    running = r.clone();
                }
            },
        }
    }

    // just above p_N/q_N, so multiples of q_N land just above 0
    let last = stages.last().expect("two stages");
    let target: BigInt =
        Integer::div_floor(&(BigInt::from(last.p) << precision), &BigInt::from(last.q)) + 1;
    let bits = running.clamp(target);
    let value = FixedPointReal::new(bits.to_biguint().expect("range is nonnegative"), precision)?;
    for stage in stages.iter_mut() {
        stage.honored = value.within(stage.p, stage.q, stage.delta_exponent);
    }
    Ok(ThetaConstruction {
        stages,
        value,
        config: cfg.clone(),
    })
}

fn sweep_horizon(q: u64, r: u32) -> u128 {
    (q as u128).checked_pow(r).map_or(u128::MAX, |p| p - 1)
}

/// `{d_j θ}` for `j < horizon` along one path, from `d_j mod q_N` and the
/// exact offset `θ - p_N/q_N`.
///
/// `log2 d_j` is tracked in floating point with a safety margin; the
/// offset term must stay below `2^-60` or the evaluation is refused.
pub fn theta_series(
    theta: &ThetaConstruction,
    rng: &mut PathRng,
    alpha: f64,
    horizon: usize,
) -> Result<Vec<f64>, ThetaError> {
    let last = theta.last();
    let q = Prime::new(last.q)?;
    let qf = last.q as f64;
    let num = theta.value.offset_numerator(last.p, last.q);
    let sign = match num.sign() {
        Sign::Minus => -1.0,
        _ => 1.0,
    };
    let log2_num = log2_bigint(&num);
    let base = log2_num - qf.log2() - theta.value.precision as f64;

    let mut odo = ResidueOdometer::new(q);
    let mut log2_d = 0.0f64;
    let mut out = Vec::with_capacity(horizon);
    for j in 0..horizon {
        let class = (odo.residue() * last.p % last.q) as f64 / qf;
        let t = if num.is_zero() {
            class
        } else {
            let exp = log2_d + 1e-6 * (j as f64 + 1.0) + base;
            if exp > -60.0 {
                return Err(ThetaError::InsufficientPrecision {
                    bits: log2_d.ceil() as u64,
                    precision: theta.value.precision,
                });
            }
            let t = class + sign * exp.exp2();
            if t < 0.0 {
                1.0 - f64::EPSILON / 2.0
            } else {
                t
            }
        };
        out.push(t);
        let (n, k) = (odo.level(), odo.position());
        let bit = rng.bernoulli(alpha);
        let denom = if bit { k + 1 } else { n + 1 - k };
        log2_d += ((n + 1) as f64).log2() - (denom as f64).log2();
        odo.step(bit);
    }
    Ok(out)
}

fn log2_bigint(v: &BigInt) -> f64 {
    let m = v.magnitude();
    if m.is_zero() {
        return f64::NEG_INFINITY;
    }
    let shift = m.bits().saturating_sub(64);
    (m >> shift).to_f64().expect("64-bit").log2() + shift as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaStatsConfig {
    pub paths: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Defaults to [`ThetaConstruction::default_horizon`].
    pub horizon: Option<usize>,
    pub bins: usize,
    pub first_window: f64,
    pub second_window: f64,
    /// Defaults to `2/q_N`.
    pub eps: Option<f64>,
}

impl ThetaStatsConfig {
    pub fn new(paths: usize, seed: u64, alpha: f64) -> Self {
        Self {
            paths,
            seed,
            alpha,
            horizon: None,
            bins: 16,
            first_window: 1.0,
            second_window: 0.5,
            eps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaStats {
    pub horizon: usize,
    pub paths: usize,
    pub eps: f64,
    /// Paths whose prefix averages dip under both window thresholds in order.
    pub descending_windows: usize,
    pub dense: usize,
    /// Pooled over all paths and steps.
    pub histogram: Vec<u64>,
    /// Share of the pooled points in the bin containing 0.
    pub zero_bin_share: f64,
    pub mean_weyl_average: f64,
}

pub fn theta_stats(
    theta: &ThetaConstruction,
    cfg: &ThetaStatsConfig,
) -> Result<ThetaStats, ThetaError> {
    if cfg.paths == 0 || cfg.bins == 0 {
        return Err(ThetaError::InvalidArgs(
            "paths and bins must be positive".into(),
        ));
    }
    let horizon = cfg.horizon.unwrap_or_else(|| theta.default_horizon());
    if horizon == 0 {
        return Err(ThetaError::InvalidArgs("horizon must be positive".into()));
    }
    let eps = cfg.eps.unwrap_or(2.0 / theta.last().q as f64);
    let per_path: Vec<(bool, bool, Vec<u64>, f64)> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = PathRng::for_replica(cfg.seed, streams::THETA_PATHS, i);
            let s = theta_series(theta, &mut rng, cfg.alpha, horizon)?;
            Ok((
                stats::descending_prefix_windows(&s, cfg.first_window, cfg.second_window),
                stats::epsilon_dense(&s, eps),
                stats::arc_histogram(&s, cfg.bins)?,
                stats::weyl_average(&s, s.len())?,
            ))
        })
        .collect::<Result<_, ThetaError>>()?;
    let mut histogram = vec![0u64; cfg.bins];
    for (_, _, h, _) in &per_path {
        histogram.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    }
    let total: u64 = histogram.iter().sum();
    Ok(ThetaStats {
        horizon,
        paths: cfg.paths,
        eps,
        descending_windows: per_path.iter().filter(|p| p.0).count(),
        dense: per_path.iter().filter(|p| p.1).count(),
        zero_bin_share: histogram[0] as f64 / total as f64,
        histogram,
        mean_weyl_average: per_path.iter().map(|p| p.3).sum::<f64>() / cfg.paths as f64,
    })
}
