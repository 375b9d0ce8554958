//! Acceptance suite. Each test writes one `criterion N: PASS|FAIL` line to
//! stderr (bypassing the test harness capture) and then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use pascal_adic::diophantine::{search_pow2_sum_pow3, SolutionRecord};
use pascal_adic::gasket::{
    self, line_segment_measure, rat, subdivide, LineSpec, Rational, Triangle,
};
use pascal_adic::pascal_path::{sample_with, BinomialTracker};
use pascal_adic::residue_engine::{
    kummer_carries, legendre_valuation, lucas_residue, row_formula_residue, window_residue_count,
    Prime,
};
use pascal_adic::rng::PathRng;
use pascal_adic::stats::{self, streams};
use pascal_adic::theta_lab::{
    build_theta, frac_fixed_point, frac_via_residue, theta_stats, BuildConfig, CalibrationMode,
    DeltaMode, FixedPointReal, NestingPolicy, ThetaStatsConfig,
};

const SEED: u64 = 20_240_601;

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "criterion {criterion:>2}: {verdict}  {detail}"
    );
}

fn prime(q: u64) -> Prime {
    Prime::new(q).unwrap()
}

#[test]
fn criterion_01_lucas_and_kummer_match_oracles() {
    let start = Instant::now();
    let primes = [2u64, 3, 5, 7, 11];
    let mut mismatches = 0u64;
    let mut checked = 0u64;
    let mut row = vec![BigUint::from(1u32)];
    for n in 0..=300u64 {
        for (k, c) in row.iter().enumerate() {
            let k = k as u64;
            for &qv in &primes {
                let q = prime(qv);
                let exact = (c % qv).to_u64().unwrap();
                let res = lucas_residue(n, k, q).unwrap();
                let carries = kummer_carries(n, k, q).unwrap();
                let val = legendre_valuation(n, k, q).unwrap();
                if res != exact || carries != val || (res == 0) != (val >= 1) {
                    mismatches += 1;
                }
                checked += 1;
            }
        }
        let mut next = vec![BigUint::from(1u32); row.len() + 1];
        for i in 1..row.len() {
            next[i] = &row[i - 1] + &row[i];
        }
        row = next;
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(10);
    report(
        1,
        pass,
        &format!("{checked} (n,k,q) triples, {mismatches} mismatches, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_row_closed_form_matches_pascal_recurrence() {
    let start = Instant::now();
    let cases: [(u64, u32); 4] = [(2, 12), (3, 8), (5, 5), (7, 4)];
    let mut mismatches = 0u64;
    let mut checked = 0u64;
    for (qv, n_max) in cases {
        let q = prime(qv);
        let targets: Vec<(u32, u64)> = (1..=n_max).map(|n| (n, qv.pow(n) - 2)).collect();
        let last = targets.last().unwrap().1;
        let mut row = vec![1u64];
        for r in 0..=last {
            for &(n, target) in &targets {
                if target == r {
                    for (k, &v) in row.iter().enumerate() {
                        checked += 1;
                        if row_formula_residue(q, n, k as u64).unwrap() != v {
                            mismatches += 1;
                        }
                    }
                }
            }
            let mut next = vec![1u64; row.len() + 1];
            for i in 1..row.len() {
                next[i] = (row[i - 1] + row[i]) % qv;
            }
            row = next;
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(30);
    report(
        2,
        pass,
        &format!("{checked} row entries, {mismatches} mismatches, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_every_window_holds_two_of_each_class() {
    let mut windows = 0u64;
    let mut bad = 0u64;
    for qv in [2u64, 3, 5] {
        let q = prime(qv);
        let mut n = 1;
        while qv.pow(n) <= 2200 {
            let row = qv.pow(n) - 2;
            if row + 1 >= 2 * qv {
                for k in 0..=row + 1 - 2 * qv {
                    for p in 0..qv {
                        windows += 1;
                        if window_residue_count(q, n, k, p).unwrap() != 2 {
                            bad += 1;
                        }
                    }
                }
            }
            n += 1;
        }
    }
    let pass = bad == 0 && windows > 0;
    report(
        3,
        pass,
        &format!("{windows} (window, class) pairs, {bad} without exactly two"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_gasket_diagonal_halves_exactly() {
    let diagonal = LineSpec::new(rat(1, 1), rat(0, 1)).unwrap();
    let ratios = gasket::gasket_line_ratios(2, 12, &diagonal).unwrap();
    let halving = ratios
        .iter()
        .enumerate()
        .all(|(n, r)| *r == Rational::new(BigInt::from(1), BigInt::from(1u64 << n)));

    // area exactness on every subdivision performed along the way
    let mut frontier = vec![Triangle::unit()];
    let mut subdivisions = 0u64;
    let mut area_ok = true;
    for _ in 0..12 {
        let mut next = Vec::new();
        for t in &frontier {
            let (lo, up) = subdivide(t, 2).unwrap();
            subdivisions += 1;
            let sum = lo
                .iter()
                .chain(&up)
                .map(Triangle::area)
                .fold(Rational::zero(), |a, b| a + b);
            area_ok &= sum == t.area();
            next.extend(
                lo.into_iter()
                    .filter(|c| line_segment_measure(c, &diagonal) > Rational::zero()),
            );
        }
        frontier = next;
    }
    let pass = halving && area_ok;
    report(
        4,
        pass,
        &format!("ratio(n) = 2^-n for n <= 12: {halving}; {subdivisions} subdivisions area-exact: {area_ok}"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_gasket_ratios_decay() {
    let start = Instant::now();
    let mut ok = true;
    let mut finals = Vec::new();
    for (gn, gd) in [(1i64, 2i64), (1, 1), (2, 1)] {
        for q in [2u32, 3] {
            let line = LineSpec::new(rat(gn, gd), rat(0, 1)).unwrap();
            let ratios = gasket::gasket_line_ratios(q, 12, &line).unwrap();
            let monotone = ratios.windows(2).all(|w| w[1] <= w[0]);
            let last = gasket::to_f64(&ratios[12]);
            ok &= monotone && last < 0.05;
            finals.push(format!("γ={gn}/{gd},q={q}:{last:.4}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = ok && elapsed < Duration::from_secs(60);
    report(
        5,
        pass,
        &format!("ratio(12) {}; {elapsed:.2?}", finals.join(" ")),
    );
    assert!(pass);
}

#[test]
fn criterion_06_divisible_fraction_tends_to_one() {
    let mut ok = true;
    let mut details = Vec::new();
    for qv in [2u64, 3] {
        let curve = stats::divisibility_curve(prime(qv), 0.5, SEED, 200, &[2000, 20000]).unwrap();
        let (early, late) = (curve[0].value, curve[1].value);
        ok &= late >= 0.85 && late > early;
        details.push(format!(
            "q={qv}: mean {early:.4} at 2000, {late:.4} at 20000"
        ));
    }
    report(6, ok, &details.join("; "));
    assert!(ok);
}

#[test]
fn criterion_07_class_masses_within_displacement_bound() {
    let cm = stats::class_masses(prime(3), 8, 0.5).unwrap();
    let bound = 6.0 * cm.max_point_mass;
    let worst = cm
        .masses
        .iter()
        .map(|m| (m - 1.0 / 3.0).abs())
        .fold(0.0, f64::max);
    let total: f64 = cm.masses.iter().sum();
    let pass = worst <= bound && (total - 1.0).abs() <= 1e-12;
    report(
        7,
        pass,
        &format!(
            "masses {:?}, max |m - 1/3| = {worst:.3e} <= {bound:.3e}, sum - 1 = {:.1e}",
            cm.masses,
            total - 1.0
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_mixing_limit() {
    let mut ok = true;
    let mut details = Vec::new();
    for p in 0..3 {
        let e = stats::mixing_pair_estimate(prime(3), p, 1, 2, 7, 10_000, 0.5, SEED).unwrap();
        let z = e.discrepancy(3).abs() / e.stderr;
        ok &= e.discrepancy(3).abs() <= 3.0 * e.stderr;
        details.push(format!(
            "p={p}: joint {:.4}, marginal/3 {:.4}, {z:.2} SE",
            e.joint,
            e.marginal / 3.0
        ));
    }
    report(8, ok, &details.join("; "));
    assert!(ok);
}

#[test]
fn criterion_09_sweep_out_masses() {
    let mut ok = true;
    let mut details = Vec::new();
    for p in 0..3 {
        let masses = stats::sweep_out_mass(prime(3), p, 8, 10_000, 0.5, SEED).unwrap();
        let monotone = masses.windows(2).all(|w| w[0].value <= w[1].value);
        let last = masses.last().unwrap().value;
        ok &= monotone && last >= 0.95;
        details.push(format!(
            "p={p}: {last:.4}{}",
            if monotone { "" } else { " (not monotone)" }
        ));
    }
    report(9, ok, &format!("union mass at R=8 {}", details.join(", ")));
    assert!(ok);
}

#[test]
fn criterion_10_constructed_theta_is_dense_but_not_uniform() {
    let runs = [
        (vec![2u64, 3], DeltaMode::Strict),
        (vec![3u64, 5, 7], DeltaMode::Relaxed),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (primes, delta) in runs {
        let mut cfg = BuildConfig::new(primes.clone(), 0.5, SEED);
        cfg.mode = CalibrationMode::Sweep;
        cfg.delta_mode = delta;
        cfg.policy = NestingPolicy::Tail;
        let theta = build_theta(&cfg).unwrap();
        let st = theta_stats(&theta, &ThetaStatsConfig::new(100, SEED, 0.5)).unwrap();
        let uniform = 1.0 / st.histogram.len() as f64;
        let a = st.descending_windows >= 95;
        let b = st.dense >= 95;
        let c = st.zero_bin_share >= 2.0 * uniform;
        ok &= a && b && c;
        let rs: Vec<u32> = theta.stages.iter().map(|s| s.r).collect();
        details.push(format!(
            "primes {primes:?} R {rs:?} horizon {}: windows {}/100, dense {}/100 at eps {:.3}, bin0 {:.3} vs {:.3}",
            st.horizon, st.descending_windows, st.dense, st.eps, st.zero_bin_share, 2.0 * uniform
        ));
    }
    report(10, ok, &details.join("; "));
    assert!(ok);
}

#[test]
fn criterion_11_powers_of_two_as_sums_of_powers_of_three() {
    let start = Instant::now();
    let sols = search_pow2_sum_pow3(60);
    let elapsed = start.elapsed();
    let rendered: Vec<String> = sols.iter().map(SolutionRecord::render).collect();
    let pass =
        rendered == ["1 = 1", "4 = 1+3", "256 = 1+3+9+243"] && elapsed < Duration::from_secs(1);
    report(
        11,
        pass,
        &format!("{} in {elapsed:.2?}", rendered.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_12_fixed_point_matches_residue_route() {
    const PRECISION: u32 = 4096;
    const PATHS: u64 = 100;
    const LEVELS_PER_PATH: usize = 100;
    const LENGTH: usize = 2000;
    let primes = [2u64, 3, 5, 7, 11, 13];
    let mut pairs = 0u64;
    let mut violations = 0u64;
    let mut worst_margin = i64::MAX;
    for path in 0..PATHS {
        let mut rng = PathRng::for_replica(SEED, streams::FIXED_POINT, path);
        let q = primes[(rng.next_u64() % primes.len() as u64) as usize];
        let p = 1 + rng.next_u64() % (q - 1);
        let theta = FixedPointReal::from_ratio(p, q, PRECISION).unwrap();
        let alpha = 0.1 + 0.8 * rng.uniform();
        let prefix = sample_with(&mut rng, alpha, LENGTH);
        let mut levels: Vec<usize> = (0..LEVELS_PER_PATH)
            .map(|_| (rng.next_u64() % (LENGTH as u64 + 1)) as usize)
            .collect();
        levels.sort_unstable();
        let mut tracker = BinomialTracker::root();
        let mut at = 0usize;
        for level in levels {
            while at < level {
                tracker.advance(prefix.bits()[at]);
                at += 1;
            }
            let d = tracker.value();
            let fp = frac_fixed_point(d, &theta).unwrap();
            let exact = frac_via_residue((d % q).to_u64().unwrap(), p, q).unwrap();
            let r = exact.numer() * (q / exact.denom());
            // circular distance |F/2^B - r/q| scaled by q 2^B
            let modulus = BigInt::from(q) << PRECISION;
            let diff = (BigInt::from(fp.value.bits().clone()) * q - (BigInt::from(r) << PRECISION))
                .mod_floor(&modulus);
            let dist = diff.clone().min(&modulus - &diff);
            let bound = BigInt::from(q) << (PRECISION as i64 + fp.log2_error_bound) as u32;
            if dist >= bound {
                violations += 1;
            }
            let dist_bits = if dist.is_zero() {
                0
            } else {
                dist.bits() as i64
            };
            worst_margin = worst_margin.min(bound.bits() as i64 - dist_bits);
            pairs += 1;
        }
    }
    let pass = violations == 0 && pairs == PATHS * LEVELS_PER_PATH as u64;
    report(
        12,
        pass,
        &format!("{pairs} (path, level) pairs, {violations} outside 2^(bitlen(d)-B), tightest margin {worst_margin} bits"),
    );
    assert!(pass);
}
