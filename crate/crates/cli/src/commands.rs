//! One function per subcommand. Each resolves and validates every setting
//! it uses before doing any work.

use num_bigint::BigUint;
use num_traits::Signed;
use pascal_adic::diophantine::{cantor_intersect, search_pow2_sum_pow3, DigitSet};
use pascal_adic::gasket::{gasket_line_ratios, GasketError, LineSpec};
use pascal_adic::residue_engine::{row_formula_residue, window_residue_count, Prime, RowRule};
use pascal_adic::stats::{divisibility_curve, mixing_pair_estimate, streams, FirstHits};
use pascal_adic::theta_lab::{
    build_theta, BuildConfig, CalibrationMode, DeltaMode, NestingPolicy, ThetaConstruction,
    ThetaStatsConfig, MAX_PRECISION,
};
use serde_json::json;

use crate::config::{check_range, range_error, Settings};
use crate::emit::{
    decimal, Artifact, Cell, Table, GASKET_COLUMNS, SIGNIFICANT_DIGITS, STATS_COLUMNS,
};
use crate::CliError;

/// Largest row the Pascal-recurrence oracle of `row-check` will build.
pub const ROW_CHECK_MAX_ROW: u64 = 20_000;

fn run_error(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn stats_row(
    experiment: &str,
    seed: Option<u64>,
    alpha: Option<f64>,
    q: Cell,
    n: impl Into<Cell>,
    statistic: impl Into<String>,
    value: impl Into<Cell>,
    stderr: Option<f64>,
) -> Vec<Cell> {
    vec![
        experiment.into(),
        seed.map_or(Cell::Empty, Cell::from),
        alpha.map_or(Cell::Empty, Cell::from),
        q,
        n.into(),
        Cell::Text(statistic.into()),
        value.into(),
        stderr.map_or(Cell::Empty, Cell::from),
    ]
}

/// Pascal rows mod `q` by the additive recurrence, up to row `n`.
fn pascal_row_mod(n: u64, q: u64) -> Vec<u64> {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(1);
        next.extend(row.windows(2).map(|w| (w[0] + w[1]) % q));
        next.push(1);
        row = next;
    }
    row
}

pub fn row_check(s: &mut Settings) -> Result<Artifact, CliError> {
    let q = s.prime("q", "3")?;
    let n: u32 = s.bounded("n", "8", 1, 64)?;
    let row = RowRule::QPowMinusTwo
        .row(q, n)
        .filter(|&r| r <= ROW_CHECK_MAX_ROW)
        .ok_or_else(|| range_error("n", format!("row {q}^{n}-2 exceeds {ROW_CHECK_MAX_ROW}")))?;

    let oracle = pascal_row_mod(row, q.get());
    let mut mismatches = 0u64;
    for (k, &want) in oracle.iter().enumerate() {
        if row_formula_residue(q, n, k as u64).map_err(run_error)? != want {
            mismatches += 1;
        }
    }
    let qv = q.get();
    let (mut windows, mut window_failures) = (0u64, 0u64);
    if row >= 2 * qv - 1 {
        for k in 0..=row - (2 * qv - 1) {
            for p in 0..qv {
                windows += 1;
                if window_residue_count(q, n, k, p).map_err(run_error)? != 2 {
                    window_failures += 1;
                }
            }
        }
    }

    let verified = oracle.len() as u64 - mismatches;
    let mut table = Table::new(STATS_COLUMNS);
    for (stat, v) in [
        ("verified_entries", verified),
        ("mismatches", mismatches),
        ("windows_checked", windows),
        ("window_failures", window_failures),
    ] {
        table.push(stats_row(
            "row-check",
            None,
            None,
            qv.into(),
            row,
            stat,
            v,
            None,
        ));
    }
    let ok = mismatches == 0 && window_failures == 0;
    let summary = format!(
        "row-check: {} ({verified} verified entries of row {row}, {windows} windows)",
        if ok { "PASS" } else { "FAIL" }
    );
    Ok(Artifact {
        command: "row-check",
        table,
        result: None,
        failure: (!ok)
            .then(|| format!("{mismatches} entry mismatches, {window_failures} window failures")),
        summary,
    })
}

pub fn gasket(s: &mut Settings) -> Result<Artifact, CliError> {
    let q: u32 = s.bounded("q", "2", 2, 64)?;
    let gamma = s.rational("gamma", "1")?;
    if !gamma.is_positive() {
        return Err(range_error("gamma", "must be positive").into());
    }
    let b = s.rational("b", "0")?;
    let n: u32 = s.bounded("n", "12", 0, 40)?;
    let as_config = |e: GasketError| match e {
        GasketError::DegenerateLine => {
            range_error("b", "line misses the interior of the unit triangle")
        }
        other => range_error("gamma", other),
    };
    let line = LineSpec::new(gamma.clone(), b.clone()).map_err(as_config)?;
    let ratios = gasket_line_ratios(q, n, &line).map_err(as_config)?;

    let mut table = Table::new(GASKET_COLUMNS);
    for (level, r) in ratios.iter().enumerate() {
        table.push(vec![
            q.into(),
            Cell::Text(gamma.numer().to_string()),
            Cell::Text(gamma.denom().to_string()),
            Cell::Text(b.numer().to_string()),
            Cell::Text(b.denom().to_string()),
            level.into(),
            Cell::Text(r.numer().to_string()),
            Cell::Text(r.denom().to_string()),
            Cell::Decimal(decimal(r, SIGNIFICANT_DIGITS)),
        ]);
    }
    let monotone = ratios.windows(2).all(|w| w[1] <= w[0]);
    let last = ratios.last().expect("n + 1 ratios");
    Ok(Artifact {
        command: "gasket",
        table,
        result: None,
        summary: format!("gasket: ratio({n}) = {last} ≈ {}", decimal(last, 6)),
        failure: (!monotone).then(|| "ratios are not nonincreasing".to_string()),
    })
}

pub fn divisibility(s: &mut Settings) -> Result<Artifact, CliError> {
    let q = s.prime("q", "2")?;
    let alpha = s.alpha()?;
    let seed = s.seed()?;
    let paths: usize = s.bounded("samples", "200", 1, 1_000_000)?;
    let n: usize = s.bounded("n", "20000", 10, 100_000_000)?;
    let checkpoints: Vec<usize> = (1..=10).map(|i| n * i / 10).collect();
    let curve = divisibility_curve(q, alpha, seed, paths, &checkpoints).map_err(run_error)?;

    let mut table = Table::new(STATS_COLUMNS);
    for (c, e) in checkpoints.iter().zip(&curve) {
        table.push(stats_row(
            "divisibility",
            Some(seed),
            Some(alpha),
            q.get().into(),
            *c,
            "divisible_fraction",
            e.value,
            Some(e.stderr),
        ));
    }
    let last = curve.last().expect("ten checkpoints");
    Ok(Artifact {
        command: "divisibility",
        table,
        result: None,
        summary: format!(
            "divisibility: mean fraction {:.4} ± {:.4} at n = {n}",
            last.value, last.stderr
        ),
        failure: None,
    })
}

pub fn mixing(s: &mut Settings) -> Result<Artifact, CliError> {
    let q = s.prime("q", "3")?;
    let alpha = s.alpha()?;
    let seed = s.seed()?;
    let samples: usize = s.bounded("samples", "10000", 1, 100_000_000)?;
    let r: u64 = s.parsed("r", "1")?;
    check_range("r", r, 0, q.get() - 1)?;
    let n: u32 = s.bounded("n", "7", 2, 64)?;
    let m: u32 = s.bounded("m", "2", 1, n - 1)?;

    let mut table = Table::new(STATS_COLUMNS);
    let mut worst = 0.0f64;
    for p in 0..q.get() {
        let est = mixing_pair_estimate(q, p, r, m, n, samples, alpha, seed).map_err(run_error)?;
        let d = est.discrepancy(q.get());
        if est.stderr > 0.0 {
            worst = worst.max(d.abs() / est.stderr);
        }
        let row = |stat: String, v: f64, se: Option<f64>| {
            stats_row(
                "mixing",
                Some(seed),
                Some(alpha),
                q.get().into(),
                n,
                stat,
                v,
                se,
            )
        };
        table.push(row(format!("joint_p{p}_r{r}_m{m}"), est.joint, None));
        if p == 0 {
            table.push(row(format!("marginal_r{r}_m{m}"), est.marginal, None));
        }
        table.push(row(
            format!("discrepancy_p{p}_r{r}_m{m}"),
            d,
            Some(est.stderr),
        ));
    }
    Ok(Artifact {
        command: "mixing",
        table,
        result: None,
        summary: format!("mixing: largest |joint - marginal/q| is {worst:.2} standard errors"),
        failure: None,
    })
}

pub fn sweep(s: &mut Settings) -> Result<Artifact, CliError> {
    let q = s.prime("q", "3")?;
    let alpha = s.alpha()?;
    let seed = s.seed()?;
    let samples: usize = s.bounded("samples", "10000", 1, 100_000_000)?;
    let r_max: u32 = s.bounded("r", "8", 1, 64)?;
    let rule: RowRule = s.parsed("row-rule", "q^n-2")?;
    let hits = FirstHits::sample(q, rule, alpha, r_max, samples, seed, streams::SWEEP)
        .map_err(|e| range_error("r", e))?;

    let mut table = Table::new(STATS_COLUMNS);
    let mut final_masses = Vec::new();
    for r in 1..=r_max {
        for p in 0..q.get() {
            let e = hits.class_mass(p, r);
            table.push(stats_row(
                "sweep",
                Some(seed),
                Some(alpha),
                q.get().into(),
                r,
                format!("union_mass_p{p}"),
                e.value,
                Some(e.stderr),
            ));
            if r == r_max {
                final_masses.push(e.value);
            }
        }
        let all = hits.all_classes_mass(r);
        table.push(stats_row(
            "sweep",
            Some(seed),
            Some(alpha),
            q.get().into(),
            r,
            "all_classes_mass",
            all.value,
            Some(all.stderr),
        ));
    }
    let masses: Vec<String> = final_masses.iter().map(|m| format!("{m:.4}")).collect();
    Ok(Artifact {
        command: "sweep",
        table,
        result: None,
        summary: format!(
            "sweep: union masses at R = {r_max}: [{}]",
            masses.join(", ")
        ),
        failure: None,
    })
}

fn build_config(s: &mut Settings) -> Result<BuildConfig, CliError> {
    let primes: Vec<u64> = s.list("primes", "2,3")?;
    for &q in &primes {
        Prime::new(q).map_err(|e| range_error("primes", e))?;
    }
    let alpha = s.alpha()?;
    let seed = s.seed()?;
    let mut cfg = BuildConfig::new(primes, alpha, seed);
    cfg.mode = s.parsed::<CalibrationMode>("mode", "sweep")?;
    cfg.delta_mode = s.parsed::<DeltaMode>("delta-mode", "strict")?;
    cfg.policy = s.parsed::<NestingPolicy>("policy", "tail")?;
    cfg.samples = s.optional("samples")?;
    if cfg.samples == Some(0) {
        return Err(range_error("samples", "must be positive").into());
    }
    cfg.r_max = s.optional("rmax")?;
    cfg.horizons = s.optional_list("horizon")?;
    if let Some(h) = &cfg.horizons {
        if h.len() != cfg.primes.len() || h.contains(&0) {
            return Err(range_error("horizon", "need one positive R per prime").into());
        }
    }
    cfg.precision = s.bounded("precision", "8192", 64, MAX_PRECISION)?;
    Ok(cfg)
}

fn construct(cfg: &BuildConfig) -> Result<ThetaConstruction, CliError> {
    build_theta(cfg).map_err(run_error)
}

pub fn theta_build(s: &mut Settings) -> Result<Artifact, CliError> {
    let cfg = build_config(s)?;
    let theta = construct(&cfg)?;
    let mut table = Table::new(&[
        "stage",
        "q",
        "p",
        "r",
        "log2_delta",
        "epsilon",
        "calibrated_mass",
        "honored",
    ]);
    for st in &theta.stages {
        table.push(vec![
            st.index.into(),
            st.q.into(),
            st.p.into(),
            st.r.into(),
            st.log2_delta.into(),
            st.epsilon.into(),
            st.calibrated_mass.into(),
            st.honored.into(),
        ]);
    }
    let summary = theta.summary();
    Ok(Artifact {
        command: "theta-build",
        table,
        result: Some(serde_json::to_value(&summary).map_err(run_error)?),
        summary: format!(
            "theta-build: {} stages, R = {:?}, θ ≈ {:.12} at {} bits",
            theta.stages.len(),
            theta.stages.iter().map(|s| s.r).collect::<Vec<_>>(),
            summary.theta_approx,
            summary.precision
        ),
        failure: None,
    })
}

pub fn theta_stats(s: &mut Settings) -> Result<Artifact, CliError> {
    let cfg = build_config(s)?;
    let paths: usize = s.bounded("paths", "100", 1, 1_000_000)?;
    let mut stats_cfg = ThetaStatsConfig::new(paths, cfg.seed, cfg.alpha);
    if let Some(eps) = s.optional::<f64>("eps")? {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(range_error("eps", format!("{eps} must lie in (0, 1)")).into());
        }
        stats_cfg.eps = Some(eps);
    }
    let theta = construct(&cfg)?;
    stats_cfg.horizon = s.optional("n")?;
    let st =
        pascal_adic::theta_lab::theta_stats(&theta, &stats_cfg).map_err(|e| range_error("n", e))?;

    let primes = cfg
        .primes
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(";");
    let row = |stat: String, v: Cell| {
        stats_row(
            "theta-stats",
            Some(cfg.seed),
            Some(cfg.alpha),
            primes.clone().into(),
            st.horizon,
            stat,
            v,
            None,
        )
    };
    let mut table = Table::new(STATS_COLUMNS);
    table.push(row("paths".into(), st.paths.into()));
    table.push(row("eps".into(), st.eps.into()));
    table.push(row(
        "descending_windows".into(),
        st.descending_windows.into(),
    ));
    table.push(row("dense".into(), st.dense.into()));
    table.push(row("zero_bin_share".into(), st.zero_bin_share.into()));
    table.push(row("mean_weyl_average".into(), st.mean_weyl_average.into()));
    for (i, c) in st.histogram.iter().enumerate() {
        table.push(row(format!("bin_{i:02}"), (*c).into()));
    }
    let uniform = 1.0 / st.histogram.len() as f64;
    Ok(Artifact {
        command: "theta-stats",
        table,
        result: Some(json!({ "theta": theta.summary(), "stats": st })),
        summary: format!(
            "theta-stats: {}/{} descending windows, {}/{} dense at eps {:.4}, zero bin {:.3} ({:.1}x uniform)",
            st.descending_windows,
            st.paths,
            st.dense,
            st.paths,
            st.eps,
            st.zero_bin_share,
            st.zero_bin_share / uniform
        ),
        failure: None,
    })
}

pub fn erdos_search(s: &mut Settings) -> Result<Artifact, CliError> {
    let r_max: u32 = s.bounded("rmax", "60", 0, 100_000)?;
    let solutions = search_pow2_sum_pow3(r_max);
    let mut table = Table::new(&["r", "power", "exponents", "expansion"]);
    for sol in &solutions {
        let exps: Vec<String> = sol.exponents.iter().map(u32::to_string).collect();
        table.push(vec![
            sol.r.into(),
            Cell::Text((BigUint::from(1u32) << sol.r).to_string()),
            Cell::Text(exps.join(" ")),
            Cell::Text(sol.render()),
        ]);
    }
    let rs: Vec<String> = solutions.iter().map(|s| s.r.to_string()).collect();
    Ok(Artifact {
        command: "erdos-search",
        table,
        result: Some(serde_json::to_value(&solutions).map_err(run_error)?),
        summary: format!("erdos-search: r in {{{}}} for r <= {r_max}", rs.join(", ")),
        failure: None,
    })
}

pub fn cantor(s: &mut Settings) -> Result<Artifact, CliError> {
    let bases: Vec<u32> = s.list("primes", "3")?;
    let digits: Option<Vec<u32>> = s.optional_list("digits")?;
    let bound: u64 = s.bounded("bound", "100", 1, u64::MAX)?;
    let sets: Vec<DigitSet> = bases
        .iter()
        .map(|&b| match &digits {
            Some(d) => DigitSet::new(b, d.iter().copied()),
            None => DigitSet::lower_half(b),
        })
        .collect::<Result<_, _>>()
        .map_err(|e| range_error(if digits.is_some() { "digits" } else { "primes" }, e))?;
    let members = cantor_intersect(&sets, &BigUint::from(bound));
    let mut table = Table::new(&["value"]);
    for m in &members {
        table.push(vec![Cell::Text(m.to_string())]);
    }
    Ok(Artifact {
        command: "cantor",
        table,
        result: None,
        summary: format!("cantor: {} members <= {bound}", members.len()),
        failure: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_rows() {
        assert_eq!(pascal_row_mod(4, 7), vec![1, 4, 6, 4, 1]);
        assert_eq!(pascal_row_mod(4, 2), vec![1, 0, 0, 0, 1]);
    }

    #[test]
    fn gasket_rejects_lines_missing_the_triangle() {
        let mut s = Settings::new();
        s.set("b", "2");
        let e = gasket(&mut s).unwrap_err();
        assert!(e.to_string().starts_with("b:"), "{e}");
    }
}
