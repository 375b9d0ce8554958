//! The level-jump row sampler against residues read off fully walked paths.

use pascal_adic::pascal_path::sample_with;
use pascal_adic::residue_engine::{Prime, RowRule};
use pascal_adic::rng::PathRng;
use pascal_adic::row_sampler::RowSampler;
use pascal_adic::stats::residue_hit_levels;

const SAMPLES: usize = 20_000;

/// Per-level class frequencies, `freq[level - 1][class]`.
fn frequencies(rows: &[Vec<u64>], q: u64, levels: u32) -> Vec<Vec<f64>> {
    let mut freq = vec![vec![0.0; q as usize]; levels as usize];
    for row in rows {
        for (j, &c) in row.iter().enumerate() {
            freq[j][c as usize] += 1.0;
        }
    }
    let n = rows.len() as f64;
    freq.iter_mut().flatten().for_each(|f| *f /= n);
    freq
}

fn walked(q: Prime, rule: RowRule, alpha: f64, levels: u32, seed: u64) -> Vec<Vec<u64>> {
    let len = rule.row(q, levels).unwrap() as usize;
    let mut rng = PathRng::new(seed);
    (0..SAMPLES)
        .map(|_| {
            let prefix = sample_with(&mut rng, alpha, len);
            let hits = residue_hit_levels(&prefix, q, levels, rule).unwrap();
            (1..=levels).map(|l| hits.class_at(l)).collect()
        })
        .collect()
}

fn jumped(q: Prime, rule: RowRule, alpha: f64, levels: u32, seed: u64) -> Vec<Vec<u64>> {
    let sampler = RowSampler::new(q, rule, alpha, levels).unwrap();
    let mut rng = PathRng::new(seed);
    (0..SAMPLES)
        .map(|_| {
            let mut out = Vec::new();
            sampler.sample_into(&mut rng, &mut out);
            out
        })
        .collect()
}

/// Two independent proportions agree within `z` pooled standard errors.
fn agree(a: f64, b: f64, z: f64) -> bool {
    let p = (a + b) / 2.0;
    let se = (2.0 * p * (1.0 - p) / SAMPLES as f64).sqrt().max(1e-9);
    (a - b).abs() <= z * se
}

fn compare(q: u64, rule: RowRule, alpha: f64, levels: u32) {
    let qp = Prime::new(q).unwrap();
    let w = frequencies(&walked(qp, rule, alpha, levels, 11), q, levels);
    let j = frequencies(&jumped(qp, rule, alpha, levels, 12), q, levels);
    for l in 0..levels as usize {
        for c in 0..q as usize {
            assert!(
                agree(w[l][c], j[l][c], 4.5),
                "q={q} {rule:?} α={alpha} level {} class {c}: walk {} jump {}",
                l + 1,
                w[l][c],
                j[l][c]
            );
        }
    }
}

#[test]
fn level_marginals_match_for_the_default_rule() {
    compare(3, RowRule::QPowMinusTwo, 0.5, 5);
    compare(3, RowRule::QPowMinusTwo, 0.3, 4);
    compare(5, RowRule::QPowMinusTwo, 0.5, 3);
}

#[test]
fn level_marginals_match_for_the_full_power_rule() {
    compare(2, RowRule::QPow, 0.1, 3);
    compare(3, RowRule::QPow, 0.05, 2);
}

#[test]
fn union_and_pair_events_match() {
    let q = Prime::new(3).unwrap();
    let (alpha, levels) = (0.5, 5);
    let w = walked(q, RowRule::QPowMinusTwo, alpha, levels, 21);
    let j = jumped(q, RowRule::QPowMinusTwo, alpha, levels, 22);
    let frac = |rows: &[Vec<u64>], f: &dyn Fn(&[u64]) -> bool| {
        rows.iter().filter(|r| f(r)).count() as f64 / rows.len() as f64
    };
    for p in 0..3u64 {
        let union = |r: &[u64]| r.contains(&p);
        assert!(
            agree(frac(&w, &union), frac(&j, &union), 4.5),
            "union p={p}"
        );
        for r in 0..3u64 {
            let pair = |x: &[u64]| x[1] == r && x[4] == p;
            assert!(
                agree(frac(&w, &pair), frac(&j, &pair), 4.5),
                "pair p={p} r={r}"
            );
        }
    }
}
