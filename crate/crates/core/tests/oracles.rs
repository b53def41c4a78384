//! Checks against independent computations: exhaustive enumeration of the
//! direct attack and brute-force Poisson summations.

#![allow(clippy::excessive_precision)]

use bb84_eve::analytic::{
    e_t_hat_attacked, errors_baseline, eve_information, full_report, n_hat_attacked, sifted_bits_baseline, solve_p_b,
    solve_p_m, AttackMode,
};
use bb84_eve::strategy::{AlwaysSucceed, DirectAttackStrategy, DEFAULT_L_MAX};
use bb84_eve::{build_default_table, poisson_pmf, psi_tail, AttackPlan, DirectAttackTable, SystemParams};
use proptest::prelude::*;

/// Success probability of the conclusive-exclusion measurement as an exact
/// fraction `numerator / 4^l`, found by walking every basis assignment and
/// every outcome string.
///
/// Alice's state is fixed to bit 0 in her basis. Photons measured in her
/// basis always read 0; photons measured in the other basis read a fair coin.
fn enumerate_conclusive(l: u32) -> (u64, u64) {
    let mut numerator = 0u64;
    for wrong_mask in 0u32..(1 << l) {
        for outcomes in 0u32..(1 << l) {
            // Right-basis photons can only read 0.
            if outcomes & !wrong_mask != 0 {
                continue;
            }
            let k = wrong_mask.count_ones();
            let wrong_outcomes = outcomes & wrong_mask;
            let disagree = wrong_outcomes != 0 && wrong_outcomes != wrong_mask;
            let has_right = k < l;
            if disagree && has_right {
                // Weight 2^-l for the bases times 2^-k for the coin flips,
                // over the common denominator 4^l.
                numerator += 1 << (l - k);
            }
        }
    }
    (numerator, 1 << (2 * l))
}

#[test]
fn enumeration_matches_table_exactly() {
    let table = build_default_table(DEFAULT_L_MAX).unwrap();
    assert_eq!(table.probs[2], 0.0);
    for l in 3..=8u32 {
        let (num, den) = enumerate_conclusive(l);
        let exact = num as f64 / den as f64;
        assert_eq!(table.probs[l as usize], exact, "l = {l}");
    }
    assert_eq!(enumerate_conclusive(3), (12, 64));
    assert_eq!(enumerate_conclusive(4), (96, 256));
}

#[test]
fn enumeration_finds_nothing_below_three_photons() {
    for l in 0..=2 {
        assert_eq!(enumerate_conclusive(l).0, 0);
    }
}

/// Direct 200-term Poisson sum of the tail starting at `l`.
fn tail_by_summation(x: f64, l: u64) -> f64 {
    (l..l + 200).map(|j| pmf_independent(x, j)).sum()
}

/// Poisson pmf via `ln Γ` through Stirling series, independent of the
/// library's product/log-factorial split.
fn pmf_independent(x: f64, l: u64) -> f64 {
    let lf = if l < 2 { 0.0 } else { (1..=l).map(|k| (k as f64).ln()).sum::<f64>() };
    (l as f64 * x.ln() - x - lf).exp()
}

#[test]
fn tail_matches_partial_sums() {
    let cases = [(0.005, 1, 0.004_987_520_807_317_686_6), (1.0, 3, 0.080_301_397_071_394_196)];
    for (x, l, want) in cases {
        let got = psi_tail(x, l).unwrap();
        let partial = 1.0 - (0..l).map(|j| pmf_independent(x, j)).sum::<f64>();
        assert!((got - want).abs() < 1e-14);
        assert!((got - partial).abs() < 1e-14);
    }
}

#[test]
fn poisson_normalization_grid() {
    for mu in [0.01, 0.1, 0.5, 1.0, 5.0, 20.0] {
        let upper = (mu + 20.0 * f64::sqrt(mu) + 30.0).ceil() as u64;
        let total: f64 = (0..=upper).map(|l| poisson_pmf(mu, l).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10, "mu = {mu}: {total}");
    }
}

#[test]
fn tail_equals_upper_sum_grid() {
    for x in [0.01, 0.1, 0.5, 1.0, 5.0, 20.0] {
        for l in 0..12 {
            let direct = psi_tail(x, l).unwrap();
            let summed: f64 = (l..l + 400).map(|j| poisson_pmf(x, j).unwrap()).sum();
            assert!((direct - summed).abs() < 1e-12, "x = {x}, l = {l}: {direct} vs {summed}");
        }
    }
}

#[test]
fn tail_strictly_decreasing_in_l() {
    for x in [0.01, 0.1, 0.5, 1.0, 5.0, 20.0] {
        let mut prev = psi_tail(x, 0).unwrap();
        for l in 1..200 {
            let cur = psi_tail(x, l).unwrap();
            if cur <= 1e-300 {
                break;
            }
            assert!(cur < prev, "x = {x}, l = {l}");
            prev = cur;
        }
    }
}

#[test]
fn z_e_against_summation_oracle() {
    let table = build_default_table(DEFAULT_L_MAX).unwrap();
    let oracle: f64 = (3..200u64).map(|l| pmf_independent(0.5, l) * ConclusiveOracle::prob(l)).sum();
    assert!((table.z_e(0.5).unwrap() - oracle).abs() < 1e-12);

    let always = AlwaysSucceed.build_table(DEFAULT_L_MAX).unwrap();
    assert!((always.z_e(1.0).unwrap() - tail_by_summation(1.0, 3)).abs() < 1e-14);
}

struct ConclusiveOracle;

impl ConclusiveOracle {
    /// Closed form evaluated in long form; past 30 photons the pmf weight is
    /// negligible at the means used here, so it saturates.
    fn prob(l: u64) -> f64 {
        let l = l.min(30);
        let mut total = 0.0;
        for k in 2..l {
            let mut c = 1.0;
            for i in 0..k {
                c = c * (l - i) as f64 / (i + 1) as f64;
            }
            total += c / 2f64.powi(l as i32) * (1.0 - 2f64.powi(1 - k as i32));
        }
        total
    }
}

#[test]
fn z_e_bounded_by_three_photon_tail_and_monotone() {
    let default = build_default_table(DEFAULT_L_MAX).unwrap();
    let always = AlwaysSucceed.build_table(DEFAULT_L_MAX).unwrap();
    let custom = DirectAttackTable::new("c", vec![0.0, 0.0, 0.0, 0.9, 0.1, 0.5]).unwrap();
    let mut prev = 0.0;
    for i in 1..=500 {
        let mu = 0.01 * i as f64;
        let bound = psi_tail(mu, 3).unwrap();
        for t in [&default, &always] {
            assert!(t.z_e(mu).unwrap() <= bound * (1.0 + 1e-12));
        }
        assert!(custom.z_e_with_tolerance(mu, 1.0).unwrap() <= bound);
        let z = default.z_e(mu).unwrap();
        assert!(z >= prev, "mu = {mu}");
        prev = z;
    }
}

#[test]
fn zero_yield_blocking_sign_from_high_precision() {
    // 50-digit evaluation gives -0.05228063941824899...
    let p = SystemParams::new(0.1, 0.01, 0.5, 0.01, 1_000_000).unwrap();
    let p_b = solve_p_b(&p, 0.0).unwrap();
    assert!(p_b < 0.0);
    assert!((p_b + 0.052_280_639_418_248_993).abs() < 1e-13);
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

fn scenario() -> impl Strategy<Value = SystemParams> {
    (-4.6f64..1.6, -5.3f64..0.0, 0.05f64..1.0, 0.0f64..0.2, 1u64..10_000_000)
        .prop_map(|(ln_mu, ln_alpha, eta, r_c, m)| SystemParams::new(ln_mu.exp(), ln_alpha.exp(), eta, r_c, m).unwrap())
}

proptest! {
    #[test]
    fn count_rate_closure(p in scenario()) {
        let table = build_default_table(DEFAULT_L_MAX).unwrap();
        let z = table.z_e(p.mu()).unwrap();
        let p_b = solve_p_b(&p, z).unwrap();
        prop_assert!(rel(n_hat_attacked(&p, p_b, z), sifted_bits_baseline(&p)) < 1e-12);
    }

    #[test]
    fn error_rate_closure(p in scenario(), p_b in 0.0f64..0.99) {
        let p_m = solve_p_m(&p, p_b).unwrap();
        prop_assert!(rel(e_t_hat_attacked(&p, p_b, p_m), errors_baseline(&p)) < 1e-12);
    }

    #[test]
    fn eve_never_knows_more_than_bob_receives(p in scenario(), p_b in 0.0f64..1.0, p_m in 0.0f64..1.0) {
        let table = build_default_table(DEFAULT_L_MAX).unwrap();
        let z = table.z_e(p.mu()).unwrap();
        let s = eve_information(&p, &AttackPlan::new(p_b, p_m), z);
        prop_assert!(s <= n_hat_attacked(&p, p_b, z) * (1.0 + 1e-14));
        prop_assert!(s >= 0.0);
    }

    #[test]
    fn feasible_matched_attack_yields_less(p in scenario()) {
        let table = build_default_table(DEFAULT_L_MAX).unwrap();
        let matched = full_report(&p, &table, AttackMode::Matched).unwrap();
        let loose = full_report(&p, &table, AttackMode::ErrorOnly).unwrap();
        if matched.plan.is_feasible() && loose.plan.is_feasible() {
            prop_assert!(matched.s_partial <= loose.s_partial * (1.0 + 1e-14));
        }
    }

    #[test]
    fn counts_scale_linearly_in_block_size(p in scenario(), k in 2u64..50) {
        let table = build_default_table(DEFAULT_L_MAX).unwrap();
        let big = p.with_m(p.m() * k).unwrap();
        for mode in AttackMode::ALL {
            let a = full_report(&p, &table, mode).unwrap();
            let b = full_report(&big, &table, mode).unwrap();
            let k = k as f64;
            prop_assert!(rel(b.n, k * a.n) < 1e-14);
            prop_assert!(rel(b.n_hat, k * a.n_hat) < 1e-14);
            prop_assert!(rel(b.e_t, k * a.e_t) < 1e-14);
            prop_assert!(rel(b.e_t_hat, k * a.e_t_hat) < 1e-14);
            prop_assert!(rel(b.s_partial, k * a.s_partial) < 1e-14);
            prop_assert_eq!(a.plan, b.plan);
        }
    }

    #[test]
    fn tail_increasing_in_mean(x in 1e-3f64..30.0, l in 1u64..6) {
        prop_assert!(psi_tail(x * 1.01, l).unwrap() > psi_tail(x, l).unwrap());
    }
}
