//! Exhaustive-enumeration oracle for the attack-success probability: for
//! small A, iterate every committee draw and count the ones where the
//! malicious coalition holds a strict majority. Pure counting, independent
//! of the library's recurrence computation.

use bflc_core::adversary::{attack_success_prob, floor_portion, AttackAnalysisQuery};

/// Counts committees of size `m` (bitmasks over `a` nodes, the first `k`
/// of which are malicious) holding more than m/2 malicious seats.
/// Returns (success draws, total draws).
fn enumerate_success(a: u32, k: u32, m: u32) -> (u64, u64) {
    assert!(a <= 20, "enumeration oracle is for small populations");
    let threshold = m / 2 + 1;
    let malicious_mask: u32 = (1u32 << k) - 1;
    let mut total = 0u64;
    let mut success = 0u64;
    for mask in 0u32..(1 << a) {
        if mask.count_ones() != m {
            continue;
        }
        total += 1;
        if (mask & malicious_mask).count_ones() >= threshold {
            success += 1;
        }
    }
    (success, total)
}

fn query(nodes: u64, p: f64, q: f64) -> AttackAnalysisQuery {
    AttackAnalysisQuery {
        nodes,
        committee_fraction: p,
        malicious_fraction: q,
    }
}

#[test]
fn ten_nodes_case_is_eleven_forty_seconds() {
    // A=10, p=0.4, q=0.5: C(10,4) = 210 draws, 55 with ≥3 malicious
    let (success, total) = enumerate_success(10, 5, 4);
    assert_eq!((success, total), (55, 210));
    assert_eq!(success * 42, total * 11); // 55/210 = 11/42
    let got = attack_success_prob(&query(10, 0.4, 0.5)).unwrap();
    let exact = success as f64 / total as f64;
    assert!((got - exact).abs() < 1e-15, "got {got}, oracle {exact}");
}

#[test]
fn matches_enumeration_on_small_grid() {
    for a in 2u64..=16 {
        for pi in 1..=9u64 {
            for qi in 0..=10u64 {
                let p = pi as f64 / 10.0;
                let q = qi as f64 / 10.0;
                let m = floor_portion(a, p);
                if m == 0 {
                    assert!(attack_success_prob(&query(a, p, q)).is_err());
                    continue;
                }
                let k = floor_portion(a, q);
                let (success, total) = enumerate_success(a as u32, k as u32, m as u32);
                let exact = success as f64 / total as f64;
                let got = attack_success_prob(&query(a, p, q)).unwrap();
                assert!(
                    (got - exact).abs() < 1e-13,
                    "A={a} p={p} q={q}: got {got}, oracle {exact}"
                );
            }
        }
    }
}

#[test]
fn figure_three_shape_sharp_transition_near_half() {
    // fixed A=1000: a committee takeover is negligible below q=0.5 and
    // near-certain above it
    for pi in 1..=5u64 {
        let p = pi as f64 / 10.0;
        let below = attack_success_prob(&query(1000, p, 0.4)).unwrap();
        let above = attack_success_prob(&query(1000, p, 0.6)).unwrap();
        assert!(below < 0.02, "p={p}: q=0.4 gave {below}");
        assert!(above > 0.95, "p={p}: q=0.6 gave {above}");
    }
}

#[test]
fn concentration_shrinks_the_tail_for_sub_half_fractions() {
    // for fixed q < 0.5, growing committees make a takeover less likely
    // (checked on a sampled grid against the enumeration regime limits)
    for q in [0.2, 0.3, 0.4] {
        let small = attack_success_prob(&query(1000, 0.02, q)).unwrap();
        let mid = attack_success_prob(&query(1000, 0.1, q)).unwrap();
        let large = attack_success_prob(&query(1000, 0.4, q)).unwrap();
        assert!(
            small >= mid && mid >= large,
            "q={q}: {small} -> {mid} -> {large} not nonincreasing"
        );
    }
}
