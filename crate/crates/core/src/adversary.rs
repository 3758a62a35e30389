//! Malicious-node behaviors (Gaussian update poisoning, committee
//! collusion) and the exact attack-success-probability calculator.
//!
//! The conspiracy analysis: with `A` participating nodes, committee
//! fraction `p`, and malicious fraction `q`, the attack succeeds when the
//! malicious nodes hold more than half of the `M = ⌊A·p⌋` committee seats.
//! With node performance assumed similar, the seat count is
//! hypergeometric — drawing `M` from `A` of which `K = ⌊A·q⌋` are
//! malicious — so the success probability is the exact upper tail
//! `P[X ≥ ⌊M/2⌋ + 1]`. It is computed from the pmf ratio recurrence
//! around the mode with compensated summation, which stays within 1e-12
//! absolute of exact rational arithmetic on every instance we check.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{ParamError, ParamVector};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("io error: {0}")]
    Io(String),
}

/// Malicious-node behavior knobs for a simulated attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Fraction of community nodes that are malicious.
    pub malicious_fraction: f64,
    /// Standard deviation of the pointwise Gaussian poisoning noise.
    pub noise_sigma: f64,
    /// When set, `noise_sigma` is a multiple of the median honest-delta
    /// coordinate scale, resolved by the harness at experiment start.
    #[serde(default)]
    pub sigma_is_relative: bool,
    /// Malicious committee members assign random high scores (0.90..1.00)
    /// to malicious updates.
    #[serde(default = "default_collusion")]
    pub collusion: bool,
    /// Colluding members additionally report 0 for honest updates.
    #[serde(default)]
    pub suppress_honest: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_collusion() -> bool {
    true
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), AdversaryError> {
        if !(0.0..=1.0).contains(&self.malicious_fraction) || !self.malicious_fraction.is_finite()
        {
            return Err(AdversaryError::InvalidArgument(format!(
                "malicious fraction must lie in [0,1], got {}",
                self.malicious_fraction
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(AdversaryError::InvalidArgument(format!(
                "noise sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    /// Score reported by a colluding committee member: a seeded uniform
    /// draw from [0.90, 1.00) for a malicious update; for an honest update,
    /// the member's honest score, or 0 when honest suppression is on.
    pub fn collusion_score(
        &self,
        is_malicious_update: bool,
        honest_score: f64,
        seed_value: u64,
    ) -> f64 {
        if is_malicious_update {
            seed::rng(seed_value).random_range(0.90..1.00)
        } else if self.suppress_honest {
            0.0
        } else {
            honest_score
        }
    }
}

/// Adds i.i.d. N(0, sigma²) noise to every coordinate, deterministically
/// for a given seed.
pub fn poison_delta(
    delta: &ParamVector,
    sigma: f64,
    seed_value: u64,
) -> Result<ParamVector, AdversaryError> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(AdversaryError::InvalidArgument(format!(
            "sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(delta.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("valid normal");
    let mut rng = seed::rng(seed_value);
    let values = delta
        .values()
        .iter()
        .map(|&v| v + normal.sample(&mut rng))
        .collect();
    Ok(ParamVector::new(values, delta.shape().to_vec())?)
}

/// The (A, p, q) triple of the conspiracy analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackAnalysisQuery {
    /// Participating nodes (A).
    pub nodes: u64,
    /// Committee fraction of the participants (p).
    pub committee_fraction: f64,
    /// Malicious fraction of the participants (q).
    pub malicious_fraction: f64,
}

impl AttackAnalysisQuery {
    fn validate(&self) -> Result<(), AdversaryError> {
        if self.nodes == 0 {
            return Err(AdversaryError::InvalidArgument(
                "node count must be positive".into(),
            ));
        }
        if !self.committee_fraction.is_finite()
            || self.committee_fraction <= 0.0
            || self.committee_fraction > 1.0
        {
            return Err(AdversaryError::InvalidArgument(format!(
                "committee fraction must lie in (0,1], got {}",
                self.committee_fraction
            )));
        }
        if !self.malicious_fraction.is_finite()
            || !(0.0..=1.0).contains(&self.malicious_fraction)
        {
            return Err(AdversaryError::InvalidArgument(format!(
                "malicious fraction must lie in [0,1], got {}",
                self.malicious_fraction
            )));
        }
        Ok(())
    }
}

/// `⌊a·fraction⌋` with a small epsilon so that decimal fractions such as
/// 0.3 × 10 land on the intended integer.
pub fn floor_portion(a: u64, fraction: f64) -> u64 {
    (((a as f64) * fraction + 1e-9).floor() as u64).min(a)
}

/// Exact probability that a disguised malicious coalition wins more than
/// half of the committee seats: `P[X ≥ ⌊M/2⌋+1]` for
/// `X ~ Hypergeometric(A, K=⌊A·q⌋, M=⌊A·p⌋)`.
///
/// ```
/// use bflc_core::adversary::{attack_success_prob, AttackAnalysisQuery};
///
/// // 4 committee seats drawn from 10 nodes, 5 of them malicious:
/// // P[3 or 4 malicious seats] = 11/42
/// let p = attack_success_prob(&AttackAnalysisQuery {
///     nodes: 10,
///     committee_fraction: 0.4,
///     malicious_fraction: 0.5,
/// })
/// .unwrap();
/// assert!((p - 11.0 / 42.0).abs() < 1e-14);
/// ```
pub fn attack_success_prob(query: &AttackAnalysisQuery) -> Result<f64, AdversaryError> {
    query.validate()?;
    let a = query.nodes;
    let m = floor_portion(a, query.committee_fraction);
    let k = floor_portion(a, query.malicious_fraction);
    if m == 0 {
        return Err(AdversaryError::InvalidArgument(format!(
            "committee would be empty: floor({a} × {}) = 0",
            query.committee_fraction
        )));
    }
    let threshold = m / 2 + 1;
    Ok(hypergeometric_upper_tail(a, k, m, threshold))
}

/// `P[X ≥ threshold]` for X ~ Hypergeometric(population, successes, draws).
fn hypergeometric_upper_tail(population: u64, successes: u64, draws: u64, threshold: u64) -> f64 {
    debug_assert!(successes <= population && draws <= population);
    let lo = (draws + successes).saturating_sub(population);
    let hi = draws.min(successes);
    if threshold > hi {
        return 0.0;
    }
    if threshold <= lo {
        return 1.0;
    }

    // Relative pmf weights via the ratio recurrence, seeded at the mode so
    // tails may underflow harmlessly.
    let mode_num = (draws as u128 + 1) * (successes as u128 + 1);
    let mode = ((mode_num / (population as u128 + 2)) as u64).clamp(lo, hi);
    let a = population as f64;
    let k = successes as f64;
    let m = draws as f64;
    let mut weights = vec![0.0f64; (hi - lo + 1) as usize];
    weights[(mode - lo) as usize] = 1.0;
    let mut w = 1.0f64;
    for x in mode..hi {
        let xf = x as f64;
        w *= (k - xf) * (m - xf) / ((xf + 1.0) * (a - k - m + xf + 1.0));
        weights[(x + 1 - lo) as usize] = w;
    }
    w = 1.0;
    for x in ((lo + 1)..=mode).rev() {
        let xf = x as f64;
        w *= xf * (a - k - m + xf) / ((k - xf + 1.0) * (m - xf + 1.0));
        weights[(x - 1 - lo) as usize] = w;
    }

    let total = neumaier_sum(weights.iter().copied());
    let tail = neumaier_sum(weights[(threshold - lo) as usize..].iter().copied());
    (tail / total).clamp(0.0, 1.0)
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Success probabilities over a (p, q) grid, row-major over p then q.
pub fn sweep_success_prob(
    nodes: u64,
    p_grid: &[f64],
    q_grid: &[f64],
) -> Result<Vec<Vec<f64>>, AdversaryError> {
    if p_grid.is_empty() || q_grid.is_empty() {
        return Err(AdversaryError::InvalidArgument(
            "probability grids must be nonempty".into(),
        ));
    }
    p_grid
        .iter()
        .map(|&p| {
            q_grid
                .iter()
                .map(|&q| {
                    attack_success_prob(&AttackAnalysisQuery {
                        nodes,
                        committee_fraction: p,
                        malicious_fraction: q,
                    })
                })
                .collect()
        })
        .collect()
}

/// Sweep emitted as CSV: header `p,q,probability`, probabilities printed
/// with 12 significant digits.
pub fn write_sweep_csv<W: Write>(
    mut w: W,
    nodes: u64,
    p_grid: &[f64],
    q_grid: &[f64],
) -> Result<(), AdversaryError> {
    let matrix = sweep_success_prob(nodes, p_grid, q_grid)?;
    writeln!(w, "p,q,probability").map_err(|e| AdversaryError::Io(e.to_string()))?;
    for (pi, &p) in p_grid.iter().enumerate() {
        for (qi, &q) in q_grid.iter().enumerate() {
            writeln!(w, "{},{},{}", p, q, format_significant(matrix[pi][qi], 12))
                .map_err(|e| AdversaryError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

/// Plain-decimal formatting with the given number of significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    format!("{:.*}", decimals, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(nodes: u64, p: f64, q: f64) -> AttackAnalysisQuery {
        AttackAnalysisQuery {
            nodes,
            committee_fraction: p,
            malicious_fraction: q,
        }
    }

    #[test]
    fn poison_sigma_zero_is_identity() {
        let delta = ParamVector::flat(vec![1.0, -2.0, 3.0]).unwrap();
        assert_eq!(poison_delta(&delta, 0.0, 7).unwrap(), delta);
    }

    #[test]
    fn poison_is_seed_deterministic() {
        let delta = ParamVector::flat(vec![0.5; 32]).unwrap();
        let a = poison_delta(&delta, 2.0, 9).unwrap();
        let b = poison_delta(&delta, 2.0, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, poison_delta(&delta, 2.0, 10).unwrap());
    }

    #[test]
    fn poison_noise_variance_matches_sigma() {
        let n = 100_000;
        let sigma = 1.7;
        let delta = ParamVector::flat(vec![0.0; n]).unwrap();
        let noisy = poison_delta(&delta, sigma, 123).unwrap();
        let mean: f64 = noisy.values().iter().sum::<f64>() / n as f64;
        let var: f64 = noisy
            .values()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n as f64;
        assert!(
            (var - sigma * sigma).abs() < 0.05 * sigma * sigma,
            "sample variance {var} vs sigma² {}",
            sigma * sigma
        );
    }

    #[test]
    fn collusion_score_modes() {
        let cfg = AttackConfig {
            malicious_fraction: 0.3,
            noise_sigma: 1.0,
            sigma_is_relative: false,
            collusion: true,
            suppress_honest: false,
            seed: 0,
        };
        for seed_value in 0..50 {
            let s = cfg.collusion_score(true, 0.2, seed_value);
            assert!((0.90..1.00).contains(&s), "score {s} out of range");
        }
        assert_eq!(cfg.collusion_score(true, 0.2, 4), cfg.collusion_score(true, 0.2, 4));
        assert_eq!(cfg.collusion_score(false, 0.42, 1), 0.42);
        let suppress = AttackConfig {
            suppress_honest: true,
            ..cfg
        };
        assert_eq!(suppress.collusion_score(false, 0.42, 1), 0.0);
    }

    #[test]
    fn attack_prob_endpoints() {
        assert_eq!(attack_success_prob(&query(1000, 0.1, 0.0)).unwrap(), 0.0);
        assert_eq!(attack_success_prob(&query(1000, 0.1, 1.0)).unwrap(), 1.0);
    }

    #[test]
    fn attack_prob_small_case_is_eleven_forty_seconds() {
        // A=10, p=0.4, q=0.5: draws 4 from 10 with 5 malicious,
        // success needs ≥ 3 seats; exact value 11/42
        let p = attack_success_prob(&query(10, 0.4, 0.5)).unwrap();
        assert!((p - 11.0 / 42.0).abs() < 1e-14, "got {p}");
    }

    #[test]
    fn empty_committee_is_invalid() {
        assert!(matches!(
            attack_success_prob(&query(10, 0.05, 0.5)),
            Err(AdversaryError::InvalidArgument(_))
        ));
        assert!(attack_success_prob(&query(0, 0.5, 0.5)).is_err());
    }

    #[test]
    fn fraction_discretization_is_exact_on_decimals() {
        assert_eq!(floor_portion(10, 0.3), 3);
        assert_eq!(floor_portion(10, 0.29), 2);
        assert_eq!(floor_portion(1000, 0.1), 100);
        assert_eq!(floor_portion(7, 1.0), 7);
    }

    #[test]
    fn monotone_in_malicious_fraction() {
        let mut last = 0.0;
        for step in 0..=20 {
            let q = step as f64 / 20.0;
            let p = attack_success_prob(&query(200, 0.2, q)).unwrap();
            assert!(
                p >= last - 1e-15,
                "probability decreased at q={q}: {p} < {last}"
            );
            last = p;
        }
    }

    #[test]
    fn symmetry_identity_at_half_malicious() {
        // K = A/2 makes the pmf symmetric: P[X ≥ M/2+1] = (1 − P[X = M/2])/2.
        // pmf(50) computed independently from a log-factorial table.
        let a = 1000u64;
        let m = 100u64;
        let k = 500u64;
        let mut ln_fact = vec![0.0f64; (a + 1) as usize];
        for i in 1..=a as usize {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        let ln_choose = |n: u64, r: u64| -> f64 {
            ln_fact[n as usize] - ln_fact[r as usize] - ln_fact[(n - r) as usize]
        };
        let pmf50 =
            (ln_choose(k, 50) + ln_choose(a - k, m - 50) - ln_choose(a, m)).exp();
        let expected = 0.5 * (1.0 - pmf50);
        let got = attack_success_prob(&query(a, 0.1, 0.5)).unwrap();
        assert!(
            (got - expected).abs() < 1e-9,
            "got {got}, symmetry predicts {expected}"
        );
    }

    #[test]
    fn sweep_single_cell_matches_scalar() {
        let matrix = sweep_success_prob(50, &[0.2], &[0.5]).unwrap();
        assert_eq!(matrix.len(), 1);
        assert_eq!(
            matrix[0][0],
            attack_success_prob(&query(50, 0.2, 0.5)).unwrap()
        );
    }

    #[test]
    fn sweep_rows_nondecreasing_in_q() {
        let q_grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let matrix = sweep_success_prob(300, &[0.1, 0.3, 0.5], &q_grid).unwrap();
        for row in &matrix {
            for pair in row.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-15);
            }
        }
    }

    #[test]
    fn sweep_csv_layout() {
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, 10, &[0.4], &[0.0, 0.5]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "p,q,probability");
        assert_eq!(lines[1], "0.4,0,0");
        assert_eq!(lines[2], "0.4,0.5,0.261904761905");
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(0.0, 12), "0");
        assert_eq!(format_significant(11.0 / 42.0, 12), "0.261904761905");
        assert_eq!(format_significant(1.0, 12), "1.00000000000");
        assert_eq!(format_significant(0.25, 3), "0.250");
    }
}
