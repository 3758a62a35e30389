//! Shared fixtures for the criterion benches.

use bflc_core::chain::Chain;
use bflc_core::learning::{generate_synthetic, Dataset};
use bflc_core::{NodeId, ParamVector};
use rand::Rng;

pub fn random_vector(len: usize, seed: u64) -> ParamVector {
    let mut rng = bflc_core::seed::rng(seed);
    ParamVector::flat((0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_deltas(count: usize, len: usize, seed: u64) -> Vec<ParamVector> {
    (0..count)
        .map(|i| random_vector(len, seed.wrapping_add(i as u64)))
        .collect()
}

pub fn bench_dataset(n: usize, seed: u64) -> Dataset {
    generate_synthetic(seed, n, 32, 10, 2.0).unwrap()
}

/// Chain with `rounds` completed rounds of `k` updates over `dim`-long
/// payloads.
pub fn scripted_chain(k: u64, rounds: u64, dim: usize) -> Chain {
    let mut chain = Chain::new(k, random_vector(dim, 0)).unwrap();
    for round in 0..rounds {
        for u in 0..k {
            chain
                .append_update_block(
                    round,
                    random_vector(dim, round * k + u + 1),
                    NodeId(u),
                    0.5,
                )
                .unwrap();
        }
        chain
            .append_model_block(round + 1, random_vector(dim, round + 7000))
            .unwrap();
    }
    chain
}
