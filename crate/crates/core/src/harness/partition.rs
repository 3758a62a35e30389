//! Non-IID data partitioning: per-node Dirichlet class proportions, or
//! label-sorted shards dealt to nodes. Partitions are disjoint, cover the
//! dataset, leave no node empty, and are deterministic given the seed.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};

use crate::learning::Dataset;
use crate::seed;

use super::config::PartitionScheme;
use super::HarnessError;

pub fn partition_data(
    data: &Dataset,
    n_nodes: usize,
    scheme: &PartitionScheme,
    seed_value: u64,
) -> Result<Vec<Dataset>, HarnessError> {
    if n_nodes == 0 {
        return Err(HarnessError::InvalidArgument(
            "at least one node is required".into(),
        ));
    }
    if n_nodes > data.n() {
        return Err(HarnessError::InvalidArgument(format!(
            "cannot split {} samples across {} nodes",
            data.n(),
            n_nodes
        )));
    }
    if n_nodes == 1 {
        return Ok(vec![data.clone()]);
    }

    let mut assignment = match scheme {
        PartitionScheme::Dirichlet { alpha } => {
            dirichlet_assign(data, n_nodes, *alpha, seed_value)?
        }
        PartitionScheme::Shards { shards_per_node } => {
            shard_assign(data, n_nodes, *shards_per_node, seed_value)?
        }
    };
    repair_empty_nodes(&mut assignment);

    let mut out = Vec::with_capacity(n_nodes);
    for rows in &mut assignment {
        rows.sort_unstable();
        out.push(data.subset(rows)?);
    }
    Ok(out)
}

/// Each node draws class proportions from Dirichlet(alpha·1) (via
/// normalized Gamma draws); each class's samples are then dealt to nodes
/// by largest-remainder apportionment over those proportions.
fn dirichlet_assign(
    data: &Dataset,
    n_nodes: usize,
    alpha: f64,
    seed_value: u64,
) -> Result<Vec<Vec<usize>>, HarnessError> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(HarnessError::InvalidArgument(format!(
            "dirichlet alpha must be positive, got {alpha}"
        )));
    }
    let classes = data.n_classes();
    let mut rng = seed::rng(seed_value);
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| HarnessError::InvalidArgument(format!("bad alpha: {e}")))?;

    let mut proportions = vec![vec![0.0f64; classes]; n_nodes];
    for node_props in &mut proportions {
        let mut sum = 0.0;
        for slot in node_props.iter_mut() {
            *slot = gamma.sample(&mut rng);
            sum += *slot;
        }
        if sum > 0.0 {
            for slot in node_props.iter_mut() {
                *slot /= sum;
            }
        } else {
            node_props.fill(1.0 / classes as f64);
        }
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for i in 0..data.n() {
        by_class[data.label(i) as usize].push(i);
    }

    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (class, rows) in by_class.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let weights: Vec<f64> = proportions.iter().map(|p| p[class]).collect();
        let counts = largest_remainder(rows.len(), &weights);
        let mut cursor = 0;
        for (node, &count) in counts.iter().enumerate() {
            assignment[node].extend_from_slice(&rows[cursor..cursor + count]);
            cursor += count;
        }
    }
    Ok(assignment)
}

/// Apportions `total` items by weight with floor shares, handing leftovers
/// to the largest fractional parts (ties toward the lower index).
fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let wsum: f64 = weights.iter().sum();
    let shares: Vec<f64> = if wsum > 0.0 {
        weights.iter().map(|w| total as f64 * w / wsum).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut assigned: usize = counts.iter().sum();

    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).expect("finite shares").then(a.cmp(&b))
    });
    let mut i = 0;
    while assigned < total {
        counts[order[i % order.len()]] += 1;
        assigned += 1;
        i += 1;
    }
    while assigned > total {
        // floating-point guard; floors cannot overshoot in exact arithmetic
        let max = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("nonempty counts");
        counts[max] -= 1;
        assigned -= 1;
    }
    counts
}

/// Sorts samples by label, cuts them into `n_nodes × shards_per_node`
/// near-equal shards, and deals each node `shards_per_node` of them in
/// seeded-shuffled order.
fn shard_assign(
    data: &Dataset,
    n_nodes: usize,
    shards_per_node: usize,
    seed_value: u64,
) -> Result<Vec<Vec<usize>>, HarnessError> {
    if shards_per_node == 0 {
        return Err(HarnessError::InvalidArgument(
            "shards_per_node must be at least 1".into(),
        ));
    }
    let total_shards = n_nodes * shards_per_node;
    if total_shards > data.n() {
        return Err(HarnessError::InvalidArgument(format!(
            "{total_shards} shards for {} samples",
            data.n()
        )));
    }

    let mut idx: Vec<usize> = (0..data.n()).collect();
    idx.sort_by_key(|&i| (data.label(i), i));

    let base = data.n() / total_shards;
    let extra = data.n() % total_shards;
    let mut shards: Vec<&[usize]> = Vec::with_capacity(total_shards);
    let mut cursor = 0;
    for s in 0..total_shards {
        let len = base + usize::from(s < extra);
        shards.push(&idx[cursor..cursor + len]);
        cursor += len;
    }

    let mut order: Vec<usize> = (0..total_shards).collect();
    order.shuffle(&mut seed::rng(seed_value));

    let assignment = (0..n_nodes)
        .map(|node| {
            order[node * shards_per_node..(node + 1) * shards_per_node]
                .iter()
                .flat_map(|&s| shards[s].iter().copied())
                .collect()
        })
        .collect();
    Ok(assignment)
}

/// Moves one sample from the currently largest node into each empty node
/// (ascending), so every partition satisfies the dataset invariant n ≥ 1.
fn repair_empty_nodes(assignment: &mut [Vec<usize>]) {
    for node in 0..assignment.len() {
        if !assignment[node].is_empty() {
            continue;
        }
        let donor = assignment
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("nonempty assignment list");
        if assignment[donor].len() <= 1 {
            continue; // nothing to spare; caller's size checks prevent this
        }
        let moved = assignment[donor].pop().expect("donor nonempty");
        assignment[node].push(moved);
    }
}
