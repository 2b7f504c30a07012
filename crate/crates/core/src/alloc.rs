//! Action-driven integer embedding-size allocation under a hard budget.
//!
//! An action `(w, alpha_u, alpha_v)` splits the budget `B` into a user share
//! `w*B` and an item share `(1-w)*B`. Within each block, per-entity fractions
//! are drawn i.i.d. from a heavy-tailed distribution shaped by `alpha`,
//! sorted descending, normalized to sum 1, and paired rank-by-rank with the
//! entities sorted by descending frequency, so the most frequent entity gets
//! the largest fraction. Raw sizes `floor(share * fraction)` are then clamped
//! into `[d_min, d_max]` and repaired until the total never exceeds `B`.

use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::FrequencyTable;
use crate::error::{Error, Result};
use crate::rng::{domain, rng_from};
use crate::scalar::Scalar;

/// Policy output: user budget share plus the two distribution shapes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action<T: Scalar> {
    pub w: T,
    pub alpha_u: T,
    pub alpha_v: T,
}

/// How the parameter budget is stated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BudgetMode {
    /// Mean embedding size over all entities; `B = c * (users + items)`.
    MeanSize { c: u64 },
    /// Fixed total parameter count.
    Total { b: u64 },
}

/// Budget statement plus the admissible size interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSpec {
    #[serde(flatten)]
    pub mode: BudgetMode,
    pub d_min: usize,
    pub d_max: usize,
}

/// Total parameter count implied by the budget for the given entity counts.
pub fn resolve_budget(budget: &BudgetSpec, user_count: usize, item_count: usize) -> u64 {
    match budget.mode {
        BudgetMode::MeanSize { c } => c * (user_count as u64 + item_count as u64),
        BudgetMode::Total { b } => b,
    }
}

/// Family of heavy-tailed distributions for the size fractions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    /// Density `alpha * x^(alpha-1)` on (0,1); inverse CDF `u^(1/alpha)`.
    PowerLaw,
    /// Standard Pareto with shape `alpha`, support starting at 1.
    Pareto,
    /// Normal with mean `1/n`, scale `alpha`, truncated to (0,1).
    #[serde(rename = "truncnormal")]
    TruncNormal,
}

impl DistributionKind {
    /// Default shape-parameter bounds for each family.
    pub fn default_alpha_bounds(self) -> (f64, f64) {
        match self {
            DistributionKind::PowerLaw => (0.1, 30.0),
            DistributionKind::Pareto => (30.0, 100.0),
            DistributionKind::TruncNormal => (1e-5, 1e-4),
        }
    }
}

/// Distribution choice plus its shape bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistConfig {
    pub kind: DistributionKind,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl DistConfig {
    pub fn new(kind: DistributionKind) -> Self {
        let (alpha_min, alpha_max) = kind.default_alpha_bounds();
        DistConfig {
            kind,
            alpha_min,
            alpha_max,
        }
    }
}

impl Default for DistConfig {
    fn default() -> Self {
        DistConfig::new(DistributionKind::PowerLaw)
    }
}

/// Which of two equal-frequency entities ranks earlier (larger allocation).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// The more recently introduced entity (higher dense id) wins.
    #[default]
    NewerFirst,
    OlderFirst,
}

/// Non-negative fractions, sorted non-increasing, summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionVector<T: Scalar> {
    pub values: Vec<T>,
}

impl<T: Scalar> FractionVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn draw(kind: DistributionKind, alpha: f64, n: usize, rng: &mut ChaCha8Rng) -> f64 {
    match kind {
        DistributionKind::PowerLaw => {
            // u in (0,1]; x = u^(1/alpha) stays strictly positive.
            let u = 1.0 - rng.gen::<f64>();
            u.powf(1.0 / alpha)
        }
        DistributionKind::Pareto => {
            let u = 1.0 - rng.gen::<f64>();
            u.powf(-1.0 / alpha)
        }
        DistributionKind::TruncNormal => {
            let mean = 1.0 / n as f64;
            loop {
                let z: f64 = StandardNormal.sample(rng);
                let x = mean + alpha * z;
                if x > 0.0 && x < 1.0 {
                    return x;
                }
            }
        }
    }
}

/// Draws `n` i.i.d. fractions from the chosen distribution, sorts them
/// descending, and normalizes them to sum 1. Deterministic for a given seed.
pub fn sample_fractions<T: Scalar>(
    n: usize,
    alpha: T,
    kind: DistributionKind,
    seed: u64,
) -> FractionVector<T> {
    assert!(n >= 1, "need at least one entity");
    let alpha = alpha.as_f64();
    assert!(alpha > 0.0 && alpha.is_finite(), "alpha must be positive");
    let mut rng = rng_from(seed, &[]);
    let mut draws: Vec<f64> = (0..n).map(|_| draw(kind, alpha, n, &mut rng)).collect();
    draws.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let sum: f64 = draws.iter().sum();
    FractionVector {
        values: draws.into_iter().map(|x| T::from_f(x / sum)).collect(),
    }
}

/// Integer sizes for every user and item, carrying the frequency order the
/// fractions were assigned along.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub user_sizes: Vec<usize>,
    pub item_sizes: Vec<usize>,
    /// User ids in the frequency-descending order used for assignment.
    pub user_order: Vec<u32>,
    /// Item ids likewise.
    pub item_order: Vec<u32>,
}

impl AllocationPlan {
    /// Plan with sizes given directly in id order (identity ordering); used
    /// by the uniform and random baselines.
    pub fn from_sizes(user_sizes: Vec<usize>, item_sizes: Vec<usize>) -> Self {
        let user_order = (0..user_sizes.len() as u32).collect();
        let item_order = (0..item_sizes.len() as u32).collect();
        AllocationPlan {
            user_sizes,
            item_sizes,
            user_order,
            item_order,
        }
    }

    pub fn total(&self) -> u64 {
        self.user_sizes.iter().chain(self.item_sizes.iter()).map(|&s| s as u64).sum()
    }

    /// Two-column text serialization: `u<id>\t<size>` then `i<id>\t<size>`.
    pub fn write<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = String::new();
        for (id, size) in self.user_sizes.iter().enumerate() {
            let _ = writeln!(out, "u{id}\t{size}");
        }
        for (id, size) in self.item_sizes.iter().enumerate() {
            let _ = writeln!(out, "i{id}\t{size}");
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Entity ids sorted by descending count; ties resolved by the tie-break
/// rule (newer entities have higher dense ids).
fn frequency_order(counts: &[u32], tie: TieBreak) -> Vec<u32> {
    let mut ids: Vec<u32> = (0..counts.len() as u32).collect();
    match tie {
        TieBreak::NewerFirst => {
            ids.sort_unstable_by(|&a, &b| {
                counts[b as usize].cmp(&counts[a as usize]).then(b.cmp(&a))
            });
        }
        TieBreak::OlderFirst => {
            ids.sort_unstable_by(|&a, &b| {
                counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b))
            });
        }
    }
    ids
}

/// Clamps raw sizes into `[d_min, d_max]` and, while the total exceeds the
/// budget, decrements the currently largest size (ties resolved toward the
/// highest index, which keeps a descending input descending).
pub fn clamp_and_repair(
    raw_sizes: &[u64],
    budget: u64,
    d_min: usize,
    d_max: usize,
) -> Result<Vec<usize>> {
    let mut sizes: Vec<usize> = raw_sizes
        .iter()
        .map(|&s| (s as usize).clamp(d_min, d_max))
        .collect();
    let mut total: u64 = sizes.iter().map(|&s| s as u64).sum();
    if total <= budget {
        return Ok(sizes);
    }
    if (d_min as u64) * (sizes.len() as u64) > budget {
        return Err(Error::InfeasibleBudget {
            budget,
            entities: sizes.len(),
            d_min,
        });
    }
    let mut heap: BinaryHeap<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > d_min)
        .map(|(i, &s)| (s, i))
        .collect();
    while total > budget {
        // Feasibility above guarantees something is still above d_min.
        let (s, i) = heap.pop().expect("repair ran out of shrinkable sizes");
        sizes[i] = s - 1;
        total -= 1;
        if s - 1 > d_min {
            heap.push((s - 1, i));
        }
    }
    Ok(sizes)
}

fn scatter(order: &[u32], ranked_sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; order.len()];
    for (rank, &id) in order.iter().enumerate() {
        out[id as usize] = ranked_sizes[rank];
    }
    out
}

/// Turns an action into a full allocation plan.
///
/// Users and items are ranked by descending frequency, fractions are sampled
/// per block (independent sub-streams of `seed`), raw sizes are
/// `floor(w*B*p)` / `floor((1-w)*B*p)` rank-by-rank, and the concatenated
/// result is clamp-and-repaired against the joint budget.
pub fn allocate<T: Scalar>(
    action: &Action<T>,
    budget: &BudgetSpec,
    freq: &FrequencyTable,
    dist: &DistConfig,
    tie: TieBreak,
    seed: u64,
) -> Result<AllocationPlan> {
    let w = action.w.as_f64();
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::Config(format!("w={w} outside (0, 1)")));
    }
    for (name, alpha) in [("alpha_u", action.alpha_u), ("alpha_v", action.alpha_v)] {
        let a = alpha.as_f64();
        if !(a > dist.alpha_min && a < dist.alpha_max) {
            return Err(Error::Config(format!(
                "{name}={a} outside ({}, {})",
                dist.alpha_min, dist.alpha_max
            )));
        }
    }
    let user_count = freq.user_count();
    let item_count = freq.item_count();
    let b = resolve_budget(budget, user_count, item_count);
    check_feasible(b, user_count + item_count, budget.d_min)?;

    let user_order = frequency_order(&freq.user_counts, tie);
    let item_order = frequency_order(&freq.item_counts, tie);
    let p_u = sample_fractions::<f64>(
        user_count,
        action.alpha_u.as_f64(),
        dist.kind,
        crate::rng::mix(seed, &[domain::ALLOC_USERS]),
    );
    let p_v = sample_fractions::<f64>(
        item_count,
        action.alpha_v.as_f64(),
        dist.kind,
        crate::rng::mix(seed, &[domain::ALLOC_ITEMS]),
    );

    let user_share = w * b as f64;
    let item_share = (1.0 - w) * b as f64;
    let raw: Vec<u64> = p_u
        .values
        .iter()
        .map(|&p| (user_share * p).floor() as u64)
        .chain(p_v.values.iter().map(|&p| (item_share * p).floor() as u64))
        .collect();
    let repaired = clamp_and_repair(&raw, b, budget.d_min, budget.d_max)?;
    let (user_ranked, item_ranked) = repaired.split_at(user_count);
    Ok(AllocationPlan {
        user_sizes: scatter(&user_order, user_ranked),
        item_sizes: scatter(&item_order, item_ranked),
        user_order,
        item_order,
    })
}

/// Merged-block variant: one frequency ranking over users and items together
/// and a single distribution; used by the simplified policy ablation.
pub fn allocate_merged<T: Scalar>(
    alpha: T,
    budget: &BudgetSpec,
    freq: &FrequencyTable,
    dist: &DistConfig,
    tie: TieBreak,
    seed: u64,
) -> Result<AllocationPlan> {
    let a = alpha.as_f64();
    if !(a > dist.alpha_min && a < dist.alpha_max) {
        return Err(Error::Config(format!(
            "alpha={a} outside ({}, {})",
            dist.alpha_min, dist.alpha_max
        )));
    }
    let user_count = freq.user_count();
    let item_count = freq.item_count();
    let total = user_count + item_count;
    let b = resolve_budget(budget, user_count, item_count);
    check_feasible(b, total, budget.d_min)?;

    // Global index space: users then items; ties favor higher global index
    // under NewerFirst.
    let merged_counts: Vec<u32> = freq
        .user_counts
        .iter()
        .chain(freq.item_counts.iter())
        .copied()
        .collect();
    let order = frequency_order(&merged_counts, tie);
    let p = sample_fractions::<f64>(total, a, dist.kind, crate::rng::mix(seed, &[domain::ALLOC_MERGED]));
    let raw: Vec<u64> = p
        .values
        .iter()
        .map(|&x| (b as f64 * x).floor() as u64)
        .collect();
    let ranked = clamp_and_repair(&raw, b, budget.d_min, budget.d_max)?;

    let mut user_sizes = vec![0usize; user_count];
    let mut item_sizes = vec![0usize; item_count];
    let mut user_order = Vec::with_capacity(user_count);
    let mut item_order = Vec::with_capacity(item_count);
    for (rank, &gid) in order.iter().enumerate() {
        if (gid as usize) < user_count {
            user_sizes[gid as usize] = ranked[rank];
            user_order.push(gid);
        } else {
            let item = gid - user_count as u32;
            item_sizes[item as usize] = ranked[rank];
            item_order.push(item);
        }
    }
    Ok(AllocationPlan {
        user_sizes,
        item_sizes,
        user_order,
        item_order,
    })
}

fn check_feasible(b: u64, entities: usize, d_min: usize) -> Result<()> {
    if b < d_min as u64 * entities as u64 {
        return Err(Error::InfeasibleBudget {
            budget: b,
            entities,
            d_min,
        });
    }
    Ok(())
}

/// Equal-size baseline: every entity gets `floor(B / n)`, clamped.
pub fn equal_sizes_plan(
    budget: &BudgetSpec,
    user_count: usize,
    item_count: usize,
) -> Result<AllocationPlan> {
    let n = user_count + item_count;
    let b = resolve_budget(budget, user_count, item_count);
    check_feasible(b, n, budget.d_min)?;
    let size = ((b / n as u64) as usize).clamp(budget.d_min, budget.d_max);
    Ok(AllocationPlan::from_sizes(
        vec![size; user_count],
        vec![size; item_count],
    ))
}

/// Mixed-random baseline: i.i.d. uniform sizes in `[d_min, d_max]`, rescaled
/// if needed and repaired to respect the budget.
pub fn mixed_random_plan(
    budget: &BudgetSpec,
    user_count: usize,
    item_count: usize,
    seed: u64,
) -> Result<AllocationPlan> {
    let n = user_count + item_count;
    let b = resolve_budget(budget, user_count, item_count);
    check_feasible(b, n, budget.d_min)?;
    let mut rng = rng_from(seed, &[domain::MR_PLAN]);
    let mut raw: Vec<u64> = (0..n)
        .map(|_| rng.gen_range(budget.d_min as u64..=budget.d_max as u64))
        .collect();
    let total: u64 = raw.iter().sum();
    if total > b {
        let scale = b as f64 / total as f64;
        for s in raw.iter_mut() {
            *s = (*s as f64 * scale).floor() as u64;
        }
    }
    let sizes = clamp_and_repair(&raw, b, budget.d_min, budget.d_max)?;
    let (user_sizes, item_sizes) = sizes.split_at(user_count);
    Ok(AllocationPlan::from_sizes(
        user_sizes.to_vec(),
        item_sizes.to_vec(),
    ))
}
