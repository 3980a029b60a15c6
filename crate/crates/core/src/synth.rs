//! Planted block models, multinomial graph sampling and community contraction.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdiv::{DistributionMatrix, StochasticChannel};
use crate::netcore::{BipartiteMultigraph, Edge};
use crate::numeric::stable_sum;
use crate::Matrix;

/// `m` communities of `n` vertices per side; within-community cells get
/// weight 1 and cross-community cells weight `alpha` before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockModelConfig {
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
}

impl BlockModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::invalid("block model needs m >= 1 and n >= 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.m * self.n
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout::uniform(self.m, self.n)
    }
}

pub fn sbm_distribution(cfg: &BlockModelConfig) -> Result<DistributionMatrix> {
    cfg.validate()?;
    let size = cfg.size();
    let weights = Matrix::from_fn(size, size, |u, v| {
        if u / cfg.n == v / cfg.n {
            1.0
        } else {
            cfg.alpha
        }
    });
    DistributionMatrix::from_weights(weights)
}

/// Contiguous index ranges of the blocks, shared by rows and columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    sizes: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::invalid("block sizes must be non-empty and positive"));
        }
        Ok(BlockLayout { sizes })
    }

    pub fn uniform(m: usize, n: usize) -> Self {
        BlockLayout { sizes: vec![n; m] }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        let start: usize = self.sizes[..block].iter().sum();
        start..start + self.sizes[block]
    }
}

/// Current grouping of blocks into communities. Groups are addressed by
/// their position in the list; merging `i` and `j` puts the union at
/// position `min(i, j)` and removes the other, keeping the rest in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGroups {
    block_sizes: Vec<usize>,
    groups: Vec<Vec<usize>>,
}

impl BlockGroups {
    /// One group per block.
    pub fn singletons(layout: &BlockLayout) -> Self {
        BlockGroups {
            block_sizes: layout.sizes().to_vec(),
            groups: (0..layout.blocks()).map(|b| vec![b]).collect(),
        }
    }

    pub fn new(layout: &BlockLayout, groups: Vec<Vec<usize>>) -> Result<Self> {
        let g = BlockGroups {
            block_sizes: layout.sizes().to_vec(),
            groups,
        };
        g.validate()?;
        Ok(g)
    }

    /// Checks that the groups are a disjoint cover of the blocks.
    pub fn validate(&self) -> Result<()> {
        BlockLayout::new(self.block_sizes.clone())?;
        let mut seen = vec![false; self.block_sizes.len()];
        for group in &self.groups {
            if group.is_empty() {
                return Err(Error::invalid("empty block group"));
            }
            for &b in group {
                if b >= seen.len() || seen[b] {
                    return Err(Error::invalid(format!(
                        "block {b} is unknown or listed twice"
                    )));
                }
                seen[b] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("block groups do not cover every block"));
        }
        Ok(())
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout {
            sizes: self.block_sizes.clone(),
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Row (equivalently column) indices covered by the union of groups `i` and `j`.
    fn merged_indices(&self, i: usize, j: usize) -> Result<Vec<usize>> {
        if i == j || i >= self.groups.len() || j >= self.groups.len() {
            return Err(Error::invalid(format!(
                "cannot merge groups {i} and {j} of {}",
                self.groups.len()
            )));
        }
        let layout = self.layout();
        let mut blocks: Vec<usize> = self.groups[i]
            .iter()
            .chain(&self.groups[j])
            .copied()
            .collect();
        blocks.sort_unstable();
        Ok(blocks.into_iter().flat_map(|b| layout.range(b)).collect())
    }

    pub fn merged(&self, i: usize, j: usize) -> Result<Self> {
        self.merged_indices(i, j)?;
        let (lo, hi) = (i.min(j), i.max(j));
        let mut groups = self.groups.clone();
        let removed = groups.remove(hi);
        groups[lo].extend(removed);
        groups[lo].sort_unstable();
        Ok(BlockGroups {
            block_sizes: self.block_sizes.clone(),
            groups,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContractionSchedule {
    steps: Vec<(usize, usize)>,
}

impl ContractionSchedule {
    pub fn new(steps: Vec<(usize, usize)>) -> Self {
        ContractionSchedule { steps }
    }

    /// `(1)(2)(3)(4)(5) → (12)(3)(4)(5) → (12)(34)(5) → (12)(345) → (12345)`.
    pub fn five_block_reference() -> Self {
        ContractionSchedule {
            steps: vec![(0, 1), (1, 2), (1, 2), (0, 1)],
        }
    }

    /// Merges group 0 with group 1 until a single group remains.
    pub fn sequential(blocks: usize) -> Self {
        ContractionSchedule {
            steps: vec![(0, 1); blocks.saturating_sub(1)],
        }
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Replays the schedule on the group structure alone.
    pub fn validate(&self, start: &BlockGroups) -> Result<()> {
        let mut groups = start.clone();
        for &(i, j) in &self.steps {
            groups = groups.merged(i, j)?;
        }
        Ok(())
    }
}

/// Spreads the mass of the rectangle `(U_i ∪ U_j) × (V_i ∪ V_j)` evenly
/// over it; every other entry is left untouched.
pub fn contract(
    p: &DistributionMatrix,
    groups: &BlockGroups,
    i: usize,
    j: usize,
) -> Result<(DistributionMatrix, BlockGroups)> {
    check_layout(p, groups)?;
    let idx = groups.merged_indices(i, j)?;
    let m = p.matrix();
    let mass = stable_sum(
        idx.iter()
            .flat_map(|&u| idx.iter().map(move |&v| m[(u, v)])),
    );
    let cell = mass / (idx.len() * idx.len()) as f64;
    let mut out = m.clone();
    for &u in &idx {
        for &v in &idx {
            out[(u, v)] = cell;
        }
    }
    Ok((DistributionMatrix::new(out)?, groups.merged(i, j)?))
}

/// The one-sided kernel that replaces each index of the merged set by a
/// uniform draw from that set. Applying it to rows and then columns
/// reproduces [`contract`] whenever the entries outside the merged
/// rectangle are constant along the merged set, as they are for every
/// stage of a block model.
pub fn contraction_channel(groups: &BlockGroups, i: usize, j: usize) -> Result<StochasticChannel> {
    let idx = groups.merged_indices(i, j)?;
    let n = groups.layout().total();
    let mut kernel = Matrix::identity(n, n);
    let w = 1.0 / idx.len() as f64;
    for &a in &idx {
        for &b in &idx {
            kernel[(a, b)] = w;
        }
    }
    StochasticChannel::new(kernel)
}

/// Initial distribution followed by one distribution per schedule step.
pub fn run_schedule(
    p: &DistributionMatrix,
    groups: &BlockGroups,
    schedule: &ContractionSchedule,
) -> Result<Vec<DistributionMatrix>> {
    check_layout(p, groups)?;
    schedule.validate(groups)?;
    let mut stages = vec![p.clone()];
    let mut current = groups.clone();
    for &(i, j) in schedule.steps() {
        let (next, g) = contract(stages.last().expect("non-empty"), &current, i, j)?;
        stages.push(next);
        current = g;
    }
    Ok(stages)
}

fn check_layout(p: &DistributionMatrix, groups: &BlockGroups) -> Result<()> {
    groups.validate()?;
    let n = groups.layout().total();
    if p.shape() != (n, n) {
        return Err(Error::ShapeMismatch {
            expected: (n, n),
            actual: p.shape(),
        });
    }
    Ok(())
}

/// Independent RNG stream `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// `edges` i.i.d. cell draws from `p`.
pub fn sample_graph(p: &DistributionMatrix, edges: u64, seed: u64) -> Result<BipartiteMultigraph> {
    sample_graph_with(p, edges, &mut stream_rng(seed, 0))
}

/// Multinomial sampling by inverting the cumulative distribution over
/// cells in row-major order.
pub fn sample_graph_with<R: Rng + ?Sized>(
    p: &DistributionMatrix,
    edges: u64,
    rng: &mut R,
) -> Result<BipartiteMultigraph> {
    if edges == 0 {
        return Err(Error::invalid("need at least one edge"));
    }
    let m = p.matrix();
    let (rows, cols) = m.shape();
    let mut cumulative = Vec::with_capacity(rows * cols);
    let mut acc = 0.0;
    for u in 0..rows {
        for v in 0..cols {
            acc += m[(u, v)];
            cumulative.push(acc);
        }
    }
    let last_positive = (0..cumulative.len())
        .rev()
        .find(|&k| m[(k / cols, k % cols)] > 0.0)
        .ok_or_else(|| Error::invalid("distribution has no mass"))?;
    let mut counts = vec![0u64; rows * cols];
    for _ in 0..edges {
        let x = rng.random::<f64>() * acc;
        let k = cumulative.partition_point(|&c| c <= x).min(last_positive);
        counts[k] += 1;
    }
    let edges = counts
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(k, &count)| Edge {
            u: k / cols,
            v: k % cols,
            count,
        })
        .collect();
    BipartiteMultigraph::new(rows, cols, edges)
}
