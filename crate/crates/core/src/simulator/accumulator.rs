//! Mergeable power-sum accumulator for intrinsic-volume vectors.
//!
//! Sums are kept per replication block and only pooled, in ascending block
//! order, when read. Merging is therefore a disjoint union of blocks, and the
//! pooled sums are bit-identical however the blocks were produced or merged.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Mixed power orders `(a, b)` with `a, b ≥ 1`, `a + b ≤ 4`, kept for every
/// component pair; enough for delta-method errors of sample correlations.
pub const MIXED_ORDERS: [(u32, u32); 6] = [(1, 1), (1, 2), (2, 1), (1, 3), (2, 2), (3, 1)];

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSums {
    pub count: u64,
    /// `power_sums[c * max_order + p − 1] = Σ x_c^p`.
    power_sums: Vec<f64>,
    /// `cross_sums[pair * 6 + t] = Σ x_i^a x_j^b` for `MIXED_ORDERS[t]`.
    cross_sums: Vec<f64>,
}

impl BlockSums {
    fn zeros(components: usize, max_order: usize) -> Self {
        Self {
            count: 0,
            power_sums: vec![0.0; components * max_order],
            cross_sums: vec![0.0; pair_count(components) * MIXED_ORDERS.len()],
        }
    }

    fn add_assign(&mut self, other: &BlockSums) {
        self.count += other.count;
        self.power_sums
            .iter_mut()
            .zip(&other.power_sums)
            .for_each(|(a, b)| *a += b);
        self.cross_sums
            .iter_mut()
            .zip(&other.cross_sums)
            .for_each(|(a, b)| *a += b);
    }
}

fn pair_count(components: usize) -> usize {
    components * components.saturating_sub(1) / 2
}

fn pair_index(components: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < components);
    // pairs (0,1), (0,2), …, (0,n-1), (1,2), …
    i * (2 * components - i - 1) / 2 + (j - i - 1)
}

/// Streaming sums of powers and cross products of shifted samples
/// `x_c − shift_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleAccumulator {
    components: usize,
    max_order: usize,
    shift: Vec<f64>,
    blocks: BTreeMap<u64, BlockSums>,
}

impl SampleAccumulator {
    /// An empty accumulator. `shift` is subtracted from every sample before
    /// powers are taken; a value near the mean keeps high powers well
    /// conditioned.
    pub fn new(max_order: usize, shift: Vec<f64>) -> Result<Self> {
        if shift.is_empty() {
            return Err(Error::InvalidParameter(
                "accumulator needs at least one component".into(),
            ));
        }
        if max_order == 0 {
            return Err(Error::InvalidParameter(
                "accumulator order must be at least 1".into(),
            ));
        }
        Ok(Self {
            components: shift.len(),
            max_order,
            shift,
            blocks: BTreeMap::new(),
        })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn block_indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.blocks.keys().copied()
    }

    pub fn count(&self) -> u64 {
        self.blocks.values().map(|b| b.count).sum()
    }

    /// Add one sample to the given block.
    pub fn push_to_block(&mut self, block_index: u64, values: &[f64]) {
        assert_eq!(values.len(), self.components, "sample has wrong length");
        let (n, order) = (self.components, self.max_order);
        let block = self
            .blocks
            .entry(block_index)
            .or_insert_with(|| BlockSums::zeros(n, order));
        block.count += 1;
        let shifted: Vec<f64> = values.iter().zip(&self.shift).map(|(x, s)| x - s).collect();
        for (c, &x) in shifted.iter().enumerate() {
            let mut pow = 1.0;
            for p in 0..order {
                pow *= x;
                block.power_sums[c * order + p] += pow;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let base = pair_index(n, i, j) * MIXED_ORDERS.len();
                let (x, y) = (shifted[i], shifted[j]);
                for (t, &(a, b)) in MIXED_ORDERS.iter().enumerate() {
                    block.cross_sums[base + t] += x.powi(a as i32) * y.powi(b as i32);
                }
            }
        }
    }

    /// Add one sample to the highest existing block (block 0 when empty).
    pub fn push(&mut self, values: &[f64]) {
        let block = self.blocks.keys().next_back().copied().unwrap_or(0);
        self.push_to_block(block, values);
    }

    /// Union of two accumulators over disjoint blocks.
    pub fn merge(mut self, other: SampleAccumulator) -> Result<SampleAccumulator> {
        if self.components != other.components
            || self.max_order != other.max_order
            || self.shift != other.shift
        {
            return Err(Error::IncompatibleAccumulators(
                "component count, order or shift differ".into(),
            ));
        }
        if let Some(dup) = other.blocks.keys().find(|k| self.blocks.contains_key(k)) {
            return Err(Error::IncompatibleAccumulators(format!(
                "block {dup} present in both accumulators"
            )));
        }
        self.blocks.extend(other.blocks);
        Ok(self)
    }

    /// Pool all blocks in ascending block order.
    pub fn pooled(&self) -> PooledSums {
        let mut total = BlockSums::zeros(self.components, self.max_order);
        for block in self.blocks.values() {
            total.add_assign(block);
        }
        PooledSums {
            components: self.components,
            max_order: self.max_order,
            shift: self.shift.clone(),
            sums: total,
        }
    }

    /// Canonical little-endian byte image of the accumulator state.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend((self.components as u64).to_le_bytes());
        out.extend((self.max_order as u64).to_le_bytes());
        self.shift.iter().for_each(|s| out.extend(s.to_le_bytes()));
        for (index, block) in &self.blocks {
            out.extend(index.to_le_bytes());
            out.extend(block.count.to_le_bytes());
            block
                .power_sums
                .iter()
                .for_each(|s| out.extend(s.to_le_bytes()));
            block
                .cross_sums
                .iter()
                .for_each(|s| out.extend(s.to_le_bytes()));
        }
        out
    }
}

/// Sums pooled over all blocks, with accessors in terms of shifted samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSums {
    components: usize,
    max_order: usize,
    shift: Vec<f64>,
    sums: BlockSums,
}

impl PooledSums {
    pub fn count(&self) -> u64 {
        self.sums.count
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn shift(&self, component: usize) -> f64 {
        self.shift[component]
    }

    /// `Σ (x_c − shift_c)^p`; `p = 0` gives the count.
    pub fn power_sum(&self, component: usize, p: usize) -> f64 {
        assert!(p <= self.max_order, "power {p} was not accumulated");
        if p == 0 {
            self.sums.count as f64
        } else {
            self.sums.power_sums[component * self.max_order + p - 1]
        }
    }

    /// `Σ (x_i − shift_i)^a (x_j − shift_j)^b` for `a + b ≤ 4`, any `i ≠ j`.
    pub fn mixed_sum(&self, i: usize, j: usize, a: u32, b: u32) -> f64 {
        if a == 0 {
            return self.power_sum(j, b as usize);
        }
        if b == 0 {
            return self.power_sum(i, a as usize);
        }
        if i > j {
            return self.mixed_sum(j, i, b, a);
        }
        assert!(i != j, "mixed sums need two distinct components");
        let t = MIXED_ORDERS
            .iter()
            .position(|&o| o == (a, b))
            .unwrap_or_else(|| panic!("mixed order ({a}, {b}) is not accumulated"));
        self.sums.cross_sums[pair_index(self.components, i, j) * MIXED_ORDERS.len() + t]
    }
}
