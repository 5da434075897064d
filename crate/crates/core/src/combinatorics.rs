//! Singleton-free set partitions and the central-moment / cumulant recursion.
//!
//! The exact moment of order `m` is a sum over set partitions of `{1, …, m}`
//! whose blocks all have at least two elements. Only the multiset of block
//! sizes matters for the summand, so partitions are grouped by their sorted
//! block-size tuple together with the number of set partitions realizing it.

use crate::error::{Error, Result};

/// Largest order for which partition counts are produced. `24!` still fits a
/// `u128`, and every count stays exact.
pub const MAX_PARTITION_ORDER: usize = 24;

/// One block-size shape with its number of realizing set partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    /// Block sizes, non-increasing, each at least 2.
    pub sizes: Vec<usize>,
    /// Number of set partitions of `{1, …, m}` with exactly these block sizes.
    pub count: u128,
}

impl BlockPartition {
    pub fn blocks(&self) -> usize {
        self.sizes.len()
    }
}

/// All singleton-free set partitions of an `m`-set, compressed by block shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartitionTable {
    order: usize,
    entries: Vec<BlockPartition>,
}

impl BlockPartitionTable {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Entries in descending lexicographic order of their size tuples, so the
    /// single-block shape `(m)` comes first and the finest shape last.
    pub fn entries(&self) -> &[BlockPartition] {
        &self.entries
    }

    /// Total number of singleton-free set partitions.
    pub fn total(&self) -> u128 {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn count_of(&self, sizes: &[usize]) -> Option<u128> {
        self.entries
            .iter()
            .find(|e| e.sizes == sizes)
            .map(|e| e.count)
    }
}

/// Enumerate singleton-free set partitions of `{1, …, m}` grouped by shape.
///
/// The count for sizes `(m_1, …, m_r)` is `m! / (∏ m_i! · ∏_s c_s!)` where
/// `c_s` is the number of blocks of size `s`.
pub fn enumerate_singleton_free_partitions(m: usize) -> Result<BlockPartitionTable> {
    if !(2..=MAX_PARTITION_ORDER).contains(&m) {
        return Err(Error::OrderOutOfRange(m));
    }
    let mut shapes = Vec::new();
    let mut current = Vec::new();
    integer_partitions(m, m, &mut current, &mut shapes);

    let m_fact = factorial(m);
    let entries = shapes
        .into_iter()
        .map(|sizes| {
            let mut denom: u128 = sizes.iter().map(|&s| factorial(s)).product();
            // sizes are sorted, so equal sizes are contiguous
            let mut run = 1;
            for w in sizes.windows(2) {
                if w[0] == w[1] {
                    run += 1;
                } else {
                    denom *= factorial(run);
                    run = 1;
                }
            }
            denom *= factorial(run);
            BlockPartition {
                count: m_fact / denom,
                sizes,
            }
        })
        .collect();
    Ok(BlockPartitionTable { order: m, entries })
}

// Partitions of `remaining` into parts in 2..=max_part, largest part first.
fn integer_partitions(
    remaining: usize,
    max_part: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if remaining == 0 {
        out.push(current.clone());
        return;
    }
    for part in (2..=max_part.min(remaining)).rev() {
        if remaining - part == 1 {
            continue;
        }
        current.push(part);
        integer_partitions(remaining - part, part, current, out);
        current.pop();
    }
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by i + 1
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `n!! = n (n-2) (n-4) ⋯`, with `(-1)!! = 0!! = 1!! = 1`.
pub fn double_factorial(n: i64) -> u128 {
    debug_assert!(n >= -1, "double factorial is defined for n >= -1");
    let mut acc: u128 = 1;
    let mut i = n;
    while i > 1 {
        acc *= i as u128;
        i -= 2;
    }
    acc
}

/// A centred moment or cumulant sequence of orders `1..=order`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence {
    values: Vec<f64>,
}

impl MomentSequence {
    /// `values[i]` holds order `i + 1`; the first value must be exactly zero.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            None => Err(Error::InvalidParameter(
                "moment sequence needs at least one order".into(),
            )),
            Some(&v) if v != 0.0 => Err(Error::NotCentred(v)),
            Some(_) => Ok(Self { values }),
        }
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    /// Value of the given order (1-based). Panics if `order` is 0 or exceeds
    /// [`MomentSequence::order`].
    pub fn get(&self, order: usize) -> f64 {
        assert!(order >= 1, "orders are 1-based");
        self.values[order - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn binom_f64(n: usize, k: usize) -> f64 {
    binomial(n, k) as f64
}

/// Cumulants from central moments:
/// `γ_m = μ_m − Σ_{i=1}^{m−1} C(m−1, i−1) γ_i μ_{m−i}`.
pub fn cumulants_from_moments(mu: &MomentSequence) -> MomentSequence {
    let n = mu.order();
    let mut gamma = vec![0.0; n];
    for m in 2..=n {
        let mut acc = mu.get(m);
        for i in 1..m {
            acc -= binom_f64(m - 1, i - 1) * gamma[i - 1] * mu.get(m - i);
        }
        gamma[m - 1] = acc;
    }
    MomentSequence { values: gamma }
}

/// Central moments from cumulants, the inverse of [`cumulants_from_moments`].
pub fn moments_from_cumulants(gamma: &MomentSequence) -> MomentSequence {
    let n = gamma.order();
    let mut mu = vec![0.0; n];
    for m in 2..=n {
        let mut acc = gamma.get(m);
        for i in 1..m {
            acc += binom_f64(m - 1, i - 1) * gamma.get(i) * mu[m - i - 1];
        }
        mu[m - 1] = acc;
    }
    MomentSequence { values: mu }
}

/// Jacobian `∂γ_m / ∂μ_t` of [`cumulants_from_moments`], as `jac[m-1][t-1]`.
///
/// Obtained by differentiating the recursion term by term, so it is exact up
/// to round-off. Used for delta-method standard errors of sample cumulants.
pub fn cumulant_jacobian(mu: &MomentSequence) -> Vec<Vec<f64>> {
    let n = mu.order();
    let gamma = cumulants_from_moments(mu);
    let mut jac = vec![vec![0.0; n]; n];
    for t in 1..=n {
        // derivative of every γ_m with respect to μ_t
        let mut dgamma = vec![0.0; n];
        for m in 2..=n {
            let mut acc = if m == t { 1.0 } else { 0.0 };
            for i in 1..m {
                let dmu = if m - i == t { 1.0 } else { 0.0 };
                acc -=
                    binom_f64(m - 1, i - 1) * (dgamma[i - 1] * mu.get(m - i) + gamma.get(i) * dmu);
            }
            dgamma[m - 1] = acc;
        }
        for m in 1..=n {
            jac[m - 1][t - 1] = dgamma[m - 1];
        }
    }
    jac
}
