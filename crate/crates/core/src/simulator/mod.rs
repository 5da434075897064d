//! Monte Carlo sampling of stationary isotropic Poisson k-flat processes
//! restricted to the flats hitting `B_ρ`.
//!
//! A flat meets the ball in a k-ball whose radius depends only on the flat's
//! distance to the origin, so realizations store distances and the frames
//! (direction and offset vectors) are drawn only when asked for.
//!
//! # Reproducibility
//!
//! Replication `r` of a run with master seed `s` draws from a ChaCha8 stream
//! keyed by `s` with stream number `r`, so any worker can produce any
//! replication without coordination. Accumulation happens in fixed-size
//! replication blocks that are pooled in ascending block order; results do
//! not depend on the number of worker threads.

mod accumulator;
mod frames;

pub use accumulator::{BlockSums, PooledSums, SampleAccumulator, MIXED_ORDERS};
pub use frames::{random_frame, FlatFrame};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{intrinsic_volume_ball, MeasureConvention, ProcessParams};
use crate::moments::mean_exact;

/// Largest power-sum order a Monte Carlo run accumulates.
pub const MAX_ACCUMULATED_ORDER: usize = 12;

const FRAME_STREAM_BIT: u64 = 1 << 63;

/// One sampled flat hitting the window.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFlat {
    /// Distance from the origin, in `[0, ρ]`.
    pub distance: f64,
    pub frame: Option<FlatFrame>,
}

/// The flats of one process realization that hit `B_ρ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Realization {
    pub flats: Vec<SampledFlat>,
}

/// `(V_0, …, V_J)` summed over the flats of a realization.
#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicVolumeVector(pub Vec<f64>);

impl IntrinsicVolumeVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Replications per accumulation block. Part of the reproducibility key
    /// for accumulated sums.
    pub block_size: usize,
    /// Refuse runs whose expected flat count per realization exceeds this.
    pub max_expected_flats: f64,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self {
            workers: None,
            block_size: 1024,
            max_expected_flats: 1e6,
        }
    }
}

/// SplitMix64 finalizer; derives independent master seeds for sub-runs.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream of replication `rep` (`rep < 2^63`; the top bit selects
/// the frame streams).
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    debug_assert!(rep < FRAME_STREAM_BIT);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Separate stream for the frames of replication `rep`, so drawing frames
/// never changes the distances.
pub fn frame_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep | FRAME_STREAM_BIT);
    rng
}

/// Number of flats hitting the window: Poisson with mean `τ Λ([B_ρ])`.
pub fn sample_flat_count<R: Rng + ?Sized>(p: &ProcessParams, rng: &mut R) -> u64 {
    let mean = p.expected_flat_count();
    match Poisson::new(mean) {
        Ok(dist) => dist.sample(rng) as u64,
        // only reachable when the mean underflows to zero
        Err(_) => 0,
    }
}

fn sample_distance<R: Rng + ?Sized>(p: &ProcessParams, rng: &mut R) -> f64 {
    let rho = p.radius();
    let u: f64 = rng.random();
    match p.convention() {
        MeasureConvention::SignedDistance => (rho * (2.0 * u - 1.0)).abs(),
        MeasureConvention::Invariant => match p.codim() {
            1 => rho * u,
            2 => rho * u.sqrt(),
            q => rho * u.powf(1.0 / q as f64),
        },
    }
}

/// Sample the flats hitting `B_ρ` (distances only).
pub fn sample_realization<R: Rng + ?Sized>(p: &ProcessParams, rng: &mut R) -> Realization {
    let n = sample_flat_count(p, rng);
    let flats = (0..n)
        .map(|_| SampledFlat {
            distance: sample_distance(p, rng),
            frame: None,
        })
        .collect();
    Realization { flats }
}

/// Draw a uniformly random frame for every flat of `r`.
pub fn attach_frames<R: Rng + ?Sized>(r: &mut Realization, p: &ProcessParams, rng: &mut R) {
    for flat in &mut r.flats {
        flat.frame = Some(random_frame(p.dim(), p.k(), rng));
    }
}

/// `V_j` of the coverage for `j = 0..=j_max`.
pub fn intrinsic_volume_vector_upto(
    r: &Realization,
    p: &ProcessParams,
    j_max: usize,
) -> Result<IntrinsicVolumeVector> {
    p.check_j(j_max)?;
    let rho = p.radius();
    let unit: Vec<f64> = (0..=j_max)
        .map(|j| intrinsic_volume_ball(p.k(), j, 1.0))
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; j_max + 1];
    for flat in &r.flats {
        let d = flat.distance;
        let section = ((rho - d) * (rho + d)).max(0.0).sqrt();
        let mut pow = 1.0;
        for (o, c) in out.iter_mut().zip(&unit) {
            *o += c * pow;
            pow *= section;
        }
    }
    Ok(IntrinsicVolumeVector(out))
}

/// `(V_0, …, V_k)` of the realization inside `B_ρ`.
pub fn intrinsic_volume_vector(r: &Realization, p: &ProcessParams) -> IntrinsicVolumeVector {
    intrinsic_volume_vector_upto(r, p, p.k()).expect("k is a valid index")
}

fn check_budget(p: &ProcessParams, opts: &MonteCarloOptions) -> Result<()> {
    let expected = p.expected_flat_count();
    if expected > opts.max_expected_flats {
        return Err(Error::BudgetExceeded {
            expected,
            cap: opts.max_expected_flats,
        });
    }
    Ok(())
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// One replication: realization `rep` reduced to `(V_0, …, V_{j_max})`.
pub fn replicate(
    p: &ProcessParams,
    j_max: usize,
    seed: u64,
    rep: u64,
) -> Result<IntrinsicVolumeVector> {
    let mut rng = replication_rng(seed, rep);
    let r = sample_realization(p, &mut rng);
    intrinsic_volume_vector_upto(&r, p, j_max)
}

/// Intrinsic-volume vectors of replications `0..n_reps`, in replication order.
pub fn simulate_vectors(
    p: &ProcessParams,
    j_max: usize,
    n_reps: u64,
    seed: u64,
    opts: &MonteCarloOptions,
) -> Result<Vec<IntrinsicVolumeVector>> {
    p.check_j(j_max)?;
    check_budget(p, opts)?;
    in_pool(opts.workers, || {
        (0..n_reps)
            .into_par_iter()
            .map(|rep| replicate(p, j_max, seed, rep))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Full realizations with frames, for export.
pub fn simulate_realizations(
    p: &ProcessParams,
    n_reps: u64,
    seed: u64,
    opts: &MonteCarloOptions,
) -> Result<Vec<Realization>> {
    check_budget(p, opts)?;
    in_pool(opts.workers, || {
        (0..n_reps)
            .into_par_iter()
            .map(|rep| {
                let mut r = sample_realization(p, &mut replication_rng(seed, rep));
                attach_frames(&mut r, p, &mut frame_rng(seed, rep));
                r
            })
            .collect()
    })
}

/// Accumulate power sums of `(V_0, …, V_{j_max})` over `n_reps` replications.
///
/// Samples are shifted by their exact means before powers are taken.
pub fn run_monte_carlo(
    p: &ProcessParams,
    j_max: usize,
    n_reps: u64,
    max_order: usize,
    seed: u64,
    opts: &MonteCarloOptions,
) -> Result<SampleAccumulator> {
    p.check_j(j_max)?;
    if n_reps == 0 {
        return Err(Error::InvalidParameter(
            "at least one replication is required".into(),
        ));
    }
    if !(1..=MAX_ACCUMULATED_ORDER).contains(&max_order) {
        return Err(Error::InvalidParameter(format!(
            "accumulated order must be in 1..={MAX_ACCUMULATED_ORDER}, got {max_order}"
        )));
    }
    if opts.block_size == 0 {
        return Err(Error::InvalidParameter(
            "block size must be positive".into(),
        ));
    }
    check_budget(p, opts)?;
    let shift = (0..=j_max)
        .map(|j| mean_exact(p, j))
        .collect::<Result<Vec<_>>>()?;
    let block = opts.block_size as u64;
    let n_blocks = n_reps.div_ceil(block);

    let blocks = in_pool(opts.workers, || {
        (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let mut acc = SampleAccumulator::new(max_order, shift.clone())?;
                for rep in (b * block)..((b + 1) * block).min(n_reps) {
                    let v = replicate(p, j_max, seed, rep)?;
                    acc.push_to_block(b, v.values());
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut total = SampleAccumulator::new(max_order, shift)?;
    for acc in blocks {
        total = total.merge(acc)?;
    }
    Ok(total)
}
