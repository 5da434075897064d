//! Intrinsic volumes of stationary isotropic Poisson k-flat processes observed
//! in a Euclidean ball.
//!
//! The crate has two halves that check each other:
//!
//! * an exact engine ([`geometry`], [`combinatorics`], [`moments`]) giving
//!   every central moment and cumulant of `V_j(η_k ∩ B_ρ)` in closed form, the
//!   asymptotic leading terms, a Berry–Esseen bound and the limiting
//!   correlation matrix of `(V_0, …, V_k)`;
//! * a reproducible Monte Carlo simulator ([`simulator`]) of the process
//!   itself together with the estimators in [`stats`].
//!
//! ```
//! use kflat::{moments, MeasureConvention, ProcessParams};
//!
//! let lines = ProcessParams::new(2, 1, 1.0, 1.0, MeasureConvention::Invariant).unwrap();
//! let mu4 = moments::central_moment_exact(&lines, 1, 4).unwrap();
//! assert!((mu4 - 102.4).abs() < 1e-9);
//! ```

pub mod combinatorics;
pub mod error;
pub mod geometry;
pub mod moments;
pub mod quadrature;
pub mod simulator;
pub mod stats;

pub use combinatorics::{BlockPartitionTable, MomentSequence};
pub use error::{Error, Result};
pub use geometry::{FunctionalValue, MeasureConvention, ProcessParams};
pub use moments::{AsymptoticTerm, MomentReport};
pub use simulator::{IntrinsicVolumeVector, MonteCarloOptions, Realization, SampleAccumulator};
