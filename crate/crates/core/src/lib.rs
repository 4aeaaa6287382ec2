//! Blind search on the integers.
//!
//! A token sits on `{0, ..., n}`. Each round a step size `d` is drawn from
//! a fixed distribution `mu` on `{1, ..., n}` and the token moves from `a`
//! to `a - d` when `d <= a`. This crate computes the expected number of
//! rounds to reach 0 exactly, simulates it, brackets it between a dyadic
//! upper bound and a potential-function lower bound, and searches for
//! distributions that make it small. A continuous analogue on `[0, 1]` is
//! simulated in [`continuous`].
//!
//! The exact engines are generic over [`Scalar`]; the aliases below fix the
//! common choices.

pub mod chain;
pub mod continuous;
pub mod dist;
pub mod error;
pub mod exact;
pub mod optimize;
pub mod potential;
pub mod scalar;

pub use chain::{Process, SimSummary, TransitionRow};
pub use continuous::{ContinuousConfig, ContinuousRunStats, ScalingTable};
pub use dist::{DistSpec, StepDistribution};
pub use error::{Error, Result};
pub use exact::{DeferredTable, HittingProfile};
pub use optimize::{OptimizeReport, OptimizeSettings};
pub use potential::{DropReport, PotentialProfile};
pub use scalar::{ExtF64, KahanSum, Scalar};

pub type Dist = StepDistribution<f64>;
pub type Dist32 = StepDistribution<f32>;
pub type DistExt = StepDistribution<ExtF64>;

pub type Profile = HittingProfile<f64>;
pub type ProfileExt = HittingProfile<ExtF64>;

pub type Potential = PotentialProfile<f64>;
pub type PotentialExt = PotentialProfile<ExtF64>;

pub type Drops = DropReport<f64>;
pub type DropsExt = DropReport<ExtF64>;
