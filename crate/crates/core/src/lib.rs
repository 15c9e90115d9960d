//! Random caching in large-scale SIMO wireless networks: analytical
//! successful-transmission-probability (STP) evaluation, Monte Carlo
//! verification, and caching/DoF optimization for MRC and PZF receivers.
//!
//! Helpers form a homogeneous Poisson field and each stores `C` of `N` files
//! according to a caching distribution `T`; users associate with the nearest
//! helper storing the requested file. The crate provides
//!
//! - [`numerics`]: special functions, partition enumeration and adaptive
//!   quadrature underlying the analytical expressions,
//! - [`model`]: scenario parameters, popularity and caching distributions,
//!   baseline schemes, and exactly-C cache sampling,
//! - [`mrc`]: exact STP, closed-form bounds and low-threshold asymptotics for
//!   the maximal-ratio-combining receiver,
//! - [`pzf`]: exact STP and the L-parameterized upper bound for the
//!   partial-zero-forcing receiver,
//! - [`montecarlo`]: the ground-truth network simulator,
//! - [`optimize`]: CCCP for the MRC objective, the closed-form low-threshold
//!   optimum, and the alternating discrete–continuous PZF optimizer.

// Validation guards use `!(x > 0.0)` so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod model;
pub mod montecarlo;
pub mod mrc;
pub mod numerics;
pub mod optimize;
pub mod pzf;

pub use model::{
    baseline, sample_cache, validate, BaselineKind, CacheSampler, CachingDistribution,
    DofAllocation, ModelError, NetworkParams, Popularity,
};
pub use mrc::{EstimateKind, StpEstimate};
