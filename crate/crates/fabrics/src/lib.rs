//! Modular second-order motion policies composed over a transform tree.
//!
//! Behaviors are built as fabric terms — (Finsler energy, acceleration
//! policy) pairs attached to task spaces — pulled back through a tree of
//! differentiable maps and combined as metric-weighted averages. Energizing
//! the combined geometry conserves a chosen energy; a forcing potential plus
//! a regulated damper then drives the system to task goals at a controlled
//! execution speed.
//!
//! Module map:
//! - [`spec_algebra`]: evaluated (M, f) fragments, summation, pullback and
//!   policy resolution
//! - [`finsler`]: energy families with analytic tensors and curvature forces
//! - [`geometry`]: task maps, potentials and the fabric term catalog
//! - [`tree`]: transform tree with the forward state pass and four-channel
//!   backward pass
//! - [`speed_control`]: energization coefficients and the speed regulator
//! - [`runtime`]: fixed-step integration, trajectory recording, batch
//!   rollouts
//! - [`kinematics`]: point particle and planar arm models

pub mod error;
pub mod fd;
pub mod finsler;
pub mod geometry;
pub mod kinematics;
pub mod runtime;
pub mod spec_algebra;
pub mod speed_control;
pub mod tree;

pub use error::{FabricError, Result};

/// Deterministic RNG used by validation sampling and the test suites.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
