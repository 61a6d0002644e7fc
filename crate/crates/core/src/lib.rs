//! Brownian motion on the Heisenberg group.
//!
//! This crate implements the probabilistic machinery attached to the
//! sub-Laplacian on the Heisenberg group `H^n`:
//!
//! - [`group`]: exact group arithmetic, the homogeneous norm and the
//!   left-invariant distance, parabolic dilations.
//! - [`kernel`]: numerical evaluation of the heat kernel `p_t` (a
//!   one-dimensional oscillatory integral), its normalization, scaling and
//!   semigroup identities, and Gaussian upper-bound fits.
//! - [`sampler`]: horizontal Brownian motion with its Levy-area vertical
//!   component, on reproducible counter-style RNG streams, plus the path
//!   transforms (left translation, time reversal).
//! - [`measure`]: finite-dimensional Wiener-measure computations on
//!   cylinder sets (nested quadrature and Monte Carlo), slice-insertion
//!   consistency, and the dyadic Holder chaining machinery.
//! - [`fk`]: a Monte Carlo Feynman-Kac solver for the heat equation with
//!   potential, with quadrature cross-references, weighted endpoint
//!   densities, Markov/Duhamel/symmetry identity checks.
//! - [`validate`]: the bundled validation suite the CLI exposes as
//!   `heiswiener validate`.
//!
//! All Monte Carlo entry points take an explicit [`sampler::RngStreamSpec`];
//! results are bitwise reproducible for a fixed seed, independent of thread
//! count (see [`exec`]).

pub mod error;
pub mod exec;
pub mod fk;
pub mod group;
pub mod kernel;
pub mod measure;
pub mod quad;
pub mod sampler;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
pub use group::GroupPoint;
pub use kernel::KernelConfig;
pub use sampler::{PathGrid, RngStreamSpec, SamplePath};
