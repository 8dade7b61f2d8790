//! MAP inference on binary pairwise graphical models.
//!
//! The problem is to maximize `U(x) = sum θᵉ_ij x_i x_j + sum θᵛ_i x_i`
//! over sign vectors `x ∈ {±1}ⁿ`. This crate implements:
//!
//! - a degree-4 partial sum-of-squares relaxation (`sdp`) solved by
//!   low-rank block-coordinate ascent, each block being an exactly
//!   solved trust-region subproblem on the unit sphere,
//! - the confidence lift-and-project rounding scheme (`rounding`)
//!   that extracts integral assignments from the relaxed solution,
//! - loopy and generalized belief propagation baselines (`mp`),
//! - exhaustive enumeration, chordless-cycle enumeration, and
//!   metric-polytope certificates (`oracle`),
//! - spin-glass and image-denoising instance generators (`model`),
//! - text/PGM/CSV interchange formats (`io`) and a batch bench
//!   harness (`bench`) behind a small command-line front end (`cli`).
//!
//! The `examples/` directory has one runnable program per capability;
//! start with `cargo run --release -p psos --example spinglass_clap`.

pub mod bench;
pub mod cli;
pub mod io;
pub mod model;
pub mod mp;
pub mod oracle;
pub mod rounding;
pub mod sdp;

pub use model::{Assignment, BinaryImage, GraphModel, RegionCovering, SpinGlassDistribution};
pub use sdp::{GramState, SolverConfig};
