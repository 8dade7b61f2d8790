//! Problem instances: weighted binary pairwise models, grid helpers,
//! region coverings, and the spin-glass / denoising generators.

mod graph;
mod grid;
mod image;
mod spinglass;

pub use graph::{apex_reduction, Assignment, GraphModel, ModelError};
pub use grid::{
    augment_with_diagonals, edge_covering, grid_edge_count, grid_model, plaquette_covering,
    strip_zero_diagonals, triangle_covering, validate_covering, vertex_covering, CoveringError,
    CoveringReport, RegionCovering,
};
pub use image::{add_noise, gen_denoise_model, BinaryImage, NoiseKind};
pub use spinglass::{gen_spinglass, SpinGlassDistribution};
