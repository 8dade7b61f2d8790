//! Message-passing baselines: loopy belief propagation (sum-product and
//! max-product) and a plaquette-based generalized variant on grids.

mod bp;
mod gbp;

pub use bp::{bp_max_product, bp_sum_product, BpOptions, MaxProductRun, SumProductRun};
pub use gbp::{gbp_plaquette, GbpOptions, GbpRun};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpError {
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error("model is not a subgraph of a {side}x{side} grid: edge ({i},{j})")]
    NotAGridSubgraph { side: usize, i: u32, j: u32 },
}
