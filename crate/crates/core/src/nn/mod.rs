//! Parameter storage, graph binding and the layer blocks shared by the
//! backbone and the latent heads.

pub mod blocks;
pub mod graph;
pub mod params;
pub mod regularize;

pub use graph::{Graph, Mode, Regularization};
pub use params::{Initializer, ParamStore};
