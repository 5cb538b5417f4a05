//! Pansharpening with a single-branch dense-residual CNN, classical
//! baselines, a Wald-protocol simulator and quality indices.

// `!(x >= lo)` is deliberate: it also rejects NaN. `is_multiple_of` is newer
// than the supported toolchain.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::manual_is_multiple_of)]

pub mod classical;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod raster;
pub mod tensor;
pub mod train;
pub mod viz;
pub mod wald;

pub use error::{Error, Result};
pub use raster::Raster;
pub use tensor::Tensor4;
