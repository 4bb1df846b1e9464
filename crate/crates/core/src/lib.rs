//! Toolchain for the Serpens HBM SpMV accelerator: a layout compiler that
//! turns a sparse matrix into per-channel 512-bit word streams, a functional
//! simulator of the accelerator dataflow with cycle accounting, and the
//! analytic resource and cycle models.

pub mod generate;
pub mod layout;
pub mod models;
pub mod mtx;
pub mod sim;
pub mod sparse;

pub use layout::{compile, Config, SerpensImage};
pub use sim::{simulate, SimOptions, SimResult};
pub use sparse::{reference_spmv, DenseVector, SparseMatrix, Triplet};
