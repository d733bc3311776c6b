//! Out-of-core symmetric rank-k update and Cholesky factorization on a
//! simulated two-level memory.
//!
//! Every kernel runs against an [`IoLedger`] that tracks which elements sit
//! in fast memory and counts transfers. Kernels can run in compute mode,
//! where they also produce numeric results, or in count mode, where only the
//! transfer schedule is replayed.

pub mod baseline;
pub mod bounds;
pub mod error;
pub mod io_model;
pub mod lbc;
pub mod machine;
pub mod matrix;
pub mod matrix_file;
pub mod rng;
pub mod scalar;
pub mod tbs;
pub mod triangle;

pub use error::{Error, Result};
pub use io_model::{ElementAddr, Event, IoLedger, IoReport, MatrixId};
pub use machine::{Machine, Mode, PanelView, TriView, Update};
pub use matrix::{packed_len, packed_offset, Matrix, PackedTriangular};
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Packed64 = PackedTriangular<f64>;
pub type Packed32 = PackedTriangular<f32>;
