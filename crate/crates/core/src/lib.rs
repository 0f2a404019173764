//! Physical-watermark defenses against replay attacks on nonlinear control
//! loops: LMI synthesis of the watermark gain, controller and observer,
//! certificate checks, closed-loop simulation and detection statistics.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod codesign;
pub mod detection;
pub mod error;
pub mod linalg;
pub mod plant;
pub mod gains;
pub mod parallel;
pub mod sdp;
pub mod sim;
pub mod watermark;

pub use error::{Error, Result};
pub use linalg::{Matrix, ParametricJacobian, SymmetricMatrix};
pub use plant::NonlinearPlant;
