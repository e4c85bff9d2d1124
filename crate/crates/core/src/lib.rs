// `!(x > y)` is used deliberately so that NaN falls through to the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod classical;
pub mod config;
pub mod eigen;
pub mod error;
pub mod harness;
pub mod par;
pub mod profile;
pub mod quantum;
pub mod quad;
pub mod roots;
pub mod weylvol;

pub use error::{Error, Result};
