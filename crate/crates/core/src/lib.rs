//! Fixed point of the transformation T(a)_n = 1/(a_0 + ... + a_n) on
//! normalized Hausdorff moment sequences.

// `!(x > a)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod divisibility;
pub mod error;
pub mod numeric;
pub mod par;
pub mod psidyn;
pub mod seqcore;
pub mod specfun;
pub mod spectrum;
pub mod transform;

pub use error::{Error, Result};
pub use par::Exec;
