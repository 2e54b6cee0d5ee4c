//! Worst- and best-case prices of variable annuity guarantees over all
//! mortality intensities consistent with a life table.

// `!(x > 0.0)` is how NaN gets rejected alongside the bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops read more plainly in the small dense linear algebra
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod lifetable;
pub mod market;
pub mod mc;
pub mod quadrature;
pub mod relaxed;
pub mod strict;

pub use error::{Error, Result};
