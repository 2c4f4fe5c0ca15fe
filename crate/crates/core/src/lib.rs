// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod channels;
pub mod config;
pub mod error;
pub mod optics;
pub mod oracle;
pub mod protocol;
pub mod qstate;
pub mod source;
pub mod sweep;

pub use error::{Error, Result};
