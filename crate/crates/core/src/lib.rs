#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arch;
pub mod cost;
pub mod error;
pub mod experiment;
pub mod morl;
pub mod sched;
pub mod sim;
pub mod thermal;
pub mod workload;

pub use error::{Error, Result};
