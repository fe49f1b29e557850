#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cutout_pool;
pub mod dataset_io;
pub mod error;
pub mod geometry;
pub mod injector;
pub mod metrics;
pub mod raster;
pub mod synthetic;

pub use error::{Error, Result};
