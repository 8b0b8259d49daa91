pub mod cv;
pub mod dp;
pub mod data;
pub mod linalg;
pub mod error;
pub mod compliers;
pub mod estimate;
pub mod fstar;
pub mod heterosked;
pub mod montecarlo;
pub mod robust;
pub mod stats;
pub mod rng;

pub use error::{Error, Result};
