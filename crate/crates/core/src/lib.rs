pub mod cli;
pub mod data;
pub mod error;
pub(crate) mod kv;
pub mod lattice;
pub mod model;
pub mod numerics;
pub mod synthesis;

pub use error::{Error, Result};

/// Seedable generator used everywhere randomness is needed.
pub type Prng = rand_chacha::ChaCha8Rng;
