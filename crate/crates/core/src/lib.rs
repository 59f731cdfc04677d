//! Character-level encoder-decoder translation toolkit.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod sgml;
pub mod textprep;
pub mod trainer;
pub mod vocab;

pub use error::{Error, Result};
