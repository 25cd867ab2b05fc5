pub mod cli;
pub mod config;
pub mod counterexamples;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod json;
pub mod linalg;
pub mod performance;
pub mod riccati;
pub mod synthesis;
pub mod transcription;

pub use error::{Error, Result};
