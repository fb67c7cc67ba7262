pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod experiments;
pub mod net;
pub mod persist;
pub mod relevance;
pub mod report;

pub use error::{Error, Result};
