//! Negation augmentation, validation and evaluation for if-then commonsense
//! knowledge corpora.

pub mod annotation;
pub mod builder;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod judge;
pub mod llm;
pub mod metrics;
pub mod negator;
pub mod rng;
pub mod verbalizer;

pub use error::{Error, Result};
