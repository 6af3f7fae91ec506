//! Temporal contrastive representation learning with closed-form
//! Gauss-Markov inference over the learned representations.

pub mod control;
pub mod data;
pub mod error;
pub mod eval;
pub mod inference;
pub mod objective;
pub mod oracle;
pub mod encoder;
pub mod tensor;

pub use error::{Error, Result};
