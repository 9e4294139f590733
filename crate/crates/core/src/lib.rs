//! Planning inter-robot loop-closure detection under communication and
//! computation budgets.

pub mod api;
pub mod certify;
pub mod cli;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod modular;
pub mod objectives;
pub mod place_recognition;
pub mod selector;
pub mod sim;
pub mod simplex;
pub mod submodular;

pub use error::{Error, Result};
