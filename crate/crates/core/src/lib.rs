pub mod banded;
pub mod certify;
pub mod cli;
pub mod config;
pub mod constants;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod limit_problem;
pub mod solvers;

pub use error::{Error, Result};
