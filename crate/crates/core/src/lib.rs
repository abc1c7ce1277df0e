pub mod cli;
pub mod embedding;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mediation;
pub mod models;
pub mod network;
pub mod regression;
pub mod sim;

pub use error::{Error, Result};
