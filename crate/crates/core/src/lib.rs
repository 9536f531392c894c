pub mod actuator;
pub mod ca;
pub mod control;
pub mod corpus;
pub mod cycles;
pub mod encoder;
pub mod error;
pub mod exec;
pub mod library;
pub mod score;
pub mod search;
pub mod space;
pub mod stats;
pub mod zspace;

pub use error::{Error, Result};
