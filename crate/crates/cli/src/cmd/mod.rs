pub mod diag;
pub mod fit;
pub mod library;
pub mod score;
pub mod search;
