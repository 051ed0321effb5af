pub mod error;
pub mod operator;
pub mod wh;
pub mod born;
pub mod correlations;
pub mod frequency;
pub mod json;
pub mod cli;
