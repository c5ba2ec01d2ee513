pub mod bound;
pub mod cli;
pub mod config;
pub mod conversion;
pub mod error;
pub mod ext_rational;
pub mod fitter;
pub mod geometry;
pub mod norms;
pub mod simulator;
pub mod engine;
