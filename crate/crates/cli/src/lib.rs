//! Command-line runner for the disordered Thouless pumping experiments.

pub mod app;
pub mod config;
pub mod output;
pub mod svg;
