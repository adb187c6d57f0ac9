//! Experiment harness around the core library: JSON-configured batch runs
//! over random scenario draws, with CSV/JSON artifacts suitable for plotting.

pub mod config;
pub mod experiment;
