//! Batch front end for the mbrw simulation toolkit: validated run configs,
//! an experiment registry, deterministic output files with manifests, and the
//! validation suite.

pub mod config;
pub mod io;
pub mod manifest;
pub mod registry;
pub mod suite;
