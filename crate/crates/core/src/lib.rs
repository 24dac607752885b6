//! Hybrid lossy/lossless delta compression for body-area sensor networks,
//! with a deterministic device-to-sink simulator.

pub mod cli;
pub mod codec;
pub mod control;
pub mod metrics;
pub mod netmodel;
pub mod signals;
pub mod sink;
