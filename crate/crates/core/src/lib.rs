//! Multi-source feature alignment and fusion for singing voice conversion,
//! plus the surrounding pipeline: prosody extraction and transposition,
//! speaker conditioning, a closed-form reference decoder, objective metrics,
//! and an alignment-strategy benchmark. Everything is file-based (WAV in,
//! DSFF feature tensors in/out) and deterministic under a fixed seed.

pub mod align_fuse;
pub mod audio_io;
pub mod bench;
pub mod conditioning;
pub mod config;
pub mod decoder;
pub mod error;
pub mod feature_store;
pub mod manifest;
pub mod metrics;
pub mod prosody;
pub mod synth;

pub use error::{Error, Result};
