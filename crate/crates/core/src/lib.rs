//! Compressed-domain inputs for convolutional networks.
//!
//! [`jpeg`] recovers frequency coefficients from baseline JPEG without an
//! inverse DCT. [`tensor`] lays them out as `channels x rows x cols` tensors
//! and selects frequency bands. [`reduce`] holds the learnable channel
//! reductions. [`cost`] counts parameters and FLOPs of the network variants,
//! and [`harness`] times full against partial decoding.

pub mod cost;
pub mod harness;
pub mod jpeg;
pub mod reduce;
pub mod tensor;
