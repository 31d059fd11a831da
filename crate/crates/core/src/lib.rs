//! Doppler-robust linear transmission over RIS-aided high-mobility links.
//!
//! The crate covers channel synthesis ([`channel`]), the complementary
//! dual-tone waveform ([`waveform`]), downlink equivalent-channel estimation,
//! detection and precoding ([`downlink`]), uplink antenna averaging
//! ([`uplink`]), closed-form statistics ([`analysis`]) and the Monte Carlo
//! experiment driver ([`harness`]).

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod downlink;
pub mod error;
pub mod harness;
pub mod special;
pub mod uplink;
pub mod waveform;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
