//! Deterministic simulation of laser-based audio injection against
//! MEMS-microphone voice assistants.
//!
//! The crate is organised as a signal chain plus two side analyses:
//!
//! * [`signals`]: audio synthesis, 16-bit PCM WAV I/O and STFT spectrograms.
//! * [`diode`]: laser I-L curve, amplitude modulation of audio onto the drive
//!   current, and the power-budget operating-point optimizer.
//! * [`optics`]: free-space link budget (spot size, port capture, losses).
//! * [`mic`]: light-to-audio transduction at the microphone.
//! * [`injection`]: device dataset, recognition-edge model and end-to-end
//!   attack simulation.
//! * [`authsim`]: PIN brute-force against lockout policies.
//! * [`defense`]: multi-microphone consistency check for single-port injection.
//!
//! Built-in profile data lives in [`profiles`].

pub mod authsim;
pub mod defense;
pub mod diode;
mod error;
pub mod injection;
pub mod mic;
pub mod optics;
pub mod profiles;
pub mod signals;

pub use error::{Error, Result};
