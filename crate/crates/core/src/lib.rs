//! Hardware-free model of an RFSoC-based superconducting-qubit control stack.
//!
//! The crate is organised by subsystem:
//!
//! * [`signal`] holds the frequency-domain math: reconstruction responses of
//!   the DAC decoder modes, Nyquist-zone folding, pink-noise synthesis,
//!   spectra and SNR, and the output-power prediction.
//! * [`sync`] models trigger resynchronisation against the master clock,
//!   tile alignment and inter-board skew.
//! * [`rfsoc`] is the behavioural board model: FIFO-limited DAC playback,
//!   ADC capture with quantisation and physical aliasing, gang switching,
//!   loopback wiring and schedule execution.
//! * [`bias`] covers the low-noise bipolar current source: code to current,
//!   noise and drift traces, amplitude spectra, Allan deviation and a toy
//!   flux-tuned cavity map.

pub mod bias;
pub mod rfsoc;
pub mod signal;
pub mod sync;

mod seed;

pub use seed::derive_seed;
