//! Beampattern-based angle-of-arrival tracking for analog-beamforming
//! millimeter-wave links.
//!
//! The crate models a point-to-point downlink between a base station (BS)
//! and a mobile station (MS), both equipped with square uniform planar
//! arrays driven by a single RF chain through Q-bit phase shifters. The MS
//! rotates, and its receive beam is re-steered once per channel block by one
//! of three methods:
//!
//! - [`tracker`]: the beampattern tracker, which probes four perturbed beams,
//!   forms gain ratios and inverts the decoupled `ι` pattern kernel in
//!   virtual-angle coordinates (5 trainings per block).
//! - [`baselines::codebook_align`]: exhaustive search over a 128-entry
//!   Kronecker DFT codebook.
//! - [`baselines::nine_beam_align`]: a 3×3 perturbation grid around the
//!   current beam.
//!
//! [`sim`] runs the rotating-handset scenario and produces throughput traces.

pub mod arrays;
pub mod baselines;
pub mod channel;
mod error;
pub mod sim;
pub mod tracker;
pub mod training;
pub mod virtual_angle;

pub use arrays::{
    array_response, combined_gain, quantize_weights, Angle, QuantizerConfig, UpaGeometry,
    WeightVector,
};
pub use channel::{ChannelSnapshot, GainEstimate, PathParams, TrainingSignal};
pub use error::{Error, Result};
pub use training::Trainer;
pub use virtual_angle::VirtualAngle;

pub use num_complex::Complex64;
