//! Desk-scale laboratory for black-box certified randomness.
//!
//! Random Boolean functions stand in for random circuits. Everything a quantum
//! device would do is simulated exactly from the Fourier spectrum, which keeps
//! verification cheap at the sizes used here (`n ≤ 24`).

pub mod boolfn;
pub mod device;
pub mod entropy;
pub mod error;
pub mod fouriersample;
pub mod llqsv;
pub mod protocol;
pub mod rejection;
pub mod rng;
pub mod sqforrelation;
pub mod stats;

pub use boolfn::{BooleanFunction, FourierSpectrum, HeavinessClass};
pub use device::DeviceModel;
pub use entropy::OutcomeDistribution;
pub use error::{Error, Result};
pub use rng::StreamRng;
pub use sqforrelation::DistParams;
