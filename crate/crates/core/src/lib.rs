//! Beam-slicing jammer mitigation for low-resolution massive MU-MIMO uplink.
//!
//! The crate covers the full link-level chain: geometric channel generation,
//! the clustered analog spatial transform ("beam-slicing"), gain-controlled
//! uniform midrise quantization with Bussgang constants, jammer covariance and
//! channel estimation, the SNIPS/CHOPS equalizers with their antenna-domain and
//! genie baselines, and a deterministic Monte-Carlo harness on top.

pub mod chanmodel;
pub mod config;
pub mod detector;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod montecarlo;
pub mod quantizer;
pub mod selftest;
pub mod slicer;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use num_complex::Complex64;
