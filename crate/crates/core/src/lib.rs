//! Signal model and classical processing for angle-of-arrival estimation on
//! a small uniform linear array.
//!
//! * [`array`]: geometry, steering vectors, beam patterns
//! * [`signal`]: synthetic IQ frames and the binary frame container
//! * [`covariance`]: windowed sample covariances, detection gate, features
//! * [`augment`]: phase-shift relabeling, superposition, AWGN expansion
//! * [`music`]: eigendecomposition and the MUSIC baseline
//! * [`metrics`]: penalized RMSE/MAE, confusion matrices, CDFs, SNR sweeps

pub mod array;
pub mod augment;
pub mod covariance;
pub mod error;
pub mod metrics;
pub mod music;
pub mod signal;

pub use array::{steering_vector, ArrayConfig, SteeringVector};
pub use error::{Error, Result};
pub use signal::{IqFrame, SourceSpec};
