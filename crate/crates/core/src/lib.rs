//! Simulation toolkit for a body-worn accelerometer sensor network on the
//! 2.4 GHz ISM band.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod channel_select;
pub mod classifier;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod frame;
pub mod link;
pub mod motion;
pub mod rf;
pub mod scenario;
pub mod sensor;

pub use error::{Error, FrameError, Result};
