//! OTFS integrated positioning and communication with low-resolution ADCs.

pub mod adc;
pub mod channel;
pub mod config;
pub mod crlb;
pub mod downlink;
pub mod error;
pub mod estimator;
pub mod modem;

pub use error::{Error, Result};
pub mod sim;
