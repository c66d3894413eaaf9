//! Windowed-spectrum forecasting core.
//!
//! Everything in this crate is pure computation over owned buffers: the
//! hyper-complex algebra, the short-time Fourier transform pair, top-M
//! frequency compression, the frequency-domain MLP backbones, the full
//! forecasting model, a reverse-mode gradient tape and the training loop.
//! File formats, CSV ingestion and the command line live in the `hcfreq`
//! companion crate.
//!
//! The crate is `no_std` when the default `std` feature is disabled; it
//! only needs `alloc`.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod backbone;
pub mod config;
pub mod conformance;
pub mod data;
mod error;
pub mod model;
pub mod fft;
pub mod hc;
pub mod select;
pub mod spectral;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
