//! Wavelet-moment estimation of linear trajectory models with latent dependent noise
//! and Markov-modulated missing observations.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod fft;
pub mod io;
pub mod missingness;
pub mod noise;
pub mod optim;
pub mod sim;
pub mod special;
pub mod theo_wv;
pub mod wavelet;
pub mod wv_cov;

pub use error::{GmwmxError, Result};
