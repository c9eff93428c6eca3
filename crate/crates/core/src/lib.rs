//! Spiking sequence models with exact parallel training.
//!
//! [`seqcore`] holds sequence containers and causal FFT convolution,
//! [`neurons`] the LIF, PRF and ALIF dynamics in sequential and parallel
//! form, [`traingrad`] a small reverse-mode tape and training loop, and
//! [`analysis`] numerical checks and energy accounting. [`io`], [`config`],
//! [`bench`] and [`equiv`] back the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bench;
pub mod config;
pub mod equiv;
pub mod error;
pub mod io;
pub mod neurons;
pub mod seqcore;
pub mod traingrad;

pub use error::{Error, Result};
