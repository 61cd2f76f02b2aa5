//! Simulation and evaluation toolkit for tag fading in tagged MRI.
//!
//! The crate models tag fading from T1 relaxation interleaved with repeated
//! RF tips ([`spamm`]), renders synthetic tagged movies with known motion
//! ([`phantom`]), extracts harmonic-phase images ([`harp`]), registers frame
//! pairs under six similarity objectives ([`losses`], [`register`]) and scores
//! the estimates with displacement and strain metrics ([`strain`]).

pub mod error;
pub mod harp;
pub mod imgcore;
pub mod losses;
pub mod par;
pub mod phantom;
pub mod register;
pub mod spamm;
pub mod strain;

pub use error::{Error, Result};
