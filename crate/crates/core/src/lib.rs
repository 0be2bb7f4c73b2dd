//! Link-level simulator for compressed-sensing channel estimation and
//! conjugate analog beamforming in multi-user mmWave downlinks.
//!
//! The downlink operation has two phases: the base station broadcasts random
//! quantized-phase training beams while every mobile station takes combined
//! measurements and recovers its dominant path direction by orthogonal
//! matching pursuit over a Kronecker-structured dictionary; the recovered
//! angles then drive conjugate analog beamformers and combiners, whose
//! achievable and effective rates are evaluated by seeded Monte Carlo sweeps.
//!
//! Modules follow the pipeline: [`array`] (steering vectors and dictionaries),
//! [`channel`] (single-path geometric channels and the link budget),
//! [`training`] (random training matrices and the Kronecker-factored sensing
//! operator), [`recovery`] (OMP support recovery), [`rates`] (beamformers and
//! rate formulas), and [`sim`] (the Monte Carlo harness, sweeps, and CSV
//! output).

pub mod array;
pub mod channel;
pub mod error;
mod linalg;
pub mod rates;
pub mod recovery;
pub mod seed;
pub mod sim;
pub mod training;

pub use error::{Error, Result};
