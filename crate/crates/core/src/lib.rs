//! Core algorithms for spending-personality micro-segmentation.
//!
//! Everything in this crate is pure computation over in-memory data and builds
//! without `std` (only `alloc` is required). File formats, the command line and
//! thread pools live in the companion `microseg` crate.
//!
//! The pipeline, bottom up:
//!
//! * [`synthgen`] draws synthetic customer populations whose annual spending
//!   shares are driven by latent Big-Five personalities.
//! * [`dataset`] aggregates classified transactions into income-normalised
//!   annual spending cubes, flattens and splits them.
//! * [`personality`] scores traits through a coefficient table, standardises
//!   them and ranks trait dominance.
//! * [`nn`] is a small double-precision network core: dense and LSTM layers,
//!   back-propagation through time, Adam and a finite-difference checker.
//! * [`models`] builds the four architectures, trains them, runs the elbow
//!   sweep over hidden size and extracts hidden-state trajectories.
//! * [`segment`] measures trajectory smoothness and separation and builds the
//!   dominance hierarchy; [`plot`] renders trajectory projections as SVG.
//! * [`transfer`] runs the frozen-body transfer benchmark.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod math;
pub mod models;
pub mod nn;
pub mod personality;
pub mod plot;
pub mod rng;
pub mod segment;
pub mod stats;
pub mod synthgen;
pub mod transfer;

pub use error::{Error, Result};
