// SPDX-License-Identifier: Apache-2.0

//! Device-to-system performance evaluation.
//!
//! The crate chains compact transistor and interconnect models into a
//! parametric standard-cell library, runs a simplified physical-design flow
//! over a netlist to produce energy/frequency/area points, sweeps technology
//! parameters into Pareto-optimal curves, and trains a small neural-network
//! surrogate on the resulting data.

pub mod cell_library;
pub mod design_flow;
pub mod error;
pub mod interconnect;
pub mod kv;
pub mod nn_predictor;
pub mod sweep;
pub mod vsdevice;

pub use error::{Error, Result};
