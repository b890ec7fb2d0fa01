//! Two-branch recurrent classifier for multi-source (radar + optical)
//! object-level satellite image time series.
//!
//! Each branch enriches its per-timestep input with two fully connected tanh
//! layers before a GRU update ([`fcgru`]), pools hidden states with a
//! tanh-relaxed attention ([`attention`]), and a third attention pools the
//! stacked hidden states of both branches. Three classifiers (two auxiliary,
//! one fused) are trained jointly ([`model`]) and, optionally, level by level
//! along a land-cover taxonomy ([`hierarchy`]).

pub mod attention;
pub mod data;
pub mod error;
pub mod fcgru;
pub mod hierarchy;
pub mod model;
pub mod numkernel;
pub mod traineval;

pub use error::{Error, Result};
