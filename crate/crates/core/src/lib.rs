//! Simulator for generalized quantum measurement realized as unitary
//! dynamics on a system coupled to a string of pointer sites.
//!
//! A [`reduction::ReductionFamily`] describes the measurement on the
//! system alone. [`dilation`] turns it into a unitary interaction with a
//! pointer whose ground state means "no result yet". [`string`] chains those
//! pointers into a past/future string with a step unitary, and
//! [`filtering`] runs the same measurement sequentially on the system
//! space. The two pictures agree; `eventum compare` checks it.

pub mod cli;
pub mod dilation;
pub mod distribution;
pub mod error;
pub mod filtering;
pub mod linalg;
pub mod random;
pub mod reduction;
pub mod scenarios;
pub mod string;

pub use error::{Error, Result};
