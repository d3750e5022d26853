//! Design- and analysis-stage tools for matched observational studies.
//!
//! The design stage asks whether a matched dataset is plausibly "as-if
//! randomized" under a chosen assignment mechanism: draw assignments from
//! the mechanism ([`designs`]), compare the observed covariate balance
//! ([`balance`]) with its randomization distribution ([`randtest`]). The
//! analysis stage then inverts sharp-null randomization tests under the
//! chosen mechanism, or uses Neymanian intervals ([`inference`]).
//!
//! The crate is `no_std` and only needs `alloc`; file formats, plotting and
//! the command line live in the `asif` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod balance;
pub mod data;
pub mod designs;
pub mod error;
pub mod inference;
pub mod linalg;
pub(crate) mod math;
pub mod matching;
pub mod randtest;
pub mod rng;
pub mod sim;
pub mod stats;

pub use data::{validate, standardize, Assignment, Block, Caps, ColumnScale, Covariates, DesignKind, DesignSpec, MatchedDataset};
pub use designs::{AssignmentDraw, Design, DrawSet};
pub use error::{Error, Result, Violation};
