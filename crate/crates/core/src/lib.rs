//! Ponderomotive-meter entanglement purification.
//!
//! Two sides `A` and `B` share `p` copies of a two-mode squeezed state. A
//! mechanical meter coupled to the total photon number on side `A` is read
//! out in its position quadrature; conditioning on the outcome changes the
//! entanglement left between the sides. This crate computes
//!
//! * the total-photon-number prior of the squeezed ensemble ([`fock`]),
//! * the pointer densities and the outcome distribution `P(x)` ([`meter`]),
//! * the conditional spectrum, entanglement ratio, success probability and
//!   efficiency of the protocol ([`protocol`]),
//! * and an independent check of the meter steady state by integrating the
//!   quantum Brownian motion master equation sector by sector ([`dynamics`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod meter;
pub mod protocol;
pub mod quadrature;

pub use dynamics::{DynamicsParams, DynamicsSettings, MeterBlock, SteadyStateReport};
pub use error::{Error, Result};
pub use fock::{SqueezedEnsemble, TruncationPolicy};
pub use meter::{Beta, DensityPath, MeterModel, OutcomeDistribution, OutcomeGrid};
pub use protocol::{ConditionalSpectrum, Purification, SuccessRegion, SweepResult};
