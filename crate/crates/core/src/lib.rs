//! A virtual laboratory for a single nuclear spin-1/2 qubit in an optical
//! cavity: RF spin dynamics with relaxation, photon-counting projective
//! readout, maximum-likelihood state tomography and the curve fits used to
//! extract visibilities and relaxation times.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiments;
pub mod fitting;
pub mod readout;
pub mod rng;
pub mod spin;
pub mod tomography;

pub use experiments::ApparatusParams;
pub use readout::{ CavityParams, ReadoutParams };
pub use spin::{ DensityMatrix, PulseSegment, PureState, RelaxationParams };

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
