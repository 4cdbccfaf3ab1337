//! Radial harmonic analysis on real hyperbolic spaces and their products:
//! spherical transforms, Bessel-Green-Riesz kernels, weighted Hardy
//! conditions, functional-inequality ratios and damped wave solvers.

pub mod error;
pub mod fit;
pub mod hardy;
pub mod ineq;
pub mod kernels;
pub mod optim;
pub mod quadrature;
pub mod space;
pub mod special;
pub mod spherical;
pub mod wave;

pub use error::{Error, Result};
pub use space::{ChamberPoint, SpaceModel};
