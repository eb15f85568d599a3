//! Simulation, reconstruction and evaluation of rigid motion in 3D Cartesian MRI.
//!
//! Volumes are stored `(ny, nz, nx)` with the readout `x` innermost. Numeric routines are
//! generic over [`Real`] (`f32` or `f64`); the aliases below fix the common choices.

pub mod coils;
pub mod encode;
pub mod error;
pub mod fft;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod phantom;
pub mod pipeline;
pub mod pmas;
pub mod recon;
pub mod rigid;
pub mod sampling;
pub mod scalar;
pub mod volume;
pub mod wavelet;

pub use error::{Error, Result};
pub use rigid::RigidParams;
pub use sampling::{PlanParams, SamplingPlan};
pub use scalar::Real;
pub use volume::{Dims, Volume};

use num_complex::Complex;

pub type RealVolume = Volume<f64>;
pub type ComplexVolume = Volume<Complex<f64>>;
pub type RealVolume32 = Volume<f32>;
pub type ComplexVolume32 = Volume<Complex<f32>>;
pub type CoilSet = coils::CoilSet<f64>;
pub type KSpace = encode::KSpace<f64>;
