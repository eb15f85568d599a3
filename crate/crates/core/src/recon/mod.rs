//! Reconstruction solvers.

mod altopt;
mod config;
mod dc;
mod l1;

pub use altopt::{altopt, AltOptResult};
pub use config::{BatchMode, ReconConfig};
pub use dc::{dc_loss_per_shot, threshold_shots};
pub use l1::{recon_adjoint, recon_l1, recon_l1_subset, L1Result};
