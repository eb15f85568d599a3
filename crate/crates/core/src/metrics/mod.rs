//! Image quality metrics and paired-evaluation preprocessing.
//!
//! Reference-based: PSNR, SSIM, artifact power. Reference-free: Tenengrad and average
//! edge strength. Paired volumes are rigidly aligned, masked and normalized to their
//! 99.9th percentile before scoring.

mod edges;
mod preprocess;
mod reference;
mod register;
mod report;

pub use edges::{average_edge_strength, average_edge_strength_masked, tenengrad};
pub use preprocess::{percentile, preprocess_pair, Normalization, NORM_PERCENTILE};
pub use reference::{artifact_power, psnr, ssim, ssim_with, SsimOptions, PSNR_CAP};
pub use register::{align_to, register_rigid};
pub use report::{MetricKind, MetricReport, MetricRow};
