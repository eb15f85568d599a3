//! Per-shot data consistency and shot rejection.

use crate::coils::CoilSet;
use crate::encode::{EncodingOperator, KSpace};
use crate::error::{Error, Result};
use crate::rigid::RigidParams;
use crate::sampling::SamplingPlan;
use crate::scalar::Real;
use crate::volume::Volume;
use num_complex::Complex;

/// Normalized residual `||A_s x - y_s|| / ||y_s||` per shot (0 for shots without signal).
pub fn dc_loss_per_shot<T: Real>(
    x: &Volume<Complex<T>>,
    ksp: &KSpace<T>,
    coils: &CoilSet<T>,
    plan: &SamplingPlan,
    traj: &[RigidParams],
) -> Result<Vec<f64>> {
    let op = EncodingOperator::new(coils, plan)?;
    dc_losses(&op, x, ksp, traj)
}

pub(crate) fn dc_losses<T: Real>(
    op: &EncodingOperator<T>,
    x: &Volume<Complex<T>>,
    ksp: &KSpace<T>,
    traj: &[RigidParams],
) -> Result<Vec<f64>> {
    Ok(op
        .shot_residuals(x, ksp, traj)?
        .into_iter()
        .map(|(r, y)| if y == 0.0 { 0.0 } else { (r / y).sqrt() })
        .collect())
}

/// Keep shots whose loss is at most `threshold`; shot 0 (k-space center) is always kept.
pub fn threshold_shots(losses: &[f64], threshold: f64) -> Result<Vec<bool>> {
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidInput(
            "data-consistency losses must be finite".into(),
        ));
    }
    let mut keep: Vec<bool> = losses.iter().map(|&l| l <= threshold).collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::DegenerateExclusion { threshold });
    }
    keep[0] = true;
    Ok(keep)
}
