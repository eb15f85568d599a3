//! Zero-filled adjoint and wavelet-regularized gradient-descent reconstruction.

use super::config::{BatchMode, ReconConfig};
use crate::coils::CoilSet;
use crate::encode::{EncodingOperator, KSpace};
use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::rigid::RigidParams;
use crate::sampling::SamplingPlan;
use crate::scalar::Real;
use crate::volume::Volume;
use crate::wavelet::wavelet_l1;
use num_complex::Complex;

/// Coil-combined zero-filled magnitude image, normalized by `sum_c |S_c|^2` where nonzero.
pub fn recon_adjoint<T: Real>(
    ksp: &KSpace<T>,
    coils: &CoilSet<T>,
    plan: &SamplingPlan,
) -> Result<Volume<T>> {
    let op = EncodingOperator::new(coils, plan)?;
    op.check_kspace(ksp)?;
    let dims = coils.dims();
    let fft = Fft3::<T>::new(dims);
    let mut acc = Volume::<Complex<T>>::zeros(dims);
    for (k, s) in ksp.iter().zip(coils.maps()) {
        let mut img = k.clone();
        fft.inverse(&mut img);
        for ((a, v), sv) in acc.data_mut().iter_mut().zip(img.data()).zip(s.data()) {
            *a = *a + sv.conj() * v;
        }
    }
    let sos = coils.sum_of_squares();
    acc.zip_map(&sos, |a, &w| {
        if w > T::zero() {
            a.norm() / w
        } else {
            a.norm()
        }
    })
}

/// Result of a wavelet-L1 reconstruction.
#[derive(Clone, Debug)]
pub struct L1Result<T: Real> {
    pub image: Volume<Complex<T>>,
    /// Objective `1/2 ||Ax - y||^2 + lambda ||Wx||_1` before each step and after the last.
    pub losses: Vec<f64>,
    pub lambda: f64,
}

/// Wavelet weight actually used for a given configuration and data set.
pub(crate) fn resolve_lambda<T: Real>(
    op: &EncodingOperator<T>,
    ksp: &KSpace<T>,
    traj: &[RigidParams],
    keep: Option<&[bool]>,
    cfg: &ReconConfig,
) -> Result<f64> {
    if let Some(l) = cfg.lambda_abs {
        return Ok(l);
    }
    if cfg.lambda_rel == 0.0 {
        return Ok(0.0);
    }
    let zf = op.adjoint(ksp, traj, keep)?;
    let peak = zf
        .data()
        .iter()
        .map(|c| c.norm().as_f64())
        .fold(0.0, f64::max);
    Ok(cfg.lambda_rel * peak)
}

pub(crate) fn objective<T: Real>(data_sq: f64, x: &Volume<Complex<T>>, lambda: f64) -> f64 {
    let reg = if lambda > 0.0 {
        lambda * wavelet_l1(x).0
    } else {
        0.0
    };
    0.5 * data_sq + reg
}

/// One gradient step on `x`; returns the objective evaluated before the step.
pub(crate) fn l1_step<T: Real>(
    op: &EncodingOperator<T>,
    x: &mut Volume<Complex<T>>,
    ksp: &KSpace<T>,
    traj: &[RigidParams],
    keep: Option<&[bool]>,
    lambda: f64,
    cfg: &ReconConfig,
) -> Result<f64> {
    let step = T::lit(cfg.l1_step_size);
    let (l1_value, sub) = if lambda > 0.0 {
        wavelet_l1(x)
    } else {
        (0.0, Volume::zeros(x.dims()))
    };
    let reg_grad = Complex::new(-step * T::lit(lambda), T::zero());
    match cfg.batch_mode {
        BatchMode::Full => {
            let (g, data_sq) = op.normal_residual(x, ksp, traj, keep)?;
            x.axpy(Complex::new(-step, T::zero()), &g);
            if lambda > 0.0 {
                x.axpy(reg_grad, &sub);
            }
            Ok(0.5 * data_sq + lambda * l1_value)
        }
        BatchMode::PerShot => {
            let (_, data_sq) = op.normal_residual(x, ksp, traj, keep)?;
            let n = op.n_shots();
            let active: Vec<usize> = (0..n).filter(|&s| keep.is_none_or(|k| k[s])).collect();
            let share = T::lit(1.0 / active.len().max(1) as f64);
            for s in active {
                let mut only = vec![false; n];
                only[s] = true;
                let (g, _) = op.normal_residual(x, ksp, traj, Some(&only))?;
                x.axpy(Complex::new(-step, T::zero()), &g);
                if lambda > 0.0 {
                    x.axpy(reg_grad * share, &sub);
                }
            }
            Ok(0.5 * data_sq + lambda * l1_value)
        }
    }
}

pub(crate) fn recon_l1_with<T: Real>(
    op: &EncodingOperator<T>,
    ksp: &KSpace<T>,
    traj: &[RigidParams],
    keep: Option<&[bool]>,
    cfg: &ReconConfig,
) -> Result<L1Result<T>> {
    cfg.validate()?;
    let lambda = resolve_lambda(op, ksp, traj, keep, cfg)?;
    let mut x = Volume::<Complex<T>>::zeros(op.dims());
    let mut losses = Vec::with_capacity(cfg.l1_steps + 1);
    let mut initial = None;
    for step in 0..cfg.l1_steps {
        let loss = l1_step(op, &mut x, ksp, traj, keep, lambda, cfg)?;
        let init = *initial.get_or_insert(loss);
        if loss > 10.0 * init || !loss.is_finite() {
            return Err(Error::SolverDiverged {
                step,
                loss,
                initial: init,
            });
        }
        losses.push(loss);
    }
    let (_, data_sq) = op.normal_residual(&x, ksp, traj, keep)?;
    let last = objective(data_sq, &x, lambda);
    if let Some(init) = initial {
        if last > 10.0 * init || !last.is_finite() {
            return Err(Error::SolverDiverged {
                step: cfg.l1_steps,
                loss: last,
                initial: init,
            });
        }
    }
    losses.push(last);
    Ok(L1Result {
        image: x,
        losses,
        lambda,
    })
}

/// Gradient descent from zero on `1/2 ||A(traj) x - y||^2 + lambda ||W x||_1`.
pub fn recon_l1<T: Real>(
    ksp: &KSpace<T>,
    coils: &CoilSet<T>,
    plan: &SamplingPlan,
    traj: &[RigidParams],
    cfg: &ReconConfig,
) -> Result<L1Result<T>> {
    let op = EncodingOperator::new(coils, plan)?;
    recon_l1_with(&op, ksp, traj, None, cfg)
}

/// As [`recon_l1`], restricted to the shots flagged in `keep`.
pub fn recon_l1_subset<T: Real>(
    ksp: &KSpace<T>,
    coils: &CoilSet<T>,
    plan: &SamplingPlan,
    traj: &[RigidParams],
    keep: &[bool],
    cfg: &ReconConfig,
) -> Result<L1Result<T>> {
    let op = EncodingOperator::new(coils, plan)?;
    recon_l1_with(&op, ksp, traj, Some(keep), cfg)
}
