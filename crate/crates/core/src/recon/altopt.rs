//! Alternating optimization of the image and per-shot rigid motion.
//!
//! Each outer iteration runs a few gradient steps on the image with motion fixed, then
//! a few Adam steps on the per-shot poses with the image fixed. All poses move freely
//! during the loop; at the end they are re-expressed relative to shot 0, which holds
//! the k-space center and defines the reference frame. Pose increments are extrapolated
//! across outer iterations (heavy ball; rotations restart on direction reversal), since the
//! image re-fits to the current poses after every motion update and otherwise absorbs
//! most of each correction.
//!
//! The loop ends early once the objective changes by less than `altopt_early_stop`
//! (relative to the current objective) between the first two image steps of an
//! iteration. The image is then reconstructed from scratch using only shots that pass
//! the data-consistency threshold.

use super::config::ReconConfig;
use super::dc::{dc_losses, threshold_shots};
use super::l1::{l1_step, recon_l1_with, resolve_lambda};
use crate::coils::CoilSet;
use crate::encode::{EncodingOperator, KSpace};
use crate::error::{Error, Result};
use crate::rigid::RigidParams;
use crate::sampling::SamplingPlan;
use crate::scalar::Real;
use crate::volume::Volume;
use num_complex::Complex;

#[derive(Clone, Debug)]
pub struct AltOptResult<T: Real> {
    pub trajectory: Vec<RigidParams>,
    pub image: Volume<Complex<T>>,
    /// Normalized per-shot data-consistency losses of the estimate before the final recon.
    pub dc_losses: Vec<f64>,
    pub keep: Vec<bool>,
    pub iterations: usize,
    pub early_stopped: bool,
    /// Objective at the first image step of every outer iteration.
    pub history: Vec<f64>,
}

/// Adam with one second-moment estimate per shot, shared by all six parameters, so
/// weakly constrained parameters take proportionally small steps.
#[derive(Clone, Copy, Default)]
struct AdamState {
    m: [f64; 6],
    v: f64,
    t: i32,
}

impl AdamState {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-12;

    fn step(&mut self, grad: &[f64; 6], lr: f64) -> [f64; 6] {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let g2 = grad.iter().map(|g| g * g).sum::<f64>() / 6.0;
        self.v = Self::B2 * self.v + (1.0 - Self::B2) * g2;
        let denom = (self.v / c2).sqrt() + Self::EPS;
        std::array::from_fn(|i| {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            -lr * (self.m[i] / c1) / denom
        })
    }
}

pub fn altopt<T: Real>(
    ksp: &KSpace<T>,
    coils: &CoilSet<T>,
    plan: &SamplingPlan,
    cfg: &ReconConfig,
) -> Result<AltOptResult<T>> {
    cfg.validate()?;
    let op = EncodingOperator::new(coils, plan)?;
    op.check_kspace(ksp)?;
    let n_shots = op.n_shots();
    let mut traj = vec![RigidParams::IDENTITY; n_shots];
    let lambda = resolve_lambda(&op, ksp, &traj, None, cfg)?;
    let shot_energy: Vec<f64> = op
        .shot_residuals(&Volume::zeros(op.dims()), ksp, &traj)?
        .into_iter()
        .map(|(_, y)| y)
        .collect();

    let mut x = Volume::<Complex<T>>::zeros(op.dims());
    let mut adam = vec![AdamState::default(); n_shots];
    let mut velocity = vec![[0.0f64; 6]; n_shots];
    let mut history = Vec::new();
    let mut initial = None;
    let mut early_stopped = false;
    let mut iterations = 0;

    for it in 0..cfg.altopt_max_iter {
        iterations = it + 1;
        let mut step_losses = Vec::with_capacity(cfg.altopt_recon_steps);
        for _ in 0..cfg.altopt_recon_steps {
            let loss = l1_step(&op, &mut x, ksp, &traj, None, lambda, cfg)?;
            let init = *initial.get_or_insert(loss);
            if !loss.is_finite() || loss > 10.0 * init {
                return Err(Error::SolverDiverged {
                    step: it,
                    loss,
                    initial: init,
                });
            }
            step_losses.push(loss);
        }
        history.push(step_losses[0]);
        let change = if step_losses[0] > 0.0 {
            (step_losses[0] - step_losses[1]).abs() / step_losses[0]
        } else {
            0.0
        };
        log::debug!(
            "altopt iter {it}: loss {:.6e} change {change:.4e}",
            step_losses[0]
        );
        if change < cfg.altopt_early_stop {
            early_stopped = true;
            break;
        }

        let start = traj.clone();
        for _ in 0..cfg.altopt_motion_steps {
            for s in 0..n_shots {
                if shot_energy[s] == 0.0 {
                    continue;
                }
                let g = op.shot_pose_gradient(&x, ksp, s, &traj[s])?;
                let grad = g.grad.map(|v| v / shot_energy[s]);
                let delta = adam[s].step(&grad, cfg.altopt_motion_lr);
                traj[s] = traj[s].add(&RigidParams::from(delta));
            }
        }
        for s in 0..n_shots {
            let (cur, st) = (traj[s].to_array(), start[s].to_array());
            let step: [f64; 6] = std::array::from_fn(|i| cur[i] - st[i]);
            // Trilinear resampling makes the loss kinked in the angles near grid-aligned
            // poses, so rotation velocities restart whenever their step reverses.
            velocity[s] = std::array::from_fn(|i| {
                if i >= 3 || step[i] * velocity[s][i] > 0.0 {
                    cfg.altopt_motion_momentum * velocity[s][i] + step[i]
                } else {
                    step[i]
                }
            });
            let extra: [f64; 6] = std::array::from_fn(|i| velocity[s][i] - step[i]);
            traj[s] = traj[s].add(&RigidParams::from(extra));
        }
        log::trace!(
            "altopt iter {it}: rotx {:?} ty {:?}",
            traj.iter()
                .map(|p| (p.rot_deg[2] * 1e3).round() / 1e3)
                .collect::<Vec<_>>(),
            traj.iter()
                .map(|p| (p.trans_vox[0] * 1e3).round() / 1e3)
                .collect::<Vec<_>>()
        );
    }

    let reference = traj[0];
    let traj: Vec<RigidParams> = traj.iter().map(|p| p.relative_to(&reference)).collect();
    let x = if reference.is_identity() {
        x
    } else {
        op.transformer().apply(&x, &reference)
    };
    let dc = dc_losses(&op, &x, ksp, &traj)?;
    let keep = threshold_shots(&dc, cfg.dc_threshold)?;
    let fin = recon_l1_with(&op, ksp, &traj, Some(&keep), cfg)?;
    Ok(AltOptResult {
        trajectory: traj,
        image: fin.image,
        dc_losses: dc,
        keep,
        iterations,
        early_stopped,
        history,
    })
}
