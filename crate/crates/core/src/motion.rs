//! Event-based inter-shot rigid motion and motion-corrupted k-space.
//!
//! An event at shot `s` changes the pose for shot `s` onward: a primary rotation about
//! one of the two event axes plus uniform perturbations of the other five parameters.
//! Poses accumulate across events and shot 0 stays at the reference pose.

use crate::coils::CoilSet;
use crate::encode::{EncodingOperator, KSpace};
use crate::error::{Error, Result};
use crate::rigid::RigidParams;
use crate::sampling::SamplingPlan;
use crate::scalar::Real;
use crate::volume::Volume;
use num_complex::Complex;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Rotation axes (storage order `[y, z, x]`) that carry the primary motion of an
/// event: rotation about `x` (in-plane turn of the phase-encode plane) and about `y`
/// (nodding). Rotation about `z` is only perturbed.
pub const EVENT_AXES: [usize; 2] = [2, 0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Mild,
    Severe,
}

impl Severity {
    pub fn level(self) -> SeverityLevel {
        match self {
            Severity::Mild => SeverityLevel {
                name: self,
                n_events: 1,
                primary_bound_deg: 5.0,
                perturb_bound: 1.0,
            },
            Severity::Severe => SeverityLevel {
                name: self,
                n_events: 3,
                primary_bound_deg: 15.0,
                perturb_bound: 5.0,
            },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Mild => "mild",
            Severity::Severe => "severe",
        }
    }
}

impl std::str::FromStr for Severity {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mild" => Ok(Self::Mild),
            "severe" => Ok(Self::Severe),
            other => Err(format!("unknown severity '{other}'")),
        }
    }
}

/// Number of events and amplitude bounds; the perturbation bound is shared by degrees
/// and voxels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeverityLevel {
    pub name: Severity,
    pub n_events: usize,
    pub primary_bound_deg: f64,
    pub perturb_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionEvent {
    pub shot_index: usize,
    /// Storage-order rotation axis of the primary motion.
    pub primary_axis: usize,
    pub primary_deg: f64,
    /// Pose change on the remaining five parameters (the primary slot is zero).
    pub perturbation: RigidParams,
}

impl MotionEvent {
    /// Total pose change contributed by this event.
    pub fn delta(&self) -> RigidParams {
        let mut d = self.perturbation;
        d.rot_deg[self.primary_axis] += self.primary_deg;
        d
    }
}

/// Per-shot poses; serialized as a JSON array of 6-vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MotionTrajectory {
    pub per_shot: Vec<RigidParams>,
}

impl MotionTrajectory {
    pub fn stationary(n_shots: usize) -> Self {
        Self {
            per_shot: vec![RigidParams::IDENTITY; n_shots],
        }
    }

    pub fn from_events(n_shots: usize, events: &[MotionEvent]) -> Self {
        let mut per_shot = Vec::with_capacity(n_shots);
        let mut pose = RigidParams::IDENTITY;
        for s in 0..n_shots {
            for e in events.iter().filter(|e| e.shot_index == s) {
                pose = pose.add(&e.delta());
            }
            per_shot.push(pose);
        }
        Self { per_shot }
    }

    pub fn len(&self) -> usize {
        self.per_shot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_shot.is_empty()
    }

    /// Shots at which the pose differs from the previous shot.
    pub fn change_points(&self) -> Vec<usize> {
        (1..self.per_shot.len())
            .filter(|&s| self.per_shot[s] != self.per_shot[s - 1])
            .collect()
    }
}

/// Sampled trajectory together with the events that generated it.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledMotion {
    pub trajectory: MotionTrajectory,
    pub events: Vec<MotionEvent>,
}

pub fn sample_events(level: &SeverityLevel, n_shots: usize, seed: u64) -> Result<Vec<MotionEvent>> {
    if level.n_events >= n_shots {
        return Err(Error::Config(format!(
            "{} events need more than {n_shots} shots",
            level.n_events
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shots: Vec<usize> = index::sample(&mut rng, n_shots - 1, level.n_events)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    shots.sort_unstable();
    let events = shots
        .into_iter()
        .map(|shot_index| {
            let primary_axis = EVENT_AXES[rng.random_range(0..EVENT_AXES.len())];
            let b = level.primary_bound_deg;
            let primary_deg = rng.random_range(-b..=b);
            let p = level.perturb_bound;
            let mut vals = [0.0; 6];
            for (i, v) in vals.iter_mut().enumerate() {
                if i != primary_axis {
                    *v = rng.random_range(-p..=p);
                }
            }
            MotionEvent {
                shot_index,
                primary_axis,
                primary_deg,
                perturbation: RigidParams::from(vals),
            }
        })
        .collect();
    Ok(events)
}

/// Draw an event-based trajectory; deterministic under `seed`.
pub fn sample_trajectory(
    level: &SeverityLevel,
    n_shots: usize,
    seed: u64,
) -> Result<SampledMotion> {
    let events = sample_events(level, n_shots, seed)?;
    Ok(SampledMotion {
        trajectory: MotionTrajectory::from_events(n_shots, &events),
        events,
    })
}

/// Motion-corrupted multi-coil k-space on the full grid (zeros at unsampled lines).
pub fn corrupt<T: Real>(
    img: &Volume<Complex<T>>,
    coils: &CoilSet<T>,
    plan: &SamplingPlan,
    traj: &MotionTrajectory,
) -> Result<KSpace<T>> {
    let op = EncodingOperator::new(coils, plan)?;
    op.forward(img, &traj.per_shot, None)
}
