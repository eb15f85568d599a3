//! The simulated protocol: every volume is corrupted at each severity with several
//! motion seeds, reconstructed with each enabled method and scored against the
//! motion-free volume.

use super::derive_seed;
use crate::coils::CoilSet;
use crate::error::{Error, Result};
use crate::metrics::{
    artifact_power, average_edge_strength_masked, preprocess_pair, psnr, ssim, tenengrad,
    MetricKind, Normalization,
};
use crate::motion::{corrupt, sample_trajectory, Severity};
use crate::recon::{altopt, recon_adjoint, recon_l1, ReconConfig};
use crate::rigid::RigidParams;
use crate::sampling::{generate_plan, PlanParams, SamplingPlan};
use crate::scalar::Real;
use crate::volume::Volume;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Adjoint,
    L1,
    Altopt,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Adjoint => "adjoint",
            Method::L1 => "l1",
            Method::Altopt => "altopt",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "adjoint" => Ok(Method::Adjoint),
            "l1" => Ok(Method::L1),
            "altopt" => Ok(Method::Altopt),
            other => Err(format!(
                "unknown method '{other}' (expected adjoint, l1 or altopt)"
            )),
        }
    }
}

/// Simulated protocol settings; `{}` gives the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimEvalConfig {
    pub n_coils: usize,
    pub n_shots: usize,
    pub severities: Vec<Severity>,
    /// Independent motion seeds per volume and severity.
    pub replicates: usize,
    pub methods: Vec<Method>,
    /// Voxels above this fraction of the volume maximum form the evaluation mask.
    pub mask_threshold: f64,
    pub shared_normalization: bool,
    pub recon: ReconConfig,
}

impl Default for SimEvalConfig {
    fn default() -> Self {
        Self {
            n_coils: 4,
            n_shots: 16,
            severities: vec![Severity::Mild, Severity::Severe],
            replicates: 2,
            methods: vec![Method::Adjoint, Method::L1],
            mask_threshold: 1e-3,
            shared_normalization: false,
            recon: ReconConfig::default(),
        }
    }
}

impl SimEvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_coils == 0 || self.n_shots == 0 || self.replicates == 0 {
            return Err(Error::Config(
                "n_coils, n_shots and replicates must be positive".into(),
            ));
        }
        if self.severities.is_empty() || self.methods.is_empty() {
            return Err(Error::Config(
                "at least one severity and one method are required".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.mask_threshold) {
            return Err(Error::Config("mask_threshold must lie in [0, 1)".into()));
        }
        self.recon.validate()
    }
}

/// One metric value of one reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub recon_id: String,
    pub ref_id: String,
    pub volume: String,
    pub severity: Severity,
    pub replicate: usize,
    pub motion_seed: u64,
    pub method: Method,
    pub metric: MetricKind,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalFailure {
    pub recon_id: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub run_id: String,
    pub seed: u64,
    pub config: SimEvalConfig,
    pub volumes: Vec<String>,
    pub rows: Vec<EvalRow>,
    pub failures: Vec<EvalFailure>,
}

/// Metrics of each method on one corrupted acquisition.
#[derive(Debug)]
pub struct CaseResult {
    pub trajectory: Vec<RigidParams>,
    pub metrics: BTreeMap<Method, Result<BTreeMap<MetricKind, f64>>>,
}

fn support_mask<T: Real>(gt: &Volume<T>, threshold: f64) -> Volume<T> {
    let cut = threshold * gt.max().as_f64();
    gt.map(|v| {
        if v.as_f64() > cut {
            T::one()
        } else {
            T::zero()
        }
    })
}

fn score<T: Real>(
    recon: &Volume<T>,
    gt: &Volume<T>,
    mask: &Volume<T>,
    norm: Normalization,
) -> Result<BTreeMap<MetricKind, f64>> {
    let (x, r) = preprocess_pair(recon, gt, mask, norm)?;
    Ok(BTreeMap::from([
        (MetricKind::Psnr, psnr(&x, &r)?),
        (MetricKind::Ssim, ssim(&x, &r, Some(mask))?),
        (MetricKind::Ap, artifact_power(&x, &r)?),
        (
            MetricKind::Aes,
            average_edge_strength_masked(&x, Some(mask))?,
        ),
        (MetricKind::Tg, tenengrad(&x)),
    ]))
}

fn reconstruct<T: Real>(
    method: Method,
    ksp: &crate::encode::KSpace<T>,
    coils: &CoilSet<T>,
    plan: &SamplingPlan,
    cfg: &ReconConfig,
) -> Result<Volume<T>> {
    let identity = vec![RigidParams::IDENTITY; plan.n_shots()];
    match method {
        Method::Adjoint => recon_adjoint(ksp, coils, plan),
        Method::L1 => Ok(recon_l1(ksp, coils, plan, &identity, cfg)?
            .image
            .magnitude()),
        Method::Altopt => Ok(altopt(ksp, coils, plan, cfg)?.image.magnitude()),
    }
}

/// Corrupt `gt` with motion drawn from `motion_seed` and score every enabled method.
pub fn simulate_case<T: Real>(
    gt: &Volume<T>,
    coils: &CoilSet<T>,
    plan: &SamplingPlan,
    severity: Severity,
    motion_seed: u64,
    cfg: &SimEvalConfig,
) -> Result<CaseResult> {
    let motion = sample_trajectory(&severity.level(), plan.n_shots(), motion_seed)?;
    let ksp = corrupt(&gt.to_complex(), coils, plan, &motion.trajectory)?;
    let mask = support_mask(gt, cfg.mask_threshold);
    let norm = if cfg.shared_normalization {
        Normalization::SharedReference
    } else {
        Normalization::Own
    };
    let metrics = cfg
        .methods
        .iter()
        .map(|&m| {
            (
                m,
                reconstruct(m, &ksp, coils, plan, &cfg.recon)
                    .and_then(|x| score(&x, gt, &mask, norm)),
            )
        })
        .collect();
    Ok(CaseResult {
        trajectory: motion.trajectory.per_shot,
        metrics,
    })
}

/// Run the simulated protocol on named motion-free volumes sharing one geometry.
pub fn run_simulated_eval<T: Real>(
    volumes: &[(String, Volume<T>)],
    cfg: &SimEvalConfig,
    seed: u64,
) -> Result<EvalRun> {
    cfg.validate()?;
    let Some((_, first)) = volumes.first() else {
        return Err(Error::InvalidInput(
            "at least one volume is required".into(),
        ));
    };
    let dims = first.dims();
    if volumes.iter().any(|(_, v)| v.dims() != dims) {
        return Err(Error::InvalidInput("all volumes must share dims".into()));
    }
    let coils = CoilSet::synthetic(dims, cfg.n_coils)?;
    let plan = generate_plan(&PlanParams::pmoc3d_scaled(
        dims.ny,
        dims.nz,
        cfg.n_shots,
        derive_seed(seed, &[0]),
    ))?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (vi, (vid, gt)) in volumes.iter().enumerate() {
        for &severity in &cfg.severities {
            for rep in 0..cfg.replicates {
                let motion_seed = derive_seed(seed, &[1, vi as u64, severity as u64, rep as u64]);
                let base_id = format!("{vid}/{}/r{rep}", severity.as_str());
                log::info!("simulating {base_id}");
                let case = match simulate_case(gt, &coils, &plan, severity, motion_seed, cfg) {
                    Ok(c) => c,
                    Err(e) => {
                        for m in &cfg.methods {
                            failures.push(EvalFailure {
                                recon_id: format!("{base_id}/{}", m.as_str()),
                                error: e.to_string(),
                            });
                        }
                        continue;
                    }
                };
                for (method, result) in case.metrics {
                    let recon_id = format!("{base_id}/{}", method.as_str());
                    match result {
                        Ok(values) => {
                            rows.extend(values.into_iter().map(|(metric, value)| EvalRow {
                                recon_id: recon_id.clone(),
                                ref_id: vid.clone(),
                                volume: vid.clone(),
                                severity,
                                replicate: rep,
                                motion_seed,
                                method,
                                metric,
                                value,
                            }))
                        }
                        Err(e) => {
                            log::warn!("{recon_id} failed: {e}");
                            failures.push(EvalFailure {
                                recon_id,
                                error: e.to_string(),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(EvalRun {
        run_id: format!("simulated-{seed}"),
        seed,
        config: cfg.clone(),
        volumes: volumes.iter().map(|(id, _)| id.clone()).collect(),
        rows,
        failures,
    })
}
