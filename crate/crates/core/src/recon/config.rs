use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// How the data term is visited in each gradient step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// One gradient over all shots per step.
    #[default]
    Full,
    /// One sub-step per shot, in shot order.
    PerShot,
}

/// Solver hyperparameters. Every field has a default, so `{}` is a valid config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconConfig {
    pub l1_steps: usize,
    /// Gradient step on `1/2 ||Ax - y||^2 + lambda ||Wx||_1` (unitary operators: 1.0 is exact).
    pub l1_step_size: f64,
    /// Wavelet weight relative to the peak magnitude of the zero-filled image.
    pub lambda_rel: f64,
    /// Absolute wavelet weight; overrides `lambda_rel` when set.
    pub lambda_abs: Option<f64>,
    pub batch_mode: BatchMode,
    pub altopt_max_iter: usize,
    pub altopt_recon_steps: usize,
    pub altopt_motion_steps: usize,
    pub altopt_motion_lr: f64,
    /// Extrapolation of pose increments across outer iterations, in `[0, 1)`.
    pub altopt_motion_momentum: f64,
    pub altopt_early_stop: f64,
    pub dc_threshold: f64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            l1_steps: 40,
            l1_step_size: 1.0,
            lambda_rel: 3e-3,
            lambda_abs: None,
            batch_mode: BatchMode::Full,
            altopt_max_iter: 500,
            altopt_recon_steps: 2,
            altopt_motion_steps: 4,
            altopt_motion_lr: 5e-2,
            altopt_motion_momentum: 0.8,
            altopt_early_stop: 0.02,
            dc_threshold: 0.70,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l1_step_size", self.l1_step_size),
            ("altopt_motion_lr", self.altopt_motion_lr),
            ("dc_threshold", self.dc_threshold),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda_rel.is_finite() && self.lambda_rel >= 0.0) {
            return Err(Error::Config(format!(
                "lambda_rel must be >= 0, got {}",
                self.lambda_rel
            )));
        }
        if let Some(l) = self.lambda_abs {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!("lambda_abs must be >= 0, got {l}")));
            }
        }
        if !(self.altopt_early_stop.is_finite() && self.altopt_early_stop >= 0.0) {
            return Err(Error::Config("altopt_early_stop must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.altopt_motion_momentum) {
            return Err(Error::Config(
                "altopt_motion_momentum must lie in [0, 1)".into(),
            ));
        }
        if self.altopt_recon_steps < 2 {
            return Err(Error::Config(
                "altopt_recon_steps must be at least 2 for the early-stop rule".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg: ReconConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ReconConfig::default());
        assert_eq!(cfg.l1_steps, 40);
        assert_eq!(cfg.altopt_max_iter, 500);
        assert_eq!(cfg.dc_threshold, 0.70);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(serde_json::from_str::<ReconConfig>(r#"{"l1_stepz": 3}"#).is_err());
        let cfg = ReconConfig {
            l1_step_size: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
