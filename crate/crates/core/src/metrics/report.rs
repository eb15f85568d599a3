use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Psnr,
    Ssim,
    Ap,
    Aes,
    Tg,
}

impl MetricKind {
    pub const REFERENCE: [MetricKind; 3] = [MetricKind::Psnr, MetricKind::Ssim, MetricKind::Ap];
    pub const FREE: [MetricKind; 2] = [MetricKind::Aes, MetricKind::Tg];
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Psnr,
        MetricKind::Ssim,
        MetricKind::Ap,
        MetricKind::Aes,
        MetricKind::Tg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Psnr => "psnr",
            MetricKind::Ssim => "ssim",
            MetricKind::Ap => "ap",
            MetricKind::Aes => "aes",
            MetricKind::Tg => "tg",
        }
    }

    /// Whether a larger value means better quality.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, MetricKind::Ap)
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric '{s}'"))
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One serialized metric value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub recon_id: String,
    pub ref_id: String,
    pub metric: MetricKind,
    pub value: f64,
}

/// Metrics of one reconstruction against one reference, with the preprocessing steps
/// that were applied.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub recon_id: String,
    pub ref_id: String,
    pub values: BTreeMap<MetricKind, f64>,
    pub preprocessing: Vec<String>,
}

impl MetricReport {
    pub fn new(recon_id: impl Into<String>, ref_id: impl Into<String>) -> Self {
        Self {
            recon_id: recon_id.into(),
            ref_id: ref_id.into(),
            ..Default::default()
        }
    }

    pub fn get(&self, m: MetricKind) -> Option<f64> {
        self.values.get(&m).copied()
    }

    /// Rows in fixed metric order.
    pub fn rows(&self) -> Vec<MetricRow> {
        self.values
            .iter()
            .map(|(&metric, &value)| MetricRow {
                recon_id: self.recon_id.clone(),
                ref_id: self.ref_id.clone(),
                metric,
                value,
            })
            .collect()
    }
}
