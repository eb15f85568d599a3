//! Rank correlation of metric values with perceived artifact scores.

use crate::error::{invalid, Result};
use crate::metrics::{MetricKind, MetricRow};
use crate::pmas::{spearman, PmasScores};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub metric: MetricKind,
    pub n: usize,
    /// Spearman correlation of metric values with scores.
    pub rho: f64,
    pub higher_is_better: bool,
    /// `rho` with the sign flipped for higher-is-better metrics, so that agreement
    /// with perceived severity is positive for every metric.
    pub agreement: f64,
}

/// Spearman correlation per metric over reconstructions that have a score.
pub fn correlate_report(rows: &[MetricRow], scores: &PmasScores) -> Result<Vec<CorrelationRow>> {
    let mut per_metric: BTreeMap<MetricKind, BTreeMap<&str, f64>> = BTreeMap::new();
    for r in rows {
        if scores.scores.contains_key(&r.recon_id) {
            per_metric
                .entry(r.metric)
                .or_default()
                .insert(&r.recon_id, r.value);
        }
    }
    if per_metric.is_empty() {
        return invalid("no metric row matches a scored item");
    }
    per_metric
        .into_iter()
        .map(|(metric, values)| {
            if values.len() < 3 {
                return invalid(format!(
                    "metric {metric} has only {} scored items, need 3",
                    values.len()
                ));
            }
            let x: Vec<f64> = values.values().copied().collect();
            let y: Vec<f64> = values.keys().map(|id| scores.scores[*id]).collect();
            let rho = spearman(&x, &y)?;
            let higher_is_better = metric.higher_is_better();
            let agreement = if higher_is_better { -rho } else { rho };
            Ok(CorrelationRow {
                metric,
                n: values.len(),
                rho,
                higher_is_better,
                agreement,
            })
        })
        .collect()
}
