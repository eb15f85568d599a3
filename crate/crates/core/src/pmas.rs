//! Perceived motion artifact scores from pairwise comparisons.
//!
//! Each comparison yields `p(a > b)`, the probability that `a` shows more severe
//! artifacts than `b`. Scores are Bradley–Terry strengths fitted by penalized maximum
//! likelihood; higher means more severe.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// One rater's judgement of a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AWorse,
    BWorse,
    Similar,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::AWorse => "a_worse",
            Outcome::BWorse => "b_worse",
            Outcome::Similar => "similar",
        }
    }

    /// The same judgement with the items swapped.
    pub fn flipped(self) -> Self {
        match self {
            Outcome::AWorse => Outcome::BWorse,
            Outcome::BWorse => Outcome::AWorse,
            Outcome::Similar => Outcome::Similar,
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "a_worse" => Ok(Outcome::AWorse),
            "b_worse" => Ok(Outcome::BWorse),
            "similar" => Ok(Outcome::Similar),
            other => Err(format!("unknown outcome '{other}'")),
        }
    }
}

/// `p(a > b)` from one or two raters.
///
/// Two raters: agreement on a worse item gives 0 or 1, one worse plus one similar gives
/// 0.75 or 0.25, anything else 0.5. One rater: 1, 0 or 0.5.
pub fn derive_preference(outcomes: &[Outcome]) -> Result<f64> {
    let score = |o: &Outcome| match o {
        Outcome::AWorse => 1i32,
        Outcome::BWorse => -1,
        Outcome::Similar => 0,
    };
    match outcomes {
        [] => invalid("a comparison needs at least one rater"),
        [o] => Ok(0.5 + 0.5 * score(o) as f64),
        [o1, o2] => {
            let (s1, s2) = (score(o1), score(o2));
            Ok(match s1 + s2 {
                2 => 1.0,
                -2 => 0.0,
                1 if s1 == 0 || s2 == 0 => 0.75,
                -1 if s1 == 0 || s2 == 0 => 0.25,
                _ => 0.5,
            })
        }
        more => invalid(format!(
            "at most two raters per comparison, got {}",
            more.len()
        )),
    }
}

/// One line of a comparisons file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub a: String,
    pub b: String,
    pub outcomes: Vec<Outcome>,
    #[serde(default)]
    pub annotator: String,
    #[serde(default)]
    pub timestamp: String,
}

impl ComparisonRecord {
    pub fn new(a: impl Into<String>, b: impl Into<String>, outcomes: Vec<Outcome>) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            outcomes,
            annotator: String::new(),
            timestamp: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a == self.b {
            return invalid(format!("comparison of '{}' with itself", self.a));
        }
        derive_preference(&self.outcomes).map(|_| ())
    }

    pub fn p_a_gt_b(&self) -> Result<f64> {
        self.validate()?;
        derive_preference(&self.outcomes)
    }

    /// The same comparison with the items swapped.
    pub fn swapped(&self) -> Self {
        Self {
            a: self.b.clone(),
            b: self.a.clone(),
            outcomes: self.outcomes.iter().map(|o| o.flipped()).collect(),
            annotator: self.annotator.clone(),
            timestamp: self.timestamp.clone(),
        }
    }
}

/// Parse a JSON-lines comparisons file; blank lines are skipped.
pub fn parse_comparisons(text: &str) -> Result<Vec<ComparisonRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: ComparisonRecord = serde_json::from_str(l)
                .map_err(|e| Error::InvalidInput(format!("comparisons line {}: {e}", i + 1)))?;
            r.validate()?;
            Ok(r)
        })
        .collect()
}

/// A comparison reduced to item indices and a preference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preference {
    pub a: usize,
    pub b: usize,
    pub p: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BtOptions {
    pub reg_weight: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BtOptions {
    fn default() -> Self {
        Self {
            reg_weight: 1e-3,
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

/// Fitted scores keyed by item id, mean zero within each connected component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmasScores {
    pub scores: BTreeMap<String, f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Number of connected components of the comparison graph.
    pub components: usize,
}

impl PmasScores {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.scores.get(id).copied()
    }

    /// The scores file content: a JSON object mapping id to score.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.scores)?)
    }
}

fn log_sigmoid(d: f64) -> f64 {
    // log(1 / (1 + e^-d)) without overflow
    if d >= 0.0 {
        -(-d).exp().ln_1p()
    } else {
        d - d.exp().ln_1p()
    }
}

fn sigmoid(d: f64) -> f64 {
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

/// `sum p log s(b_a - b_b) + (1 - p) log s(b_b - b_a) - reg ||b||^2`.
pub fn bt_objective(beta: &[f64], prefs: &[Preference], reg_weight: f64) -> f64 {
    let ll: f64 = prefs
        .iter()
        .map(|q| {
            let d = beta[q.a] - beta[q.b];
            let mut v = 0.0;
            if q.p > 0.0 {
                v += q.p * log_sigmoid(d);
            }
            if q.p < 1.0 {
                v += (1.0 - q.p) * log_sigmoid(-d);
            }
            v
        })
        .sum();
    ll - reg_weight * beta.iter().map(|b| b * b).sum::<f64>()
}

fn bt_gradient(beta: &[f64], prefs: &[Preference], reg_weight: f64) -> Vec<f64> {
    let mut g: Vec<f64> = beta.iter().map(|b| -2.0 * reg_weight * b).collect();
    for q in prefs {
        let r = q.p - sigmoid(beta[q.a] - beta[q.b]);
        g[q.a] += r;
        g[q.b] -= r;
    }
    g
}

fn components(n: usize, prefs: &[Preference]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for q in prefs {
        let (ra, rb) = (find(&mut parent, q.a), find(&mut parent, q.b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

/// Penalized Bradley–Terry fit on indexed preferences by gradient ascent with step
/// halving. Returns scores (mean zero per connected component), convergence flag,
/// iteration count and number of components.
pub fn fit_bt_indexed(
    n: usize,
    prefs: &[Preference],
    opts: &BtOptions,
) -> Result<(Vec<f64>, bool, usize, usize)> {
    for q in prefs {
        if q.a >= n || q.b >= n || q.a == q.b {
            return invalid(format!("bad comparison indices ({}, {})", q.a, q.b));
        }
        if !(0.0..=1.0).contains(&q.p) {
            return invalid(format!("preference {} outside [0, 1]", q.p));
        }
    }
    if !(opts.reg_weight >= 0.0 && opts.reg_weight.is_finite()) {
        return invalid("reg_weight must be a finite non-negative number");
    }
    let mut degree = vec![0.0f64; n];
    for q in prefs {
        degree[q.a] += 1.0;
        degree[q.b] += 1.0;
    }
    // curvature bound: 1/4 * (largest Laplacian eigenvalue <= 2 * max degree) + 2 * reg
    let lipschitz = 0.5 * degree.iter().cloned().fold(0.0, f64::max) + 2.0 * opts.reg_weight;
    let mut step = if lipschitz > 0.0 {
        1.0 / lipschitz
    } else {
        1.0
    };
    let mut beta = vec![0.0; n];
    let mut value = bt_objective(&beta, prefs, opts.reg_weight);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let g = bt_gradient(&beta, prefs, opts.reg_weight);
        if g.iter().all(|v| v.abs() < opts.tol) {
            converged = true;
            break;
        }
        iterations += 1;
        loop {
            let cand: Vec<f64> = beta.iter().zip(&g).map(|(b, gi)| b + step * gi).collect();
            let v = bt_objective(&cand, prefs, opts.reg_weight);
            if v >= value || step < 1e-12 {
                beta = cand;
                value = v;
                break;
            }
            step *= 0.5;
        }
    }
    let comp = components(n, prefs);
    let roots: BTreeSet<usize> = comp.iter().copied().collect();
    for &root in &roots {
        let members: Vec<usize> = (0..n).filter(|&i| comp[i] == root).collect();
        let mean = members.iter().map(|&i| beta[i]).sum::<f64>() / members.len() as f64;
        for i in members {
            beta[i] -= mean;
        }
    }
    Ok((beta, converged, iterations, roots.len()))
}

/// Fit scores to comparison records; items are ordered by id.
pub fn fit_bt(records: &[ComparisonRecord], opts: &BtOptions) -> Result<PmasScores> {
    let ids: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| [r.a.as_str(), r.b.as_str()])
        .collect();
    let ids: Vec<&str> = ids.into_iter().collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let prefs = records
        .iter()
        .map(|r| {
            Ok(Preference {
                a: index[r.a.as_str()],
                b: index[r.b.as_str()],
                p: r.p_a_gt_b()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (beta, converged, iterations, components) = fit_bt_indexed(ids.len(), &prefs, opts)?;
    if components > 1 {
        log::warn!(
            "comparison graph has {components} components; scores are centered per component"
        );
    }
    if !converged {
        log::warn!("Bradley-Terry fit did not converge in {iterations} iterations");
    }
    let scores = ids
        .iter()
        .zip(beta)
        .map(|(id, b)| (id.to_string(), b))
        .collect();
    Ok(PmasScores {
        scores,
        converged,
        iterations,
        components,
    })
}

/// Ranks starting at 1, with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return invalid(format!(
            "spearman inputs differ in length ({} vs {})",
            x.len(),
            y.len()
        ));
    }
    if x.len() < 3 {
        return invalid("spearman needs at least three pairs");
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return invalid("spearman inputs must be finite");
    }
    pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::UndefinedCorrelation("an input has no rank variance".into()))
}

/// Split items into the `k_mild` lowest-scoring ones and the rest; ties go by id.
pub fn severity_partition(
    scores: &BTreeMap<String, f64>,
    k_mild: usize,
) -> Result<(Vec<String>, Vec<String>)> {
    if k_mild > scores.len() {
        return invalid(format!("k_mild {k_mild} exceeds {} items", scores.len()));
    }
    let mut items: Vec<(&String, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
    items.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let mild = items[..k_mild].iter().map(|(k, _)| (*k).clone()).collect();
    let rest = items[k_mild..].iter().map(|(k, _)| (*k).clone()).collect();
    Ok((mild, rest))
}
