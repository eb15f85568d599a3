//! Subcommand implementations.

use crate::{Cli, Command, EvalCmd, MaskCmd, MetricsCmd, PmasCmd, ReconCmd};
use anyhow::{anyhow, bail, Context, Result};
use momoc_core::coils::CoilSet;
use momoc_core::io::{self, Dataset, DatasetMeta};
use momoc_core::metrics::{
    average_edge_strength_masked, preprocess_pair, tenengrad, MetricKind, MetricReport, MetricRow,
    Normalization,
};
use momoc_core::motion::{corrupt, sample_trajectory, MotionTrajectory, Severity};
use momoc_core::phantom::{make_phantom, PhantomKind};
use momoc_core::pipeline::{
    correlate_report, derive_seed, run_paired_eval, run_simulated_eval, PairedOptions,
    SimEvalConfig,
};
use momoc_core::pmas::{fit_bt, parse_comparisons, severity_partition, BtOptions};
use momoc_core::recon::{altopt, recon_adjoint, recon_l1, ReconConfig};
use momoc_core::sampling::{generate_plan, PlanParams, SamplingPlan};
use momoc_core::{Dims, RealVolume, RigidParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

fn load_config<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C> {
    match path {
        None => Ok(C::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn require_out(out: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    out.ok_or_else(|| anyhow!("--out <path> is required for the {what}"))
}

/// Write `text` to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::save_text(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn dims_from(v: &[usize]) -> Result<Dims> {
    match v {
        [ny, nz, nx] => Ok(Dims::new(*ny, *nz, *nx)),
        _ => bail!("dims need three values"),
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let Cli {
        config,
        seed,
        out,
        command,
        ..
    } = cli;
    let seed = seed.unwrap_or(0);
    let config = config.as_deref();
    match command {
        Command::Mask {
            cmd: MaskCmd::Gen(a),
        } => mask_gen(config, seed, out, a),
        Command::Phantom(a) => phantom(config, seed, out, a),
        Command::Simulate(a) => simulate(config, seed, out, a),
        Command::Recon { method } => recon(config, out, method),
        Command::Metrics {
            cmd: MetricsCmd::Paired(a),
        } => metrics_paired(config, out, a),
        Command::Metrics {
            cmd: MetricsCmd::Free(a),
        } => metrics_free(out, a),
        Command::Pmas {
            cmd: PmasCmd::Fit(a),
        } => pmas_fit(config, out, a),
        Command::Correlate(a) => correlate(out, a),
        Command::Eval {
            cmd: EvalCmd::Simulated,
        } => eval_simulated(config, seed, out),
        Command::Serve(a) => crate::server::serve_blocking(a, seed),
    }
}

/// Sampling geometry; the defaults are the in-vivo acquisition.
#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MaskConfig {
    ny: usize,
    nz: usize,
    accel: f64,
    acs: (usize, usize),
    pf_z: f64,
    n_shots: usize,
}

impl Default for MaskConfig {
    fn default() -> Self {
        let p = PlanParams::pmoc3d(0);
        Self {
            ny: p.ny,
            nz: p.nz,
            accel: p.accel,
            acs: p.acs,
            pf_z: p.pf_z,
            n_shots: p.n_shots,
        }
    }
}

fn mask_gen(
    config: Option<&Path>,
    seed: u64,
    out: Option<PathBuf>,
    a: crate::MaskGenArgs,
) -> Result<()> {
    let c: MaskConfig = load_config(config)?;
    let params = PlanParams {
        ny: a.ny.unwrap_or(c.ny),
        nz: a.nz.unwrap_or(c.nz),
        accel: c.accel,
        acs: c.acs,
        pf_z: c.pf_z,
        n_shots: a.shots.unwrap_or(c.n_shots),
        seed,
    };
    let plan = generate_plan(&params)?;
    let st = plan.stats();
    eprintln!(
        "{} lines in {} shots (acceleration {:.3}), ACS complete: {}, partial Fourier respected: {}, centre in shot 0: {}",
        st.total_lines,
        plan.n_shots(),
        st.achieved_accel,
        st.acs_complete,
        st.pf_respected,
        st.center_in_first_shot
    );
    let out = out.unwrap_or_else(|| PathBuf::from("plan.json"));
    io::save_json(&out, &plan)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PhantomConfig {
    kind: PhantomKind,
    dims: [usize; 3],
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            kind: PhantomKind::Shepp3d,
            dims: [64, 64, 64],
        }
    }
}

fn phantom(
    config: Option<&Path>,
    seed: u64,
    out: Option<PathBuf>,
    a: crate::PhantomArgs,
) -> Result<()> {
    let c: PhantomConfig = load_config(config)?;
    let kind = match a.kind {
        Some(k) => k.parse::<PhantomKind>().map_err(|e| anyhow!(e))?,
        None => c.kind,
    };
    let dims = match a.dims {
        Some(d) => dims_from(&d)?,
        None => Dims::from_array(c.dims),
    };
    let vol: RealVolume = make_phantom(kind, dims, seed)?;
    let out = require_out(out, "phantom volume")?;
    io::save_real(&out, &vol, serde_json::json!({"kind": kind, "seed": seed}))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateConfig {
    n_coils: usize,
    n_shots: usize,
    /// `None` simulates a motion-free acquisition.
    severity: Option<Severity>,
    phantom: PhantomConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n_coils: 4,
            n_shots: 16,
            severity: Some(Severity::Mild),
            phantom: PhantomConfig::default(),
        }
    }
}

fn simulate(
    config: Option<&Path>,
    seed: u64,
    out: Option<PathBuf>,
    a: crate::SimulateArgs,
) -> Result<()> {
    let c: SimulateConfig = load_config(config)?;
    let out = require_out(out, "data-set directory")?;
    let (id, gt): (String, RealVolume) = match &a.input {
        Some(p) => (stem(p), io::load_magnitude(p)?),
        None => (
            "phantom".into(),
            make_phantom(c.phantom.kind, Dims::from_array(c.phantom.dims), seed)?,
        ),
    };
    let dims = gt.dims();
    let plan: SamplingPlan = match &a.plan {
        Some(p) => io::load_json(p)?,
        None => generate_plan(&PlanParams::pmoc3d_scaled(
            dims.ny,
            dims.nz,
            c.n_shots,
            derive_seed(seed, &[0]),
        ))?,
    };
    let severity = match a.severity.as_deref() {
        Some("none") => None,
        Some(s) => Some(s.parse::<Severity>().map_err(|e| anyhow!(e))?),
        None => c.severity,
    };
    let (trajectory, events) = match severity {
        Some(s) => {
            let m = sample_trajectory(&s.level(), plan.n_shots(), derive_seed(seed, &[1]))?;
            (m.trajectory, m.events)
        }
        None => (MotionTrajectory::stationary(plan.n_shots()), Vec::new()),
    };
    let coils = CoilSet::synthetic(dims, c.n_coils)?;
    let kspace = corrupt(&gt.to_complex(), &coils, &plan, &trajectory)?;
    let meta = DatasetMeta {
        id,
        n_coils: c.n_coils,
        severity: severity.map(|s| s.as_str().to_string()),
        seed: Some(seed),
        events,
    };
    Dataset {
        meta,
        plan,
        coils,
        kspace,
        trajectory: Some(trajectory),
        ground_truth: Some(gt),
    }
    .save(&out)?;
    Ok(())
}

#[derive(Serialize)]
struct AltOptSummary<'a> {
    trajectory: &'a [RigidParams],
    dc_losses: &'a [f64],
    keep: &'a [bool],
    iterations: usize,
    early_stopped: bool,
}

fn recon(config: Option<&Path>, out: Option<PathBuf>, method: ReconCmd) -> Result<()> {
    let cfg: ReconConfig = load_config(config)?;
    cfg.validate()?;
    let out = require_out(out, "reconstruction")?;
    let data = match &method {
        ReconCmd::Adjoint(a) | ReconCmd::Altopt(a) => &a.data,
        ReconCmd::L1(a) => &a.data,
    };
    let ds: Dataset<f64> = Dataset::load(data)?;
    let meta = serde_json::json!({"id": ds.meta.id});
    let identity = vec![RigidParams::IDENTITY; ds.plan.n_shots()];
    match method {
        ReconCmd::Adjoint(_) => {
            let img = recon_adjoint(&ds.kspace, &ds.coils, &ds.plan)?;
            io::save_real(&out, &img, meta)?;
        }
        ReconCmd::L1(a) => {
            let traj = if a.true_motion {
                ds.trajectory
                    .as_ref()
                    .ok_or_else(|| anyhow!("data set has no trajectory"))?
                    .per_shot
                    .clone()
            } else {
                identity
            };
            let r = recon_l1(&ds.kspace, &ds.coils, &ds.plan, &traj, &cfg)?;
            io::save_real(&out, &r.image.magnitude(), meta)?;
        }
        ReconCmd::Altopt(_) => {
            let r = altopt(&ds.kspace, &ds.coils, &ds.plan, &cfg)?;
            io::save_real(&out, &r.image.magnitude(), meta)?;
            let summary = AltOptSummary {
                trajectory: &r.trajectory,
                dc_losses: &r.dc_losses,
                keep: &r.keep,
                iterations: r.iterations,
                early_stopped: r.early_stopped,
            };
            io::save_json(&out.with_extension("motion.json"), &summary)?;
            eprintln!(
                "{} iterations, {} of {} shots kept",
                r.iterations,
                r.keep.iter().filter(|&&k| k).count(),
                r.keep.len()
            );
        }
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PairedConfig {
    shared_normalization: bool,
    mask_before_registration: bool,
    skip_registration: bool,
}

fn report_rows(reports: &[MetricReport]) -> Vec<MetricRow> {
    reports.iter().flat_map(|r| r.rows()).collect()
}

fn metrics_paired(config: Option<&Path>, out: Option<PathBuf>, a: crate::PairedArgs) -> Result<()> {
    let c: PairedConfig = load_config(config)?;
    let reference: RealVolume = io::load_magnitude(&a.reference)?;
    let mask = a.mask.as_deref().map(io::load_mask::<f64>).transpose()?;
    let recons = a
        .recons
        .iter()
        .map(|p| Ok((stem(p), io::load_magnitude(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let opts = PairedOptions {
        normalization: if c.shared_normalization {
            Normalization::SharedReference
        } else {
            Normalization::Own
        },
        mask_before_registration: c.mask_before_registration,
        skip_registration: c.skip_registration,
    };
    let reports = run_paired_eval(
        &recons,
        (&stem(&a.reference), &reference),
        mask.as_ref(),
        &opts,
    )?;
    for r in &reports {
        if let Some(note) = r
            .preprocessing
            .iter()
            .find(|p| p.starts_with("register failed"))
        {
            eprintln!("{}: {note}", r.recon_id);
        }
    }
    emit(out.as_deref(), &io::to_jsonl(&report_rows(&reports))?)
}

fn metrics_free(out: Option<PathBuf>, a: crate::FreeArgs) -> Result<()> {
    let mask = a.mask.as_deref().map(io::load_mask::<f64>).transpose()?;
    let mut reports = Vec::new();
    for p in &a.recons {
        let v: RealVolume = io::load_magnitude(p)?;
        let m = match &mask {
            Some(m) => m.clone(),
            None => RealVolume::filled(v.dims(), 1.0),
        };
        let (x, _) = preprocess_pair(&v, &v, &m, Normalization::Own)?;
        let mut r = MetricReport::new(stem(p), "");
        r.preprocessing = vec!["mask".into(), "normalize p99.9 own".into()];
        r.values
            .insert(MetricKind::Aes, average_edge_strength_masked(&x, Some(&m))?);
        r.values.insert(MetricKind::Tg, tenengrad(&x));
        reports.push(r);
    }
    emit(out.as_deref(), &io::to_jsonl(&report_rows(&reports))?)
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BtConfig {
    reg_weight: f64,
    tol: f64,
    max_iter: usize,
}

impl Default for BtConfig {
    fn default() -> Self {
        let o = BtOptions::default();
        Self {
            reg_weight: o.reg_weight,
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

fn pmas_fit(config: Option<&Path>, out: Option<PathBuf>, a: crate::PmasFitArgs) -> Result<()> {
    let c: BtConfig = load_config(config)?;
    let opts = BtOptions {
        reg_weight: a.reg.unwrap_or(c.reg_weight),
        tol: c.tol,
        max_iter: c.max_iter,
    };
    let records = parse_comparisons(&io::load_text(&a.comparisons)?)?;
    if records.is_empty() {
        bail!("{} holds no comparisons", a.comparisons.display());
    }
    let fit = fit_bt(&records, &opts)?;
    eprintln!(
        "{} comparisons, {} items, {} component(s), {} after {} iterations",
        records.len(),
        fit.scores.len(),
        fit.components,
        if fit.converged {
            "converged"
        } else {
            "NOT converged"
        },
        fit.iterations
    );
    if let Some(k) = a.k_mild {
        let (mild, _) = severity_partition(&fit.scores, k)?;
        eprintln!("mild: {}", mild.join(" "));
    }
    emit(out.as_deref(), &(fit.to_json()? + "\n"))
}

fn correlate(out: Option<PathBuf>, a: crate::CorrelateArgs) -> Result<()> {
    let rows: Vec<MetricRow> = io::load_text(&a.rows)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).with_context(|| format!("metric row '{l}'")))
        .collect::<Result<_>>()?;
    let scores: BTreeMap<String, f64> = io::load_json(&a.scores)?;
    let scores = momoc_core::pmas::PmasScores {
        scores,
        converged: true,
        iterations: 0,
        components: 1,
    };
    let table = correlate_report(&rows, &scores)?;
    emit(
        out.as_deref(),
        &(serde_json::to_string_pretty(&table)? + "\n"),
    )
}

/// The simulated protocol on generated phantoms or on given volumes.
#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_volumes: usize,
    pub dims: [usize; 3],
    pub phantom: PhantomKind,
    /// Motion-free volumes to use instead of phantoms.
    pub inputs: Vec<PathBuf>,
    pub protocol: SimEvalConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_volumes: 10,
            dims: [32, 32, 32],
            phantom: PhantomKind::Blobs,
            inputs: Vec::new(),
            protocol: SimEvalConfig::default(),
        }
    }
}

#[derive(Serialize)]
struct SummaryRow {
    method: String,
    severity: String,
    metric: MetricKind,
    n: usize,
    mean: f64,
}

fn eval_simulated(config: Option<&Path>, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let c: EvalConfig = load_config(config)?;
    let out = require_out(out, "evaluation directory")?;
    let volumes: Vec<(String, RealVolume)> = if c.inputs.is_empty() {
        (0..c.n_volumes)
            .map(|i| {
                let v = make_phantom(
                    c.phantom,
                    Dims::from_array(c.dims),
                    derive_seed(seed, &[2, i as u64]),
                )?;
                Ok((format!("vol{i:02}"), v))
            })
            .collect::<Result<_>>()?
    } else {
        c.inputs
            .iter()
            .map(|p| Ok((stem(p), io::load_magnitude(p)?)))
            .collect::<Result<_>>()?
    };
    let run = run_simulated_eval(&volumes, &c.protocol, seed)?;
    std::fs::create_dir_all(&out)?;
    io::save_text(&out.join("rows.jsonl"), &io::to_jsonl(&run.rows)?)?;
    let mut groups: BTreeMap<(String, String, MetricKind), Vec<f64>> = BTreeMap::new();
    for r in &run.rows {
        groups
            .entry((
                r.method.as_str().into(),
                r.severity.as_str().into(),
                r.metric,
            ))
            .or_default()
            .push(r.value);
    }
    let summary: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((method, severity, metric), v)| SummaryRow {
            method,
            severity,
            metric,
            n: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
        .collect();
    io::save_json(
        &out.join("run.json"),
        &serde_json::json!({
            "run_id": run.run_id,
            "seed": run.seed,
            "config": c,
            "volumes": run.volumes,
            "motion_seeds": run.rows.iter().map(|r| (r.recon_id.clone(), r.motion_seed)).collect::<BTreeMap<_, _>>(),
            "failures": run.failures,
            "summary": summary,
        }),
    )?;
    for s in &summary {
        println!(
            "{:8} {:6} {:4} n={:3} mean={:.4}",
            s.method,
            s.severity,
            s.metric.as_str(),
            s.n,
            s.mean
        );
    }
    if !run.failures.is_empty() {
        eprintln!(
            "{} reconstructions failed; see run.json",
            run.failures.len()
        );
    }
    Ok(())
}
