//! Acceptance criteria, one line each. Exits non-zero when any criterion fails.

use momoc_core::coils::CoilSet;
use momoc_core::encode::{EncodingOperator, ShotSamples};
use momoc_core::metrics::{
    artifact_power, average_edge_strength, psnr, ssim, tenengrad, MetricKind,
};
use momoc_core::motion::{corrupt, MotionTrajectory, Severity};
use momoc_core::phantom::{make_phantom, PhantomKind};
use momoc_core::pipeline::{run_simulated_eval, Method, SimEvalConfig};
use momoc_core::pmas::{
    fit_bt, fit_bt_indexed, spearman, BtOptions, ComparisonRecord, Outcome, Preference,
};
use momoc_core::recon::{
    altopt, dc_loss_per_shot, recon_adjoint, recon_l1, threshold_shots, ReconConfig,
};
use momoc_core::sampling::{generate_plan, PlanParams};
use momoc_core::{ComplexVolume, Dims, RealVolume, RigidParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

struct Verdict {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn random_volume(d: Dims, rng: &mut ChaCha8Rng) -> ComplexVolume {
    ComplexVolume::from_fn(d, |_, _, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn adjoint_correctness() -> Verdict {
    let d = Dims::cube(16);
    let coils = CoilSet::synthetic(d, 2).unwrap();
    let mut worst = [0.0f64; 2];
    for inst in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + inst);
        let plan = generate_plan(&PlanParams::pmoc3d_scaled(16, 16, 4, inst)).unwrap();
        let op = EncodingOperator::new(&coils, &plan).unwrap();
        let shot = rng.random_range(0..4);
        let t: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let r: [f64; 3] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        for (k, p) in [RigidParams::translation(t), RigidParams::new(r, t)]
            .iter()
            .enumerate()
        {
            let x = random_volume(d, &mut rng);
            let len = plan.shot_lines(shot).len() * d.nx;
            let y = ShotSamples {
                shot,
                coils: (0..2)
                    .map(|_| {
                        (0..len)
                            .map(|_| {
                                Complex64::new(
                                    rng.random_range(-1.0..1.0),
                                    rng.random_range(-1.0..1.0),
                                )
                            })
                            .collect()
                    })
                    .collect(),
            };
            let ax = op.encode_shot(&x, shot, p).unwrap();
            let ahy = op.adjoint_shot(&y, shot, p).unwrap();
            let lhs: Complex64 = ax
                .coils
                .iter()
                .flatten()
                .zip(y.coils.iter().flatten())
                .map(|(a, b)| a.conj() * b)
                .sum();
            let rel = (lhs - x.dot(&ahy)).norm() / (ax.norm_sqr().sqrt() * y.norm_sqr().sqrt());
            worst[k] = worst[k].max(rel);
        }
    }
    check(
        worst[0] <= 1e-5 && worst[1] <= 1e-2,
        format!(
            "20 instances, worst translation-only {:.2e} (<= 1e-5), with rotation {:.2e} (<= 1e-2)",
            worst[0], worst[1]
        ),
    )
}

fn sampling_geometry() -> Verdict {
    let plan = generate_plan(&PlanParams::pmoc3d(0)).unwrap();
    let st = plan.stats();
    let all_204 = st.lines_per_shot.len() == 52 && st.lines_per_shot.iter().all(|&n| n == 204);
    check(
        all_204 && st.acs_complete && st.pf_respected && st.center_in_first_shot,
        format!(
            "222x236, 52 shots: 204 lines in every shot {all_204}, {} lines, acceleration {:.3}, ACS complete {}, PF band empty {}, centre 3x3 in shot 0 {}",
            st.total_lines, st.achieved_accel, st.acs_complete, st.pf_respected, st.center_in_first_shot
        ),
    )
}

fn solver_sanity() -> Verdict {
    let d = Dims::cube(64);
    let truth: RealVolume = make_phantom(PhantomKind::Shepp3d, d, 0).unwrap();
    let img = truth.to_complex();
    let unit = CoilSet::unit(d);
    let full = generate_plan(&PlanParams::full(64, 64, 8, 0)).unwrap();
    let ksp = corrupt(&img, &unit, &full, &MotionTrajectory::stationary(8)).unwrap();
    let one = ReconConfig {
        l1_steps: 1,
        lambda_rel: 0.0,
        ..Default::default()
    };
    let r = recon_l1(&ksp, &unit, &full, &[RigidParams::IDENTITY; 8], &one).unwrap();
    let err = r.image.zip_map(&img, |a, b| a - b).unwrap().norm() / img.norm();

    let coils = CoilSet::synthetic(d, 4).unwrap();
    let plan = generate_plan(&PlanParams::pmoc3d_scaled(64, 64, 8, 1)).unwrap();
    let ksp = corrupt(&img, &coils, &plan, &MotionTrajectory::stationary(8)).unwrap();
    let adj = psnr(&recon_adjoint(&ksp, &coils, &plan).unwrap(), &truth).unwrap();
    let l1 = recon_l1(
        &ksp,
        &coils,
        &plan,
        &[RigidParams::IDENTITY; 8],
        &ReconConfig::default(),
    )
    .unwrap();
    let l1_psnr = psnr(&l1.image.magnitude(), &truth).unwrap();
    let monotone = l1.losses.windows(2).all(|w| w[1] <= w[0]);
    check(
        err <= 1e-6 && l1_psnr >= adj && monotone,
        format!(
            "one-step full-sampling error {err:.2e} (<= 1e-6); shepp3d 64^3 undersampled L1 {l1_psnr:.2} dB vs adjoint {adj:.2} dB; L1 loss monotone {monotone}"
        ),
    )
}

fn motion_recovery() -> Verdict {
    let d = Dims::cube(64);
    let truth: RealVolume = make_phantom(PhantomKind::Shepp3d, d, 0).unwrap();
    let coils = CoilSet::synthetic(d, 4).unwrap();
    let plan = generate_plan(&PlanParams::pmoc3d_scaled(64, 64, 8, 1)).unwrap();
    let mut traj = MotionTrajectory::stationary(8);
    for p in traj.per_shot.iter_mut().skip(4) {
        *p = RigidParams::translation([3.0, 0.0, 0.0]);
    }
    let ksp = corrupt(&truth.to_complex(), &coils, &plan, &traj).unwrap();
    let cfg = ReconConfig::default();
    let zero = [RigidParams::IDENTITY; 8];
    let plain = recon_l1(&ksp, &coils, &plan, &zero, &cfg).unwrap();
    let r = altopt(&ksp, &coils, &plan, &cfg).unwrap();
    let err = r
        .trajectory
        .iter()
        .zip(&traj.per_shot)
        .map(|(e, t)| {
            e.trans_vox
                .iter()
                .zip(&t.trans_vox)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let gain = psnr(&r.image.magnitude(), &truth).unwrap()
        - psnr(&plain.image.magnitude(), &truth).unwrap();
    let dc_zero: f64 = dc_loss_per_shot(&plain.image, &ksp, &coils, &plan, &zero)
        .unwrap()
        .iter()
        .sum();
    let dc_est: f64 = dc_loss_per_shot(&r.image, &ksp, &coils, &plan, &r.trajectory)
        .unwrap()
        .iter()
        .sum();
    let reduction = 1.0 - dc_est / dc_zero;
    check(
        err <= 0.2 && gain >= 6.0,
        format!(
            "64^3, 8 shots, +3 voxel y event at shot 4: max translation error {err:.3} voxel (<= 0.2), PSNR gain {gain:.2} dB (>= 6) after {} iterations; total DC loss reduced {:.0}% vs uncorrected",
            r.iterations,
            100.0 * reduction
        ),
    )
}

fn severity_ordering() -> Verdict {
    let d = Dims::cube(64);
    let vols: Vec<(String, RealVolume)> = (0..5)
        .map(|i| {
            (
                format!("p{i}"),
                make_phantom(PhantomKind::Blobs, d, 40 + i).unwrap(),
            )
        })
        .collect();
    let cfg = SimEvalConfig {
        methods: vec![Method::Adjoint],
        ..Default::default()
    };
    let run = run_simulated_eval(&vols, &cfg, 2024).unwrap();
    let get = |v: &str, s: Severity, r: usize, m: MetricKind| {
        run.rows
            .iter()
            .find(|x| x.volume == v && x.severity == s && x.replicate == r && x.metric == m)
            .unwrap()
            .value
    };
    let (mut wins, mut sums) = (0, [0.0f64; 4]);
    for (v, _) in &vols {
        for r in 0..2 {
            let p = [
                get(v, Severity::Mild, r, MetricKind::Psnr),
                get(v, Severity::Severe, r, MetricKind::Psnr),
            ];
            let a = [
                get(v, Severity::Mild, r, MetricKind::Ap),
                get(v, Severity::Severe, r, MetricKind::Ap),
            ];
            wins += usize::from(p[0] > p[1] && a[0] < a[1]);
            sums = [
                sums[0] + p[0],
                sums[1] + p[1],
                sums[2] + a[0],
                sums[3] + a[1],
            ];
        }
    }
    let m = sums.map(|s| s / 10.0);
    check(
        wins >= 9 && m[0] > m[1] && m[2] < m[3],
        format!(
            "5 blobs phantoms 64^3, adjoint: mild beats severe on PSNR and AP in {wins}/10 pairs; mean PSNR {:.2} vs {:.2} dB, mean AP {:.4} vs {:.4}",
            m[0], m[1], m[2], m[3]
        ),
    )
}

fn bradley_terry() -> Verdict {
    let prefs = [Preference {
        a: 0,
        b: 1,
        p: 0.75,
    }];
    let (beta, ..) = fit_bt_indexed(
        2,
        &prefs,
        &BtOptions {
            reg_weight: 0.0,
            ..Default::default()
        },
    )
    .unwrap();
    let gap_err = (beta[0] - beta[1] - 3f64.ln()).abs();
    let mut worst = f64::INFINITY;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..24).map(|i| 6.0 * (i as f64 / 23.0 - 0.5)).collect();
        let mut recs = Vec::new();
        for i in 0..24 {
            for j in i + 1..24 {
                let p = 1.0 / (1.0 + (truth[j] - truth[i]).exp());
                let outcomes = (0..2)
                    .map(|_| {
                        if rng.random::<f64>() < p {
                            Outcome::AWorse
                        } else {
                            Outcome::BWorse
                        }
                    })
                    .collect();
                recs.push(ComparisonRecord::new(
                    format!("S{i:02}"),
                    format!("S{j:02}"),
                    outcomes,
                ));
            }
        }
        let fit = fit_bt(&recs, &BtOptions::default()).unwrap();
        let est: Vec<f64> = (0..24).map(|i| fit.scores[&format!("S{i:02}")]).collect();
        worst = worst.min(spearman(&est, &truth).unwrap());
    }
    check(
        gap_err <= 1e-3 && worst >= 0.95,
        format!(
            "two-item gap error {gap_err:.1e} vs ln 3 (<= 1e-3); 24-item two-rater round-robin, true scores evenly spaced on [-3, 3]: min Spearman over 10 seeds {worst:.3} (>= 0.95)"
        ),
    )
}

fn metric_identities() -> Verdict {
    let d = Dims::cube(16);
    let x: RealVolume = make_phantom(PhantomKind::Shepp3d, d, 0).unwrap();
    let zero = RealVolume::zeros(d);
    let half = x.map(|v| 0.5 * v);
    let c = RealVolume::filled(d, 0.3);
    let cap = psnr(&x, &x).unwrap() == 100.0;
    let s = ssim(&x, &x, None).unwrap();
    let ap = [
        artifact_power(&x, &x).unwrap(),
        artifact_power(&zero, &x).unwrap(),
        artifact_power(&half, &x).unwrap(),
    ];
    let flat = tenengrad(&c) == 0.0 && average_edge_strength(&c).unwrap() == 0.0;
    let v = [1.0, 2.0, 3.0, 4.0, 5.0];
    let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
    let pos = spearman(&v, &v).unwrap();
    let neg = spearman(&v, &rev).unwrap();
    let tie = spearman(&[1.0, 2.0, 2.0, 4.0], &[10.0, 20.0, 30.0, 40.0]).unwrap();
    let tie_ref = 4.5 / (4.5f64 * 5.0).sqrt();
    let pass = cap
        && (s - 1.0).abs() <= 1e-9
        && ap[0] == 0.0
        && (ap[1] - 1.0).abs() < 1e-12
        && (ap[2] - 0.25).abs() < 1e-12
        && flat
        && (pos - 1.0).abs() < 1e-12
        && (neg + 1.0).abs() < 1e-12
        && (tie - tie_ref).abs() < 1e-15;
    check(
        pass,
        format!(
            "PSNR cap {cap}, SSIM(x,x) {s:.12}, AP {:?}, TG/AES zero on constant {flat}, Spearman {pos} / {neg}, tie case {tie:.15} vs {tie_ref:.15}",
            ap
        ),
    )
}

fn dc_thresholding() -> Verdict {
    let d = Dims::cube(32);
    let truth = make_phantom::<f64>(PhantomKind::Shepp3d, d, 0)
        .unwrap()
        .to_complex();
    let coils = CoilSet::synthetic(d, 4).unwrap();
    let plan = generate_plan(&PlanParams::pmoc3d_scaled(32, 32, 8, 3)).unwrap();
    let still = MotionTrajectory::stationary(8);
    let ksp = corrupt(&truth, &coils, &plan, &still).unwrap();
    let mut wrong = still.per_shot.clone();
    wrong[5] = RigidParams::translation([10.0, 0.0, 0.0]);
    let losses = dc_loss_per_shot(&truth, &ksp, &coils, &plan, &wrong).unwrap();
    let keep = threshold_shots(&losses, 0.70).unwrap();
    let expect: Vec<bool> = (0..8).map(|s| s != 5).collect();
    let listed = threshold_shots(&[0.1, 0.9, 0.69, 0.71], 0.70).unwrap();
    check(
        keep == expect && listed == [true, false, true, false],
        format!(
            "shot 5 off by 10 voxels: losses {:?}, dropped {:?}; listed losses keep {:?}",
            losses
                .iter()
                .map(|l| (l * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>(),
            (0..8).filter(|&s| !keep[s]).collect::<Vec<_>>(),
            (0..4).filter(|&s| listed[s]).collect::<Vec<_>>()
        ),
    )
}

fn end_to_end_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_momoc"))
            .args(["eval", "simulated", "--seed", "7", "--out", name])
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(dir.path().join(name).join("rows.jsonl")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    let rows = a.iter().filter(|&&c| c == b'\n').count();
    check(
        a == b && rows > 0,
        format!(
            "two runs of `momoc eval simulated --seed 7`: {rows} rows each, byte-identical {}",
            a == b
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict, u64);
    let criteria: [Criterion; 9] = [
        ("adjoint correctness", adjoint_correctness, 10),
        ("sampling geometry", sampling_geometry, 1),
        ("solver sanity", solver_sanity, 60),
        ("motion recovery", motion_recovery, 300),
        ("severity ordering", severity_ordering, 300),
        ("bradley-terry fit", bradley_terry, 10),
        ("metric identities", metric_identities, 5),
        ("dc thresholding", dc_thresholding, 1),
        ("end-to-end determinism", end_to_end_determinism, 600),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let t0 = Instant::now();
        let v = run();
        let dt = t0.elapsed();
        let in_time = dt <= Duration::from_secs(limit);
        let pass = v.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "[{}] {name}: {} ({:.2} s, limit {limit} s{})",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            dt.as_secs_f64(),
            if in_time { "" } else { ", exceeded" }
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
