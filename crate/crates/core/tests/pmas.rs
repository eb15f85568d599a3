use momoc_core::pmas::{fit_bt, parse_comparisons, spearman, BtOptions, ComparisonRecord, Outcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sigmoid(d: f64) -> f64 {
    1.0 / (1.0 + (-d).exp())
}

/// Full round-robin over `truth.len()` items, each pair judged by two simulated raters
/// who call the more severe item with probability `sigmoid(beta_i - beta_j)`.
fn synthetic_round_robin(truth: &[f64], rng: &mut ChaCha8Rng) -> Vec<ComparisonRecord> {
    let mut recs = Vec::new();
    for i in 0..truth.len() {
        for j in i + 1..truth.len() {
            let p = sigmoid(truth[i] - truth[j]);
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
    recs
}

#[test]
fn synthetic_round_robin_recovers_ordering() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..24).map(|i| 6.0 * (i as f64 / 23.0 - 0.5)).collect();
        let recs = synthetic_round_robin(&truth, &mut rng);
        let fit = fit_bt(&recs, &BtOptions::default()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.components, 1);
        let beta: Vec<f64> = (0..24).map(|i| fit.scores[&format!("S{i:02}")]).collect();
        assert!(beta.iter().sum::<f64>().abs() < 1e-9);
        let rho = spearman(&beta, &truth).unwrap();
        assert!(rho >= 0.95, "seed {seed}: rho {rho}");
    }
}

#[test]
fn closed_form_gap_through_the_file_format() {
    let text = r#"{"a":"A","b":"B","outcomes":["a_worse","similar"],"annotator":"r1","timestamp":"2025-03-01T10:00:00Z"}"#;
    let recs = parse_comparisons(text).unwrap();
    let fit = fit_bt(
        &recs,
        &BtOptions {
            reg_weight: 0.0,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((fit.scores["A"] - fit.scores["B"] - 3f64.ln()).abs() < 1e-5);
    let json: std::collections::BTreeMap<String, f64> =
        serde_json::from_str(&fit.to_json().unwrap()).unwrap();
    assert_eq!(json, fit.scores);
}

#[test]
fn default_prior_barely_moves_a_well_posed_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
    let recs = synthetic_round_robin(&truth, &mut rng);
    let mild = fit_bt(&recs, &BtOptions::default()).unwrap();
    let none = fit_bt(
        &recs,
        &BtOptions {
            reg_weight: 0.0,
            ..Default::default()
        },
    )
    .unwrap();
    if none.converged {
        let range = none.scores.values().cloned().fold(f64::MIN, f64::max)
            - none.scores.values().cloned().fold(f64::MAX, f64::min);
        for (k, v) in &mild.scores {
            assert!((v - none.scores[k]).abs() < 0.01 * range, "{k}");
        }
    }
}
