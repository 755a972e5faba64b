//! CRF inference against a brute-force oracle: exhaustive enumeration of
//! all 5^n labelings checks the partition function, the marginals, and the
//! Viterbi decode (including its lowest-ordinal tie-break), and central
//! finite differences check the analytic gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stancekit::corpus::SentimentLabel;
use stancekit::features::FeatureVector;
use stancekit::icrf::{
    forward_backward, log_potentials, nll_and_gradient, viterbi, IsotonicCrfModel, Potentials,
    TaggedSequence, TrainConfig, NUM_LABELS,
};
use std::collections::BTreeMap;

fn random_model(rng: &mut ChaCha8Rng, names: &[&str], scale: f64) -> IsotonicCrfModel {
    let mut model = IsotonicCrfModel::zeroed(
        names.iter().map(|s| s.to_string()),
        BTreeMap::new(),
        TrainConfig::default(),
    );
    for mu in model.weights.values_mut() {
        for v in mu.iter_mut() {
            *v = rng.gen_range(-scale..scale);
        }
    }
    for row in &mut model.transitions {
        for v in row.iter_mut() {
            *v = rng.gen_range(-scale..scale);
        }
    }
    for v in &mut model.bias {
        *v = rng.gen_range(-scale..scale);
    }
    model
}

fn random_features(rng: &mut ChaCha8Rng, names: &[&str], n: usize) -> Vec<FeatureVector> {
    (0..n)
        .map(|_| {
            let mut fv = FeatureVector::default();
            for name in names {
                if rng.gen_bool(0.5) {
                    fv.set(*name, rng.gen_range(-2.0..2.0));
                }
            }
            fv
        })
        .collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Enumerate labelings in lexicographic order; ties keep the first
/// (smallest) optimum, mirroring the documented tie-break.
fn enumerate(pot: &Potentials) -> (f64, Vec<usize>) {
    let n = pot.node.len();
    let total = 5usize.pow(n as u32);
    let mut best_score = f64::NEG_INFINITY;
    let mut best = vec![0; n];
    let mut scores = Vec::with_capacity(total);
    for code in 0..total {
        let mut labels = vec![0usize; n];
        let mut c = code;
        for slot in (0..n).rev() {
            labels[slot] = c % 5;
            c /= 5;
        }
        let mut score = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            score += pot.node[i][l];
            if i + 1 < n {
                score += pot.trans[l][labels[i + 1]];
            }
        }
        scores.push(score);
        if score > best_score {
            best_score = score;
            best = labels;
        }
    }
    (log_sum_exp(&scores), best)
}

#[test]
fn log_z_viterbi_and_marginals_match_enumeration_on_many_instances() {
    let names = ["a", "b", "c", "d", "e"];
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..120 {
        let model = random_model(&mut rng, &names, 1.5);
        let n = 1 + trial % 6;
        let feats = random_features(&mut rng, &names, n);
        let pot = log_potentials(&model, &feats);
        let marg = forward_backward(&pot);
        let (oracle_log_z, oracle_best) = enumerate(&pot);

        assert!(
            (marg.log_z - oracle_log_z).abs() < 1e-8,
            "trial {trial}: logZ {} vs oracle {}",
            marg.log_z,
            oracle_log_z
        );

        let decoded: Vec<usize> = viterbi(&model, &feats).iter().map(|l| l.index()).collect();
        assert_eq!(decoded, oracle_best, "trial {trial}");

        for row in &marg.unary {
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() < 1e-10, "trial {trial}: unary {total}");
        }
        for mat in &marg.pairwise {
            let total: f64 = mat.iter().flatten().sum();
            assert!(
                (total - 1.0).abs() < 1e-10,
                "trial {trial}: pairwise {total}"
            );
        }
    }
}

#[test]
fn ties_resolve_to_the_lexicographically_smallest_optimum() {
    // All-zero potentials of every length: the unique smallest optimum is
    // all-NN, which enumeration also yields.
    let model = IsotonicCrfModel::zeroed([], BTreeMap::new(), TrainConfig::default());
    for n in 1..=5 {
        let feats: Vec<FeatureVector> = (0..n).map(|_| FeatureVector::default()).collect();
        let labels = viterbi(&model, &feats);
        assert!(labels.iter().all(|&l| l == SentimentLabel::VeryNegative));
    }
    // Quantized potentials force frequent ties; enumeration is the oracle.
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for trial in 0..200 {
        let mut model = IsotonicCrfModel::zeroed(
            ["f".to_string()],
            BTreeMap::new(),
            TrainConfig::default(),
        );
        for v in model.weights.get_mut("f").unwrap().iter_mut() {
            *v = rng.gen_range(-1i32..=1) as f64;
        }
        for row in &mut model.transitions {
            for v in row.iter_mut() {
                *v = rng.gen_range(-1i32..=1) as f64;
            }
        }
        let n = 1 + trial % 4;
        let feats: Vec<FeatureVector> = (0..n)
            .map(|_| {
                let mut fv = FeatureVector::default();
                if rng.gen_bool(0.7) {
                    fv.set("f", 1.0);
                }
                fv
            })
            .collect();
        let pot = log_potentials(&model, &feats);
        let (_, oracle_best) = enumerate(&pot);
        let decoded: Vec<usize> = viterbi(&model, &feats).iter().map(|l| l.index()).collect();
        assert_eq!(decoded, oracle_best, "trial {trial}");
    }
}

#[test]
fn gradient_matches_finite_differences_on_many_instances() {
    let names = ["a", "b", "c"];
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let eps = 1e-5;
    for trial in 0..25 {
        let mut model = random_model(&mut rng, &names, 1.0);
        let n = 1 + trial % 4;
        let feats = random_features(&mut rng, &names, n);
        let labels: Vec<SentimentLabel> = (0..n)
            .map(|_| SentimentLabel::from_index(rng.gen_range(0..NUM_LABELS)))
            .collect();
        let batch = vec![TaggedSequence::new(feats, labels).unwrap()];
        let l2 = rng.gen_range(0.0..0.5);
        let (_, grad) = nll_and_gradient(&model, &batch, l2);

        let mut worst: f64 = 0.0;
        for name in names {
            for s in 0..NUM_LABELS {
                let orig = model.weights[name][s];
                model.weights.get_mut(name).unwrap()[s] = orig + eps;
                let (hi, _) = nll_and_gradient(&model, &batch, l2);
                model.weights.get_mut(name).unwrap()[s] = orig - eps;
                let (lo, _) = nll_and_gradient(&model, &batch, l2);
                model.weights.get_mut(name).unwrap()[s] = orig;
                let numeric = (hi - lo) / (2.0 * eps);
                let analytic = grad.weights[name][s];
                let scale = numeric.abs().max(analytic.abs()).max(1.0);
                worst = worst.max((numeric - analytic).abs() / scale);
            }
        }
        for a in 0..NUM_LABELS {
            for b in 0..NUM_LABELS {
                let orig = model.transitions[a][b];
                model.transitions[a][b] = orig + eps;
                let (hi, _) = nll_and_gradient(&model, &batch, l2);
                model.transitions[a][b] = orig - eps;
                let (lo, _) = nll_and_gradient(&model, &batch, l2);
                model.transitions[a][b] = orig;
                let numeric = (hi - lo) / (2.0 * eps);
                let analytic = grad.transitions[a][b];
                let scale = numeric.abs().max(analytic.abs()).max(1.0);
                worst = worst.max((numeric - analytic).abs() / scale);
            }
        }
        assert!(worst < 1e-4, "trial {trial}: max relative error {worst}");
    }
}
