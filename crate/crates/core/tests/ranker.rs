mod common;

use polytune::nn::{self, Matrix};
use polytune::ranker::{
    self, fit_ranker, pair_loss, pair_loss_gradients, tournament, tournament_rank, ComparatorModel, ComparisonOutcome,
    Faster, FeatureScaler, Ranker, RankerConfig, TrainingPair,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pairs(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Vec<TrainingPair> {
    (0..n)
        .map(|_| TrainingPair {
            a: (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect(),
            b: (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect(),
            faster: if rng.gen_bool(0.5) { Faster::First } else { Faster::Second },
        })
        .collect()
}

#[test]
fn comparator_gradients_match_finite_differences() {
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ComparatorModel::new(8, &[64, 32], 0.7, &mut rng);
        let pairs = random_pairs(&mut rng, 8, 6);
        let grads = pair_loss_gradients(&model, &pairs);
        let mut params: Vec<Vec<f64>> = model.network.params().into_iter().cloned().collect();
        let mut probe = model.clone();
        let worst = common::worst_gradient_error(&mut params, &grads, &mut |p| {
            for (dst, src) in probe.network.params_mut().into_iter().zip(p) {
                dst.clone_from(src);
            }
            pair_loss(&probe, &pairs)
        });
        assert!(worst < 1e-4, "seed {seed}: worst relative error {worst}");
    }
}

#[test]
fn synthetic_monotone_accuracy() {
    let (feats, perf) = common::synthetic_monotone(42, 200);
    let (ranker, summary) = fit_ranker(&feats, &perf, &RankerConfig::default(), 7).unwrap();
    assert_eq!(summary.train_indices.len(), 140);
    assert_eq!(summary.heldout_indices.len(), 60);
    assert!(summary.loss_history.last() < summary.loss_history.first());
    let acc = summary.heldout_accuracy.unwrap();
    assert!(acc >= 0.9, "held-out accuracy {acc}");

    // Anti-symmetry on held-out pairs.
    let held: Vec<&Vec<f64>> = summary.heldout_indices.iter().map(|&i| &feats[i]).collect();
    let (mut agree, mut total) = (0, 0);
    for i in 0..held.len() {
        for j in i + 1..held.len() {
            total += 1;
            if ranker.compare(held[i], held[j]).unwrap() == ranker.compare(held[j], held[i]).unwrap().swapped() {
                agree += 1;
            }
        }
    }
    assert!(agree as f64 >= 0.9 * total as f64, "{agree}/{total}");
}

#[test]
fn tournament_recovers_order_with_trained_model() {
    let (feats, perf) = common::synthetic_monotone(5, 120);
    let (ranker, _) = fit_ranker(&feats, &perf, &RankerConfig::default(), 1).unwrap();
    let items: Vec<(String, Vec<f64>)> =
        feats.iter().enumerate().map(|(i, f)| (format!("v{i:03}"), f.clone())).collect();
    let ranking = tournament_rank(&ranker, &items).unwrap();
    assert_eq!(ranking.comparisons, 120 * 119 / 2);
    let best = perf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let top = ranker::select_top(&ranking, 0.1).unwrap();
    assert_eq!(top.len(), 12);
    // The true best variant lands in the selected top tenth.
    assert!(top.iter().any(|e| perf[e.index] == best));
}

#[test]
fn compare_rejects_wrong_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ranker = Ranker {
        scaler: FeatureScaler { x_min: vec![0.0; 4], x_max: vec![1.0; 4] },
        model: ComparatorModel::new(4, &[8, 8], 0.7, &mut rng),
    };
    assert!(ranker.compare(&[0.0; 3], &[0.0; 4]).is_err());
    assert!(ranker.compare(&[0.0; 4], &[0.0; 4]).is_ok());
}

#[test]
fn model_survives_disk_round_trip() {
    let (feats, perf) = common::synthetic_monotone(3, 20);
    let config = RankerConfig { epochs: 5, ..Default::default() };
    let (ranker, _) = fit_ranker(&feats, &perf, &config, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    ranker.save(&path).unwrap();
    let back = Ranker::load(&path).unwrap();
    assert_eq!(back, ranker);
    for i in 0..feats.len() - 1 {
        assert_eq!(back.compare(&feats[i], &feats[i + 1]).unwrap(), ranker.compare(&feats[i], &feats[i + 1]).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_sums_to_one(seed in any::<u64>(), xs in prop::collection::vec(-50.0f64..50.0, 8)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ComparatorModel::new(4, &[16, 8], 0.7, &mut rng);
        let p = model.probabilities(&xs[..4], &xs[4..]).unwrap();
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
        let m = Matrix::from_rows(std::slice::from_ref(&xs));
        prop_assert!((nn::softmax(&m).data.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tournament_is_permutation(n in 1usize..30, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let outcomes = [ComparisonOutcome::Win1, ComparisonOutcome::Win2, ComparisonOutcome::Draw];
        let r = tournament::<_, ()>(&ids, |i, j| {
            let h = seed.wrapping_mul(31).wrapping_add((i * 97 + j) as u64);
            Ok(outcomes[(h % 3) as usize])
        }).unwrap();
        let mut seen: Vec<usize> = r.entries.iter().map(|e| e.index).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(r.comparisons, n * (n - 1) / 2);
        prop_assert!(r.entries.windows(2).all(|w| w[0].wins > w[1].wins || (w[0].wins == w[1].wins && w[0].id < w[1].id)));
    }

    #[test]
    fn scaler_maps_training_rows_into_unit_box(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 5), 2..20)) {
        let s = FeatureScaler::fit(&rows).unwrap();
        for r in &rows {
            for v in s.transform(r).unwrap() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
