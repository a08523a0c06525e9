use nmps_core::envs::Observation;
use nmps_core::features::{sample_task, Activation, FeatureMap, FeatureUpdate, TaskOrigin};
use nmps_core::rng::{stream, Stream};
use proptest::prelude::*;
use rand::Rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn objective(map: &FeatureMap, batch: &[(Observation, Vec<f64>)]) -> f64 {
    batch
        .iter()
        .map(|(o, w)| map.encode(o).unwrap().iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
        .sum::<f64>()
        / batch.len() as f64
}

fn finite_difference_check(map: &FeatureMap, batch: &[(Observation, Vec<f64>)]) {
    let refs: Vec<(&Observation, &[f64])> = batch.iter().map(|(o, w)| (o, &w[..])).collect();
    let analytic = map.gradient(&refs).unwrap();
    let h = 1e-5;
    let numeric: Vec<f64> = (0..map.weights.len())
        .map(|i| {
            let mut plus = map.clone();
            plus.weights[i] += h;
            let mut minus = map.clone();
            minus.weights[i] -= h;
            (objective(&plus, batch) - objective(&minus, batch)) / (2.0 * h)
        })
        .collect();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
    let rel = norm(&diff) / norm(&numeric).max(1e-12);
    assert!(rel <= 1e-3, "relative gradient error {rel}");
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = stream(11, Stream::Init);
    for activation in [Activation::Tanh, Activation::Identity] {
        // dense observations
        let mut map = FeatureMap::random(5, 7, 0.8, 0.1, &mut rng);
        map.activation = activation;
        let batch: Vec<(Observation, Vec<f64>)> = (0..6)
            .map(|_| {
                let x = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
                (Observation::Vector(x), sample_task(5, &mut rng).w)
            })
            .collect();
        finite_difference_check(&map, &batch);

        // one-hot cells, with a repeated cell
        let mut map = FeatureMap::random(4, 9, 1.0, 0.1, &mut rng);
        map.activation = activation;
        let batch: Vec<(Observation, Vec<f64>)> = [0, 3, 3, 8]
            .iter()
            .map(|&i| (Observation::Cell { index: i, count: 9 }, sample_task(4, &mut rng).w))
            .collect();
        finite_difference_check(&map, &batch);
    }
}

#[test]
fn repeated_pair_ascends_monotonically() {
    let mut rng = stream(3, Stream::Init);
    let mut map = FeatureMap::random(10, 25, 1.0, 0.01, &mut rng);
    let obs = Observation::Cell { index: 7, count: 25 };
    let w = sample_task(10, &mut rng).w;
    let score = |m: &FeatureMap| m.encode(&obs).unwrap().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    let start = score(&map);
    let mut last = start;
    for _ in 0..300 {
        map.train(&[(&obs, &w[..])]).unwrap();
        let now = score(&map);
        assert!(now >= last - 1e-12, "objective decreased: {last} -> {now}");
        assert!(now <= 1.0 + 1e-12);
        last = now;
    }
    assert!(last > start);
}

#[test]
fn frozen_map_is_bit_identical_after_training() {
    let mut rng = stream(5, Stream::Init);
    let mut map = FeatureMap::random(3, 4, 1.0, 0.5, &mut rng);
    map.trainable = false;
    let obs = Observation::Vector(vec![0.3, -0.2, 0.9, 0.1]);
    let w = [1.0, 0.0, 0.0];
    let (next, outcome) = map.train_feature(&[(&obs, &w[..])]).unwrap();
    assert_eq!(outcome, FeatureUpdate::Skipped);
    let bits = |m: &FeatureMap| m.weights.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&next), bits(&map));
}

#[test]
fn sphere_samples_are_centred() {
    let mut rng = stream(1, Stream::Task);
    let n = 100_000;
    let mut mean = [0.0; 10];
    for _ in 0..n {
        let t = sample_task(10, &mut rng);
        assert_eq!(t.origin, TaskOrigin::Sampled);
        for (m, x) in mean.iter_mut().zip(&t.w) {
            *m += x / n as f64;
        }
    }
    for m in mean {
        assert!(m.abs() <= 0.02, "component mean {m}");
    }
}

proptest! {
    #[test]
    fn encode_is_unit_norm_and_scale_invariant(
        seed in any::<u64>(),
        x in prop::collection::vec(-5.0f64..5.0, 6),
        c in 0.01f64..100.0,
    ) {
        let mut rng = stream(seed, Stream::Init);
        let mut map = FeatureMap::random(4, 6, 1.0, 0.1, &mut rng);
        let phi = map.encode(&Observation::Vector(x.clone())).unwrap();
        prop_assert!((norm(&phi) - 1.0).abs() <= 1e-6);
        map.activation = Activation::Identity;
        let a = map.encode(&Observation::Vector(x.clone())).unwrap();
        let b = map.encode(&Observation::Vector(x.iter().map(|v| v * c).collect())).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-9);
        }
    }

    #[test]
    fn sampled_tasks_have_unit_norm_and_bounded_reward(seed in any::<u64>(), dim in 1usize..16) {
        let mut rng = stream(seed, Stream::Task);
        let t = sample_task(dim, &mut rng);
        prop_assert!((norm(&t.w) - 1.0).abs() <= 1e-9);
        let map = FeatureMap::random(dim, 3, 1.0, 0.1, &mut rng);
        let phi = map.encode(&Observation::Cell { index: 1, count: 3 }).unwrap();
        let r: f64 = phi.iter().zip(&t.w).map(|(a, b)| a * b).sum();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
    }

    #[test]
    fn training_keeps_weights_finite(seed in any::<u64>(), steps in 1usize..50) {
        let mut rng = stream(seed, Stream::Init);
        let mut map = FeatureMap::random(5, 8, 1.0, 1.0, &mut rng);
        for _ in 0..steps {
            let obs = Observation::Cell { index: rng.random_range(0..8), count: 8 };
            let w = sample_task(5, &mut rng).w;
            map.train(&[(&obs, &w[..])]).unwrap();
        }
        prop_assert!(map.weights.iter().all(|w| w.is_finite()));
    }
}
