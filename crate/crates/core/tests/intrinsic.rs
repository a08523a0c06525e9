use nmps_core::envs::Observation;
use nmps_core::explorer::SkillDiscriminator;
use nmps_core::intrinsic::{aps_combined, apt_batch_rewards, apt_reward, diayn_reward, visr_reward, KnnConfig};
use nmps_core::rng::{stream, Stream};
use proptest::prelude::*;
use rand::Rng;

/// Full sort over all distances, no partial selection.
fn brute_force(h: &[f64], memory: &[Vec<f64>], k: usize, n_h: u32) -> f64 {
    let mut d: Vec<f64> = memory
        .iter()
        .map(|m| h.iter().zip(m).map(|(a, b)| (a - b).abs().powi(n_h as i32)).sum())
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = k.min(d.len());
    (1.0 + d[..k].iter().sum::<f64>() / k as f64).ln()
}

#[test]
fn apt_matches_brute_force_on_random_memories() {
    let mut rng = stream(2024, Stream::Init);
    for case in 0..100 {
        let size = rng.random_range(16..=256);
        let dim = rng.random_range(4..=10);
        let k = if case % 2 == 0 { 1 } else { 12 };
        let memory: Vec<Vec<f64>> = (0..size)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let h: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = KnnConfig {
            k,
            ..KnnConfig::default()
        };
        let got = apt_reward(&h, &memory, &cfg).unwrap();
        let want = brute_force(&h, &memory, k, 2);
        assert!((got - want).abs() <= 1e-9, "case {case}: {got} vs {want}");
    }
}

#[test]
fn batch_rewards_match_brute_force() {
    let mut rng = stream(7, Stream::Init);
    let feats: Vec<Vec<f64>> = (0..64)
        .map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let cfg = KnnConfig::default();
    let got = apt_batch_rewards(&feats, &cfg);
    for (i, g) in got.iter().enumerate() {
        assert!((g - brute_force(&feats[i], &feats, 12, 2)).abs() <= 1e-9);
    }
}

#[test]
fn worked_examples() {
    let cfg = KnnConfig {
        k: 1,
        ..KnnConfig::default()
    };
    let r = apt_reward(&[0.0, 0.0], &[vec![2.0, 0.0]], &cfg).unwrap();
    assert!((r - 5f64.ln()).abs() < 1e-12);
    let c = aps_combined(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], &[vec![2.0, 0.0]], &cfg).unwrap();
    assert!((c - 1.6094379124341003).abs() < 1e-12);
    assert_eq!(visr_reward(&[0.6, 0.8], &[0.6, 0.8]).unwrap(), 1.0);
    assert!(visr_reward(&[1.0], &[1.0, 0.0]).is_err());
}

#[test]
fn diayn_reward_is_bounded_by_log_skills_with_equality_at_certainty() {
    let mut disc = SkillDiscriminator::zeros(16, 2, 0.1);
    let obs = Observation::Cell { index: 0, count: 2 };
    assert!(diayn_reward(&disc, &obs, 3).unwrap().abs() < 1e-12);
    // a huge logit on skill 3 makes the discriminator certain
    disc.weights[3] = 1e4;
    let r = diayn_reward(&disc, &obs, 3).unwrap();
    assert!((r - 16f64.ln()).abs() < 1e-9);
    assert!(diayn_reward(&disc, &obs, 16).is_err());
}

proptest! {
    #[test]
    fn apt_is_nonnegative_and_monotone_in_a_neighbour(
        seed in any::<u64>(),
        k in 1usize..16,
        n_h in 1u32..4,
        push in 0.0f64..3.0,
    ) {
        let mut rng = stream(seed, Stream::Init);
        let memory: Vec<Vec<f64>> = (0..20).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let h: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = KnnConfig { k, n_h, ..KnnConfig::default() };
        let base = apt_reward(&h, &memory, &cfg).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((base - brute_force(&h, &memory, k, n_h)).abs() <= 1e-9);
        // move one point radially away from h
        let j = rng.random_range(0..memory.len());
        let mut moved = memory.clone();
        for (m, x) in moved[j].iter_mut().zip(&h) {
            *m += (*m - x) * push;
        }
        prop_assert!(apt_reward(&h, &moved, &cfg).unwrap() >= base - 1e-12);
    }

    #[test]
    fn combined_minus_exploration_is_exploitation(seed in any::<u64>()) {
        let mut rng = stream(seed, Stream::Init);
        let v = |rng: &mut nmps_core::rng::RunRng| -> Vec<f64> { (0..4).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let (phi, w, h) = (v(&mut rng), v(&mut rng), v(&mut rng));
        let memory: Vec<Vec<f64>> = (0..30).map(|_| v(&mut rng)).collect();
        let cfg = KnnConfig::default();
        let c = aps_combined(&phi, &w, &h, &memory, &cfg).unwrap();
        let e = apt_reward(&h, &memory, &cfg).unwrap();
        prop_assert_eq!(c, visr_reward(&phi, &w).unwrap() + e);
    }

    #[test]
    fn diayn_reward_never_exceeds_log_skills(seed in any::<u64>(), skills in 2usize..20) {
        let mut rng = stream(seed, Stream::Init);
        let disc = SkillDiscriminator::random(skills, 6, 3.0, 0.1, &mut rng);
        let obs = Observation::Cell { index: rng.random_range(0..6), count: 6 };
        let probs = disc.probs(&obs).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(probs.iter().all(|&p| p >= 0.0));
        for z in 0..skills {
            prop_assert!(diayn_reward(&disc, &obs, z).unwrap() <= (skills as f64).ln() + 1e-12);
        }
    }
}
