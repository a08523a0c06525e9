use nmps_core::controller::Mode;
use nmps_core::envs::{Env, EnvSpec, EnvState, Observation};
use nmps_core::features::{sample_task, FeatureMap};
use nmps_core::intrinsic::RewardSource;
use nmps_core::pipeline::{
    all_variants, finetune, finetune_with_reward, parse_variant, pretrain, run_baseline, ActionSource, BaselineKind,
    FinetuneConfig, Method, PretrainConfig, RunMeta, Snapshot, SnapshotAgent, SNAPSHOT_FORMAT_VERSION,
};
use nmps_core::replay::{BufferId, Sharing};
use nmps_core::rng::{stream, Stream};
use nmps_core::sf_agent::SuccessorTable;

fn short(steps: usize) -> PretrainConfig {
    PretrainConfig {
        total_steps: steps,
        ..PretrainConfig::default()
    }
}

fn four_rooms() -> Env {
    Env::new(EnvSpec::four_rooms()).unwrap()
}

#[test]
fn every_variant_runs_a_smoke_test() {
    let env = four_rooms();
    for v in all_variants() {
        let out = pretrain(&Method::Nmps(v.clone()), &env, &short(1000), 1).unwrap();
        assert_eq!(out.log.steps.len(), 1000, "{}", v.name());
        assert!(out.stats.updates > 0, "{}", v.name());
        assert_eq!(out.snapshot.meta.step, 500);
        assert!(matches!(out.snapshot.agent, SnapshotAgent::Successor { .. }));
        // the explorer never enters a snapshot
        assert!(out.explorer.is_some());
    }
}

#[test]
fn always_explorer_variants_only_explore() {
    let env = four_rooms();
    for v in all_variants().into_iter().filter(|v| v.action_source == ActionSource::AlwaysExplorer) {
        let out = pretrain(&Method::Nmps(v), &env, &short(1000), 2).unwrap();
        assert!(out.log.steps.iter().all(|s| s.mode == Some(Mode::Explor)));
        assert_eq!(out.stats.explore_fraction, 1.0);
        // the exploiter still learns from the explorer's transitions
        assert!(out
            .log
            .steps
            .iter()
            .filter_map(|s| s.update.as_ref())
            .all(|u| u.exploit_source == Some(RewardSource::Visr)));
    }
}

#[test]
fn shared_buffer_variants_sample_only_from_the_shared_buffer() {
    let env = four_rooms();
    for (sharing, id) in [(Sharing::ExploitCommon, BufferId::Exploit), (Sharing::ExplorCommon, BufferId::Explor)] {
        for v in all_variants().into_iter().filter(|v| v.buffer_sharing == sharing) {
            let out = pretrain(&Method::Nmps(v), &env, &short(1000), 3).unwrap();
            let updates: Vec<_> = out.log.steps.iter().filter_map(|s| s.update.as_ref()).collect();
            assert!(!updates.is_empty());
            for u in updates {
                assert_eq!(u.foreign_items, 0);
                assert!(u.exploit_batch.is_none_or(|b| b == id));
                assert!(u.explor_batch.is_none_or(|b| b == id));
            }
        }
    }
}

#[test]
fn each_agent_trains_on_its_own_reward_only() {
    let env = four_rooms();
    for v in all_variants() {
        let own = v.explorer_reward.reward_source();
        let out = pretrain(&Method::Nmps(v), &env, &short(1000), 4).unwrap();
        for u in out.log.steps.iter().filter_map(|s| s.update.as_ref()) {
            assert!(u.exploit_source.is_none_or(|s| s == RewardSource::Visr));
            assert!(u.explor_source.is_none_or(|s| s == own));
            assert!(u.exploration_term.is_none());
        }
    }
}

#[test]
fn monolithic_aps_has_no_controller_and_adds_its_terms() {
    let env = four_rooms();
    let out = run_baseline(BaselineKind::ApsMonolithic, &env, &short(1000), 5).unwrap();
    assert!(out.log.steps.iter().all(|s| s.mode.is_none()));
    assert!(out.explorer.is_none());
    let updates: Vec<_> = out.log.steps.iter().filter_map(|s| s.update.as_ref()).collect();
    assert!(!updates.is_empty());
    for u in updates {
        assert_eq!(u.exploit_source, Some(RewardSource::ApsCombined));
        assert_eq!(
            u.combined_reward.unwrap(),
            u.exploit_reward.unwrap() + u.exploration_term.unwrap()
        );
        assert!(u.explor_source.is_none());
    }
}

#[test]
fn standalone_diayn_snapshots_a_skill_agent() {
    let env = four_rooms();
    let cfg = PretrainConfig {
        skill_dim_override: Some(4),
        ..short(1000)
    };
    let out = run_baseline(BaselineKind::DiaynStandalone, &env, &cfg, 6).unwrap();
    match &out.snapshot.agent {
        SnapshotAgent::Skill { discriminator, .. } => assert_eq!(discriminator.num_skills, 4),
        other => panic!("unexpected snapshot {other:?}"),
    }
    assert!(out.log.steps.iter().all(|s| s.mode.is_none()));
}

#[test]
fn runs_and_finetunes_are_bit_reproducible() {
    let env = four_rooms();
    let method = Method::parse("NMPS_X_sep^ex").unwrap();
    let a = pretrain(&method, &env, &short(3000), 7).unwrap();
    let b = pretrain(&method, &env, &short(3000), 7).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.snapshot, b.snapshot);
    assert_eq!(a.stats, b.stats);
    let c = pretrain(&method, &env, &short(3000), 8).unwrap();
    assert_ne!(a.snapshot, c.snapshot);

    let ft = FinetuneConfig {
        budget_steps: 6000,
        ..FinetuneConfig::default()
    };
    let x = finetune(&a.snapshot, &env, &ft, 1).unwrap();
    let y = finetune(&a.snapshot, &env, &ft, 1).unwrap();
    assert_eq!(x.curve, y.curve);
    assert_eq!(x.curve.len(), 6);
}

#[test]
fn point_mass_runs_with_linear_models() {
    let env = Env::new(EnvSpec::point_mass()).unwrap();
    for name in ["NMPS_X_sep^ex", "NMPS_D_sep^e*", "APS"] {
        let out = pretrain(&Method::parse(name).unwrap(), &env, &short(1000), 9).unwrap();
        assert!(out.stats.coverage > 1);
        match &out.snapshot.agent {
            SnapshotAgent::Successor { successors, .. } => {
                assert!(successors.parameters().iter().all(|p| p.is_finite()))
            }
            other => panic!("unexpected snapshot {other:?}"),
        }
    }
}

#[test]
fn explorer_feature_toggle_changes_explorer_q() {
    let env = four_rooms();
    let on = pretrain(&Method::parse("NMPS_X_sep^ex").unwrap(), &env, &short(5000), 10).unwrap();
    let off = pretrain(&Method::parse("NMPS_X_sep^e*").unwrap(), &env, &short(5000), 10).unwrap();
    let (qa, qb) = (on.explorer.unwrap().q, off.explorer.unwrap().q);
    let gap = qa
        .parameters()
        .iter()
        .zip(qb.parameters())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap >= 1e-3, "gap {gap}");
}

#[test]
fn invalid_configurations_are_rejected_before_the_loop() {
    let env = four_rooms();
    let method = Method::parse("NMPS_X_sep^ex").unwrap();
    for cfg in [
        PretrainConfig { rho: 0.0, ..short(1000) },
        PretrainConfig { total_steps: 10, warmup_steps: Some(100), ..PretrainConfig::default() },
        PretrainConfig { batch_size: 10, replay_capacity: 5, ..short(1000) },
    ] {
        assert!(pretrain(&method, &env, &cfg, 0).is_err());
    }
    assert!(parse_variant("NMPS_Q_foo").is_err());
}

fn successor_snapshot(features: FeatureMap, successors: SuccessorTable, env: &Env) -> Snapshot {
    Snapshot {
        format_version: SNAPSHOT_FORMAT_VERSION,
        meta: RunMeta {
            method: "test".into(),
            env: env.spec().name().into(),
            rho: 0.01,
            seed: 0,
            step: 0,
        },
        agent: SnapshotAgent::Successor { features, successors },
    }
}

#[test]
fn zero_reward_gives_zero_task_and_flat_curve() {
    let env = Env::new(EnvSpec::open_room()).unwrap();
    let mut rng = stream(1, Stream::Init);
    let snap = successor_snapshot(
        FeatureMap::random(10, 25, 1.0, 0.1, &mut rng),
        SuccessorTable::tabular(25, 4, 10, 0.99, 0.1),
        &env,
    );
    let cfg = FinetuneConfig {
        budget_steps: 8000,
        ..FinetuneConfig::default()
    };
    let out = finetune_with_reward(&snap, &env, &cfg, 3, &|_| 0.0).unwrap();
    assert!(out.w.unwrap().w.iter().all(|x| x.abs() < 1e-12));
    assert!(out.curve.iter().all(|p| p.mean_return == 0.0 && p.std_return == 0.0));
    assert_eq!(out.rewarded_steps, 0);
}

#[test]
fn finetuned_greedy_policy_matches_value_iteration() {
    let env = Env::new(EnvSpec::open_room()).unwrap();
    let (ns, na, gamma) = (25, 4, 0.9);
    let mut rng = stream(2, Stream::Init);
    let features = FeatureMap::random(10, ns, 1.0, 0.1, &mut rng);
    let w_true = sample_task(10, &mut rng).w;
    let cell = |i| Observation::Cell { index: i, count: ns };
    let reward_of = |o: &Observation| -> f64 {
        features.encode(o).unwrap().iter().zip(&w_true).map(|(a, b)| a * b).sum()
    };
    let next: Vec<Vec<usize>> = (0..ns)
        .map(|s| {
            let st = EnvState {
                observation: cell(s),
                step_index: 0,
                episode_done: false,
            };
            (0..na)
                .map(|a| env.transition(&st, a).unwrap().observation.cell().unwrap())
                .collect()
        })
        .collect();
    let r: Vec<f64> = (0..ns).map(|s| reward_of(&cell(s))).collect();

    // value iteration oracle
    let mut v = vec![0.0; ns];
    for _ in 0..2000 {
        v = (0..ns)
            .map(|s| (0..na).map(|a| r[next[s][a]] + gamma * v[next[s][a]]).fold(f64::MIN, f64::max))
            .collect();
    }
    let q_star = |s: usize, a: usize| r[next[s][a]] + gamma * v[next[s][a]];

    let snap = successor_snapshot(features.clone(), SuccessorTable::tabular(ns, na, 10, gamma, 0.1), &env);
    let cfg = FinetuneConfig {
        budget_steps: 20_000,
        ..FinetuneConfig::default()
    };
    let out = finetune_with_reward(&snap, &env, &cfg, 4, &reward_of).unwrap();
    assert!(out.fit_r_squared.unwrap() >= 0.999);
    let w = out.w.unwrap().w;
    let SnapshotAgent::Successor { successors, .. } = &out.agent else {
        panic!("successor agent expected")
    };
    for s in 0..ns {
        let a = successors.greedy_action(&cell(s), &w).unwrap();
        let best = (0..na).map(|b| q_star(s, b)).fold(f64::MIN, f64::max);
        assert!(q_star(s, a) >= best - 1e-9, "state {s}: action {a} is not optimal");
    }
}
