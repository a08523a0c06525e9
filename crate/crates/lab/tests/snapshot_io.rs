use nmps::core::envs::{Env, EnvSpec};
use nmps::core::explorer::{ActionValues, SkillDiscriminator};
use nmps::core::features::{Activation, FeatureMap};
use nmps::core::pipeline::{pretrain, Method, PretrainConfig, RunMeta, Snapshot, SnapshotAgent, SNAPSHOT_FORMAT_VERSION};
use nmps::core::sf_agent::{SuccessorRepr, SuccessorTable};
use nmps::snapshot_io::{from_text, read, to_text, write};
use proptest::prelude::*;

fn bits(s: &Snapshot) -> Vec<u64> {
    let mut out = vec![s.meta.rho.to_bits()];
    match &s.agent {
        SnapshotAgent::Successor { features, successors } => {
            out.extend(features.weights.iter().map(|x| x.to_bits()));
            out.push(features.learning_rate.to_bits());
            out.extend(successors.parameters().iter().map(|x| x.to_bits()));
            out.extend([successors.gamma.to_bits(), successors.learning_rate.to_bits()]);
        }
        SnapshotAgent::Skill {
            discriminator,
            q,
            gamma,
            learning_rate,
        } => {
            out.extend(discriminator.weights.iter().map(|x| x.to_bits()));
            out.push(discriminator.learning_rate.to_bits());
            out.extend(q.parameters().iter().map(|x| x.to_bits()));
            out.extend([gamma.to_bits(), learning_rate.to_bits()]);
        }
    }
    out
}

fn meta(method: &str, rho: f64) -> RunMeta {
    RunMeta {
        method: method.into(),
        env: "fourrooms".into(),
        rho,
        seed: 3,
        step: 17,
    }
}

fn real() -> impl Strategy<Value = f64> {
    use prop::num::f64::{NEGATIVE, NORMAL, POSITIVE, SUBNORMAL, ZERO};
    POSITIVE | NEGATIVE | NORMAL | SUBNORMAL | ZERO
}

fn successor() -> impl Strategy<Value = Snapshot> {
    (1usize..4, 1usize..5, 1usize..4, any::<bool>(), any::<bool>(), real(), real())
        .prop_flat_map(|(d, obs, na, linear, tanh, rho, lr)| {
            let psi_len = if linear { na * d * (obs + 1) } else { obs * na * d };
            (
                prop::collection::vec(real(), d * obs),
                prop::collection::vec(real(), psi_len),
                Just((d, obs, na, linear, tanh, rho, lr)),
            )
        })
        .prop_map(|(w, psi, (d, obs, na, linear, tanh, rho, lr))| Snapshot {
            format_version: SNAPSHOT_FORMAT_VERSION,
            meta: meta("NMPS_X_sep^e*", rho),
            agent: SnapshotAgent::Successor {
                features: FeatureMap {
                    feature_dim: d,
                    obs_dim: obs,
                    weights: w,
                    activation: if tanh { Activation::Tanh } else { Activation::Identity },
                    trainable: !tanh,
                    learning_rate: lr,
                },
                successors: SuccessorTable {
                    repr: if linear {
                        SuccessorRepr::Linear {
                            input_dim: obs,
                            weights: psi,
                        }
                    } else {
                        SuccessorRepr::Tabular {
                            num_states: obs,
                            psi,
                        }
                    },
                    num_actions: na,
                    feature_dim: d,
                    gamma: 0.99,
                    learning_rate: lr,
                },
            },
        })
}

fn skill() -> impl Strategy<Value = Snapshot> {
    (1usize..5, 1usize..5, 1usize..4, any::<bool>(), real(), real())
        .prop_flat_map(|(z, obs, na, linear, gamma, lr)| {
            let q_len = if linear { z * na * (obs + 1) } else { obs * z * na };
            (
                prop::collection::vec(real(), z * obs),
                prop::collection::vec(real(), q_len),
                Just((z, obs, na, linear, gamma, lr)),
            )
        })
        .prop_map(|(w, qv, (z, obs, na, linear, gamma, lr))| Snapshot {
            format_version: SNAPSHOT_FORMAT_VERSION,
            meta: meta("DIAYN", 0.01),
            agent: SnapshotAgent::Skill {
                discriminator: SkillDiscriminator {
                    num_skills: z,
                    obs_dim: obs,
                    weights: w,
                    learning_rate: lr,
                },
                q: if linear {
                    ActionValues::Linear {
                        input_dim: obs,
                        contexts: z,
                        num_actions: na,
                        weights: qv,
                    }
                } else {
                    ActionValues::Tabular {
                        num_states: obs,
                        contexts: z,
                        num_actions: na,
                        q: qv,
                    }
                },
                gamma,
                learning_rate: lr,
            },
        })
}

proptest! {
    #[test]
    fn text_round_trip_is_bit_exact(s in prop_oneof![successor(), skill()]) {
        let back = from_text(&to_text(&s)).unwrap();
        prop_assert_eq!(bits(&back), bits(&s));
        prop_assert_eq!(&back.meta.method, &s.meta.method);
        prop_assert_eq!(to_text(&back), to_text(&s));
    }
}

#[test]
fn trained_snapshots_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for (name, env) in [("NMPS_X_sep^ex", EnvSpec::four_rooms()), ("DIAYN", EnvSpec::four_rooms()), ("APS", EnvSpec::point_mass())] {
        let env = Env::new(env).unwrap();
        let cfg = PretrainConfig {
            total_steps: 1000,
            ..PretrainConfig::default()
        };
        let out = pretrain(&Method::parse(name).unwrap(), &env, &cfg, 2).unwrap();
        let path = dir.path().join("snap.txt");
        write(&path, &out.snapshot).unwrap();
        let back = read(&path).unwrap();
        assert_eq!(back, out.snapshot, "{name}");
        assert_eq!(bits(&back), bits(&out.snapshot));
    }
}

#[test]
fn malformed_files_report_the_line() {
    let s = Snapshot {
        format_version: SNAPSHOT_FORMAT_VERSION,
        meta: meta("APS", 0.5),
        agent: SnapshotAgent::Successor {
            features: FeatureMap {
                feature_dim: 1,
                obs_dim: 2,
                weights: vec![0.5, -0.25],
                activation: Activation::Tanh,
                trainable: true,
                learning_rate: 0.1,
            },
            successors: SuccessorTable::tabular(2, 1, 1, 0.9, 0.1),
        },
    };
    let text = to_text(&s);

    let bad_version = text.replacen("nmps-snapshot 1", "nmps-snapshot 9", 1);
    assert_eq!(from_text(&bad_version).unwrap_err().line, 1);

    let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
    let err = from_text(&truncated).unwrap_err();
    assert!(err.message.contains("end of file"), "{err}");

    let wrong_key = text.replacen("seed 3", "sead 3", 1);
    let err = from_text(&wrong_key).unwrap_err();
    assert_eq!(err.line, 5);
    assert!(err.message.contains("seed"));

    let short_array = text.replacen("5.0000000000000000e-1 ", "", 1);
    let err = from_text(&short_array).unwrap_err();
    assert!(err.message.contains("declares 2"), "{err}");

    let extra = format!("{text}junk\n");
    assert!(from_text(&extra).unwrap_err().message.contains("trailing"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, &wrong_key).unwrap();
    let msg = read(&path).unwrap_err().to_string();
    assert!(msg.contains("bad.txt:5"), "{msg}");
}
