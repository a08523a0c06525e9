use nmps::config::{Overrides, RunConfig};
use nmps::core::pipeline::{FinetuneConfig, PretrainConfig};
use nmps::LabError;

#[test]
fn empty_file_gives_core_defaults() {
    let cfg = RunConfig::from_toml("").unwrap();
    assert_eq!(cfg, RunConfig::default());
    cfg.validate().unwrap();
    let pre = cfg.pretrain.to_core(cfg.rho).unwrap();
    assert_eq!(pre, PretrainConfig::default());
    assert_eq!(cfg.finetune.to_core().unwrap(), FinetuneConfig::default());
    assert_eq!(cfg.sweep.methods.len(), 14);
    assert_eq!(cfg.sweep.seeds, vec![1, 2, 3, 4, 5]);
}

#[test]
fn unknown_keys_are_rejected_by_name() {
    for (text, key) in [
        ("colour = 1", "colour"),
        ("[pretrain]\ntotal_stepz = 5", "total_stepz"),
        ("[pretrain.knn]\nkk = 3", "kk"),
    ] {
        let err = RunConfig::from_toml(text).unwrap_err();
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn invalid_values_name_their_key() {
    let cases = [
        ("method = \"NMPS_Q_foo\"", "method"),
        ("env = \"mars\"", "env"),
        ("rho = 0.0", "rho"),
        ("task = \"reach-moon\"", "task"),
        ("[pretrain]\nexplor_reward_shift = \"up\"", "pretrain.explor_reward_shift"),
        ("[pretrain]\nbatch_size = 0", "pretrain"),
        ("[sweep]\nrhos = [2.0]", "sweep.rhos"),
        ("[sweep]\nmethods = [\"X\"]", "sweep.methods"),
    ];
    for (text, key) in cases {
        let cfg = RunConfig::from_toml(text).unwrap();
        match cfg.validate() {
            Err(LabError::ConfigValue { key: k, .. }) => assert_eq!(k, key, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn echo_round_trips() {
    let mut cfg = RunConfig::from_toml(
        "method = \"NMPS_D_sep^e*_D_A10\"\nenv = \"open5\"\nhorizon = 50\nrho = 0.05\n\
         [pretrain]\ntotal_steps = 1234\nsf_learning_rate = 0.3\nskill_dim = 6\n\
         [pretrain.knn]\nk = 3\n[finetune]\nenabled = false\n",
    )
    .unwrap();
    cfg.validate().unwrap();
    let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    cfg.pretrain.feature_learning_rate = 0.1 + 0.2;
    assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn overrides_narrow_the_sweep() {
    let mut cfg = RunConfig::default();
    Overrides {
        variant: Some("APS".into()),
        rho: Some(0.1),
        seed: Some(7),
        steps: Some(500),
        env: Some("open5".into()),
        out: Some("elsewhere".into()),
    }
    .apply(&mut cfg);
    assert_eq!(cfg.method, "APS");
    assert_eq!(cfg.sweep.methods, vec!["APS"]);
    assert_eq!(cfg.sweep.rhos, vec![0.1]);
    assert_eq!(cfg.sweep.seeds, vec![7]);
    assert_eq!(cfg.pretrain.total_steps, 500);
    assert_eq!(cfg.out_dir(), std::path::PathBuf::from("elsewhere"));
    cfg.validate().unwrap();
}

#[test]
fn missing_file_error_names_the_path() {
    let err = RunConfig::load(std::path::Path::new("/definitely/not/here.toml")).unwrap_err();
    assert!(err.to_string().contains("/definitely/not/here.toml"));
}
