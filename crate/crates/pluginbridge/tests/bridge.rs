use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rlframe_core::env::{derive_seed, ActionVector, EnvError, Environment, GridWorld};
use rlframe_core::learn::{
    create_learner, EpsilonSpec, LearnError, Learner, LearnerSpec, MonitorSpec,
};
use rlframe_core::net::{parse_config, NetError};
use rlframe_plugin::{
    configuration_document, convert_environment, extract_configuration, extract_learner,
    Capability, PluginDescriptor, PluginError, PluginRegistry, PluginSession,
};

fn mirror(args: &[&str]) -> PluginDescriptor {
    let mut command = vec![env!("CARGO_BIN_EXE_rlframe-mirror-plugin").to_string()];
    command.extend(args.iter().map(|s| s.to_string()));
    PluginDescriptor::new(
        "refplugin",
        command,
        vec![Capability::Environment, Capability::Learner, Capability::Configuration],
    )
}

fn plugin_error(e: &EnvError) -> &PluginError {
    match e {
        EnvError::External(inner) => inner.downcast_ref::<PluginError>().expect("plugin error"),
        other => panic!("expected an external error, got {other:?}"),
    }
}

#[test]
fn seeded_episodes_match_native_gridworld() {
    let mut native = GridWorld::new(11);
    let mut remote = convert_environment(&mirror(&[]), 11).unwrap();
    assert_eq!(remote.descriptor(), native.descriptor());
    for episode in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(5, episode));
        native.reset().unwrap();
        remote.reset().unwrap();
        loop {
            assert_eq!(remote.get_state().unwrap(), native.get_state().unwrap());
            let done = native.is_terminal().unwrap();
            assert_eq!(remote.is_terminal().unwrap(), done);
            if done {
                break;
            }
            let action = ActionVector::single(rng.gen_range(0..4));
            let r = native.step(&action).unwrap();
            assert_eq!(remote.step(&action).unwrap(), r);
            assert_eq!(remote.elapsed_steps(), native.elapsed_steps());
        }
        assert!(matches!(remote.step(&ActionVector::single(0)), Err(EnvError::StepAfterTerminal)));
    }
}

#[test]
fn transition_table_diff_is_empty() {
    let mut native = GridWorld::new(0);
    let mut remote = convert_environment(&mirror(&[]), 0).unwrap();
    let mut diffs = Vec::new();
    let mut compared = 0;
    for cell in 0..16 {
        let (x, y) = GridWorld::index_cell(cell);
        let route: Vec<usize> = std::iter::repeat_n(1, y).chain(std::iter::repeat_n(3, x)).collect();
        for action in 0..4 {
            native.reset().unwrap();
            remote.reset().unwrap();
            for &a in &route {
                native.step(&ActionVector::single(a)).unwrap();
                remote.step(&ActionVector::single(a)).unwrap();
            }
            let a = ActionVector::single(action);
            let outcome_native = native.step(&a).map(|r| r.0).map_err(|e| e.to_string());
            let outcome_remote = remote.step(&a).map(|r| r.0).map_err(|e| e.to_string());
            let after_native = (outcome_native, native.get_state().unwrap(), native.is_terminal().unwrap());
            let after_remote = (outcome_remote, remote.get_state().unwrap(), remote.is_terminal().unwrap());
            if after_native != after_remote {
                diffs.push((cell, action));
            }
            compared += 1;
        }
    }
    assert_eq!(compared, 64);
    assert!(diffs.is_empty(), "{diffs:?}");
}

fn q_learner(env: Box<dyn Environment>, episodes: u64) -> Box<dyn Learner> {
    let monitor = MonitorSpec {
        steps_per_epoch: u64::MAX / 2,
        max_episodes: Some(episodes),
        eval_episodes: 3,
        ..Default::default()
    };
    let learner = LearnerSpec {
        algorithm: "q_learning".into(),
        gamma: 0.9,
        epsilon: EpsilonSpec {
            start: 1.0,
            end: 0.05,
            decay_steps: 2_000,
        },
        seed: 21,
        ..Default::default()
    };
    create_learner(monitor, learner, env, None).unwrap()
}

#[test]
fn learner_outcome_is_unchanged_by_the_plugin() {
    let mut native = q_learner(Box::new(GridWorld::new(21)), 60);
    let mut remote = q_learner(Box::new(convert_environment(&mirror(&[]), 21).unwrap()), 60);
    assert_eq!(remote.train().unwrap(), native.train().unwrap());
    assert_eq!(remote.table().unwrap().entries(), native.table().unwrap().entries());
    assert_eq!(remote.evaluate(None).unwrap(), native.evaluate(None).unwrap());
}

#[test]
fn killed_plugin_surfaces_as_timeout() {
    let mut env = convert_environment(&mirror(&[]), 1).unwrap();
    env.reset().unwrap();
    env.step(&ActionVector::single(3)).unwrap();
    env.session_mut().kill();
    let started = Instant::now();
    let err = env.step(&ActionVector::single(3)).unwrap_err();
    assert!(matches!(plugin_error(&err), PluginError::Timeout { .. }), "{err}");
    assert!(started.elapsed() < Duration::from_secs(5));
}

#[test]
fn learner_aborts_when_the_plugin_dies_mid_episode() {
    let env = convert_environment(&mirror(&["--exit-after-steps", "50"]), 2).unwrap();
    let mut learner = q_learner(Box::new(env), 1_000);
    match learner.train() {
        Err(LearnError::TrainingAborted { reason, report }) => {
            assert!(reason.contains("no answer"), "{reason}");
            assert!(report.total_steps <= 49);
        }
        other => panic!("expected an aborted run, got {other:?}"),
    }
}

#[test]
fn stalled_plugin_times_out_within_the_bound() {
    let mut plugin = mirror(&["--stall-after-steps", "2"]);
    plugin.timeout_ms = 300;
    let mut env = convert_environment(&plugin, 1).unwrap();
    env.reset().unwrap();
    env.step(&ActionVector::single(1)).unwrap();
    let started = Instant::now();
    let err = env.step(&ActionVector::single(1)).unwrap_err();
    let waited = started.elapsed();
    assert!(matches!(plugin_error(&err), PluginError::Timeout { timeout_ms: 300, .. }));
    assert!(waited >= Duration::from_millis(300) && waited < Duration::from_millis(1_500), "{waited:?}");
}

#[test]
fn unsupported_version_fails_the_handshake() {
    let err = PluginSession::spawn(&mirror(&["--protocol-version", "2"]), 0).unwrap_err();
    match err {
        PluginError::HandshakeFailed(m) => assert!(m.contains("unsupported_version"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_program_is_a_spawn_error() {
    let plugin = PluginDescriptor::new("ghost", vec!["/nonexistent/plugin".into()], vec![Capability::Learner]);
    assert!(matches!(PluginSession::spawn(&plugin, 0), Err(PluginError::Spawn { .. })));
}

#[test]
fn remote_errors_keep_the_session_usable() {
    let mut session = PluginSession::spawn(&mirror(&[]), 0).unwrap();
    assert_eq!(session.next_id(), 2);
    let err = session.request("foo", serde_json::json!({})).unwrap_err();
    assert!(matches!(err, PluginError::Remote { ref code, .. } if code == "unknown_method"));
    let answer = session.request("is_terminal", serde_json::json!({})).unwrap();
    assert_eq!(answer["terminal"], false);
    assert_eq!(session.next_id(), 4);
}

#[test]
fn clone_starts_an_independent_process() {
    let mut a = convert_environment(&mirror(&[]), 4).unwrap();
    let mut b = a.clone_env().unwrap();
    a.reset().unwrap();
    b.reset().unwrap();
    a.step(&ActionVector::single(3)).unwrap();
    assert_eq!(a.get_state().unwrap()[0].discrete, Some(1));
    assert_eq!(b.get_state().unwrap()[0].discrete, Some(0));
}

fn remote_learner(algorithm: &str) -> Result<rlframe_plugin::RemoteLearner, PluginError> {
    let session = PluginSession::spawn(&mirror(&[]), 9)?;
    let spec = LearnerSpec {
        algorithm: algorithm.into(),
        seed: 9,
        ..Default::default()
    };
    let monitor = MonitorSpec {
        steps_per_epoch: 5_000,
        max_episodes: Some(5),
        eval_episodes: 100,
        ..Default::default()
    };
    extract_learner(session, spec, monitor)
}

#[test]
fn remote_learner_evaluates_deterministically() {
    let mut learner = remote_learner("random").unwrap();
    let first = learner.evaluate(None).unwrap();
    assert_eq!(first.episodes.len(), 100);
    assert!(first.episodes.iter().all(|e| e.length >= 6 && e.length <= 100));
    assert_eq!(learner.evaluate(None).unwrap(), first);
    assert_eq!(remote_learner("random").unwrap().evaluate(None).unwrap(), first);
}

#[test]
fn remote_training_streams_progress_into_the_report() {
    let mut learner = remote_learner("random").unwrap();
    let report = learner.train().unwrap();
    assert_eq!(report.episodes.len(), 5);
    assert_eq!(report.total_steps, report.episodes.iter().map(|e| e.length).sum::<u64>());
    assert!(learner.save_checkpoint(std::path::Path::new("x")).is_err());
    assert!(learner.evaluate(Some(std::path::Path::new("x"))).is_err());
}

#[test]
fn unknown_remote_algorithm_lists_the_offer() {
    match remote_learner("ppo") {
        Err(PluginError::UnknownRemoteAlgorithm { name, advertised }) => {
            assert_eq!(name, "ppo");
            assert_eq!(advertised, vec!["random"]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn plugin_configuration_parses_like_a_local_one() {
    let mut session = PluginSession::spawn(&mirror(&[]), 0).unwrap();
    let config = extract_configuration(&mut session, "cartpole_actor").unwrap();
    assert_eq!(config.input_dim(), 4);
    assert_eq!(config.layers[0].out_dim, 16);
    assert_eq!(config.output_dim(), 2);
    assert_eq!(parse_config(&config.to_document()).unwrap(), config);
    let doc = configuration_document(&mut session, "cartpole_actor").unwrap();
    assert_eq!(configuration_document(&mut session, "cartpole_actor").unwrap(), doc);
    assert_eq!(extract_configuration(&mut session, "cartpole_actor").unwrap(), config);
}

#[test]
fn broken_plugin_configuration_names_the_field() {
    let mut session = PluginSession::spawn(&mirror(&[]), 0).unwrap();
    match extract_configuration(&mut session, "cartpole_actor_broken") {
        Err(PluginError::Config(NetError::Validation { path, .. })) => assert_eq!(path, "layers[1].in"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        extract_configuration(&mut session, "nope"),
        Err(PluginError::Remote { .. })
    ));
}

#[test]
fn registry_file_drives_plugin_startup() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plugins.toml");
    let exe = env!("CARGO_BIN_EXE_rlframe-mirror-plugin");
    std::fs::write(
        &path,
        format!("[plugins.refplugin]\ncommand = [{exe:?}]\ncapabilities = [\"environment\"]\ntimeout_ms = 2000\n"),
    )
    .unwrap();
    let registry = PluginRegistry::load(&path).unwrap();
    let plugin = registry.get("refplugin").unwrap();
    let mut env = convert_environment(plugin, 3).unwrap();
    env.reset().unwrap();
    assert!(!env.is_terminal().unwrap());
}
