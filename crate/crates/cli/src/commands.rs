//! Subcommand implementations. Each writes its human-readable summary to
//! `out` and reports failures as [`CliError`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use rlframe_core::env::{make_env, EnvError, Environment, ParamValue};
use rlframe_core::learn::{
    create_learner, is_neural, EvaluationReport, LearnError, Learner, TrainingReport,
};
use rlframe_core::net::{parse_config, NetError, PolicyNetwork};
use rlframe_humanio::{serve, HumanEnvironment, HumanError, ServerConfig};
use rlframe_plugin::{convert_environment, extract_learner, PluginError, PluginRegistry, PluginSession};

use crate::manifest::{ManifestError, RunManifest};
use crate::CliError;

/// Command-line settings that override the manifest.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub registry: Option<PathBuf>,
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::TrainingAborted { .. } | LearnError::Io(_) => CliError::Failure(e.to_string()),
            LearnError::Env(EnvError::External(_)) => CliError::Failure(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<PluginError> for CliError {
    fn from(e: PluginError) -> Self {
        match e {
            PluginError::Registry(_)
            | PluginError::Spawn { .. }
            | PluginError::UnknownRemoteAlgorithm { .. }
            | PluginError::MissingCapability(_)
            | PluginError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<HumanError> for CliError {
    fn from(e: HumanError) -> Self {
        match e {
            HumanError::Io(_) => CliError::Failure(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn io_failure(e: std::io::Error) -> CliError {
    CliError::Failure(e.to_string())
}

/// The process-wide interrupt flag. The first Ctrl-C sets it; the
/// registered learner stop flags follow.
fn interrupts() -> &'static Mutex<Vec<Arc<AtomicBool>>> {
    static FLAGS: OnceLock<Mutex<Vec<Arc<AtomicBool>>>> = OnceLock::new();
    FLAGS.get_or_init(|| {
        let installed = ctrlc::set_handler(|| {
            log::warn!("interrupt received; stopping");
            if let Some(flags) = FLAGS.get() {
                for f in flags.lock().unwrap_or_else(|e| e.into_inner()).iter() {
                    f.store(true, Ordering::SeqCst);
                }
            }
        });
        if let Err(e) = installed {
            log::warn!("cannot install the interrupt handler: {e}");
        }
        Mutex::new(Vec::new())
    })
}

fn stop_on_interrupt(flag: Arc<AtomicBool>) {
    interrupts().lock().unwrap_or_else(|e| e.into_inner()).push(flag);
}

fn load(manifest: &Path, ov: &Overrides) -> Result<RunManifest, CliError> {
    let mut m = RunManifest::load(manifest)?;
    if let Some(seed) = ov.seed {
        m.override_seed(seed);
    }
    if let Some(out) = &ov.out {
        m.output_dir = Some(out.clone());
    }
    if let Some(out) = &m.output_dir {
        m.monitor.output_dir = Some(out.clone());
        if let Some(dir) = &m.monitor.checkpoint_dir {
            if dir.is_relative() {
                m.monitor.checkpoint_dir = Some(out.join(dir));
            }
        }
    }
    Ok(m)
}

fn registry(ov: &Overrides) -> Result<PluginRegistry, CliError> {
    Ok(match &ov.registry {
        Some(path) => PluginRegistry::load(path)?,
        None => PluginRegistry::from_env()?,
    })
}

fn build_env(m: &RunManifest, ov: &Overrides) -> Result<Box<dyn Environment>, CliError> {
    let seed = m.env_seed();
    if let Some(name) = &m.env.plugin {
        let reg = registry(ov)?;
        return Ok(Box::new(convert_environment(reg.get(name)?, seed)?));
    }
    let name = m.env.name.as_deref().expect("validated manifest names an environment");
    let mut params = m.env.params.clone();
    params.entry("seed".into()).or_insert(ParamValue::Int(seed as i64));
    make_env(name, &params).map_err(|e| CliError::Usage(format!("env: {e}")))
}

fn build_network(m: &RunManifest) -> Result<Option<PolicyNetwork>, CliError> {
    if m.network.is_empty() {
        return Ok(None);
    }
    let mut configs = Vec::with_capacity(m.network.len());
    for path in &m.network {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("network config {}: {e}", path.display())))?;
        let config =
            parse_config(&text).map_err(|e| CliError::Usage(format!("network config {}: {e}", path.display())))?;
        configs.push(config);
    }
    let net = PolicyNetwork::create_network(configs).map_err(|e| CliError::Usage(format!("network: {e}")))?;
    Ok(Some(net))
}

fn build_learner(m: &RunManifest, ov: &Overrides) -> Result<Box<dyn Learner>, CliError> {
    if let Some(p) = &m.plugin {
        let reg = registry(ov)?;
        let session = PluginSession::spawn(reg.get(&p.name)?, m.learner.seed)?;
        let learner = extract_learner(session, m.learner.clone(), m.monitor.clone())?;
        return Ok(Box::new(learner));
    }
    let env = build_env(m, ov)?;
    let network = build_network(m)?;
    Ok(create_learner(m.monitor.clone(), m.learner.clone(), env, network)?)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn write_eval(out: &mut dyn Write, report: &EvaluationReport, per_episode: bool) -> std::io::Result<()> {
    if per_episode {
        for (i, e) in report.episodes.iter().enumerate() {
            writeln!(out, "episode {i}: returns={} length={}", fmt_vec(&e.returns), e.length)?;
        }
    }
    let mean_len = if report.episodes.is_empty() {
        0.0
    } else {
        report.episodes.iter().map(|e| e.length as f64).sum::<f64>() / report.episodes.len() as f64
    };
    writeln!(
        out,
        "evaluation: episodes={} mean={} std={} mean_length={mean_len:.2}",
        report.episodes.len(),
        fmt_vec(&report.mean),
        fmt_vec(&report.std)
    )
}

fn write_training(out: &mut dyn Write, report: &TrainingReport) -> std::io::Result<()> {
    writeln!(
        out,
        "trained {}: episodes={} steps={} train_calls={} wall={:.2}s",
        report.algorithm,
        report.episodes.len(),
        report.total_steps,
        report.train_calls,
        report.timing.wall_seconds
    )?;
    if let Some(mean) = report.recent_mean(100) {
        writeln!(out, "recent mean return (last 100 episodes): {}", fmt_vec(&mean))?;
    }
    Ok(())
}

/// Checkpoint file name for a finished run.
pub fn final_checkpoint(dir: &Path, algorithm: &str) -> PathBuf {
    dir.join(if is_neural(algorithm) { "final.rlfk" } else { "final.json" })
}

pub fn train(manifest: &Path, ov: &Overrides, out: &mut dyn Write) -> Result<(), CliError> {
    let m = load(manifest, ov)?;
    let mut learner = build_learner(&m, ov)?;
    stop_on_interrupt(learner.stop_handle());
    let report = match learner.train() {
        Ok(r) => r,
        Err(LearnError::TrainingAborted { reason, report }) => {
            write_training(out, &report).map_err(io_failure)?;
            return Err(CliError::Failure(format!("training aborted: {reason}")));
        }
        Err(e) => return Err(e.into()),
    };
    write_training(out, &report).map_err(io_failure)?;
    if let Some(dir) = &m.output_dir {
        if m.plugin.is_none() {
            let path = final_checkpoint(dir, &m.learner.algorithm);
            learner.save_checkpoint(&path)?;
            writeln!(out, "checkpoint: {}", path.display()).map_err(io_failure)?;
        }
    }
    if m.monitor.eval_episodes > 0 && !learner.stop_handle().load(Ordering::SeqCst) {
        let eval = learner.evaluate(None)?;
        write_eval(out, &eval, false).map_err(io_failure)?;
    }
    Ok(())
}

fn checkpoint_error(e: LearnError) -> CliError {
    match e {
        LearnError::Net(NetError::Io(io)) => CliError::Usage(format!("cannot read checkpoint: {io}")),
        LearnError::Io(io) => CliError::Usage(format!("cannot read checkpoint: {io}")),
        LearnError::Net(n) => CliError::Usage(format!("checkpoint rejected: {n}")),
        LearnError::Checkpoint(c) => CliError::Usage(format!("checkpoint rejected: {c}")),
        other => other.into(),
    }
}

fn check_checkpoint(m: &RunManifest, checkpoint: Option<&Path>) -> Result<(), CliError> {
    match checkpoint {
        Some(p) if !p.is_file() => Err(CliError::Usage(format!("checkpoint {} does not exist", p.display()))),
        None if m.plugin.is_none() && is_neural(&m.learner.algorithm) => Err(CliError::Usage(format!(
            "`{}` needs --checkpoint to evaluate",
            m.learner.algorithm
        ))),
        _ => Ok(()),
    }
}

pub fn eval(manifest: &Path, checkpoint: Option<&Path>, ov: &Overrides, out: &mut dyn Write) -> Result<(), CliError> {
    let m = load(manifest, ov)?;
    check_checkpoint(&m, checkpoint)?;
    let mut learner = build_learner(&m, ov)?;
    stop_on_interrupt(learner.stop_handle());
    let report = learner.evaluate(checkpoint).map_err(checkpoint_error)?;
    write_eval(out, &report, true).map_err(io_failure)
}

/// Serves a human slot and runs greedy episodes until `episodes` are done
/// or the process is interrupted.
pub fn play(
    manifest: &Path,
    checkpoint: Option<&Path>,
    port: Option<u16>,
    episodes: Option<u64>,
    ov: &Overrides,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut m = load(manifest, ov)?;
    if m.plugin.is_some() {
        return Err(CliError::Usage("play needs a native learner".into()));
    }
    if let Some(p) = checkpoint {
        if !p.is_file() {
            return Err(CliError::Usage(format!("checkpoint {} does not exist", p.display())));
        }
    }
    let human = m.human.clone().unwrap_or_default();
    let mut env = HumanEnvironment::new(build_env(&m, ov)?);
    env.attach_human(human.agent, human.default_action)?;
    env.set_tick_rate(Some(human.tick_rate));
    let config = ServerConfig {
        host: human.host.clone(),
        port: port.unwrap_or(human.port),
        ..Default::default()
    };
    let server = serve(&config, env.slots().to_vec(), env.broadcaster())?;
    writeln!(out, "serving human slot {} on ws://{}", human.agent, server.local_addr()).map_err(io_failure)?;
    out.flush().map_err(io_failure)?;
    m.monitor.eval_episodes = 1;
    let network = build_network(&m)?;
    let mut learner = create_learner(m.monitor.clone(), m.learner.clone(), Box::new(env), network)?;
    let stop = learner.stop_handle();
    stop_on_interrupt(Arc::clone(&stop));
    let mut scores = Vec::new();
    let mut pending = checkpoint;
    while !stop.load(Ordering::SeqCst) && episodes.is_none_or(|n| (scores.len() as u64) < n) {
        let report = learner.evaluate(pending.take()).map_err(checkpoint_error)?;
        for e in report.episodes {
            writeln!(out, "episode {}: score={} length={}", scores.len(), fmt_vec(&e.returns), e.length)
                .map_err(io_failure)?;
            scores.push(e.returns);
        }
    }
    let m_obj = scores.first().map_or(1, Vec::len);
    let mut mean = vec![0.0; m_obj];
    for s in &scores {
        for (acc, x) in mean.iter_mut().zip(s) {
            *acc += x / scores.len() as f64;
        }
    }
    writeln!(out, "played {} episodes; mean score {}", scores.len(), fmt_vec(&mean)).map_err(io_failure)?;
    Ok(())
}

pub fn list_plugins(ov: &Overrides, out: &mut dyn Write) -> Result<(), CliError> {
    let reg = registry(ov)?;
    let mut any = false;
    for p in reg.iter() {
        any = true;
        let caps: Vec<&str> = p.capabilities.iter().map(|c| c.as_str()).collect();
        writeln!(
            out,
            "{}\tprotocol={}\tcapabilities={}\tcommand={}",
            p.name,
            p.protocol_version,
            caps.join(","),
            p.command.join(" ")
        )
        .map_err(io_failure)?;
    }
    if !any {
        writeln!(out, "no plugins registered").map_err(io_failure)?;
    }
    Ok(())
}
