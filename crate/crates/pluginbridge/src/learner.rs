//! Learners and network configurations served by a plugin.

use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde_json::{json, Value};

use rlframe_core::env::{EnvError, State};
use rlframe_core::learn::{
    EvalEpisode, EvaluationReport, LearnError, Learner, LearnerSpec, Mode, Monitor, MonitorEvent,
    MonitorSpec, TrainingReport,
};
use rlframe_core::net::{parse_config, NetworkConfig};
use rlframe_core::wire::{self, Frame};

use crate::registry::Capability;
use crate::session::PluginSession;
use crate::PluginError;

/// Fetches the configuration document `name` and parses it with the
/// standard parser.
pub fn extract_configuration(session: &mut PluginSession, name: &str) -> Result<NetworkConfig, PluginError> {
    let document = configuration_document(session, name)?;
    Ok(parse_config(&document)?)
}

/// The raw configuration document `name`, as the plugin sent it.
pub fn configuration_document(session: &mut PluginSession, name: &str) -> Result<String, PluginError> {
    session.require(Capability::Configuration)?;
    let answer = session.request("get_config", json!({ "name": name }))?;
    Ok(wire::field_str(&answer, "document")?.to_string())
}

/// Wraps the plugin's learner `spec.algorithm`.
pub fn extract_learner(
    session: PluginSession,
    spec: LearnerSpec,
    monitor: MonitorSpec,
) -> Result<RemoteLearner, PluginError> {
    session.require(Capability::Learner)?;
    let advertised = &session.handshake().algorithms;
    if !advertised.contains(&spec.algorithm) {
        return Err(PluginError::UnknownRemoteAlgorithm {
            name: spec.algorithm.clone(),
            advertised: advertised.clone(),
        });
    }
    Ok(RemoteLearner {
        session,
        spec,
        monitor,
        stop: Arc::new(AtomicBool::new(false)),
    })
}

/// A learner living inside a plugin process. Its parameters never leave
/// the plugin, so checkpoints are unsupported.
#[derive(Debug)]
pub struct RemoteLearner {
    session: PluginSession,
    spec: LearnerSpec,
    monitor: MonitorSpec,
    stop: Arc<AtomicBool>,
}

const PROGRESS_FIELDS: [&str; 2] = ["returns", "length"];

fn learn_error(e: PluginError) -> LearnError {
    LearnError::Env(EnvError::External(Box::new(e)))
}

fn progress_event(frame: &Frame, global_steps: &mut u64) -> Result<Option<MonitorEvent>, PluginError> {
    if frame.method != "progress" {
        log::debug!("ignoring `{}` notification", frame.method);
        return Ok(None);
    }
    if let Some(obj) = frame.payload.as_object() {
        let extra: Vec<&String> = obj.keys().filter(|k| !PROGRESS_FIELDS.contains(&k.as_str())).collect();
        if !extra.is_empty() {
            log::debug!("dropping unsupported progress fields {extra:?}");
        }
    }
    let returns = wire::decode_f64s(wire::field(&frame.payload, "returns")?, "returns")?;
    let length = wire::field_u64(&frame.payload, "length")?;
    *global_steps += length;
    Ok(Some(MonitorEvent::Episode {
        thread: 0,
        returns,
        length,
        global_steps: *global_steps,
    }))
}

fn eval_episodes(answer: &Value) -> Result<Vec<EvalEpisode>, PluginError> {
    let list = wire::field(answer, "episodes")?
        .as_array()
        .ok_or_else(|| PluginError::Protocol("`episodes` is not an array".into()))?;
    list.iter()
        .map(|e| {
            Ok(EvalEpisode {
                returns: wire::decode_f64s(wire::field(e, "returns")?, "returns")?,
                length: wire::field_u64(e, "length")?,
            })
        })
        .collect()
}

impl RemoteLearner {
    pub fn session(&self) -> &PluginSession {
        &self.session
    }

    fn objectives(&self, episodes: &[EvalEpisode]) -> usize {
        match &self.session.handshake().descriptor {
            Some(d) => d.num_objectives,
            None => episodes.first().map_or(1, |e| e.returns.len()),
        }
    }
}

impl Learner for RemoteLearner {
    fn algorithm(&self) -> &str {
        &self.spec.algorithm
    }

    fn train(&mut self) -> Result<TrainingReport, LearnError> {
        let mut monitor = Monitor::new(&self.monitor, &self.spec.algorithm, 1)?;
        if self.stop.load(Ordering::Relaxed) || self.monitor.step_budget() == 0 {
            return monitor.finish(0);
        }
        let payload = json!({
            "algorithm": self.spec.algorithm,
            "steps": self.monitor.step_budget(),
            "max_episodes": self.monitor.max_episodes,
            "seed": self.spec.seed,
        });
        let mut steps = 0u64;
        let mut monitor_error = None;
        let outcome = self.session.request_streaming("train", payload, |frame| {
            if let Some(event) = progress_event(frame, &mut steps)? {
                if let Err(e) = monitor.record(event) {
                    monitor_error.get_or_insert(e);
                }
            }
            Ok(())
        });
        if let Some(e) = monitor_error {
            return Err(e);
        }
        match outcome.and_then(|answer| Ok(wire::field_u64(&answer, "total_steps")?)) {
            Ok(total) => monitor.finish(total),
            Err(e) => {
                let reason = format!("plugin `{}`: {e}", self.session.name());
                let report = monitor.finish(steps)?;
                Err(LearnError::TrainingAborted {
                    reason,
                    report: Box::new(report),
                })
            }
        }
    }

    fn evaluate(&mut self, checkpoint: Option<&Path>) -> Result<EvaluationReport, LearnError> {
        if checkpoint.is_some() {
            return Err(LearnError::Checkpoint("remote learners cannot load checkpoints".into()));
        }
        let payload = json!({ "episodes": self.monitor.eval_episodes, "seed": self.spec.seed });
        let answer = self.session.request("evaluate", payload).map_err(learn_error)?;
        let episodes = eval_episodes(&answer).map_err(learn_error)?;
        let m = self.objectives(&episodes);
        if episodes.iter().any(|e| e.returns.len() != m) {
            return Err(learn_error(PluginError::Protocol(format!(
                "evaluation returns do not have {m} objectives"
            ))));
        }
        Ok(EvaluationReport::from_episodes(episodes, m))
    }

    fn select_action(&mut self, state: &State, mode: Mode) -> Result<usize, LearnError> {
        let mode = match mode {
            Mode::Train => "train",
            Mode::Eval => "eval",
        };
        let answer = self
            .session
            .request("act", json!({ "state": wire::encode_f64s(&state.values), "mode": mode }))
            .map_err(learn_error)?;
        let action = wire::field_u64(&answer, "action").map_err(|e| learn_error(e.into()))?;
        Ok(action as usize)
    }

    fn save_checkpoint(&self, _path: &Path) -> Result<(), LearnError> {
        Err(LearnError::Checkpoint("remote learners keep their parameters in the plugin".into()))
    }

    fn stop_handle(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn progress_frames_become_episodes() {
        let mut steps = 10;
        let frame = Frame::notification(
            "progress",
            json!({ "returns": wire::encode_f64s(&[0.5]), "length": 7, "debug": "x" }),
        );
        match progress_event(&frame, &mut steps).unwrap() {
            Some(MonitorEvent::Episode { returns, length, global_steps, thread }) => {
                assert_eq!((returns, length, global_steps, thread), (vec![0.5], 7, 17, 0));
            }
            other => panic!("{other:?}"),
        }
        let other = Frame::notification("heartbeat", json!({}));
        assert!(progress_event(&other, &mut steps).unwrap().is_none());
        let broken = Frame::notification("progress", json!({ "returns": [1.0] }));
        assert!(progress_event(&broken, &mut steps).is_err());
    }

    #[test]
    fn evaluation_payload_parses() {
        let answer = json!({ "episodes": [
            { "returns": wire::encode_f64s(&[1.0]), "length": 6 },
            { "returns": wire::encode_f64s(&[0.0]), "length": 100 },
        ]});
        let eps = eval_episodes(&answer).unwrap();
        assert_eq!(eps.len(), 2);
        assert_eq!(eps[1].length, 100);
        assert!(eval_episodes(&json!({ "episodes": 3 })).is_err());
    }
}
