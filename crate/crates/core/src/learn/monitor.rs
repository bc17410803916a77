//! Aggregation of learner progress into training and evaluation reports.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use web_time::Instant;

use serde::{Deserialize, Serialize};

use super::spec::MonitorSpec;
use super::LearnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Completion order across all threads.
    pub index: u64,
    pub thread: usize,
    /// Undiscounted return per objective.
    pub returns: Vec<f64>,
    pub length: u64,
}

/// Wall-clock measurements, kept apart so reports of repeated runs can be
/// compared for equality.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub steps_per_second: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingReport {
    pub algorithm: String,
    pub episodes: Vec<EpisodeRecord>,
    /// Loss samples in the order they were reported.
    pub losses: Vec<f64>,
    pub total_steps: u64,
    pub train_calls: u64,
    pub per_thread_episodes: Vec<u64>,
    pub checkpoints: Vec<PathBuf>,
    pub timing: Timing,
}

/// Equality ignores [`Timing`].
impl PartialEq for TrainingReport {
    fn eq(&self, other: &Self) -> bool {
        self.algorithm == other.algorithm
            && self.episodes == other.episodes
            && self.losses.len() == other.losses.len()
            && self.losses.iter().zip(&other.losses).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.total_steps == other.total_steps
            && self.train_calls == other.train_calls
            && self.per_thread_episodes == other.per_thread_episodes
            && self.checkpoints == other.checkpoints
    }
}

impl TrainingReport {
    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty() && self.total_steps == 0
    }

    /// Mean return per objective over the last `n` episodes.
    pub fn recent_mean(&self, n: usize) -> Option<Vec<f64>> {
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        let first = tail.first()?;
        let mut mean = vec![0.0; first.returns.len()];
        for e in tail {
            for (m, r) in mean.iter_mut().zip(&e.returns) {
                *m += r / tail.len() as f64;
            }
        }
        Some(mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEpisode {
    pub returns: Vec<f64>,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub episodes: Vec<EvalEpisode>,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
}

impl EvaluationReport {
    pub fn from_episodes(episodes: Vec<EvalEpisode>, objectives: usize) -> Self {
        let n = episodes.len() as f64;
        let mut mean = vec![0.0; objectives];
        let mut std = vec![0.0; objectives];
        if !episodes.is_empty() {
            for k in 0..objectives {
                mean[k] = episodes.iter().map(|e| e.returns[k]).sum::<f64>() / n;
                std[k] = (episodes.iter().map(|e| (e.returns[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt();
            }
        }
        Self { episodes, mean, std }
    }
}

/// Progress messages sent by learner threads.
#[derive(Debug, Clone)]
pub enum MonitorEvent {
    Episode {
        thread: usize,
        returns: Vec<f64>,
        length: u64,
        /// Global steps taken when the episode ended.
        global_steps: u64,
    },
    Loss(f64),
    TrainCall,
    Checkpoint(PathBuf),
}

/// Collects events into a [`TrainingReport`], writes the per-episode log,
/// and emits progress lines at the report frequency.
pub struct Monitor {
    spec: MonitorSpec,
    report: TrainingReport,
    started: Instant,
    log: Option<BufWriter<File>>,
    last_loss: Option<f64>,
}

pub const LOG_FILE: &str = "training.log";
pub const SUMMARY_FILE: &str = "summary.json";

impl Monitor {
    pub fn new(spec: &MonitorSpec, algorithm: &str, threads: usize) -> Result<Self, LearnError> {
        let log = match &spec.output_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Some(BufWriter::new(File::create(dir.join(LOG_FILE))?))
            }
            None => None,
        };
        Ok(Self {
            spec: spec.clone(),
            report: TrainingReport {
                algorithm: algorithm.to_string(),
                per_thread_episodes: vec![0; threads],
                ..Default::default()
            },
            started: Instant::now(),
            log,
            last_loss: None,
        })
    }

    pub fn episodes(&self) -> u64 {
        self.report.episodes.len() as u64
    }

    pub fn episode_limit_reached(&self) -> bool {
        self.spec.max_episodes.is_some_and(|m| self.episodes() >= m)
    }

    pub fn record(&mut self, event: MonitorEvent) -> Result<(), LearnError> {
        match event {
            MonitorEvent::Episode {
                thread,
                returns,
                length,
                global_steps,
            } => {
                if self.episode_limit_reached() {
                    return Ok(());
                }
                let index = self.episodes();
                let rate = global_steps as f64 / self.started.elapsed().as_secs_f64().max(1e-9);
                let line = format!(
                    "episode={index} thread={thread} length={length} returns={returns:?} loss={} steps_per_sec={rate:.1}",
                    self.last_loss.map_or("-".to_string(), |l| format!("{l:.6}")),
                );
                if let Some(log) = &mut self.log {
                    writeln!(log, "{line}")?;
                }
                if self.spec.report_frequency > 0 && (index + 1).is_multiple_of(self.spec.report_frequency) {
                    log::info!("{line}");
                } else {
                    log::debug!("{line}");
                }
                self.report.per_thread_episodes[thread] += 1;
                self.report.episodes.push(EpisodeRecord {
                    index,
                    thread,
                    returns,
                    length,
                });
            }
            MonitorEvent::Loss(l) => {
                self.last_loss = Some(l);
                self.report.losses.push(l);
            }
            MonitorEvent::TrainCall => self.report.train_calls += 1,
            MonitorEvent::Checkpoint(p) => {
                log::info!("checkpoint written to {}", p.display());
                self.report.checkpoints.push(p);
            }
        }
        Ok(())
    }

    /// Seals the report and writes the summary file when an output
    /// directory is configured.
    pub fn finish(mut self, total_steps: u64) -> Result<TrainingReport, LearnError> {
        let wall = self.started.elapsed().as_secs_f64();
        self.report.total_steps = total_steps;
        self.report.timing = Timing {
            wall_seconds: wall,
            steps_per_second: total_steps as f64 / wall.max(1e-9),
        };
        if let Some(mut log) = self.log.take() {
            log.flush()?;
        }
        if let Some(dir) = &self.spec.output_dir {
            let json = serde_json::to_string_pretty(&self.report).expect("report serializes");
            fs::write(dir.join(SUMMARY_FILE), json)?;
        }
        Ok(self.report)
    }
}
