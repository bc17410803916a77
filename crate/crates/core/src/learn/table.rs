//! Tabular action values and their update rules.

use serde::{Deserialize, Serialize};

use super::LearnError;

/// Action values over `(state index, action)` pairs. Each entry holds one
/// value per objective. Unvisited pairs read as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    states: usize,
    actions: usize,
    objectives: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
}

/// One visited entry, as written to checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEntry {
    pub state: usize,
    pub action: usize,
    pub values: Vec<f64>,
    pub visits: u64,
}

impl QTable {
    pub fn new(states: usize, actions: usize, objectives: usize) -> Self {
        Self {
            states,
            actions,
            objectives,
            values: vec![0.0; states * actions * objectives],
            visits: vec![0; states * actions],
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn objectives(&self) -> usize {
        self.objectives
    }

    fn slot(&self, state: usize, action: usize) -> usize {
        assert!(state < self.states && action < self.actions, "({state}, {action}) out of range");
        state * self.actions + action
    }

    /// Value vector of a pair; zeros when unvisited.
    pub fn get(&self, state: usize, action: usize) -> &[f64] {
        let i = self.slot(state, action) * self.objectives;
        &self.values[i..i + self.objectives]
    }

    pub fn visits(&self, state: usize, action: usize) -> u64 {
        self.visits[self.slot(state, action)]
    }

    /// Overwrites a pair's values and marks it visited.
    pub fn set(&mut self, state: usize, action: usize, values: &[f64]) {
        self.write(state, action, values);
        let s = self.slot(state, action);
        self.visits[s] = self.visits[s].max(1);
    }

    fn write(&mut self, state: usize, action: usize, values: &[f64]) {
        assert_eq!(values.len(), self.objectives);
        let s = self.slot(state, action);
        self.values[s * self.objectives..(s + 1) * self.objectives].copy_from_slice(values);
    }

    fn bump(&mut self, state: usize, action: usize) -> u64 {
        let s = self.slot(state, action);
        self.visits[s] += 1;
        self.visits[s]
    }

    /// Scalarized values of every action in `state`.
    pub fn scalar_row(&self, state: usize, weights: &[f64]) -> Vec<f64> {
        (0..self.actions)
            .map(|a| self.get(state, a).iter().zip(weights).map(|(q, w)| q * w).sum())
            .collect()
    }

    pub fn entries(&self) -> Vec<QEntry> {
        let mut out = Vec::new();
        for state in 0..self.states {
            for action in 0..self.actions {
                let visits = self.visits(state, action);
                if visits > 0 {
                    out.push(QEntry {
                        state,
                        action,
                        values: self.get(state, action).to_vec(),
                        visits,
                    });
                }
            }
        }
        out
    }

    pub fn from_entries(
        states: usize,
        actions: usize,
        objectives: usize,
        entries: &[QEntry],
    ) -> Result<Self, LearnError> {
        let mut t = Self::new(states, actions, objectives);
        for e in entries {
            if e.state >= states || e.action >= actions || e.values.len() != objectives {
                return Err(LearnError::Checkpoint(format!(
                    "entry ({}, {}) does not fit a {states}x{actions}x{objectives} table",
                    e.state, e.action
                )));
            }
            t.write(e.state, e.action, &e.values);
            t.visits[e.state * actions + e.action] = e.visits;
        }
        Ok(t)
    }
}

/// Lowest index attaining the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One temporal-difference step on `(state, action)`:
/// `Q ← Q + β (r + γ Q(s', a*) − Q)`, where `a*` maximizes the scalarized
/// next values and the bootstrap is dropped at terminal transitions. For a
/// single objective with unit weight this is the textbook max backup.
/// Returns the scalarized TD error.
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    table: &mut QTable,
    state: usize,
    action: usize,
    reward: &[f64],
    next_state: usize,
    terminal: bool,
    learning_rate: f64,
    gamma: f64,
    weights: &[f64],
) -> f64 {
    let bootstrap: Vec<f64> = if terminal {
        vec![0.0; table.objectives]
    } else {
        let best = argmax(&table.scalar_row(next_state, weights));
        table.get(next_state, best).to_vec()
    };
    let old = table.get(state, action).to_vec();
    let updated: Vec<f64> = old
        .iter()
        .zip(reward)
        .zip(&bootstrap)
        .map(|((q, r), b)| q + learning_rate * (r + gamma * b - q))
        .collect();
    let td: f64 = old
        .iter()
        .zip(reward)
        .zip(&bootstrap)
        .zip(weights)
        .map(|(((q, r), b), w)| w * (r + gamma * b - q))
        .sum();
    table.write(state, action, &updated);
    table.bump(state, action);
    td
}

/// A completed step of a single-agent episode, reduced to what tabular
/// updates need.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularStep {
    pub state: usize,
    pub action: usize,
    pub reward: Vec<f64>,
    pub next_state: usize,
    pub terminal: bool,
}

/// First-visit Monte-Carlo: each `(s, a)` first visited in the episode
/// moves to the running mean of its observed returns. Returns the mean
/// squared deviation between the returns and the previous estimates.
pub fn mc_update(table: &mut QTable, episode: &[TabularStep], gamma: f64) -> Result<f64, LearnError> {
    if !episode.last().is_some_and(|t| t.terminal) {
        return Err(LearnError::EpisodeNotTerminal);
    }
    let m = table.objectives;
    let mut returns = vec![vec![0.0; m]; episode.len()];
    let mut acc = vec![0.0; m];
    for (i, t) in episode.iter().enumerate().rev() {
        for k in 0..m {
            acc[k] = t.reward[k] + gamma * acc[k];
        }
        returns[i].clone_from(&acc);
    }
    let mut seen = std::collections::HashSet::new();
    let mut sq = 0.0;
    let mut count = 0usize;
    for (t, g) in episode.iter().zip(&returns) {
        if !seen.insert((t.state, t.action)) {
            continue;
        }
        let n = table.bump(t.state, t.action) as f64;
        let old = table.get(t.state, t.action).to_vec();
        let mean: Vec<f64> = old.iter().zip(g).map(|(q, g)| q + (g - q) / n).collect();
        sq += old.iter().zip(g).map(|(q, g)| (g - q).powi(2)).sum::<f64>();
        count += 1;
        table.write(t.state, t.action, &mean);
    }
    Ok(if count == 0 { 0.0 } else { sq / count as f64 })
}
