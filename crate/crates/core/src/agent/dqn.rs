use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::actions::ActionSet;
use super::replay::{ReplayBuffer, Transition};
use super::AgentError;
use crate::nn::{Adam, Mode, NetworkCheckpoint, NetworkConfig, QNetwork, DEFAULT_LR};
use crate::policy::{PolicyDiagnostics, TickContext, WindowPolicy};
use crate::schedule::LinearSchedule;

/// Agent hyperparameters. Defaults are the large-buffer setting
/// (200k buffer, batch 128, sync every 2000 updates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub actions: ActionSet,
    pub hidden: Vec<usize>,
    pub dueling: bool,
    pub batch_norm: bool,
    pub noisy: bool,
    /// Double DQN targets; plain max over the target network when false.
    pub double_dqn: bool,
    pub prioritized: bool,
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Gradient updates between hard target copies.
    pub target_sync: u64,
    pub epsilon: LinearSchedule,
    pub lr: LinearSchedule,
    /// Priority exponent.
    pub alpha: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Annealing length for the importance exponent; `None` = the run length.
    pub beta_steps: Option<u64>,
    pub priority_floor: f64,
    /// One gradient update every `train_every` decisions (continuous mode).
    pub train_every: u64,
    /// Periodic mode: no per-tick updates; every `retrain_period` decisions
    /// run `retrain_steps` updates on the buffer instead.
    pub retrain_period: Option<u64>,
    pub retrain_steps: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            actions: ActionSet::standard(),
            hidden: NetworkConfig::default_hidden(),
            dueling: true,
            batch_norm: false,
            noisy: false,
            double_dqn: true,
            prioritized: true,
            gamma: 0.99,
            batch_size: 128,
            buffer_capacity: 200_000,
            target_sync: 2000,
            epsilon: LinearSchedule::new(1.0, 0.05, 50_000),
            lr: DEFAULT_LR,
            alpha: 0.6,
            beta_start: 0.4,
            beta_end: 1.0,
            beta_steps: None,
            priority_floor: 1e-3,
            train_every: 1,
            retrain_period: None,
            retrain_steps: 1000,
        }
    }
}

impl AgentConfig {
    /// Smaller buffer/batch/sync setting (100k / 64 / 1000).
    pub fn compact() -> Self {
        Self {
            batch_size: 64,
            buffer_capacity: 100_000,
            target_sync: 1000,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "compact" => Some(Self::compact()),
            _ => None,
        }
    }

    pub fn network(&self, inputs: usize) -> NetworkConfig {
        NetworkConfig {
            inputs,
            hidden: self.hidden.clone(),
            actions: self.actions.len(),
            dueling: self.dueling,
            batch_norm: self.batch_norm,
            noisy: self.noisy,
        }
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0..=1.0).contains(&self.gamma) {
            v.push(format!("agent.gamma must be in [0, 1], got {}", self.gamma));
        }
        if self.batch_size == 0 {
            v.push("agent.batch_size must be positive".into());
        }
        if self.buffer_capacity < self.batch_size.max(1) {
            v.push(format!(
                "agent.buffer_capacity ({}) must be at least batch_size ({})",
                self.buffer_capacity, self.batch_size
            ));
        }
        if self.target_sync == 0 {
            v.push("agent.target_sync must be positive".into());
        }
        if self.train_every == 0 {
            v.push("agent.train_every must be positive".into());
        }
        if self.retrain_period == Some(0) {
            v.push("agent.retrain_period must be positive when set".into());
        }
        for (name, s) in [("epsilon", self.epsilon), ("lr", self.lr)] {
            if !(s.start.is_finite() && s.end.is_finite()) {
                v.push(format!("agent.{name} schedule must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon.start) || !(0.0..=1.0).contains(&self.epsilon.end) {
            v.push("agent.epsilon values must lie in [0, 1]".into());
        }
        if self.lr.start <= 0.0 || self.lr.end <= 0.0 {
            v.push("agent.lr values must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            v.push(format!("agent.alpha must be in (0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta_start) || !(0.0..=1.0).contains(&self.beta_end) {
            v.push("agent.beta_start/beta_end must lie in [0, 1]".into());
        }
        if self.priority_floor <= 0.0 {
            v.push("agent.priority_floor must be positive".into());
        }
        if self.hidden.iter().any(|&h| h == 0) {
            v.push("agent.hidden widths must be positive".into());
        }
        v
    }
}

/// Epsilon-greedy selection. One uniform draw decides exploration; a second
/// draw picks the action only when exploring. Argmax ties go to the lowest index.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    if u < epsilon {
        rng.gen_range(0..q.len())
    } else {
        argmax(q)
    }
}

pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// `y = r + gamma * Q_target(s', a*)` with `a* = argmax Q_online(s')` (double)
/// or `a* = argmax Q_target(s')` (plain max). No terminal masking.
pub fn td_targets(
    online: &mut QNetwork,
    target: &mut QNetwork,
    rewards: &[f64],
    next_states: &Array2<f64>,
    gamma: f64,
    double: bool,
) -> Result<Vec<f64>, AgentError> {
    let qt = target.forward(next_states, Mode::Eval)?;
    let chooser = if double {
        online.forward(next_states, Mode::Eval)?
    } else {
        qt.clone()
    };
    Ok(rewards
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let row = chooser.row(i);
            let a = argmax(row.as_slice().expect("row-major"));
            r + gamma * qt[[i, a]]
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub loss: f64,
    pub td_errors: Vec<f64>,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Pending {
    state: Vec<f64>,
    action: usize,
    reward: Option<f64>,
}

/// Dueling double DQN window-size agent.
///
/// Each `choose` first completes the previous transition with the new state
/// (and trains on schedule), then acts. RNG draw order per decision:
/// replay sampling and noise resampling for any updates, noise resampling
/// for acting (noisy heads only), the exploration draw, and the random
/// action draw when exploring.
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    online: QNetwork,
    target: QNetwork,
    opt: Adam,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    beta: LinearSchedule,
    steps: u64,
    updates: u64,
    pending: Option<Pending>,
    diag: PolicyDiagnostics,
    name: String,
}

impl Agent {
    /// `run_length` sets the importance-exponent annealing horizon when the
    /// config leaves it open.
    pub fn new(config: AgentConfig, state_len: usize, run_length: u64, seed: u64) -> Result<Self, AgentError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = QNetwork::new(config.network(state_len), &mut rng)?;
        Self::with_network(config, online, run_length, rng)
    }

    pub fn with_network(
        config: AgentConfig,
        online: QNetwork,
        run_length: u64,
        rng: ChaCha8Rng,
    ) -> Result<Self, AgentError> {
        let errs = config.violations();
        if !errs.is_empty() {
            return Err(AgentError::InvalidConfig(errs.join("; ")));
        }
        if online.config().actions != config.actions.len() {
            return Err(AgentError::InvalidConfig(format!(
                "network has {} outputs but the action set has {} sizes",
                online.config().actions,
                config.actions.len()
            )));
        }
        let beta = LinearSchedule::new(
            config.beta_start,
            config.beta_end,
            config.beta_steps.unwrap_or(run_length),
        );
        Ok(Self {
            target: online.clone(),
            opt: Adam::new(config.lr),
            replay: ReplayBuffer::new(config.buffer_capacity, config.alpha, config.prioritized),
            online,
            rng,
            beta,
            steps: 0,
            updates: 0,
            pending: None,
            diag: PolicyDiagnostics::default(),
            name: "rl-window".into(),
            config,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn replay_mut(&mut self) -> &mut ReplayBuffer {
        &mut self.replay
    }

    /// Decisions taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Gradient updates applied so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.steps)
    }

    pub fn beta(&self) -> f64 {
        self.beta.value(self.steps)
    }

    /// Index into the action set for `state`.
    pub fn act(&mut self, state: &[f64]) -> Result<usize, AgentError> {
        let want = self.online.config().inputs;
        if state.len() != want {
            return Err(AgentError::StateWidth {
                expected: want,
                found: state.len(),
            });
        }
        if let Some(p) = self.pending.take() {
            if let Some(reward) = p.reward {
                self.replay.push(Transition {
                    state: p.state,
                    action: p.action,
                    reward,
                    next_state: state.to_vec(),
                });
                self.scheduled_updates()?;
            }
        }
        let eps = self.epsilon();
        if self.config.noisy {
            self.online.resample_noise(&mut self.rng);
        }
        let q = self.online.q_values(state)?;
        let action = select_action(&q, eps, &mut self.rng);
        self.diag.epsilon = Some(eps);
        self.pending = Some(Pending {
            state: state.to_vec(),
            action,
            reward: None,
        });
        self.steps += 1;
        Ok(action)
    }

    /// Reward for the last `act`.
    pub fn reward(&mut self, r: f64) -> Result<(), AgentError> {
        match &mut self.pending {
            Some(p) if p.reward.is_none() => {
                p.reward = Some(r);
                Ok(())
            }
            _ => Err(AgentError::UnexpectedReward),
        }
    }

    fn scheduled_updates(&mut self) -> Result<(), AgentError> {
        let n = match self.config.retrain_period {
            None if self.steps % self.config.train_every == 0 => 1,
            None => 0,
            Some(period) if self.steps > 0 && self.steps % period == 0 => self.config.retrain_steps,
            Some(_) => 0,
        };
        for _ in 0..n {
            if self.replay.len() < self.config.batch_size {
                break;
            }
            self.train_step()?;
        }
        Ok(())
    }

    /// One gradient update on a sampled batch.
    pub fn train_step(&mut self) -> Result<TrainStats, AgentError> {
        let k = self.config.batch_size;
        let batch = self.replay.sample(k, self.beta(), &mut self.rng)?;
        let width = self.online.config().inputs;
        let mut states = Array2::zeros((k, width));
        let mut next = Array2::zeros((k, width));
        let mut rewards = Vec::with_capacity(k);
        let mut actions = Vec::with_capacity(k);
        for (row, &i) in batch.indices.iter().enumerate() {
            let tr = self.replay.get(i);
            states.row_mut(row).assign(&ndarray::ArrayView1::from(&tr.state[..]));
            next.row_mut(row).assign(&ndarray::ArrayView1::from(&tr.next_state[..]));
            rewards.push(tr.reward);
            actions.push(tr.action);
        }
        if self.config.noisy {
            self.online.resample_noise(&mut self.rng);
            self.target.resample_noise(&mut self.rng);
        }
        let y = td_targets(
            &mut self.online,
            &mut self.target,
            &rewards,
            &next,
            self.config.gamma,
            self.config.double_dqn,
        )?;
        let q = self.online.forward(&states, Mode::Train)?;
        let mut dq = Array2::zeros(q.dim());
        let mut td = Vec::with_capacity(k);
        let mut loss = 0.0;
        for i in 0..k {
            let delta = y[i] - q[[i, actions[i]]];
            let w = batch.weights[i];
            loss += w * delta * delta;
            dq[[i, actions[i]]] = -2.0 * w * delta / k as f64;
            td.push(delta);
        }
        loss /= k as f64;
        if !loss.is_finite() {
            return Err(AgentError::Divergence {
                update: self.updates,
                loss,
                max_abs_q: q.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            });
        }
        self.online.backward(&dq)?;
        self.opt.step(&mut self.online)?;
        let floor = self.config.priority_floor;
        let priorities: Vec<f64> = td.iter().map(|d| d.abs() + floor).collect();
        self.replay.update_priorities(&batch.indices, &priorities);
        self.updates += 1;
        if self.updates % self.config.target_sync == 0 {
            self.target = self.online.clone();
        }
        self.diag.td_error = Some(td.iter().map(|d| d.abs()).sum::<f64>() / k as f64);
        Ok(TrainStats {
            loss,
            td_errors: td,
            indices: batch.indices,
        })
    }

    pub fn checkpoint(&self, include_replay: bool) -> AgentCheckpoint {
        AgentCheckpoint {
            config: self.config.clone(),
            online: self.online.checkpoint(),
            target: self.target.checkpoint(),
            optimizer: self.opt.clone(),
            steps: self.steps,
            updates: self.updates,
            replay: include_replay.then(|| self.replay.clone()),
        }
    }
}

/// Networks, optimizer moments, counters and (optionally) the replay contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub config: AgentConfig,
    pub online: NetworkCheckpoint,
    pub target: NetworkCheckpoint,
    pub optimizer: Adam,
    pub steps: u64,
    pub updates: u64,
    pub replay: Option<ReplayBuffer>,
}

impl AgentCheckpoint {
    /// Rebuilds an agent; the RNG restarts from `seed`.
    pub fn restore(&self, run_length: u64, seed: u64) -> Result<Agent, AgentError> {
        let online = QNetwork::from_checkpoint(&self.online)?;
        let mut agent = Agent::with_network(self.config.clone(), online, run_length, ChaCha8Rng::seed_from_u64(seed))?;
        agent.target = QNetwork::from_checkpoint(&self.target)?;
        agent.opt = self.optimizer.clone();
        agent.steps = self.steps;
        agent.updates = self.updates;
        if let Some(r) = &self.replay {
            agent.replay = r.clone();
        }
        Ok(agent)
    }
}

impl WindowPolicy for Agent {
    fn name(&self) -> &str {
        &self.name
    }

    fn needs_state(&self) -> bool {
        true
    }

    fn choose(&mut self, ctx: &TickContext<'_>) -> Result<usize, AgentError> {
        let state = ctx.state.ok_or(AgentError::MissingState)?;
        let a = self.act(state)?;
        Ok(self.config.actions.size(a))
    }

    fn feedback(&mut self, reward: f64) -> Result<(), AgentError> {
        self.reward(reward)
    }

    fn diagnostics(&self) -> PolicyDiagnostics {
        self.diag
    }
}
