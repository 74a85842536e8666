//! Epsilon-greedy Q-learning over unroll-factor ladders.
//!
//! A state is one rung per ladder `(u_i, u_j, u_k)`. Six actions move one
//! rung up or down a ladder and `Stop` ends the episode. Rewards are the
//! relative performance change reported by an [`Evaluator`]; moves into
//! infeasible kernels cost `-1` and leave the state unchanged.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codegen::{KernelSpec, RegisterBudget, Strides, VECTOR_WIDTH};
use crate::eval::Evaluator;
use crate::nn::{BatchNorm, Dense, Layer, Matrix, Mode, ModelFile, Network, Optimizer, OptimizerConfig};

pub const POLICY_FORMAT: &str = "polytune-policy";
pub const POLICY_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no feasible kernel in the search space")]
    NoFeasibleKernel,
    #[error("training diverged at episode {0}")]
    Diverged(usize),
    #[error("policy file: {0}")]
    PolicyFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Candidate values per unroll factor, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladders {
    pub ui: Vec<usize>,
    pub uj: Vec<usize>,
    pub uk: Vec<usize>,
}

impl Default for Ladders {
    fn default() -> Self {
        Self { ui: vec![1, 2, 4, 8], uj: vec![16, 32, 48, 64], uk: vec![1, 2, 4, 8] }
    }
}

impl Ladders {
    pub fn get(&self, axis: usize) -> &[usize] {
        match axis {
            0 => &self.ui,
            1 => &self.uj,
            _ => &self.uk,
        }
    }

    pub fn validate(&self) -> Result<(), RlError> {
        for axis in 0..3 {
            let l = self.get(axis);
            if l.is_empty() || l.contains(&0) || l.windows(2).any(|w| w[0] >= w[1]) {
                return Err(RlError::InvalidConfig("ladders must be non-empty, positive and increasing".into()));
            }
        }
        if self.uj.iter().any(|u| u % VECTOR_WIDTH != 0) {
            return Err(RlError::InvalidConfig(format!("u_j rungs must be multiples of {VECTOR_WIDTH}")));
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        self.ui.len() * self.uj.len() * self.uk.len()
    }

    pub fn encoding_width(&self) -> usize {
        self.ui.len() + self.uj.len() + self.uk.len()
    }

    pub fn states(&self) -> Vec<RlState> {
        let mut out = Vec::with_capacity(self.state_count());
        for a in 0..self.ui.len() {
            for b in 0..self.uj.len() {
                for c in 0..self.uk.len() {
                    out.push(RlState { idx: [a, b, c] });
                }
            }
        }
        out
    }

    pub fn factors(&self, s: RlState) -> [usize; 3] {
        [self.ui[s.idx[0]], self.uj[s.idx[1]], self.uk[s.idx[2]]]
    }

    /// One-hot rung per ladder, concatenated.
    pub fn encode(&self, s: RlState) -> Vec<f64> {
        let mut v = vec![0.0; self.encoding_width()];
        v[s.idx[0]] = 1.0;
        v[self.ui.len() + s.idx[1]] = 1.0;
        v[self.ui.len() + self.uj.len() + s.idx[2]] = 1.0;
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RlState {
    /// Rung indices into the `ui`, `uj`, `uk` ladders.
    pub idx: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RlAction {
    IncI,
    DecI,
    IncJ,
    DecJ,
    IncK,
    DecK,
    Stop,
}

impl RlAction {
    pub const ALL: [RlAction; 7] = [Self::IncI, Self::DecI, Self::IncJ, Self::DecJ, Self::IncK, Self::DecK, Self::Stop];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&a| a == self).expect("listed")
    }
}

impl fmt::Display for RlAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Moved(RlState),
    /// The move would leave the ladder; the state is unchanged.
    Clamped(RlState),
    Stop,
}

pub fn step(ladders: &Ladders, state: RlState, action: RlAction) -> StepOutcome {
    let (axis, up) = match action {
        RlAction::IncI => (0, true),
        RlAction::DecI => (0, false),
        RlAction::IncJ => (1, true),
        RlAction::DecJ => (1, false),
        RlAction::IncK => (2, true),
        RlAction::DecK => (2, false),
        RlAction::Stop => return StepOutcome::Stop,
    };
    let len = ladders.get(axis).len();
    let cur = state.idx[axis];
    let next = if up { cur + 1 } else { cur.wrapping_sub(1) };
    if next >= len {
        return StepOutcome::Clamped(state);
    }
    let mut s = state;
    s.idx[axis] = next;
    StepOutcome::Moved(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlConfig {
    pub epsilon0: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub episodes: usize,
    pub max_steps: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub hidden: [usize; 2],
    pub dropout: f64,
    pub registers: usize,
    pub ladders: Ladders,
    pub seed: u64,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            epsilon0: 1.0,
            epsilon_decay: 0.97,
            epsilon_min: 0.05,
            episodes: 200,
            max_steps: 16,
            gamma: 0.9,
            learning_rate: 1e-3,
            replay_capacity: 2048,
            batch_size: 32,
            hidden: [32, 32],
            dropout: 0.25,
            registers: 32,
            ladders: Ladders::default(),
            seed: 0,
        }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::InvalidConfig(m.into()));
        if !(0.0..=1.0).contains(&self.epsilon0) || !(0.0..=1.0).contains(&self.epsilon_min) {
            return bad("epsilon values must lie in [0, 1]");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay < 1.0) {
            return bad("epsilon decay must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.max_steps == 0 || self.replay_capacity == 0 || self.batch_size == 0 {
            return bad("steps, replay capacity and batch size must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.registers == 0 {
            return bad("register count must be positive");
        }
        self.ladders.validate()
    }

    /// `max(epsilon_min, epsilon0 * decay^n)`.
    pub fn epsilon(&self, episode: usize) -> f64 {
        self.epsilon_min.max(self.epsilon0 * self.epsilon_decay.powi(episode as i32))
    }
}

/// Action-value network: two blocks of dense, ReLU, batch-norm and dropout,
/// then one linear output per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub ladders: Ladders,
    pub network: Network,
}

impl QNetwork {
    pub fn new(ladders: &Ladders, hidden: [usize; 2], dropout: f64, rng: &mut impl Rng) -> Self {
        let input = ladders.encoding_width();
        let mut layers = Vec::new();
        let mut width = input;
        for h in hidden {
            layers.push(Layer::Dense(Dense::new(width, h, rng)));
            layers.push(Layer::Relu);
            layers.push(Layer::BatchNorm(BatchNorm::new(h)));
            layers.push(Layer::Dropout { rate: dropout });
            width = h;
        }
        layers.push(Layer::Dense(Dense::new(width, RlAction::ALL.len(), rng)));
        Self { ladders: ladders.clone(), network: Network { layers } }
    }

    pub fn q_values(&self, s: RlState) -> Vec<f64> {
        self.network.predict(&Matrix::from_rows(&[self.ladders.encode(s)])).data
    }

    /// Highest-valued action; ties go to the earlier action.
    pub fn greedy(&self, s: RlState) -> RlAction {
        let q = self.q_values(s);
        let mut best = 0;
        for (i, v) in q.iter().enumerate() {
            if *v > q[best] {
                best = i;
            }
        }
        RlAction::ALL[best]
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: POLICY_FORMAT.into(),
            version: POLICY_VERSION,
            layer_shapes: self.network.shapes(),
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RlError> {
        let file: ModelFile<QNetwork> = serde_json::from_str(text).map_err(|e| RlError::PolicyFile(e.to_string()))?;
        if file.format != POLICY_FORMAT || file.version != POLICY_VERSION {
            return Err(RlError::PolicyFile(format!("unsupported policy {} v{}", file.format, file.version)));
        }
        if file.layer_shapes != file.model.network.shapes() {
            return Err(RlError::PolicyFile("layer header does not match weights".into()));
        }
        Ok(file.model)
    }
}

/// Mean squared TD error on the taken actions and its gradient with respect
/// to the network outputs.
pub fn td_loss(q: &Matrix, actions: &[usize], targets: &[f64]) -> (f64, Matrix) {
    let n = q.rows as f64;
    let mut grad = Matrix::zeros(q.rows, q.cols);
    let mut loss = 0.0;
    for (r, (&a, &y)) in actions.iter().zip(targets).enumerate() {
        let d = q.row(r)[a] - y;
        loss += 0.5 * d * d / n;
        grad.row_mut(r)[a] = d / n;
    }
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Transition {
    state: RlState,
    action: usize,
    reward: f64,
    next: RlState,
    done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub episode: usize,
    pub step: usize,
    pub epsilon: f64,
    pub state: [usize; 3],
    pub action: RlAction,
    pub explored: bool,
    pub reward: f64,
    pub next_state: [usize; 3],
    /// Performance of `next_state`, absent when the attempted move was
    /// infeasible.
    pub perf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: KernelSpec,
    pub best_state: [usize; 3],
    pub best_performance: f64,
    pub epsilons: Vec<f64>,
    pub log: Vec<LogRecord>,
    /// Distinct states evaluated.
    pub evaluations: usize,
}

impl TuneResult {
    pub fn write_log(&self, path: &Path) -> Result<(), RlError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.log {
            writeln!(f, "{}", serde_json::to_string(r).expect("log record serializes"))?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Whether `factors` may be returned as a kernel for an `N`-wide problem.
pub fn feasible(ladders: &Ladders, factors: [usize; 3], n: usize, registers: usize) -> bool {
    let spec = KernelSpec::new(factors[0], factors[1], factors[2], Strides { a: 1, b: 1, c: 1 });
    RegisterBudget { total: registers }.check(&spec).is_ok() && (factors[1] == ladders.uj[0] || factors[1] <= n)
}

/// The problem a kernel is tuned for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuneTarget {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub strides: Strides,
}

struct Agent<'a, E: Evaluator> {
    config: &'a RlConfig,
    target: TuneTarget,
    evaluator: &'a E,
    perf: BTreeMap<RlState, Option<f64>>,
}

impl<E: Evaluator> Agent<'_, E> {
    fn spec(&self, s: RlState) -> KernelSpec {
        let f = self.config.ladders.factors(s);
        KernelSpec::new(f[0], f[1], f[2], self.target.strides)
    }

    /// Memoized performance, `None` for infeasible or failing kernels.
    fn performance(&mut self, s: RlState) -> Option<f64> {
        if let Some(p) = self.perf.get(&s) {
            return *p;
        }
        let f = self.config.ladders.factors(s);
        let t = self.target;
        let p = if feasible(&self.config.ladders, f, t.n, self.config.registers) {
            self.evaluator
                .evaluate(&self.spec(s), t.m, t.n, t.k)
                .ok()
                .map(|r| r.performance)
                .filter(|p| p.is_finite() && *p > 0.0)
        } else {
            None
        };
        self.perf.insert(s, p);
        p
    }
}

/// Runs the configured number of episodes and returns the best feasible
/// state seen, together with the full search log and the trained network.
pub fn tune<E: Evaluator>(
    target: TuneTarget,
    evaluator: &E,
    config: &RlConfig,
) -> Result<(TuneResult, QNetwork), RlError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ladders = &config.ladders;
    let mut qnet = QNetwork::new(ladders, config.hidden, config.dropout, &mut rng);
    let mut agent = Agent { config, target, evaluator, perf: BTreeMap::new() };
    let start = RlState { idx: [0, 0, 0] };
    let start_perf = agent.performance(start).ok_or(RlError::NoFeasibleKernel)?;
    let mut best = (start, start_perf);
    let mut log = Vec::new();
    let mut epsilons = Vec::new();

    if ladders.state_count() > 1 {
        let mut opt = Optimizer::new(OptimizerConfig::adam(config.learning_rate), &qnet.network);
        let mut replay: VecDeque<Transition> = VecDeque::with_capacity(config.replay_capacity);
        for episode in 0..config.episodes {
            let eps = config.epsilon(episode);
            epsilons.push(eps);
            let (mut state, mut perf) = (start, start_perf);
            for t in 0..config.max_steps {
                let explored = rng.gen_bool(eps);
                let action =
                    if explored { RlAction::ALL[rng.gen_range(0..RlAction::ALL.len())] } else { qnet.greedy(state) };
                let (next, reward, next_perf, done) = match step(ladders, state, action) {
                    StepOutcome::Stop => (state, 0.0, Some(perf), true),
                    StepOutcome::Clamped(s) => (s, 0.0, Some(perf), false),
                    StepOutcome::Moved(s) => match agent.performance(s) {
                        Some(p) => (s, (p - perf) / perf, Some(p), false),
                        None => (state, -1.0, None, false),
                    },
                };
                log.push(LogRecord {
                    episode,
                    step: t,
                    epsilon: eps,
                    state: ladders.factors(state),
                    action,
                    explored,
                    reward,
                    next_state: ladders.factors(next),
                    perf: next_perf,
                });
                if let Some(p) = next_perf {
                    if p > best.1 {
                        best = (next, p);
                    }
                }
                if replay.len() == config.replay_capacity {
                    replay.pop_front();
                }
                replay.push_back(Transition { state, action: action.index(), reward, next, done });
                if replay.len() >= config.batch_size {
                    learn(&mut qnet, &mut opt, &replay, config, &mut rng);
                    if qnet.network.has_non_finite() {
                        return Err(RlError::Diverged(episode));
                    }
                }
                state = next;
                if let Some(p) = next_perf {
                    perf = p;
                }
                if done {
                    break;
                }
            }
        }
    }

    let f = ladders.factors(best.0);
    Ok((
        TuneResult {
            best: KernelSpec::new(f[0], f[1], f[2], target.strides),
            best_state: f,
            best_performance: best.1,
            epsilons,
            log,
            evaluations: agent.perf.len(),
        },
        qnet,
    ))
}

fn learn(
    qnet: &mut QNetwork,
    opt: &mut Optimizer,
    replay: &VecDeque<Transition>,
    config: &RlConfig,
    rng: &mut ChaCha8Rng,
) {
    let picks = sample(rng, replay.len(), config.batch_size);
    let batch: Vec<Transition> = picks.iter().map(|i| replay[i]).collect();
    let next = Matrix::from_rows(&batch.iter().map(|t| qnet.ladders.encode(t.next)).collect::<Vec<_>>());
    let next_q = qnet.network.predict(&next);
    let targets: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(r, t)| {
            if t.done {
                t.reward
            } else {
                let max = next_q.row(r).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                t.reward + config.gamma * max
            }
        })
        .collect();
    let x = Matrix::from_rows(&batch.iter().map(|t| qnet.ladders.encode(t.state)).collect::<Vec<_>>());
    let tape = qnet.network.forward(&x, Mode::Train, rng);
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let (_, grad) = td_loss(&tape.output, &actions, &targets);
    let grads = qnet.network.backward(&tape, &grad);
    opt.step(&mut qnet.network, &grads);
    qnet.network.update_running_stats(&tape);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::AnalyticCostModel;

    fn small() -> Ladders {
        Ladders { ui: vec![1, 2], uj: vec![16, 32], uk: vec![1, 2] }
    }

    #[test]
    fn step_examples() {
        let l = small();
        let s = RlState { idx: [0, 0, 0] };
        assert_eq!(step(&l, s, RlAction::IncJ), StepOutcome::Moved(RlState { idx: [0, 1, 0] }));
        assert_eq!(
            step(&l, RlState { idx: [0, 1, 0] }, RlAction::IncJ),
            StepOutcome::Clamped(RlState { idx: [0, 1, 0] })
        );
        assert_eq!(step(&l, s, RlAction::DecI), StepOutcome::Clamped(s));
        assert_eq!(
            step(&l, RlState { idx: [1, 0, 1] }, RlAction::DecI),
            StepOutcome::Moved(RlState { idx: [0, 0, 1] })
        );
        assert_eq!(step(&l, s, RlAction::Stop), StepOutcome::Stop);
        assert_eq!(RlAction::ALL.len(), 7);
    }

    #[test]
    fn epsilon_schedule() {
        let c = RlConfig::default();
        assert_eq!(c.epsilon(0), 1.0);
        assert_eq!(c.epsilon(1), 0.97);
        assert_eq!(c.epsilon(1000), 0.05);
    }

    #[test]
    fn single_state_returns_immediately() {
        let config = RlConfig { ladders: Ladders { ui: vec![2], uj: vec![16], uk: vec![2] }, ..Default::default() };
        let target = TuneTarget { m: 8, n: 16, k: 8, strides: Strides::dense(16, 8) };
        let (r, _) = tune(target, &AnalyticCostModel::default(), &config).unwrap();
        assert_eq!(r.best_state, [2, 16, 2]);
        assert!(r.log.is_empty());
    }

    #[test]
    fn feasibility_rule() {
        let l = Ladders::default();
        assert!(feasible(&l, [1, 16, 1], 8, 32));
        assert!(!feasible(&l, [1, 32, 1], 20, 32));
        assert!(feasible(&l, [1, 32, 1], 32, 32));
        assert!(!feasible(&l, [8, 64, 2], 128, 32));
    }

    #[test]
    fn policy_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = QNetwork::new(&small(), [8, 8], 0.25, &mut rng);
        assert_eq!(QNetwork::from_json(&q.to_json()).unwrap(), q);
        assert_eq!(q.q_values(RlState { idx: [0, 0, 0] }).len(), 7);
    }
}
