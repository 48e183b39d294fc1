//! Value networks, action selection, double Q-learning and the baseline policies.

pub mod features;
pub mod net;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{
    derive_seed, ActionKind, ActionRequest, EnvError, EnvSetup, StepResult, REWARD_SET,
};
use crate::planner::PlannerOptions;
use crate::scene::{Scene, SceneError};

pub use features::{FeatureParams, StateFeatures, GRID, GRID_CELLS, INPUT_LEN};
pub use net::{huber, huber_grad_q, Adam, Mlp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("invalid network architecture {0}")]
    Architecture(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error("invalid learner parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// The learned method and its baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Full method: three value networks trained with double Q-learning.
    EsesDrl,
    /// Three networks fitted to immediate success labels.
    EsesReactive,
    /// Enveloping and sucking networks fitted to immediate success labels.
    EsReactive,
    /// Enveloping and sucking networks with double Q-learning.
    EsDrl,
    /// Full method without orientation optimization and without preenveloping.
    Ablation1,
    /// Full method without preenveloping.
    Ablation2,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::EsesDrl,
        PolicyKind::EsesReactive,
        PolicyKind::EsReactive,
        PolicyKind::EsDrl,
        PolicyKind::Ablation1,
        PolicyKind::Ablation2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::EsesDrl => "eses_drl",
            PolicyKind::EsesReactive => "eses_reactive",
            PolicyKind::EsReactive => "es_reactive",
            PolicyKind::EsDrl => "es_drl",
            PolicyKind::Ablation1 => "ablation_1",
            PolicyKind::Ablation2 => "ablation_2",
        }
    }

    pub fn uses_pair_net(self) -> bool {
        !matches!(self, PolicyKind::EsReactive | PolicyKind::EsDrl)
    }

    pub fn is_reactive(self) -> bool {
        matches!(self, PolicyKind::EsesReactive | PolicyKind::EsReactive)
    }

    pub fn planner_options(self, xi_deg: f64) -> PlannerOptions {
        let (orientation_optimization, preenveloping) = match self {
            PolicyKind::Ablation1 => (false, false),
            PolicyKind::Ablation2 => (true, false),
            _ => (true, true),
        };
        PlannerOptions {
            orientation_optimization,
            preenveloping,
            xi_deg,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = PolicyKind::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown policy '{s}', expected one of {}", names.join(", "))
            })
    }
}

/// Q-values of every action in one state. `q_es` holds the strict upper
/// triangle row by row: (0,1), (0,2), ..., (1,2), ...
#[derive(Debug, Clone, PartialEq)]
pub struct QBundle {
    pub ids: Vec<usize>,
    pub q_e: Vec<f64>,
    pub q_s: Vec<f64>,
    pub q_es: Vec<f64>,
}

pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl QBundle {
    pub fn len(&self) -> usize {
        self.q_e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_e.is_empty()
    }

    pub fn es(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.q_es[pair_index(self.len(), a, b)]
    }

    pub fn value(&self, index: ActionIndex) -> f64 {
        match index {
            ActionIndex::Envelope(i) => self.q_e[i],
            ActionIndex::Suck(i) => self.q_s[i],
            ActionIndex::Pair { envelope, suck } => self.es(envelope, suck),
        }
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> QBundle {
        QBundle {
            ids: self.ids.clone(),
            q_e: self.q_e.iter().map(|v| f(*v)).collect(),
            q_s: self.q_s.iter().map(|v| f(*v)).collect(),
            q_es: self.q_es.iter().map(|v| f(*v)).collect(),
        }
    }
}

/// An action by position in a [`QBundle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionIndex {
    Envelope(usize),
    Suck(usize),
    Pair { envelope: usize, suck: usize },
}

impl ActionIndex {
    pub fn kind(self) -> ActionKind {
        match self {
            ActionIndex::Envelope(_) => ActionKind::Enveloping,
            ActionIndex::Suck(_) => ActionKind::Sucking,
            ActionIndex::Pair { .. } => ActionKind::EnvelopingThenSucking,
        }
    }

    pub fn request(self, ids: &[usize]) -> ActionRequest {
        match self {
            ActionIndex::Envelope(i) => ActionRequest::envelope(ids[i]),
            ActionIndex::Suck(i) => ActionRequest::suck(ids[i]),
            ActionIndex::Pair { envelope, suck } => {
                ActionRequest::envelope_then_suck(ids[envelope], ids[suck])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub q: f64,
    pub index: ActionIndex,
}

fn first_argmax(v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in v.iter().enumerate() {
        if *x > best.1 {
            best = (i, *x);
        }
    }
    best
}

/// Greedy action. Ties go to enveloping, then sucking, then the lowest index.
pub fn select_action(b: &QBundle) -> Selection {
    assert!(!b.is_empty(), "selection needs at least one object");
    let (n_e, qe) = first_argmax(&b.q_e);
    let (n_s, qs) = first_argmax(&b.q_s);
    if b.len() == 1 || b.q_es.is_empty() {
        return if qe >= qe.max(qs) {
            Selection {
                q: qe,
                index: ActionIndex::Envelope(n_e),
            }
        } else {
            Selection {
                q: qs,
                index: ActionIndex::Suck(n_s),
            }
        };
    }
    let (k, qes) = first_argmax(&b.q_es);
    let top = qe.max(qs).max(qes);
    if qe >= top {
        return Selection {
            q: qe,
            index: ActionIndex::Envelope(n_e),
        };
    }
    if qs >= top {
        return Selection {
            q: qs,
            index: ActionIndex::Suck(n_s),
        };
    }
    let (i, j) = pair_of_index(b.len(), k);
    let index = if b.q_e[i] >= b.q_e[j] {
        ActionIndex::Pair {
            envelope: i,
            suck: j,
        }
    } else {
        ActionIndex::Pair {
            envelope: j,
            suck: i,
        }
    };
    Selection { q: qes, index }
}

pub fn pair_of_index(n: usize, k: usize) -> (usize, usize) {
    let mut rem = k;
    for i in 0..n {
        let row = n - i - 1;
        if rem < row {
            return (i, i + 1 + rem);
        }
        rem -= row;
    }
    panic!("pair index {k} out of range for {n} objects");
}

/// Double Q-learning target. The action is chosen on `next_online`, its value
/// read by `target_value`. `None` marks a terminal next state.
pub fn td_target_with(
    reward: f64,
    gamma: f64,
    next_online: Option<&QBundle>,
    target_value: impl FnOnce(ActionIndex) -> f64,
) -> f64 {
    match next_online {
        Some(b) if !b.is_empty() => reward + gamma * target_value(select_action(b).index),
        _ => reward,
    }
}

pub fn td_target(reward: f64, gamma: f64, next: Option<(&QBundle, &QBundle)>) -> f64 {
    match next {
        Some((online, target)) => td_target_with(reward, gamma, Some(online), |a| target.value(a)),
        None => reward,
    }
}

/// The three value networks of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct QNets {
    pub e: Mlp,
    pub s: Mlp,
    pub es: Option<Mlp>,
}

impl QNets {
    pub fn new<R: Rng>(
        hidden: &[usize],
        with_pair: bool,
        rng: &mut R,
    ) -> Result<QNets, LearnError> {
        let mut sizes = vec![INPUT_LEN];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let e = Mlp::new(&sizes, rng)?;
        let s = Mlp::new(&sizes, rng)?;
        let es = if with_pair {
            Some(Mlp::new(&sizes, rng)?)
        } else {
            None
        };
        Ok(QNets { e, s, es })
    }

    fn net(&self, kind: ActionKind) -> &Mlp {
        match kind {
            ActionKind::Enveloping => &self.e,
            ActionKind::Sucking => &self.s,
            ActionKind::EnvelopingThenSucking => {
                self.es.as_ref().expect("policy has a pair network")
            }
        }
    }

    fn net_mut(&mut self, kind: ActionKind) -> &mut Mlp {
        match kind {
            ActionKind::Enveloping => &mut self.e,
            ActionKind::Sucking => &mut self.s,
            ActionKind::EnvelopingThenSucking => {
                self.es.as_mut().expect("policy has a pair network")
            }
        }
    }

    pub fn input(f: &StateFeatures, index: ActionIndex) -> Vec<f64> {
        match index {
            ActionIndex::Envelope(i) | ActionIndex::Suck(i) => f.single_input(i),
            ActionIndex::Pair { envelope, suck } => f.pair_input(envelope, suck),
        }
    }

    pub fn value(&self, f: &StateFeatures, index: ActionIndex) -> f64 {
        self.net(index.kind()).forward(&Self::input(f, index))
    }

    /// Q-values of all actions. Each pair is fed with the member of larger
    /// enveloping value first, the order in which it would be executed.
    pub fn evaluate(&self, f: &StateFeatures) -> QBundle {
        let n = f.len();
        let single = |net: &Mlp| -> Vec<f64> {
            let g = net.partial(&f.global, GRID_CELLS);
            f.locals
                .iter()
                .map(|l| {
                    let z: Vec<f64> = net
                        .partial(l, 0)
                        .iter()
                        .zip(&g)
                        .map(|(a, b)| a + b)
                        .collect();
                    net.finish(&z)
                })
                .collect()
        };
        let q_e = single(&self.e);
        let q_s = single(&self.s);
        let mut q_es = Vec::new();
        if let (Some(net), true) = (&self.es, n > 1) {
            let half = GRID_CELLS / 2;
            let g = net.partial(&f.global, GRID_CELLS);
            let halves: Vec<Vec<f64>> = (0..n)
                .map(|i| f.pair_input(i, i)[..half].to_vec())
                .collect();
            let first: Vec<Vec<f64>> = halves.iter().map(|h| net.partial(h, 0)).collect();
            let second: Vec<Vec<f64>> = halves.iter().map(|h| net.partial(h, half)).collect();
            q_es.reserve(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = if q_e[i] >= q_e[j] { (i, j) } else { (j, i) };
                    let z: Vec<f64> = (0..g.len())
                        .map(|k| first[a][k] + second[b][k] + g[k])
                        .collect();
                    q_es.push(net.finish(&z));
                }
            }
        }
        QBundle {
            ids: f.ids.clone(),
            q_e,
            q_s,
            q_es,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.e.is_finite() && self.s.is_finite() && self.es.as_ref().is_none_or(|n| n.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerParams {
    pub train_steps: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub gamma: f64,
    pub lr: f64,
    pub sync_period: usize,
    pub replay: bool,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    /// Each training scene holds between these many objects of each grasp type.
    pub train_per_type_min: usize,
    pub train_per_type_max: usize,
    pub divergence_limit: f64,
    /// Keep updating the networks while evaluating.
    pub continual: bool,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            train_steps: 20_000,
            eps_start: 0.6,
            eps_end: 0.1,
            gamma: 0.5,
            lr: 1e-4,
            sync_period: 100,
            replay: false,
            replay_capacity: 2048,
            batch_size: 16,
            hidden: vec![64, 64],
            train_per_type_min: 1,
            train_per_type_max: 5,
            divergence_limit: 1e6,
            continual: true,
        }
    }
}

impl LearnerParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: String| Err(LearnError::InvalidParams(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        for (name, v) in [("eps_start", self.eps_start), ("eps_end", self.eps_end)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.sync_period == 0 || self.batch_size == 0 || self.replay_capacity == 0 {
            return bad("sync_period, batch_size and replay_capacity must be at least 1".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!(
                "hidden layers must be non-empty and positive, got {:?}",
                self.hidden
            ));
        }
        if self.train_per_type_min > self.train_per_type_max || self.train_per_type_max == 0 {
            return bad(format!(
                "need train_per_type_min <= train_per_type_max and a positive maximum, got {}..{}",
                self.train_per_type_min, self.train_per_type_max
            ));
        }
        if !(self.divergence_limit > 0.0) {
            return bad("divergence_limit must be positive".into());
        }
        Ok(())
    }

    /// Linear exploration schedule over the training run.
    pub fn epsilon(&self, step: usize) -> f64 {
        if self.train_steps <= 1 {
            return self.eps_end;
        }
        let t = (step as f64 / (self.train_steps - 1) as f64).min(1.0);
        self.eps_start + (self.eps_end - self.eps_start) * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StateFeatures,
    pub action: ActionIndex,
    pub reward: f64,
    /// `None` when the next state is terminal or the policy does not bootstrap.
    pub next: Option<StateFeatures>,
}

/// Fixed-capacity ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(4096)),
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    pub fn sample<'a, R: Rng>(&'a self, rng: &mut R, k: usize) -> Vec<&'a Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..k)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"GSQN";
const CHECKPOINT_VERSION: u32 = 1;

/// A policy with its networks, optimizers and exploration state.
#[derive(Debug, Clone)]
pub struct Agent {
    pub kind: PolicyKind,
    pub params: LearnerParams,
    pub features: FeatureParams,
    pub online: QNets,
    pub target: QNets,
    opt_e: Adam,
    opt_s: Adam,
    opt_es: Option<Adam>,
    rng: ChaCha8Rng,
    pub epsilon: f64,
    /// Whether `feedback` updates the networks.
    pub learning: bool,
    pub updates: usize,
    replay: Option<ReplayBuffer>,
    pending: Option<(StateFeatures, ActionIndex)>,
}

impl Agent {
    pub fn new(
        kind: PolicyKind,
        params: LearnerParams,
        features: FeatureParams,
        seed: u64,
    ) -> Result<Agent, LearnError> {
        params.validate()?;
        let mut init = ChaCha8Rng::seed_from_u64(derive_seed(seed, 11));
        let online = QNets::new(&params.hidden, kind.uses_pair_net(), &mut init)?;
        Ok(Self::with_nets(kind, params, features, online, seed))
    }

    /// Crops follow the gripper frame, so they are only rotated when the
    /// policy orients its grasps.
    pub fn with_nets(
        kind: PolicyKind,
        params: LearnerParams,
        features: FeatureParams,
        online: QNets,
        seed: u64,
    ) -> Agent {
        let features = FeatureParams {
            align_crops: features.align_crops && kind.planner_options(0.0).orientation_optimization,
            ..features
        };
        let opt_e = Adam::new(online.e.params.len(), params.lr);
        let opt_s = Adam::new(online.s.params.len(), params.lr);
        let opt_es = online
            .es
            .as_ref()
            .map(|n| Adam::new(n.params.len(), params.lr));
        let replay = params
            .replay
            .then(|| ReplayBuffer::new(params.replay_capacity));
        Agent {
            kind,
            epsilon: params.eps_start,
            params,
            features,
            target: online.clone(),
            online,
            opt_e,
            opt_s,
            opt_es,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 12)),
            learning: true,
            updates: 0,
            replay,
            pending: None,
        }
    }

    /// Greedy acting for evaluation. Networks keep updating when `params.continual` is set.
    pub fn evaluation_mode(&mut self) {
        self.epsilon = 0.0;
        self.learning = self.params.continual;
    }

    pub fn gamma(&self) -> f64 {
        if self.kind.is_reactive() {
            0.0
        } else {
            self.params.gamma
        }
    }

    pub fn planner_options(&self, xi_deg: f64) -> PlannerOptions {
        self.kind.planner_options(xi_deg)
    }

    /// Exploratory action: a uniformly random legal kind, then uniformly random targets.
    fn random_action(&mut self, n: usize) -> ActionIndex {
        let pair_legal = n > 1 && self.online.es.is_some();
        let kinds = if pair_legal { 3 } else { 2 };
        match self.rng.random_range(0..kinds) {
            0 => ActionIndex::Envelope(self.rng.random_range(0..n)),
            1 => ActionIndex::Suck(self.rng.random_range(0..n)),
            _ => {
                let envelope = self.rng.random_range(0..n);
                let mut suck = self.rng.random_range(0..n - 1);
                if suck >= envelope {
                    suck += 1;
                }
                ActionIndex::Pair { envelope, suck }
            }
        }
    }

    /// Epsilon-greedy action on `scene`, remembered for the next `feedback`.
    pub fn choose(&mut self, scene: &Scene) -> ActionRequest {
        let f = StateFeatures::new(scene, &self.features);
        assert!(!f.is_empty(), "cannot act on an empty scene");
        let explore = self.epsilon > 0.0 && self.rng.random::<f64>() < self.epsilon;
        let index = if explore {
            self.random_action(f.len())
        } else {
            select_action(&self.online.evaluate(&f)).index
        };
        let req = index.request(&f.ids);
        self.pending = Some((f, index));
        req
    }

    /// Training signal for an executed step.
    pub fn signal(&self, result: &StepResult) -> f64 {
        if self.kind.is_reactive() {
            result.outcome.any_success() as u8 as f64
        } else {
            result.outcome.reward
        }
    }

    /// Records the outcome of the last chosen action and updates the networks
    /// when learning is on. Returns the loss of the update.
    pub fn feedback(
        &mut self,
        scene_after: &Scene,
        result: &StepResult,
    ) -> Result<Option<f64>, LearnError> {
        let (state, action) = self.pending.take().expect("feedback follows choose");
        if !self.learning {
            return Ok(None);
        }
        let next = if self.kind.is_reactive() || result.terminal {
            None
        } else {
            Some(StateFeatures::new(scene_after, &self.features))
        };
        let t = Transition {
            state,
            action,
            reward: self.signal(result),
            next,
        };
        self.learn(t).map(Some)
    }

    fn target_of(&self, t: &Transition) -> f64 {
        let gamma = self.gamma();
        match &t.next {
            Some(next) if gamma > 0.0 => {
                let online = self.online.evaluate(next);
                td_target_with(t.reward, gamma, Some(&online), |a| {
                    self.target.value(next, a)
                })
            }
            _ => t.reward,
        }
    }

    /// One optimizer step on a transition, or on a replay batch that includes it.
    pub fn learn(&mut self, t: Transition) -> Result<f64, LearnError> {
        let batch: Vec<Transition> = match &mut self.replay {
            Some(buf) => {
                buf.push(t);
                let k = self.params.batch_size;
                buf.sample(&mut self.rng, k).into_iter().cloned().collect()
            }
            None => vec![t],
        };
        let mut grads: [Option<Vec<f64>>; 3] = [None, None, None];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for t in &batch {
            let y = self.target_of(t);
            let kind = t.action.kind();
            let net = self.online.net(kind);
            let trace = net.trace(&QNets::input(&t.state, t.action));
            let q = trace.output();
            loss += huber((y - q).abs()) * scale;
            let slot = kind as usize;
            let g = grads[slot].get_or_insert_with(|| vec![0.0; net.params.len()]);
            net.backward(&trace, huber_grad_q(y, q) * scale, g);
        }
        if !(loss <= self.params.divergence_limit) {
            return Err(LearnError::Diverged {
                step: self.updates,
                loss,
            });
        }
        for kind in ActionKind::ALL {
            if let Some(g) = &grads[kind as usize] {
                let opt = match kind {
                    ActionKind::Enveloping => &mut self.opt_e,
                    ActionKind::Sucking => &mut self.opt_s,
                    ActionKind::EnvelopingThenSucking => {
                        self.opt_es.as_mut().expect("pair optimizer")
                    }
                };
                opt.step(&mut self.online.net_mut(kind).params, g);
            }
        }
        self.updates += 1;
        if self.updates.is_multiple_of(self.params.sync_period) {
            self.target = self.online.clone();
        }
        Ok(loss)
    }

    pub fn save<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let name = self.kind.as_str().as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        let nets: Vec<&Mlp> = [
            Some(&self.online.e),
            Some(&self.online.s),
            self.online.es.as_ref(),
        ]
        .into_iter()
        .flatten()
        .collect();
        w.write_all(&(nets.len() as u32).to_le_bytes())?;
        for n in nets {
            n.write_to(w)?;
        }
        Ok(())
    }

    /// Reads a checkpoint written by [`Agent::save`]; optimizer state starts fresh.
    pub fn load<R: Read>(
        r: &mut R,
        params: LearnerParams,
        features: FeatureParams,
        seed: u64,
    ) -> Result<Agent, LearnError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|e| LearnError::Checkpoint(e.to_string()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(LearnError::Checkpoint("bad magic".into()));
        }
        let version = net::read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(LearnError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let len = net::read_u32(r)? as usize;
        if len > 64 {
            return Err(LearnError::Checkpoint("policy name too long".into()));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| LearnError::Checkpoint(e.to_string()))?;
        let kind: PolicyKind = String::from_utf8_lossy(&name)
            .parse()
            .map_err(LearnError::Checkpoint)?;
        let count = net::read_u32(r)?;
        let expected = if kind.uses_pair_net() { 3 } else { 2 };
        if count != expected {
            return Err(LearnError::Checkpoint(format!(
                "{kind} needs {expected} networks, found {count}"
            )));
        }
        let e = Mlp::read_from(r)?;
        let s = Mlp::read_from(r)?;
        let es = if expected == 3 {
            Some(Mlp::read_from(r)?)
        } else {
            None
        };
        for n in [Some(&e), Some(&s), es.as_ref()].into_iter().flatten() {
            if n.input_len() != INPUT_LEN {
                return Err(LearnError::Checkpoint(format!(
                    "network input {} != {INPUT_LEN}",
                    n.input_len()
                )));
            }
        }
        params.validate()?;
        Ok(Agent::with_nets(
            kind,
            params,
            features,
            QNets { e, s, es },
            seed,
        ))
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    pub epsilon: f64,
    pub loss: f64,
    pub kind: ActionKind,
    pub envelope_success: Option<bool>,
    pub suck_success: Option<bool>,
    pub reward: f64,
}

impl TrainRecord {
    pub const HEADER: &'static str = "step,epsilon,loss,reward,kind,envelope_success,suck_success";

    pub fn to_csv(&self) -> String {
        let b = |v: Option<bool>| v.map(|x| (x as u8).to_string()).unwrap_or_default();
        format!(
            "{},{:.6},{:.9},{},{},{},{}",
            self.step,
            self.epsilon,
            self.loss,
            self.reward,
            self.kind,
            b(self.envelope_success),
            b(self.suck_success)
        )
    }

    pub fn any_success(&self) -> bool {
        self.envelope_success == Some(true) || self.suck_success == Some(true)
    }

    pub fn full_es(&self) -> bool {
        self.kind == ActionKind::EnvelopingThenSucking
            && self.envelope_success == Some(true)
            && self.suck_success == Some(true)
    }
}

/// Fraction of fully successful two-object actions among successful actions.
pub fn full_es_share(log: &[TrainRecord]) -> f64 {
    let ok = log.iter().filter(|r| r.any_success()).count();
    if ok == 0 {
        return 0.0;
    }
    log.iter().filter(|r| r.full_es()).count() as f64 / ok as f64
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub agent: Agent,
    pub log: Vec<TrainRecord>,
    pub episodes: usize,
}

/// Trains a policy from scratch on freshly spawned scenes.
pub fn train(
    kind: PolicyKind,
    setup: &EnvSetup,
    params: &LearnerParams,
    features: &FeatureParams,
    xi_deg: f64,
    seed: u64,
) -> Result<TrainReport, LearnError> {
    params.validate()?;
    let mut agent = Agent::new(kind, params.clone(), *features, seed)?;
    let planner = agent.planner_options(xi_deg);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 13));
    let mut episodes = 0usize;
    let new_episode = |rng: &mut ChaCha8Rng, episodes: &mut usize| {
        let (n_e, n_s) = loop {
            let range = params.train_per_type_min..=params.train_per_type_max;
            let pair = (rng.random_range(range.clone()), rng.random_range(range));
            if pair.0 + pair.1 > 0 {
                break pair;
            }
        };
        let n = n_e + n_s;
        let ep = setup.episode(
            n_e as f64 / n as f64,
            n,
            planner,
            derive_seed(seed, 1000 + *episodes as u64),
        );
        *episodes += 1;
        ep
    };
    let mut episode = new_episode(&mut rng, &mut episodes)?;
    let mut log = Vec::with_capacity(params.train_steps);
    for step in 0..params.train_steps {
        agent.epsilon = params.epsilon(step);
        let req = agent.choose(&episode.scene);
        let result = episode.step(&req)?;
        let loss = agent.feedback(&episode.scene, &result)?.unwrap_or(0.0);
        log.push(TrainRecord {
            step,
            epsilon: agent.epsilon,
            loss,
            kind: req.kind,
            envelope_success: result.outcome.envelope_success,
            suck_success: result.outcome.suck_success,
            reward: result.outcome.reward,
        });
        if episode.is_terminal() {
            episode = new_episode(&mut rng, &mut episodes)?;
        }
    }
    if !agent.online.is_finite() {
        return Err(LearnError::Diverged {
            step: params.train_steps,
            loss: f64::NAN,
        });
    }
    Ok(TrainReport {
        agent,
        log,
        episodes,
    })
}

/// Checks that a reward belongs to the environment's reward set.
pub fn is_known_reward(r: f64) -> bool {
    REWARD_SET.contains(&r)
}
