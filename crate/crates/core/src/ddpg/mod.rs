//! Deep deterministic policy gradient over either policy head.
//!
//! The critic scores `(state, action)` with the action rescaled to `[-1, 1]`
//! per actuator coordinate. Vertex-network transitions carry the padded safe
//! vertices of both endpoints so the target actor can be re-evaluated through
//! the safe layer without recomputing geometry.

mod replay;

use ndarray::{s, Array1, Array2, ArrayView2};
use rand::SeedableRng;

use crate::envs::{AffineEnv, EnvState, SimRng, VIOLATION_TOL};
use crate::error::{Error, Result};
use crate::geometry::MEMBERSHIP_TOL;
use crate::nets::{Mlp, MlpSpec, OutputActivation};
use crate::policies::{pn_penalty, Policy, PolicyRegistry, SafeLayerInput, DEFAULT_PENALTY};

pub use replay::{ReplayBuffer, Transition};

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup: usize,
    pub hidden: Vec<usize>,
    /// Exploration noise: logit-space std for the vertex network, fraction of
    /// the actuator half-width for the baseline.
    pub noise_std: f64,
    pub pn_noise_std: f64,
    pub noise_decay: f64,
    pub penalty: f64,
    /// Multiplier on training rewards; `None` uses the environment default.
    pub reward_scale: Option<f64>,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            batch_size: 64,
            buffer_capacity: 100_000,
            warmup: 1_000,
            hidden: vec![256, 256],
            noise_std: 0.3,
            pn_noise_std: 0.1,
            noise_decay: 0.995,
            penalty: DEFAULT_PENALTY,
            reward_scale: None,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("need 1 <= batch_size <= buffer_capacity");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if self.noise_std < 0.0 || self.pn_noise_std < 0.0 || !(self.noise_decay > 0.0) {
            return bad("noise parameters must be non-negative");
        }
        if self.penalty < 0.0 {
            return bad("penalty must be non-negative");
        }
        if let Some(k) = self.reward_scale {
            if !(k > 0.0) {
                return bad("reward_scale must be positive");
            }
        }
        Ok(())
    }
}

/// Affine map from the actuator bounding box to `[-1, 1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionScaler {
    center: Vec<f64>,
    half_width: Vec<f64>,
}

impl ActionScaler {
    pub fn for_env(env: &AffineEnv) -> Self {
        let (lo, hi) = env.actuator_polytope().bounding_box();
        Self {
            center: lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            half_width: lo.iter().zip(&hi).map(|(l, h)| 0.5 * (h - l)).collect(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            half_width: vec![1.0; dim],
        }
    }

    pub fn normalize(&self, k: usize, a: f64) -> f64 {
        (a - self.center[k]) / self.half_width[k]
    }

    pub fn inv_half_width(&self, k: usize) -> f64 {
        1.0 / self.half_width[k]
    }
}

/// Online critic plus the target critic and target actor trunk.
#[derive(Debug, Clone)]
pub struct CriticPair {
    pub critic: Mlp,
    pub target_critic: Mlp,
    pub target_actor: Mlp,
    pub scaler: ActionScaler,
}

impl CriticPair {
    pub fn new(env: &AffineEnv, policy: &dyn Policy, hidden: &[usize], rng: &mut SimRng) -> Self {
        let mut sizes = vec![env.state_dim() + env.action_dim()];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let spec = MlpSpec::new(sizes, OutputActivation::Identity).expect("valid critic spec");
        let critic = Mlp::init(spec, rng);
        Self {
            target_critic: critic.clone(),
            critic,
            target_actor: policy.trunk().clone(),
            scaler: ActionScaler::for_env(env),
        }
    }

    /// `state ‖ normalized action` rows.
    pub fn critic_input(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
        let (b, sd) = states.dim();
        let ad = actions.ncols();
        let mut x = Array2::zeros((b, sd + ad));
        x.slice_mut(s![.., ..sd]).assign(&states);
        for i in 0..b {
            for k in 0..ad {
                x[[i, sd + k]] = self.scaler.normalize(k, actions[[i, k]]);
            }
        }
        x
    }
}

/// A sampled minibatch laid out as matrices.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Array2<f64>,
    pub vertices: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub next_vertices: Array2<f64>,
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Self {
        let rows = |f: &dyn Fn(&Transition) -> &Vec<f64>| {
            let width = f(ts[0]).len();
            let flat: Vec<f64> = ts.iter().flat_map(|t| f(t).iter().copied()).collect();
            Array2::from_shape_vec((ts.len(), width), flat).expect("uniform widths")
        };
        Self {
            states: rows(&|t| &t.state),
            vertices: rows(&|t| &t.vertices),
            actions: rows(&|t| &t.action),
            rewards: ts.iter().map(|t| t.reward).collect(),
            next_states: rows(&|t| &t.next_state),
            next_vertices: rows(&|t| &t.next_vertices),
            dones: ts.iter().map(|t| if t.done { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Bellman targets `r + γ (1 - done) Q'(s', π'(s'))`.
pub fn bellman_targets(
    cp: &CriticPair,
    policy: &dyn Policy,
    batch: &Batch,
    gamma: f64,
) -> Result<Array1<f64>> {
    let next = policy.batch_actions(&cp.target_actor, batch.next_states.view(), batch.next_vertices.view())?;
    let x = cp.critic_input(batch.next_states.view(), next.actions.view());
    let q = cp.target_critic.forward_batch(x.view())?;
    let q = q.output().column(0).to_owned();
    Ok(&batch.rewards + &(gamma * (1.0 - &batch.dones) * q))
}

/// One Adam step on the mean squared Bellman error. Returns the loss before
/// the step.
pub fn critic_update(
    cp: &mut CriticPair,
    policy: &dyn Policy,
    batch: &Batch,
    gamma: f64,
    lr: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let targets = bellman_targets(cp, policy, batch, gamma)?;
    let x = cp.critic_input(batch.states.view(), batch.actions.view());
    let tape = cp.critic.forward_batch(x.view())?;
    let q = tape.output().column(0).to_owned();
    let err = &q - &targets;
    let n = batch.len() as f64;
    let loss = err.mapv(|e| e * e).sum() / n;
    let grad_out = (2.0 / n * &err).insert_axis(ndarray::Axis(1));
    let grads = cp.critic.backward(&tape, grad_out.view())?;
    cp.critic.adam_step(&grads, lr)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("critic loss".into()));
    }
    Ok(loss)
}

/// Gradient of `-mean_b Q(s_b, π(s_b))` with respect to the policy trunk.
pub fn actor_gradient(
    policy: &dyn Policy,
    cp: &CriticPair,
    batch: &Batch,
) -> Result<crate::nets::GradBundle> {
    let tape = policy.batch_actions(policy.trunk(), batch.states.view(), batch.vertices.view())?;
    let x = cp.critic_input(batch.states.view(), tape.actions.view());
    let qtape = cp.critic.forward_batch(x.view())?;
    let n = batch.len();
    let up = Array2::from_elem((n, 1), -1.0 / n as f64);
    let dx = cp.critic.input_gradient(&qtape, up.view())?;
    let sd = batch.states.ncols();
    let ad = tape.actions.ncols();
    let mut da = Array2::zeros((n, ad));
    for b in 0..n {
        for k in 0..ad {
            da[[b, k]] = dx[[b, sd + k]] * cp.scaler.inv_half_width(k);
        }
    }
    policy.batch_backward(policy.trunk(), &tape, da.view())
}

/// One Adam step ascending the critic's value of the policy's own actions.
pub fn actor_update(
    policy: &mut dyn Policy,
    cp: &CriticPair,
    batch: &Batch,
    lr: f64,
) -> Result<()> {
    let grads = actor_gradient(policy, cp, batch)?;
    policy.trunk_mut().adam_step(&grads, lr)
}

/// Polyak averaging of both target networks toward their online copies.
pub fn soft_update(cp: &mut CriticPair, policy: &dyn Policy, tau: f64) {
    cp.target_critic.soft_update_from(&cp.critic, tau);
    cp.target_actor.soft_update_from(policy.trunk(), tau);
}

/// Per-episode training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    /// Sum of unshaped environment rewards.
    pub accumulated_reward: f64,
    /// Largest constraint metric (|θ|, |v| or tilt) over the visited states.
    pub max_violation: f64,
    pub fallback_count: usize,
    pub steps: usize,
    /// Steps whose safe set was non-empty yet whose next state left `X`.
    pub unguarded_violations: usize,
    /// Actions outside the actuator set, or outside their vertex hull.
    pub action_breaches: usize,
}

/// Drives episodes of interaction and updates for one agent.
pub struct Trainer {
    env: AffineEnv,
    policy: Box<dyn Policy>,
    critics: CriticPair,
    buffer: ReplayBuffer,
    config: DdpgConfig,
    rng: SimRng,
    episode: usize,
    reward_scale: f64,
    penalized: bool,
}

impl Trainer {
    pub fn new(env: AffineEnv, policy_name: &str, config: DdpgConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SimRng::seed_from_u64(seed);
        let policy = PolicyRegistry::default().build(policy_name, &env, &config.hidden, &mut rng)?;
        let critics = CriticPair::new(&env, policy.as_ref(), &config.hidden, &mut rng);
        let reward_scale = config.reward_scale.unwrap_or_else(|| env.system().reward_scale());
        Ok(Self {
            penalized: !policy.needs_vertices(),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            env,
            policy,
            critics,
            config,
            rng,
            episode: 0,
            reward_scale,
        })
    }

    pub fn env(&self) -> &AffineEnv {
        &self.env
    }

    pub fn policy(&self) -> &dyn Policy {
        self.policy.as_ref()
    }

    pub fn critics(&self) -> &CriticPair {
        &self.critics
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    fn current_noise(&self) -> f64 {
        let base = if self.policy.needs_vertices() {
            self.config.noise_std
        } else {
            self.config.pn_noise_std
        };
        base * self.config.noise_decay.powi(self.episode as i32)
    }

    fn safe_input(&self, s: &EnvState) -> Result<(Option<SafeLayerInput>, bool)> {
        let (poly, fallback) = self.env.safe_action_polytope(s);
        if self.policy.needs_vertices() {
            Ok((Some(SafeLayerInput::new(poly, self.env.max_vertices())?), fallback))
        } else {
            Ok((None, fallback))
        }
    }

    /// Runs one exploratory episode, updating after every step once the
    /// buffer holds `warmup` transitions.
    pub fn run_episode(&mut self) -> Result<EpisodeMetrics> {
        let noise = self.current_noise();
        let mut s = self.env.reset(&mut self.rng);
        let mut m = EpisodeMetrics {
            episode: self.episode,
            accumulated_reward: 0.0,
            max_violation: self.env.constraint_metric(&s.x),
            fallback_count: 0,
            steps: 0,
            unguarded_violations: 0,
            action_breaches: 0,
        };
        let (mut safe, mut fallback) = self.safe_input(&s)?;
        loop {
            let out = self.policy.act(&self.env.observe(&s), safe.as_ref(), noise, &mut self.rng)?;
            let u = out.action;
            if !self.env.actuator_constraints().contains(&u, MEMBERSHIP_TOL) {
                m.action_breaches += 1;
            }
            if let Some(si) = &safe {
                if !hull_contains(&si.polytope, &u) {
                    m.action_breaches += 1;
                }
            }
            let step = self.env.step(&s, &u);
            debug_assert_eq!(step.fallback_used, fallback);
            m.steps += 1;
            m.accumulated_reward += step.reward;
            m.max_violation = m.max_violation.max(self.env.constraint_metric(&step.next_state.x));
            if fallback {
                m.fallback_count += 1;
            } else if self.env.violation(&step.next_state.x) > VIOLATION_TOL {
                m.unguarded_violations += 1;
            }

            let mut train_reward = step.reward;
            if self.penalized {
                train_reward += pn_penalty(&self.env, &step.next_state, self.config.penalty);
            }
            let (next_safe, next_fallback) = self.safe_input(&step.next_state)?;
            self.buffer.push(Transition {
                state: self.env.observe(&s),
                vertices: safe.as_ref().map(|v| v.padded.coords().to_vec()).unwrap_or_default(),
                action: u,
                reward: self.reward_scale * train_reward,
                next_state: self.env.observe(&step.next_state),
                next_vertices: next_safe
                    .as_ref()
                    .map(|v| v.padded.coords().to_vec())
                    .unwrap_or_default(),
                done: step.done,
            });
            if self.buffer.len() >= self.config.warmup.max(self.config.batch_size) {
                self.update()?;
            }
            s = step.next_state;
            safe = next_safe;
            fallback = next_fallback;
            if step.done {
                break;
            }
        }
        self.episode += 1;
        Ok(m)
    }

    fn update(&mut self) -> Result<()> {
        let batch = {
            let sample = self
                .buffer
                .sample(self.config.batch_size, &mut self.rng)
                .expect("buffer holds at least one batch");
            Batch::from_transitions(&sample)
        };
        critic_update(
            &mut self.critics,
            self.policy.as_ref(),
            &batch,
            self.config.gamma,
            self.config.critic_lr,
        )?;
        actor_update(self.policy.as_mut(), &self.critics, &batch, self.config.actor_lr)?;
        soft_update(&mut self.critics, self.policy.as_ref(), self.config.tau);
        Ok(())
    }

    pub fn into_policy(self) -> Box<dyn Policy> {
        self.policy
    }
}

/// Whether `u` lies in the convex hull of `poly` (within the membership
/// tolerance).
pub fn hull_contains(poly: &crate::geometry::VertexPolytope, u: &[f64]) -> bool {
    match poly.dim() {
        1 => {
            let lo = poly.vertex(0)[0];
            let hi = poly.vertex(poly.len() - 1)[0];
            u[0] >= lo - MEMBERSHIP_TOL && u[0] <= hi + MEMBERSHIP_TOL
        }
        _ => {
            let n = poly.len();
            match n {
                1 => {
                    let p = poly.vertex(0);
                    (u[0] - p[0]).hypot(u[1] - p[1]) <= MEMBERSHIP_TOL
                }
                2 => {
                    let (a, b) = (poly.vertex(0), poly.vertex(1));
                    let d = [b[0] - a[0], b[1] - a[1]];
                    let len = d[0].hypot(d[1]);
                    let cross = (d[0] * (u[1] - a[1]) - d[1] * (u[0] - a[0])) / len;
                    let t = (d[0] * (u[0] - a[0]) + d[1] * (u[1] - a[1])) / len;
                    cross.abs() <= MEMBERSHIP_TOL
                        && t >= -MEMBERSHIP_TOL
                        && t <= len + MEMBERSHIP_TOL
                }
                _ => (0..n).all(|i| {
                    let a = poly.vertex(i);
                    let b = poly.vertex((i + 1) % n);
                    let d = [b[0] - a[0], b[1] - a[1]];
                    let len = d[0].hypot(d[1]);
                    (d[0] * (u[1] - a[1]) - d[1] * (u[0] - a[0])) / len >= -MEMBERSHIP_TOL
                }),
            }
        }
    }
}

/// Runs `episodes` training episodes and returns their metrics.
pub fn train(
    env: AffineEnv,
    policy_name: &str,
    config: DdpgConfig,
    episodes: usize,
    seed: u64,
) -> Result<(Vec<EpisodeMetrics>, Trainer)> {
    let mut trainer = Trainer::new(env, policy_name, config, seed)?;
    let metrics = (0..episodes)
        .map(|_| trainer.run_episode())
        .collect::<Result<Vec<_>>>()?;
    Ok((metrics, trainer))
}

/// One row of a greedy rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub t: usize,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub constraint_metric: f64,
    pub fallback_used: bool,
    pub target_sq_distance: Option<f64>,
}

/// Noise-free episode from a reset drawn with `seed`. The final row holds the
/// terminal state with an empty action.
pub fn greedy_rollout(env: &AffineEnv, policy: &dyn Policy, seed: u64) -> Result<Vec<TrajectoryStep>> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut s = env.reset(&mut rng);
    let mut rows = Vec::with_capacity(env.horizon() + 1);
    loop {
        let (poly, fallback) = env.safe_action_polytope(&s);
        let safe = if policy.needs_vertices() {
            Some(SafeLayerInput::new(poly, env.max_vertices())?)
        } else {
            None
        };
        let u = policy.act(&env.observe(&s), safe.as_ref(), 0.0, &mut rng)?.action;
        let step = env.step(&s, &u);
        rows.push(TrajectoryStep {
            t: s.t,
            constraint_metric: env.constraint_metric(&s.x),
            target_sq_distance: env.system().target_sq_distance(&s.x),
            state: s.x,
            action: u,
            reward: step.reward,
            fallback_used: fallback,
        });
        s = step.next_state;
        if step.done {
            break;
        }
    }
    rows.push(TrajectoryStep {
        t: s.t,
        constraint_metric: env.constraint_metric(&s.x),
        target_sq_distance: env.system().target_sq_distance(&s.x),
        state: s.x,
        action: Vec::new(),
        reward: 0.0,
        fallback_used: false,
    });
    Ok(rows)
}
