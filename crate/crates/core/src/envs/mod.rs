//! Affine control benchmarks `x' = f(x) + H(x) u` with polytopic state and
//! actuator constraints.
//!
//! Each benchmark implements [`ControlSystem`] and is registered by name in an
//! [`EnvRegistry`]; [`AffineEnv`] wraps the chosen system with its constraint
//! sets and provides the per-step safe action polytope.

mod hovercraft;
mod mass_spring;
mod pendulum;
mod plane;

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{self, Halfplane, HalfplaneSet, VertexPolytope};

pub use hovercraft::Hovercraft;
pub use mass_spring::MassSpring;
pub use pendulum::Pendulum;
pub use plane::IdentityPlane;

/// Random source used for every stochastic component.
pub type SimRng = ChaCha8Rng;

/// Tolerance above which a next state counts as a constraint violation.
pub const VIOLATION_TOL: f64 = 1e-6;

/// Gravitational acceleration shared by the pendulum and the hovercraft.
pub const GRAVITY: f64 = 10.0;

/// Construction parameters shared by all benchmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvParams {
    pub delta: f64,
    pub horizon: usize,
    /// Hovercraft tilt bound; ignored by the other systems.
    pub theta_bar: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            delta: 0.05,
            horizon: 200,
            theta_bar: 0.25,
        }
    }
}

/// One benchmark system. Implementations are stateless descriptions.
pub trait ControlSystem: Send + Sync {
    fn name(&self) -> &'static str;
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Upper bound on the vertex count of any per-step safe action polytope.
    fn max_vertices(&self) -> usize;
    /// Column names for trajectory dumps.
    fn state_labels(&self) -> &'static [&'static str];

    /// Drift term `f(x)`.
    fn drift(&self, x: &[f64], delta: f64) -> Vec<f64>;
    /// Input matrix `H(x)`, row-major `state_dim × action_dim`.
    fn input_matrix(&self, x: &[f64], delta: f64) -> Vec<f64>;
    fn reward(&self, x: &[f64], u: &[f64]) -> f64;

    /// The state constraint set `X`.
    fn state_constraints(&self) -> HalfplaneSet;
    /// The actuator set `U` in both representations.
    fn actuator(&self) -> (HalfplaneSet, VertexPolytope);

    fn sample_initial(&self, rng: &mut SimRng) -> Vec<f64>;
    /// Magnitude of the constrained coordinate (the quantity whose per-episode
    /// maximum is reported).
    fn constraint_metric(&self, x: &[f64]) -> f64;

    /// Squared distance to a tracking target, when the task has one.
    fn target_sq_distance(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Network-facing view of the state. Defaults to the raw state.
    fn observation(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    /// Multiplier applied to rewards before they reach the critic.
    fn reward_scale(&self) -> f64 {
        1.0
    }
}

type Ctor = fn(&EnvParams) -> Box<dyn ControlSystem>;

/// Name → constructor table for benchmark systems.
pub struct EnvRegistry {
    ctors: BTreeMap<&'static str, Ctor>,
}

impl EnvRegistry {
    pub fn empty() -> Self {
        Self {
            ctors: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, ctor: Ctor) {
        self.ctors.insert(name, ctor);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.ctors.keys().copied()
    }

    pub fn build(&self, name: &str, params: &EnvParams) -> Result<AffineEnv> {
        let ctor = self.ctors.get(name).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::Config(format!("unknown env `{name}` (known: {})", known.join(", ")))
        })?;
        AffineEnv::new(ctor(params), params)
    }
}

impl Default for EnvRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("pendulum", |_| Box::new(Pendulum::default()));
        r.register("mass_spring", |_| Box::new(MassSpring::default()));
        r.register("hovercraft", |p| Box::new(Hovercraft::new(p.theta_bar)));
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub x: Vec<f64>,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    /// Next state lies outside `X` by more than [`VIOLATION_TOL`].
    pub violated: bool,
    /// The safe action set at the pre-step state was empty.
    pub fallback_used: bool,
    pub done: bool,
}

/// A benchmark system together with its step size, horizon and constraint sets.
pub struct AffineEnv {
    system: Box<dyn ControlSystem>,
    delta: f64,
    horizon: usize,
    state_constraints: HalfplaneSet,
    actuator_constraints: HalfplaneSet,
    actuator_polytope: VertexPolytope,
}

impl std::fmt::Debug for AffineEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AffineEnv")
            .field("system", &self.system.name())
            .field("delta", &self.delta)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl AffineEnv {
    pub fn new(system: Box<dyn ControlSystem>, params: &EnvParams) -> Result<Self> {
        if !(params.delta > 0.0) {
            return Err(Error::Config(format!("delta must be > 0, got {}", params.delta)));
        }
        if params.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        let state_constraints = system.state_constraints();
        let (actuator_constraints, actuator_polytope) = system.actuator();
        if actuator_polytope.len() > system.max_vertices() {
            return Err(Error::TooManyVertices {
                count: actuator_polytope.len(),
                max: system.max_vertices(),
            });
        }
        Ok(Self {
            system,
            delta: params.delta,
            horizon: params.horizon,
            state_constraints,
            actuator_constraints,
            actuator_polytope,
        })
    }

    pub fn system(&self) -> &dyn ControlSystem {
        self.system.as_ref()
    }

    pub fn name(&self) -> &'static str {
        self.system.name()
    }

    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.system.action_dim()
    }

    pub fn max_vertices(&self) -> usize {
        self.system.max_vertices()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn state_constraints(&self) -> &HalfplaneSet {
        &self.state_constraints
    }

    pub fn actuator_constraints(&self) -> &HalfplaneSet {
        &self.actuator_constraints
    }

    pub fn actuator_polytope(&self) -> &VertexPolytope {
        &self.actuator_polytope
    }

    pub fn reset(&self, rng: &mut SimRng) -> EnvState {
        EnvState {
            x: self.system.sample_initial(rng),
            t: 0,
        }
    }

    /// `f(x) + H(x) u`, with the step index advanced.
    pub fn dynamics(&self, s: &EnvState, u: &[f64]) -> EnvState {
        let m = self.action_dim();
        let mut x = self.system.drift(&s.x, self.delta);
        let h = self.system.input_matrix(&s.x, self.delta);
        for (i, xi) in x.iter_mut().enumerate() {
            for j in 0..m {
                *xi += h[i * m + j] * u[j];
            }
        }
        EnvState { x, t: s.t + 1 }
    }

    pub fn reward(&self, s: &EnvState, u: &[f64]) -> f64 {
        self.system.reward(&s.x, u)
    }

    /// Action-space constraints `S_t` that keep the next state in `X`.
    ///
    /// Rows of `X` that the action cannot influence are returned separately
    /// as a flag: `true` if any of them is already violated by the drift.
    pub fn state_preimage(&self, s: &EnvState) -> (Option<HalfplaneSet>, bool) {
        let m = self.action_dim();
        let f = self.system.drift(&s.x, self.delta);
        let h = self.system.input_matrix(&s.x, self.delta);
        let mut rows = Vec::new();
        let mut uncontrollable_violation = false;
        for c in self.state_constraints.iter() {
            let a = c.normal();
            let normal: Vec<f64> = (0..m)
                .map(|j| a.iter().enumerate().map(|(i, ai)| ai * h[i * m + j]).sum())
                .collect();
            let offset = c.offset() - a.iter().zip(&f).map(|(ai, fi)| ai * fi).sum::<f64>();
            match Halfplane::new(normal, offset) {
                Ok(hp) => rows.push(hp),
                Err(Error::ZeroNormal) => uncontrollable_violation |= offset < -VIOLATION_TOL,
                Err(_) => uncontrollable_violation = true,
            }
        }
        let set = if rows.is_empty() {
            None
        } else {
            HalfplaneSet::new(rows).ok()
        };
        (set, uncontrollable_violation)
    }

    /// `U_t = S_t ∩ U` as a canonical vertex polytope.
    ///
    /// When the intersection is empty the point of `U` closest to `S_t` is
    /// returned as the only vertex and the flag is set.
    pub fn safe_action_polytope(&self, s: &EnvState) -> (VertexPolytope, bool) {
        let (preimage, blocked) = self.state_preimage(s);
        let Some(preimage) = preimage else {
            return (self.actuator_polytope.clone(), blocked);
        };
        match geometry::intersect(&self.actuator_polytope, &preimage) {
            Some(p) if !blocked => (p, false),
            Some(p) => (p, true),
            None => (
                geometry::closest_point_fallback(&preimage, &self.actuator_polytope),
                true,
            ),
        }
    }

    /// Amount by which `x` leaves `X` (zero inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.state_constraints.max_residual(x).max(0.0)
    }

    pub fn constraint_metric(&self, x: &[f64]) -> f64 {
        self.system.constraint_metric(x)
    }

    pub fn observe(&self, s: &EnvState) -> Vec<f64> {
        self.system.observation(&s.x)
    }

    pub fn step(&self, s: &EnvState, u: &[f64]) -> StepOutcome {
        let (_, fallback_used) = self.safe_action_polytope(s);
        let next_state = self.dynamics(s, u);
        let reward = self.reward(s, u);
        let violated = self.violation(&next_state.x) > VIOLATION_TOL;
        let done = next_state.t >= self.horizon;
        StepOutcome {
            next_state,
            reward,
            violated,
            fallback_used,
            done,
        }
    }
}
