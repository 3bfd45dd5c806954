//! Policy heads on top of a feed-forward trunk.
//!
//! Two strategies implement [`Policy`]: the vertex network ([`VnPolicy`]),
//! which turns trunk outputs into convex-combination weights over the current
//! safe polytope's vertices, and the penalty baseline ([`PnPolicy`]), which
//! squashes the trunk through `tanh` and truncates to the actuator set. Heads
//! are looked up by name in a [`PolicyRegistry`].

mod pn;
mod vn;

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};

use crate::envs::{AffineEnv, SimRng};
use crate::error::{Error, Result};
use crate::geometry::{PointList, VertexPolytope};
use crate::nets::{GradBundle, Mlp, Tape};

pub use pn::{pn_penalty, PnPolicy, DEFAULT_PENALTY};
pub use vn::VnPolicy;

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Repeats the canonical vertex list cyclically until it holds `n` points.
pub fn pad_vertices(poly: &VertexPolytope, n: usize) -> Result<PointList> {
    let count = poly.len();
    if count > n {
        return Err(Error::TooManyVertices { count, max: n });
    }
    let coords = (0..n)
        .flat_map(|i| poly.vertex(i % count).iter().copied())
        .collect();
    Ok(PointList::new(poly.dim(), coords))
}

/// The safe polytope for one state together with its padded vertex list.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeLayerInput {
    pub polytope: VertexPolytope,
    pub padded: PointList,
}

impl SafeLayerInput {
    pub fn new(polytope: VertexPolytope, n: usize) -> Result<Self> {
        let padded = pad_vertices(&polytope, n)?;
        Ok(Self { polytope, padded })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActOutput {
    pub action: Vec<f64>,
    /// Noisy logits fed to the softmax (vertex network only).
    pub logits: Option<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
}

/// Batched deterministic forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchTape {
    pub actions: Array2<f64>,
    pub(crate) trunk: Tape,
    pub(crate) head: HeadCache,
}

#[derive(Debug, Clone)]
pub(crate) enum HeadCache {
    Vertex {
        weights: Array2<f64>,
        vertices: Array2<f64>,
    },
    Squashed {
        /// Affinely scaled `tanh` output before truncation.
        raw: Array2<f64>,
    },
}

/// A deterministic policy: trunk parameters plus an output head.
pub trait Policy: Send {
    fn name(&self) -> &'static str;
    fn trunk(&self) -> &Mlp;
    fn trunk_mut(&mut self) -> &mut Mlp;
    fn set_trunk(&mut self, trunk: Mlp) -> Result<()>;
    /// Whether actions depend on the per-step safe polytope.
    fn needs_vertices(&self) -> bool;
    /// Width of a padded vertex row (`N · action_dim`), zero if unused.
    fn vertex_row_len(&self) -> usize;

    /// Action for one state. `noise_std = 0` gives the greedy action.
    fn act(
        &self,
        state: &[f64],
        safe: Option<&SafeLayerInput>,
        noise_std: f64,
        rng: &mut SimRng,
    ) -> Result<ActOutput>;

    /// Noise-free actions for a batch, computed with `trunk` (the online or
    /// the target copy). `vertices` is `batch × vertex_row_len`.
    fn batch_actions(
        &self,
        trunk: &Mlp,
        states: ArrayView2<f64>,
        vertices: ArrayView2<f64>,
    ) -> Result<BatchTape>;

    /// Gradient of `Σ_b action_grad[b] · action[b]` with respect to the trunk.
    fn batch_backward(
        &self,
        trunk: &Mlp,
        tape: &BatchTape,
        action_grad: ArrayView2<f64>,
    ) -> Result<GradBundle>;

    fn clone_box(&self) -> Box<dyn Policy>;
}

impl Clone for Box<dyn Policy> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

type Ctor = fn(&AffineEnv, &[usize], &mut SimRng) -> Box<dyn Policy>;

/// Name → constructor table for policy heads.
pub struct PolicyRegistry {
    ctors: BTreeMap<&'static str, Ctor>,
}

impl PolicyRegistry {
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

    pub fn contains(&self, name: &str) -> bool {
        self.ctors.contains_key(name)
    }

    pub fn build(
        &self,
        name: &str,
        env: &AffineEnv,
        hidden: &[usize],
        rng: &mut SimRng,
    ) -> Result<Box<dyn Policy>> {
        let ctor = self.ctors.get(name).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::Config(format!("unknown policy `{name}` (known: {})", known.join(", ")))
        })?;
        Ok(ctor(env, hidden, rng))
    }
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("vn", |env, hidden, rng| Box::new(VnPolicy::new(env, hidden, rng)));
        r.register("pn", |env, hidden, rng| Box::new(PnPolicy::new(env, hidden, rng)));
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let w = softmax(&[1000.0, 0.0]);
        assert!(w.iter().all(|v| v.is_finite()));
        assert!((w[0] - 1.0).abs() < 1e-12 && w[1] < 1e-300);
        let w = softmax(&[2f64.ln(), 0.0, 0.0]);
        for (a, b) in w.iter().zip([0.5, 0.25, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn padding_is_cyclic() {
        let seg = VertexPolytope::from_interval(-1.0, 2.0);
        let p = pad_vertices(&seg, 5).unwrap();
        assert_eq!(p.coords(), &[-1.0, 2.0, -1.0, 2.0, -1.0]);

        let pent = crate::geometry::canonical_order(&[
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 0.5],
            [0.5, 1.0],
            [0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(pad_vertices(&pent, 5).unwrap(), *pent.points());

        let single = VertexPolytope::point(&[15.0]);
        let p = pad_vertices(&single, 2).unwrap();
        assert_eq!(p.coords(), &[15.0, 15.0]);
        for w in [[0.3, 0.7], [1.0, 0.0]] {
            let u = crate::geometry::convex_combination(&p, &w).unwrap();
            assert_eq!(u, vec![15.0]);
        }

        assert_eq!(
            pad_vertices(&pent, 2),
            Err(Error::TooManyVertices { count: 5, max: 2 })
        );
    }

    #[test]
    fn registry_builds_both_heads() {
        use rand::SeedableRng;
        let env = crate::envs::EnvRegistry::default()
            .build("pendulum", &Default::default())
            .unwrap();
        let reg = PolicyRegistry::default();
        let mut rng = SimRng::seed_from_u64(0);
        assert_eq!(reg.names().collect::<Vec<_>>(), ["pn", "vn"]);
        assert!(reg.build("vn", &env, &[8], &mut rng).unwrap().needs_vertices());
        assert!(!reg.build("pn", &env, &[8], &mut rng).unwrap().needs_vertices());
        assert!(reg.build("sac", &env, &[8], &mut rng).is_err());
    }

    use crate::envs::{AffineEnv, EnvParams, EnvRegistry, EnvState};
    use crate::geometry::{contains, MEMBERSHIP_TOL};
    use rand::{Rng, SeedableRng};

    fn envs() -> Vec<AffineEnv> {
        ["pendulum", "mass_spring", "hovercraft"]
            .iter()
            .map(|n| EnvRegistry::default().build(n, &EnvParams::default()).unwrap())
            .collect()
    }

    /// Arbitrary state: every coordinate in `[-3, 3]`, so many lie outside `X`.
    fn random_state(env: &AffineEnv, r: &mut SimRng) -> EnvState {
        EnvState {
            x: (0..env.state_dim()).map(|_| r.gen_range(-3.0..3.0)).collect(),
            t: 0,
        }
    }

    #[test]
    fn vertex_actions_stay_in_safe_set_for_any_noise() {
        let mut r = SimRng::seed_from_u64(99);
        for env in envs() {
            let mut policy = PolicyRegistry::default().build("vn", &env, &[8, 8], &mut r).unwrap();
            for draw in 0..10_000 {
                if draw % 500 == 0 {
                    // Fresh, deliberately large trunk weights.
                    for l in policy.trunk_mut().layers_mut() {
                        l.weight.mapv_inplace(|_| r.gen_range(-5.0..5.0));
                        l.bias.mapv_inplace(|_| r.gen_range(-5.0..5.0));
                    }
                }
                let s = random_state(&env, &mut r);
                let (poly, fallback) = env.safe_action_polytope(&s);
                let safe = SafeLayerInput::new(poly, env.max_vertices()).unwrap();
                let noise = r.gen_range(0.0..3.0);
                let u = policy.act(&s.x, Some(&safe), noise, &mut r).unwrap().action;
                assert!(contains(env.actuator_constraints(), &u, MEMBERSHIP_TOL));
                if !fallback {
                    let (pre, _) = env.state_preimage(&s);
                    assert!(contains(&pre.unwrap(), &u, MEMBERSHIP_TOL), "{}: {u:?}", env.name());
                }
            }
        }
    }

    #[test]
    fn baseline_actions_stay_in_actuator_set() {
        let mut r = SimRng::seed_from_u64(7);
        for env in envs() {
            let mut policy = PolicyRegistry::default().build("pn", &env, &[8], &mut r).unwrap();
            for draw in 0..10_000 {
                if draw % 500 == 0 {
                    for l in policy.trunk_mut().layers_mut() {
                        l.weight.mapv_inplace(|_| r.gen_range(-5.0..5.0));
                    }
                }
                let s = random_state(&env, &mut r);
                let noise = r.gen_range(0.0..2.0);
                let u = policy.act(&s.x, None, noise, &mut r).unwrap().action;
                assert!(contains(env.actuator_constraints(), &u, 1e-9), "{}: {u:?}", env.name());
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn softmax_is_a_permutation_equivariant_simplex_map(
                logits in prop::collection::vec(-50.0..50.0f64, 1..8),
                seed in any::<u64>(),
            ) {
                use rand::seq::SliceRandom;
                let w = softmax(&logits);
                prop_assert!(w.iter().all(|&v| v >= 0.0));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                let mut perm: Vec<usize> = (0..logits.len()).collect();
                perm.shuffle(&mut SimRng::seed_from_u64(seed));
                let permuted: Vec<f64> = perm.iter().map(|&i| logits[i]).collect();
                let wp = softmax(&permuted);
                for (k, &i) in perm.iter().enumerate() {
                    prop_assert!((wp[k] - w[i]).abs() <= 1e-15);
                }
            }
        }
    }
}
