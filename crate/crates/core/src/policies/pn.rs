use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, Normal};

use super::{ActOutput, BatchTape, HeadCache, Policy, SafeLayerInput};
use crate::envs::{AffineEnv, EnvState, SimRng};
use crate::error::{Error, Result};
use crate::geometry::HalfplaneSet;
use crate::nets::{GradBundle, Mlp, MlpSpec, OutputActivation};

/// Reward penalty per unit of state-constraint violation.
pub const DEFAULT_PENALTY: f64 = 100.0;

/// Soft penalty `-coef · violation(next_state)` added to the baseline's reward.
pub fn pn_penalty(env: &AffineEnv, next_state: &EnvState, coef: f64) -> f64 {
    -coef * env.violation(&next_state.x)
}

/// Penalty baseline: `tanh` trunk mapped onto the actuator bounding box, then
/// truncated into the actuator set.
#[derive(Debug, Clone)]
pub struct PnPolicy {
    trunk: Mlp,
    center: Vec<f64>,
    half_width: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    actuator: HalfplaneSet,
}

impl PnPolicy {
    pub fn new(env: &AffineEnv, hidden: &[usize], rng: &mut SimRng) -> Self {
        let mut sizes = vec![env.state_dim()];
        sizes.extend_from_slice(hidden);
        sizes.push(env.action_dim());
        let spec = MlpSpec::new(sizes, OutputActivation::Tanh).expect("valid trunk spec");
        Self::from_trunk(Mlp::init(spec, rng), env)
    }

    pub fn from_trunk(trunk: Mlp, env: &AffineEnv) -> Self {
        let (lo, hi) = env.actuator_polytope().bounding_box();
        let center = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let half_width = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (h - l)).collect();
        Self {
            trunk,
            center,
            half_width,
            lo,
            hi,
            actuator: env.actuator_constraints().clone(),
        }
    }

    fn scale(&self, squashed: &[f64]) -> Vec<f64> {
        squashed
            .iter()
            .zip(&self.center)
            .zip(&self.half_width)
            .map(|((y, c), h)| c + h * y)
            .collect()
    }

    /// Clamp into the actuator bounding box, then pull any point still
    /// outside a constraint radially toward the origin onto its boundary.
    pub fn truncate(&self, raw: &[f64]) -> Vec<f64> {
        let mut u: Vec<f64> = raw
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect();
        for hp in self.actuator.iter() {
            let s: f64 = hp.normal().iter().zip(&u).map(|(a, x)| a * x).sum();
            if s > hp.offset() && hp.offset() > 0.0 {
                let k = hp.offset() / s;
                u.iter_mut().for_each(|x| *x *= k);
            }
        }
        u
    }

    /// `J^T g` for [`Self::truncate`] at a point inside the bounding box.
    fn truncate_vjp(&self, raw: &[f64], grad: &[f64]) -> Vec<f64> {
        let mut g = grad.to_vec();
        for hp in self.actuator.iter() {
            let s: f64 = hp.normal().iter().zip(raw).map(|(a, x)| a * x).sum();
            if s > hp.offset() && hp.offset() > 0.0 {
                // u' = (b/s) u  ⇒  J^T g = (b/s) (g - n (u·g)/s)
                let k = hp.offset() / s;
                let ug: f64 = raw.iter().zip(&g).map(|(x, y)| x * y).sum();
                g = g
                    .iter()
                    .zip(hp.normal())
                    .map(|(gi, ni)| k * (gi - ni * ug / s))
                    .collect();
            }
        }
        g
    }
}

impl Policy for PnPolicy {
    fn name(&self) -> &'static str {
        "pn"
    }

    fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    fn trunk_mut(&mut self) -> &mut Mlp {
        &mut self.trunk
    }

    fn set_trunk(&mut self, trunk: Mlp) -> Result<()> {
        if trunk.spec() != self.trunk.spec() {
            return Err(Error::InvalidSpec("trunk spec differs".into()));
        }
        self.trunk = trunk;
        Ok(())
    }

    fn needs_vertices(&self) -> bool {
        false
    }

    fn vertex_row_len(&self) -> usize {
        0
    }

    /// `noise_std` is relative to the actuator half-width.
    fn act(
        &self,
        state: &[f64],
        _safe: Option<&SafeLayerInput>,
        noise_std: f64,
        rng: &mut SimRng,
    ) -> Result<ActOutput> {
        let (y, _) = self.trunk.forward(state)?;
        let mut raw = self.scale(&y);
        if noise_std > 0.0 {
            let normal = Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?;
            for (r, h) in raw.iter_mut().zip(&self.half_width) {
                *r += h * normal.sample(rng);
            }
        }
        Ok(ActOutput {
            action: self.truncate(&raw),
            logits: None,
            weights: None,
        })
    }

    fn batch_actions(
        &self,
        trunk: &Mlp,
        states: ArrayView2<f64>,
        _vertices: ArrayView2<f64>,
    ) -> Result<BatchTape> {
        let tape = trunk.forward_batch(states)?;
        let y = tape.output();
        let m = y.ncols();
        let mut raw = Array2::zeros(y.dim());
        let mut actions = Array2::zeros(y.dim());
        for (b, row) in y.rows().into_iter().enumerate() {
            let r = self.scale(row.as_slice().expect("contiguous row"));
            let u = self.truncate(&r);
            for k in 0..m {
                raw[[b, k]] = r[k];
                actions[[b, k]] = u[k];
            }
        }
        Ok(BatchTape {
            actions,
            trunk: tape,
            head: HeadCache::Squashed { raw },
        })
    }

    fn batch_backward(
        &self,
        trunk: &Mlp,
        tape: &BatchTape,
        action_grad: ArrayView2<f64>,
    ) -> Result<GradBundle> {
        let HeadCache::Squashed { raw } = &tape.head else {
            return Err(Error::InvalidSpec("tape was not produced by a squashed head".into()));
        };
        let mut dy = Array2::zeros(raw.dim());
        for b in 0..raw.nrows() {
            let r = raw.row(b).to_vec();
            let g = action_grad.row(b).to_vec();
            let gr = self.truncate_vjp(&r, &g);
            for (k, h) in self.half_width.iter().enumerate() {
                dy[[b, k]] = h * gr[k];
            }
        }
        trunk.backward(&tape.trunk, dy.view())
    }

    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}
