use ndarray::{Array2, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};

use super::{softmax, ActOutput, BatchTape, HeadCache, Policy, SafeLayerInput};
use crate::envs::{AffineEnv, SimRng};
use crate::error::{Error, Result};
use crate::geometry::convex_combination;
use crate::nets::{GradBundle, Mlp, MlpSpec, OutputActivation};

/// Vertex network: trunk logits → softmax → convex combination of the padded
/// safe-polytope vertices. Any logits, noisy or not, yield an action inside
/// the polytope.
#[derive(Debug, Clone)]
pub struct VnPolicy {
    trunk: Mlp,
    max_vertices: usize,
    action_dim: usize,
}

impl VnPolicy {
    pub fn new(env: &AffineEnv, hidden: &[usize], rng: &mut SimRng) -> Self {
        let mut sizes = vec![env.state_dim()];
        sizes.extend_from_slice(hidden);
        sizes.push(env.max_vertices());
        let spec = MlpSpec::new(sizes, OutputActivation::Identity).expect("valid trunk spec");
        Self::from_trunk(Mlp::init(spec, rng), env.action_dim())
    }

    pub fn from_trunk(trunk: Mlp, action_dim: usize) -> Self {
        let max_vertices = trunk.spec().output_dim();
        Self {
            trunk,
            max_vertices,
            action_dim,
        }
    }

    pub fn max_vertices(&self) -> usize {
        self.max_vertices
    }

    /// Gradient of `upstream · action(state)` with respect to the trunk, for
    /// the noise-free action on `safe`.
    pub fn action_grad(
        &self,
        state: &[f64],
        safe: &SafeLayerInput,
        upstream: &[f64],
    ) -> Result<GradBundle> {
        let states = ArrayView2::from_shape((1, state.len()), state)
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let verts = ArrayView2::from_shape((1, safe.padded.coords().len()), safe.padded.coords())
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let up = ArrayView2::from_shape((1, upstream.len()), upstream)
            .map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let tape = self.batch_actions(&self.trunk, states, verts)?;
        self.batch_backward(&self.trunk, &tape, up)
    }
}

impl Policy for VnPolicy {
    fn name(&self) -> &'static str {
        "vn"
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
        true
    }

    fn vertex_row_len(&self) -> usize {
        self.max_vertices * self.action_dim
    }

    fn act(
        &self,
        state: &[f64],
        safe: Option<&SafeLayerInput>,
        noise_std: f64,
        rng: &mut SimRng,
    ) -> Result<ActOutput> {
        let safe = safe.ok_or_else(|| Error::Config("vertex network needs a safe polytope".into()))?;
        if safe.padded.len() != self.max_vertices {
            return Err(Error::TooManyVertices {
                count: safe.padded.len(),
                max: self.max_vertices,
            });
        }
        let (mut logits, _) = self.trunk.forward(state)?;
        if noise_std > 0.0 {
            let normal = Normal::new(0.0, noise_std).map_err(|e| Error::Config(e.to_string()))?;
            logits.iter_mut().for_each(|l| *l += normal.sample(rng));
        }
        let weights = softmax(&logits);
        let action = convex_combination(&safe.padded, &weights)?;
        Ok(ActOutput {
            action,
            logits: Some(logits),
            weights: Some(weights),
        })
    }

    fn batch_actions(
        &self,
        trunk: &Mlp,
        states: ArrayView2<f64>,
        vertices: ArrayView2<f64>,
    ) -> Result<BatchTape> {
        let (n, m) = (self.max_vertices, self.action_dim);
        if vertices.ncols() != n * m || vertices.nrows() != states.nrows() {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: vertices.ncols(),
            });
        }
        let tape = trunk.forward_batch(states)?;
        let mut weights = tape.output().clone();
        for mut row in weights.rows_mut() {
            let w = softmax(row.as_slice().expect("contiguous row"));
            row.iter_mut().zip(w).for_each(|(r, w)| *r = w);
        }
        let batch = states.nrows();
        let mut actions = Array2::zeros((batch, m));
        for b in 0..batch {
            for i in 0..n {
                let w = weights[[b, i]];
                for k in 0..m {
                    actions[[b, k]] += w * vertices[[b, i * m + k]];
                }
            }
        }
        Ok(BatchTape {
            actions,
            trunk: tape,
            head: HeadCache::Vertex {
                weights,
                vertices: vertices.to_owned(),
            },
        })
    }

    fn batch_backward(
        &self,
        trunk: &Mlp,
        tape: &BatchTape,
        action_grad: ArrayView2<f64>,
    ) -> Result<GradBundle> {
        let HeadCache::Vertex { weights, vertices } = &tape.head else {
            return Err(Error::InvalidSpec("tape was not produced by a vertex head".into()));
        };
        let (n, m) = (self.max_vertices, self.action_dim);
        let batch = weights.nrows();
        // d/dw_i = P_i · g, then through the softmax Jacobian.
        let mut dlogits = Array2::zeros((batch, n));
        for b in 0..batch {
            let mut dw = vec![0.0; n];
            for (i, d) in dw.iter_mut().enumerate() {
                *d = (0..m).map(|k| vertices[[b, i * m + k]] * action_grad[[b, k]]).sum();
            }
            let inner: f64 = dw.iter().zip(weights.row(b)).map(|(d, w)| d * w).sum();
            for i in 0..n {
                dlogits[[b, i]] = weights[[b, i]] * (dw[i] - inner);
            }
        }
        debug_assert_eq!(dlogits.len_of(Axis(0)), batch);
        trunk.backward(&tape.trunk, dlogits.view())
    }

    fn clone_box(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}
