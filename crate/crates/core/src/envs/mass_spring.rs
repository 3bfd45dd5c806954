use rand::Rng;

use super::{ControlSystem, SimRng};
use crate::geometry::{Halfplane, HalfplaneSet, VertexPolytope};

/// Undamped mass on a spring, state `(x, v)`, force `u ∈ [-1, 1]`, safe set `|v| <= 1`.
#[derive(Debug, Clone)]
pub struct MassSpring {
    pub mass: f64,
    pub stiffness: f64,
    pub max_force: f64,
    pub max_speed: f64,
}

impl Default for MassSpring {
    fn default() -> Self {
        Self {
            mass: 1.0,
            stiffness: 1.0,
            max_force: 1.0,
            max_speed: 1.0,
        }
    }
}

impl ControlSystem for MassSpring {
    fn name(&self) -> &'static str {
        "mass_spring"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn max_vertices(&self) -> usize {
        2
    }

    fn state_labels(&self) -> &'static [&'static str] {
        &["x", "v"]
    }

    fn drift(&self, x: &[f64], delta: f64) -> Vec<f64> {
        let (pos, vel) = (x[0], x[1]);
        vec![
            pos + delta * vel,
            -(self.stiffness / self.mass) * delta * pos + vel,
        ]
    }

    fn input_matrix(&self, _x: &[f64], delta: f64) -> Vec<f64> {
        vec![0.0, delta / self.mass]
    }

    fn reward(&self, x: &[f64], _u: &[f64]) -> f64 {
        -(x[0] * x[0] + x[1] * x[1])
    }

    fn state_constraints(&self) -> HalfplaneSet {
        HalfplaneSet::new(vec![
            Halfplane::new(vec![0.0, 1.0], self.max_speed).expect("non-zero"),
            Halfplane::new(vec![0.0, -1.0], self.max_speed).expect("non-zero"),
        ])
        .expect("non-empty")
    }

    fn actuator(&self) -> (HalfplaneSet, VertexPolytope) {
        (
            HalfplaneSet::from_box(&[-self.max_force], &[self.max_force]).expect("box"),
            VertexPolytope::from_interval(-self.max_force, self.max_force),
        )
    }

    fn sample_initial(&self, rng: &mut SimRng) -> Vec<f64> {
        let pos = rng.gen_range(-2.0..=2.0);
        let vel = rng.gen_range(-self.max_speed..=self.max_speed);
        vec![pos, vel]
    }

    fn constraint_metric(&self, x: &[f64]) -> f64 {
        x[1].abs()
    }
}
