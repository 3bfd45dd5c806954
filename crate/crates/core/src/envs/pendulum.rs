use rand::Rng;

use super::{ControlSystem, SimRng, GRAVITY};
use crate::geometry::{Halfplane, HalfplaneSet, VertexPolytope};

/// Inverted pendulum, state `(θ, ω)`, torque `u ∈ [-15, 15]`, safe set `|θ| <= 1`.
#[derive(Debug, Clone)]
pub struct Pendulum {
    pub mass: f64,
    pub length: f64,
    pub max_torque: f64,
    pub max_angle: f64,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 1.0,
            max_torque: 15.0,
            max_angle: 1.0,
        }
    }
}

impl Pendulum {
    fn gravity_gain(&self) -> f64 {
        3.0 * GRAVITY / (2.0 * self.length)
    }

    fn torque_gain(&self) -> f64 {
        3.0 / (self.mass * self.length * self.length)
    }
}

impl ControlSystem for Pendulum {
    fn name(&self) -> &'static str {
        "pendulum"
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
        &["theta", "omega"]
    }

    fn drift(&self, x: &[f64], delta: f64) -> Vec<f64> {
        let (theta, omega) = (x[0], x[1]);
        let g = self.gravity_gain() * theta.sin();
        vec![
            theta + omega * delta + g * delta * delta,
            omega + g * delta,
        ]
    }

    fn input_matrix(&self, _x: &[f64], delta: f64) -> Vec<f64> {
        let k = self.torque_gain();
        vec![k * delta * delta, k * delta]
    }

    fn reward(&self, x: &[f64], u: &[f64]) -> f64 {
        -(x[0] * x[0] + 0.1 * x[1] * x[1] + 0.001 * u[0] * u[0])
    }

    fn state_constraints(&self) -> HalfplaneSet {
        HalfplaneSet::new(vec![
            Halfplane::new(vec![1.0, 0.0], self.max_angle).expect("non-zero"),
            Halfplane::new(vec![-1.0, 0.0], self.max_angle).expect("non-zero"),
        ])
        .expect("non-empty")
    }

    fn actuator(&self) -> (HalfplaneSet, VertexPolytope) {
        (
            HalfplaneSet::from_box(&[-self.max_torque], &[self.max_torque]).expect("box"),
            VertexPolytope::from_interval(-self.max_torque, self.max_torque),
        )
    }

    fn sample_initial(&self, rng: &mut SimRng) -> Vec<f64> {
        let theta = rng.gen_range(-self.max_angle..=self.max_angle);
        let omega = rng.gen_range(-1.0..=1.0);
        vec![theta, omega]
    }

    fn constraint_metric(&self, x: &[f64]) -> f64 {
        x[0].abs()
    }
}
