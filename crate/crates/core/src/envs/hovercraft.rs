use super::{ControlSystem, SimRng, GRAVITY};
use crate::geometry::{canonical_order, Halfplane, HalfplaneSet, VertexPolytope};

/// Planar hovercraft with two coupled fans.
///
/// State `(x, v_x, y, v_y, θ, v_θ)`, fan forces `u1, u2 >= 0` with
/// `u1 + u2 <= 20`, tilt kept in `[-θ̄, θ̄]`. The task tracks `(5, 5)` from rest
/// at the origin.
#[derive(Debug, Clone)]
pub struct Hovercraft {
    pub mass: f64,
    pub arm: f64,
    pub max_total_thrust: f64,
    pub theta_bar: f64,
    pub target: [f64; 2],
}

impl Hovercraft {
    pub fn new(theta_bar: f64) -> Self {
        Self {
            mass: 1.0,
            arm: 1.0,
            max_total_thrust: 20.0,
            theta_bar,
            target: [5.0, 5.0],
        }
    }
}

impl ControlSystem for Hovercraft {
    fn name(&self) -> &'static str {
        "hovercraft"
    }

    fn state_dim(&self) -> usize {
        6
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn max_vertices(&self) -> usize {
        5
    }

    fn state_labels(&self) -> &'static [&'static str] {
        &["x", "vx", "y", "vy", "theta", "vtheta"]
    }

    fn drift(&self, s: &[f64], delta: f64) -> Vec<f64> {
        let (x, vx, y, vy, th, vth) = (s[0], s[1], s[2], s[3], s[4], s[5]);
        let d2 = delta * delta;
        vec![
            x + vx * delta,
            vx,
            y + vy * delta - GRAVITY / (2.0 * self.mass) * d2,
            vy - GRAVITY / self.mass * delta,
            th + vth * delta,
            vth,
        ]
    }

    fn input_matrix(&self, s: &[f64], delta: f64) -> Vec<f64> {
        let th = s[4];
        let d2 = delta * delta;
        let (sin, cos) = th.sin_cos();
        let half_m = 1.0 / (2.0 * self.mass);
        let inv_m = 1.0 / self.mass;
        let half_l = 1.0 / (2.0 * self.arm);
        let inv_l = 1.0 / self.arm;
        vec![
            half_m * sin * d2, half_m * sin * d2,
            inv_m * sin * delta, inv_m * sin * delta,
            half_m * cos * d2, half_m * cos * d2,
            inv_m * cos * delta, inv_m * cos * delta,
            half_l * d2, -half_l * d2,
            inv_l * delta, -inv_l * delta,
        ]
    }

    fn reward(&self, s: &[f64], u: &[f64]) -> f64 {
        let (x, vx, y, vy, th, vth) = (s[0], s[1], s[2], s[3], s[4], s[5]);
        let dx = x - self.target[0];
        let dy = y - self.target[1];
        -dx * dx
            - dy * dy
            - th * th
            - 0.1 * (vx * vx + vy * vy + vth * vth)
            - 0.001 * (u[0] * u[0] + u[1] * u[1])
    }

    fn state_constraints(&self) -> HalfplaneSet {
        let row = |sign: f64| {
            let mut n = vec![0.0; 6];
            n[4] = sign;
            Halfplane::new(n, self.theta_bar).expect("non-zero")
        };
        HalfplaneSet::new(vec![row(1.0), row(-1.0)]).expect("non-empty")
    }

    fn actuator(&self) -> (HalfplaneSet, VertexPolytope) {
        let t = self.max_total_thrust;
        let hs = HalfplaneSet::new(vec![
            Halfplane::new(vec![-1.0, 0.0], 0.0).expect("non-zero"),
            Halfplane::new(vec![0.0, -1.0], 0.0).expect("non-zero"),
            Halfplane::new(vec![1.0, 1.0], t).expect("non-zero"),
        ])
        .expect("non-empty");
        let poly = canonical_order(&[[0.0, 0.0], [t, 0.0], [0.0, t]]).expect("triangle");
        (hs, poly)
    }

    fn sample_initial(&self, _rng: &mut SimRng) -> Vec<f64> {
        vec![0.0; 6]
    }

    fn constraint_metric(&self, s: &[f64]) -> f64 {
        s[4].abs()
    }

    fn target_sq_distance(&self, s: &[f64]) -> Option<f64> {
        let dx = s[0] - self.target[0];
        let dy = s[2] - self.target[1];
        Some(dx * dx + dy * dy)
    }

    /// Offsets from the target and velocities in units of 5, tilt and tilt
    /// rate relative to the bound.
    fn observation(&self, s: &[f64]) -> Vec<f64> {
        let tb = self.theta_bar;
        vec![
            (s[0] - self.target[0]) / 5.0,
            s[1] / 5.0,
            (s[2] - self.target[1]) / 5.0,
            s[3] / 5.0,
            s[4] / tb,
            0.1 * s[5] / tb,
        ]
    }

    fn reward_scale(&self) -> f64 {
        0.001
    }
}
