use super::{ControlSystem, SimRng};
use crate::geometry::{canonical_order, Halfplane, HalfplaneSet, VertexPolytope};

/// Two-dimensional single integrator `x' = x + u`.
///
/// `X` is the unit square, `U = {0 <= u1 <= 1, 0 <= u2 <= 1, u1 + u2 <= 1.5}`,
/// and episodes start at `(0.5, 0.5)`. Not registered by default; it exists to
/// exercise the 2D intersection path on a hand-checkable case.
#[derive(Debug, Clone, Default)]
pub struct IdentityPlane;

impl ControlSystem for IdentityPlane {
    fn name(&self) -> &'static str {
        "identity_plane"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn max_vertices(&self) -> usize {
        5
    }

    fn state_labels(&self) -> &'static [&'static str] {
        &["x1", "x2"]
    }

    fn drift(&self, x: &[f64], _delta: f64) -> Vec<f64> {
        x.to_vec()
    }

    fn input_matrix(&self, _x: &[f64], _delta: f64) -> Vec<f64> {
        vec![1.0, 0.0, 0.0, 1.0]
    }

    fn reward(&self, x: &[f64], _u: &[f64]) -> f64 {
        -((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2))
    }

    fn state_constraints(&self) -> HalfplaneSet {
        HalfplaneSet::from_box(&[0.0, 0.0], &[1.0, 1.0]).expect("box")
    }

    fn actuator(&self) -> (HalfplaneSet, VertexPolytope) {
        let mut rows: Vec<Halfplane> = HalfplaneSet::from_box(&[0.0, 0.0], &[1.0, 1.0])
            .expect("box")
            .iter()
            .cloned()
            .collect();
        rows.push(Halfplane::new(vec![1.0, 1.0], 1.5).expect("non-zero"));
        let poly = canonical_order(&[[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 1.0]])
            .expect("pentagon");
        (HalfplaneSet::new(rows).expect("non-empty"), poly)
    }

    fn sample_initial(&self, _rng: &mut SimRng) -> Vec<f64> {
        vec![0.5, 0.5]
    }

    fn constraint_metric(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max)
    }
}
