//! Convex polytope operations for 1D and 2D action spaces.
//!
//! Polytopes travel in two forms: an H-representation ([`HalfplaneSet`]) used
//! to describe constraint sets, and a V-representation ([`VertexPolytope`])
//! whose vertex order is canonical so that index `i` always addresses the same
//! geometric corner for a given vertex set.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Vertices closer than this are merged.
pub const DEDUP_TOL: f64 = 1e-9;
/// Slack allowed when checking that a point lies inside a constraint set.
pub const MEMBERSHIP_TOL: f64 = 1e-7;

/// `{u : normal · u <= offset}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfplane {
    normal: Vec<f64>,
    offset: f64,
}

impl Halfplane {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.is_empty() || normal.iter().all(|&a| a == 0.0) {
            return Err(Error::ZeroNormal);
        }
        if !offset.is_finite() || normal.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("halfplane".into()));
        }
        Ok(Self { normal, offset })
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Signed residual `normal · point - offset`; positive means outside.
    pub fn residual(&self, point: &[f64]) -> f64 {
        dot(&self.normal, point) - self.offset
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        self.residual(point) <= tol
    }
}

/// Convex set given as the intersection of halfplanes.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfplaneSet {
    constraints: Vec<Halfplane>,
}

impl HalfplaneSet {
    pub fn new(constraints: Vec<Halfplane>) -> Result<Self> {
        let first = constraints.first().ok_or(Error::EmptyConstraintSet)?;
        let dim = first.dim();
        if let Some(bad) = constraints.iter().find(|h| h.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        Ok(Self { constraints })
    }

    /// Axis-aligned box `lo <= u <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        let dim = lo.len();
        let mut constraints = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            constraints.push(Halfplane::new(e.clone(), hi[i])?);
            e[i] = -1.0;
            constraints.push(Halfplane::new(e, -lo[i])?);
        }
        Self::new(constraints)
    }

    pub fn dim(&self) -> usize {
        self.constraints[0].dim()
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Halfplane> {
        self.constraints.iter()
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        contains(self, point, tol)
    }

    /// Largest residual over all constraints (zero or negative when inside).
    pub fn max_residual(&self, point: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|h| h.residual(point))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl<'a> IntoIterator for &'a HalfplaneSet {
    type Item = &'a Halfplane;
    type IntoIter = std::slice::Iter<'a, Halfplane>;

    fn into_iter(self) -> Self::IntoIter {
        self.constraints.iter()
    }
}

/// True iff `normal · point <= offset + tol` for every constraint.
pub fn contains(hs: &HalfplaneSet, point: &[f64], tol: f64) -> bool {
    debug_assert_eq!(hs.dim(), point.len());
    hs.iter().all(|h| h.contains(point, tol))
}

/// A flat row-major list of points sharing one dimension. Duplicates allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct PointList {
    dim: usize,
    coords: Vec<f64>,
}

impl PointList {
    pub fn new(dim: usize, coords: Vec<f64>) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0, "ragged point list");
        Self { dim, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// V-representation of a convex polytope in one or two dimensions.
///
/// In 1D the vertices are sorted ascending. In 2D they run counter-clockwise
/// around the centroid, starting from the lexicographically smallest vertex.
/// Degenerate polytopes (a point, a segment) are valid.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexPolytope {
    points: PointList,
}

impl VertexPolytope {
    /// The segment `[lo, hi]` (a single point if the ends coincide).
    pub fn from_interval(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        let coords = if hi - lo <= DEDUP_TOL {
            vec![lo]
        } else {
            vec![lo, hi]
        };
        Self {
            points: PointList::new(1, coords),
        }
    }

    pub fn point(p: &[f64]) -> Self {
        Self {
            points: PointList::new(p.len(), p.to_vec()),
        }
    }

    /// Canonicalises arbitrary 1D or 2D vertex candidates.
    pub fn from_points(dim: usize, coords: &[f64]) -> Result<Self> {
        match dim {
            1 => {
                let lo = coords.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = coords.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if coords.is_empty() {
                    return Err(Error::EmptyInput);
                }
                Ok(Self::from_interval(lo, hi))
            }
            2 => {
                let pts: Vec<[f64; 2]> = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
                canonical_order(&pts)
            }
            d => Err(Error::DimensionMismatch { expected: 2, got: d }),
        }
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        self.points.point(i)
    }

    pub fn vertices(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.iter()
    }

    pub fn points(&self) -> &PointList {
        &self.points
    }

    /// Arithmetic mean of the vertices.
    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        for v in self.vertices() {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi;
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|ci| *ci /= n);
        c
    }

    /// Per-coordinate `(min, max)` over the vertices.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for v in self.vertices() {
            for k in 0..d {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Same vertex set within `tol`, position by position.
    pub fn approx_eq(&self, other: &VertexPolytope, tol: f64) -> bool {
        self.dim() == other.dim()
            && self.len() == other.len()
            && self
                .points
                .coords()
                .iter()
                .zip(other.points.coords())
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// Intersection of `[a_lo, a_hi]` and `[b_lo, b_hi]`, or `None` when disjoint.
pub fn intersect_interval(a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64) -> Option<(f64, f64)> {
    debug_assert!(a_lo <= a_hi && b_lo <= b_hi);
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    (lo <= hi).then_some((lo, hi))
}

fn lex_cmp(a: &[f64; 2], b: &[f64; 2]) -> Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

fn lex_min_1d(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Deduplicates 2D vertex candidates and orders them counter-clockwise around
/// their centroid, starting at the lexicographically smallest vertex.
///
/// The result depends only on the input multiset, not on its order.
pub fn canonical_order(points: &[[f64; 2]]) -> Result<VertexPolytope> {
    let mut sorted = points.to_vec();
    sorted.sort_by(lex_cmp);

    let mut kept: Vec<[f64; 2]> = Vec::with_capacity(sorted.len());
    for p in sorted {
        let dup = kept
            .iter()
            .any(|q| (p[0] - q[0]).hypot(p[1] - q[1]) <= DEDUP_TOL);
        if !dup {
            kept.push(p);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyInput);
    }

    let n = kept.len() as f64;
    let cx = kept.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = kept.iter().map(|p| p[1]).sum::<f64>() / n;
    let angle = |p: &[f64; 2]| (p[1] - cy).atan2(p[0] - cx);
    kept.sort_by(|a, b| {
        angle(a)
            .total_cmp(&angle(b))
            .then_with(|| lex_cmp(a, b))
    });

    let start = kept
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| lex_cmp(a, b))
        .map(|(i, _)| i)
        .unwrap_or(0);
    kept.rotate_left(start);

    let coords = kept.iter().flat_map(|p| [p[0], p[1]]).collect();
    Ok(VertexPolytope {
        points: PointList::new(2, coords),
    })
}

/// Clips a 2D polygon by one halfplane (Sutherland-Hodgman, single pass).
///
/// Returns `None` when nothing of the polygon survives. Degenerate results
/// (a point or a segment) come back as 1- or 2-vertex polytopes.
pub fn clip_polygon(poly: &VertexPolytope, hp: &Halfplane) -> Option<VertexPolytope> {
    assert_eq!(poly.dim(), 2, "clip_polygon works on 2D polytopes");
    assert_eq!(hp.dim(), 2, "clip_polygon works on 2D halfplanes");
    let eps = 1e-12 * (1.0 + hp.offset().abs());
    let n = poly.len();
    let verts: Vec<[f64; 2]> = poly.vertices().map(|v| [v[0], v[1]]).collect();

    let mut out: Vec<[f64; 2]> = Vec::with_capacity(n + 2);
    for i in 0..n {
        let cur = verts[i];
        let prev = verts[(i + n - 1) % n];
        let dc = hp.residual(&cur);
        let dp = hp.residual(&prev);
        let cur_in = dc <= eps;
        let prev_in = dp <= eps;
        if cur_in != prev_in {
            let t = (dp / (dp - dc)).clamp(0.0, 1.0);
            out.push([
                prev[0] + t * (cur[0] - prev[0]),
                prev[1] + t * (cur[1] - prev[1]),
            ]);
        }
        if cur_in {
            out.push(cur);
        }
    }
    if out.is_empty() {
        None
    } else {
        canonical_order(&out).ok()
    }
}

/// Restricts a 1D segment by `a·u <= b`.
fn clip_segment(poly: &VertexPolytope, hp: &Halfplane) -> Option<VertexPolytope> {
    let lo = poly.vertex(0)[0];
    let hi = poly.vertex(poly.len() - 1)[0];
    let a = hp.normal()[0];
    let bound = hp.offset() / a;
    let (lo2, hi2) = if a > 0.0 {
        (f64::NEG_INFINITY, bound)
    } else {
        (bound, f64::INFINITY)
    };
    intersect_interval(lo, hi, lo2, hi2).map(|(l, h)| VertexPolytope::from_interval(l, h))
}

/// Dimension-dispatching clip for 1D segments and 2D polygons.
pub fn clip(poly: &VertexPolytope, hp: &Halfplane) -> Option<VertexPolytope> {
    match poly.dim() {
        1 => clip_segment(poly, hp),
        2 => clip_polygon(poly, hp),
        d => panic!("unsupported polytope dimension {d}"),
    }
}

/// Intersects a V-polytope with every halfplane of `hs`.
pub fn intersect(poly: &VertexPolytope, hs: &HalfplaneSet) -> Option<VertexPolytope> {
    hs.iter().try_fold(poly.clone(), |acc, hp| clip(&acc, hp))
}

/// `Σ weights[i] · points[i]` after validating that `weights` lie on the simplex.
pub fn convex_combination(points: &PointList, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != points.len() {
        return Err(Error::WeightContract(format!(
            "{} weights for {} vertices",
            weights.len(),
            points.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::WeightContract(format!("negative or NaN weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightContract(format!("weights sum to {total}")));
    }
    let mut out = vec![0.0; points.dim()];
    for (w, v) in weights.iter().zip(points.iter()) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Closest point to `p` on the segment `a..b`.
fn project_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return a;
    }
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    [a[0] + t * d[0], a[1] + t * d[1]]
}

fn edges(v: &[[f64; 2]]) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
    let n = v.len();
    (0..n).map(move |i| (v[i], v[(i + 1) % n]))
}

/// Picks the lexicographically smallest candidate among those within a
/// relative tolerance of the best score.
fn best_candidate<const D: usize>(cands: &[([f64; D], f64)]) -> [f64; D] {
    let best = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + best.abs());
    cands
        .iter()
        .filter(|c| c.1 <= best + tol)
        .map(|c| c.0)
        .min_by(|a, b| lex_min_1d(a, b))
        .expect("at least one candidate")
}

/// The point of `base` nearest to the set described by `target`.
///
/// Used when `target ∩ base` is empty: the returned single-vertex polytope
/// stands in for the missing intersection. If `target` is itself empty the
/// vertex of `base` with the smallest worst-case residual is returned.
pub fn closest_point_fallback(target: &HalfplaneSet, base: &VertexPolytope) -> VertexPolytope {
    match base.dim() {
        1 => closest_point_1d(target, base),
        2 => closest_point_2d(target, base),
        d => panic!("unsupported polytope dimension {d}"),
    }
}

fn closest_point_1d(target: &HalfplaneSet, base: &VertexPolytope) -> VertexPolytope {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for h in target {
        let a = h.normal()[0];
        let bound = h.offset() / a;
        if a > 0.0 {
            hi = hi.min(bound);
        } else {
            lo = lo.max(bound);
        }
    }
    let cands: Vec<([f64; 1], f64)> = base
        .vertices()
        .map(|v| {
            let u = v[0];
            let score = if lo <= hi {
                (lo - u).max(u - hi).max(0.0)
            } else {
                target.max_residual(v)
            };
            ([u], score)
        })
        .collect();
    VertexPolytope::point(&best_candidate(&cands))
}

fn closest_point_2d(target: &HalfplaneSet, base: &VertexPolytope) -> VertexPolytope {
    let u_pts: Vec<[f64; 2]> = base.vertices().map(|v| [v[0], v[1]]).collect();
    let c = base.centroid();
    let diam = u_pts
        .iter()
        .flat_map(|a| u_pts.iter().map(move |b| dist(*a, *b)))
        .fold(0.0, f64::max);

    // S may be unbounded; work with S intersected with a box around U that is
    // large enough to hold the part of S nearest to U.
    let boxed = |half: f64| {
        let square = canonical_order(&[
            [c[0] - half, c[1] - half],
            [c[0] + half, c[1] - half],
            [c[0] + half, c[1] + half],
            [c[0] - half, c[1] + half],
        ])
        .expect("non-empty square");
        intersect(&square, target)
    };

    let mut half = 1.0 + diam + c[0].abs().max(c[1].abs());
    let mut s_poly = None;
    while half < 1e15 {
        if let Some(p) = boxed(half) {
            s_poly = Some(p);
            break;
        }
        half *= 16.0;
    }
    let Some(mut s_poly) = s_poly else {
        let cands: Vec<([f64; 2], f64)> = u_pts
            .iter()
            .map(|p| (*p, target.max_residual(p)))
            .collect();
        return VertexPolytope::point(&best_candidate(&cands));
    };
    let reach = s_poly
        .vertices()
        .map(|v| dist([v[0], v[1]], [c[0], c[1]]))
        .fold(f64::INFINITY, f64::min)
        + diam;
    if reach >= half {
        s_poly = boxed(2.0 * reach + 1.0).expect("larger box keeps the found vertex");
    }
    let s_pts: Vec<[f64; 2]> = s_poly.vertices().map(|v| [v[0], v[1]]).collect();

    let mut cands: Vec<([f64; 2], f64)> = Vec::new();
    for &p in &u_pts {
        for (a, b) in edges(&s_pts) {
            cands.push((p, dist(p, project_on_segment(p, a, b))));
        }
    }
    for &q in &s_pts {
        for (a, b) in edges(&u_pts) {
            let r = project_on_segment(q, a, b);
            cands.push((r, dist(q, r)));
        }
    }
    VertexPolytope::point(&best_candidate(&cands))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(pts: &[[f64; 2]]) -> VertexPolytope {
        canonical_order(pts).unwrap()
    }

    fn unit_square_hs() -> HalfplaneSet {
        HalfplaneSet::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn zero_normal_rejected() {
        assert_eq!(Halfplane::new(vec![0.0, 0.0], 1.0), Err(Error::ZeroNormal));
        assert_eq!(HalfplaneSet::new(vec![]), Err(Error::EmptyConstraintSet));
    }

    #[test]
    fn clip_square_inactive_and_excluding() {
        let sq = poly(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let inactive = Halfplane::new(vec![1.0, 0.0], 2.0).unwrap();
        assert!(clip_polygon(&sq, &inactive).unwrap().approx_eq(&sq, 1e-12));
        let excl = Halfplane::new(vec![1.0, 0.0], -1.0).unwrap();
        assert!(clip_polygon(&sq, &excl).is_none());
    }

    #[test]
    fn clip_to_a_point_and_a_segment() {
        let tri = poly(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]]);
        let corner = Halfplane::new(vec![1.0, 1.0], 0.0).unwrap();
        let p = clip_polygon(&tri, &corner).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.vertex(0), &[0.0, 0.0]);

        let edge = Halfplane::new(vec![0.0, 1.0], 0.0).unwrap();
        let s = clip_polygon(&tri, &edge).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.vertex(0), &[0.0, 0.0]);
        assert_eq!(s.vertex(1), &[20.0, 0.0]);
    }

    #[test]
    fn interval_examples() {
        assert_eq!(intersect_interval(-0.5, 0.5, 0.0, 1.0), Some((0.0, 0.5)));
        assert_eq!(intersect_interval(-0.6, 0.4, 0.0, 1.0), Some((0.0, 0.4)));
        assert_eq!(intersect_interval(2.0, 3.0, 0.0, 1.0), None);
    }

    #[test]
    fn canonical_order_examples() {
        let p = canonical_order(&[[1.0, 1.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(p.points().coords(), &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);

        let p = canonical_order(&[[0.0, 0.0], [1e-12, -1e-12]]).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.vertex(0), &[0.0, 0.0]);

        let p = canonical_order(&[[0.5, 0.5], [0.0, 0.5], [0.0, 0.0], [0.5, 0.0]]).unwrap();
        assert_eq!(p.points().coords(), &[0.0, 0.0, 0.5, 0.0, 0.5, 0.5, 0.0, 0.5]);

        assert_eq!(canonical_order(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn contains_examples() {
        let hs = unit_square_hs();
        assert!(contains(&hs, &[0.5, 0.5], 1e-9));
        assert!(contains(&hs, &[1.0 + 1e-10, 0.5], 1e-9));
        assert!(!contains(&hs, &[1.1, 0.5], 1e-9));
    }

    #[test]
    fn convex_combination_examples() {
        let sq = poly(&[[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]);
        let c = convex_combination(sq.points(), &[0.25; 4]).unwrap();
        assert!((c[0] - 0.25).abs() < 1e-15 && (c[1] - 0.25).abs() < 1e-15);

        for k in 0..4 {
            let mut w = [0.0; 4];
            w[k] = 1.0;
            assert_eq!(convex_combination(sq.points(), &w).unwrap(), sq.vertex(k));
        }

        let seg = VertexPolytope::from_interval(-15.0, 15.0);
        let u = convex_combination(seg.points(), &[0.6, 0.4]).unwrap();
        assert!((u[0] - (0.6 * -15.0 + 0.4 * 15.0)).abs() < 1e-12);
        assert!((u[0] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn convex_combination_contract() {
        let seg = VertexPolytope::from_interval(-1.0, 1.0);
        assert!(matches!(
            convex_combination(seg.points(), &[1.0]),
            Err(Error::WeightContract(_))
        ));
        assert!(matches!(
            convex_combination(seg.points(), &[1.5, -0.5]),
            Err(Error::WeightContract(_))
        ));
        assert!(matches!(
            convex_combination(seg.points(), &[0.5, 0.6]),
            Err(Error::WeightContract(_))
        ));
    }

    #[test]
    fn fallback_1d_picks_nearest_actuator_bound() {
        let u = VertexPolytope::from_interval(-15.0, 15.0);
        let below = HalfplaneSet::new(vec![
            Halfplane::new(vec![1.0], -20.0).unwrap(),
            Halfplane::new(vec![-1.0], 40.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(closest_point_fallback(&below, &u).vertex(0), &[-15.0]);
        let above = HalfplaneSet::new(vec![
            Halfplane::new(vec![1.0], 40.0).unwrap(),
            Halfplane::new(vec![-1.0], -20.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(closest_point_fallback(&above, &u).vertex(0), &[15.0]);
    }

    #[test]
    fn fallback_2d_slab() {
        let tri = poly(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]]);
        let slab = HalfplaneSet::new(vec![
            Halfplane::new(vec![1.0, -1.0], 50.0).unwrap(),
            Halfplane::new(vec![-1.0, 1.0], -40.0).unwrap(),
        ])
        .unwrap();
        let p = closest_point_fallback(&slab, &tri);
        assert_eq!(p.len(), 1);
        assert!((p.vertex(0)[0] - 20.0).abs() < 1e-9 && p.vertex(0)[1].abs() < 1e-9);
    }

    #[test]
    fn fallback_2d_far_away_target() {
        let tri = poly(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]]);
        // u1 + u2 >= 1e6, far outside any initial box.
        let far = HalfplaneSet::new(vec![Halfplane::new(vec![-1.0, -1.0], -1e6).unwrap()]).unwrap();
        let p = closest_point_fallback(&far, &tri);
        // Whole hypotenuse is equidistant; lexicographic tie-break picks (0, 20).
        assert!(p.vertex(0)[0].abs() < 1e-6 && (p.vertex(0)[1] - 20.0).abs() < 1e-6);
    }

    #[test]
    fn intersect_chains_clips() {
        let tri = poly(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]]);
        let slab = HalfplaneSet::new(vec![
            Halfplane::new(vec![1.0, -1.0], 2.0).unwrap(),
            Halfplane::new(vec![-1.0, 1.0], 2.0).unwrap(),
        ])
        .unwrap();
        let p = intersect(&tri, &slab).unwrap();
        assert_eq!(p.len(), 5);
        for v in p.vertices() {
            assert!(slab.contains(v, MEMBERSHIP_TOL));
        }
    }

    #[test]
    fn one_dimensional_clip() {
        let seg = VertexPolytope::from_interval(-1.0, 1.0);
        let hp = Halfplane::new(vec![-2.0], -1.0).unwrap(); // u >= 0.5
        let p = clip(&seg, &hp).unwrap();
        assert_eq!(p.points().coords(), &[0.5, 1.0]);
        let hp = Halfplane::new(vec![1.0], -3.0).unwrap();
        assert!(clip(&seg, &hp).is_none());
    }

    /// Andrew's monotone chain; CCW, collinear points dropped.
    fn hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        if pts.len() < 3 {
            return pts;
        }
        let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
            (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
        };
        let mut out: Vec<[f64; 2]> = Vec::new();
        for pass in 0..2 {
            let start = out.len();
            let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
                Box::new(pts.iter())
            } else {
                Box::new(pts.iter().rev())
            };
            for &p in iter {
                while out.len() >= start + 2 && cross(out[out.len() - 2], out[out.len() - 1], p) <= 0.0 {
                    out.pop();
                }
                out.push(p);
            }
            out.pop();
        }
        out
    }

    fn edges_as_halfplanes(v: &[[f64; 2]]) -> HalfplaneSet {
        let n = v.len();
        let hps = (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                let normal = vec![b[1] - a[1], a[0] - b[0]];
                let offset = normal[0] * a[0] + normal[1] * a[1];
                Halfplane::new(normal, offset).unwrap()
            })
            .collect();
        HalfplaneSet::new(hps).unwrap()
    }

    fn as_pairs(p: &VertexPolytope) -> Vec<[f64; 2]> {
        p.vertices().map(|v| [v[0], v[1]]).collect()
    }

    fn area(v: &[[f64; 2]]) -> f64 {
        let n = v.len();
        0.5 * (0..n)
            .map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1])
            .sum::<f64>()
    }

    /// Uniform sample from a convex CCW polygon via an area-weighted fan.
    fn sample_polygon(v: &[[f64; 2]], r: [f64; 3]) -> [f64; 2] {
        let tris: Vec<f64> = (1..v.len() - 1).map(|i| area(&[v[0], v[i], v[i + 1]])).collect();
        let total: f64 = tris.iter().sum();
        let mut pick = r[0] * total;
        let mut k = 1;
        for (i, a) in tris.iter().enumerate() {
            k = i + 1;
            if pick <= *a {
                break;
            }
            pick -= a;
        }
        let (mut s, mut t) = (r[1], r[2]);
        if s + t > 1.0 {
            s = 1.0 - s;
            t = 1.0 - t;
        }
        let (a, b, c) = (v[0], v[k], v[k + 1]);
        [
            a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
            a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
        ]
    }

    fn seg_distance(p: [f64; 2], a: &[f64], b: &[f64]) -> f64 {
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
        };
        (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
    }

    fn in_result(out: &VertexPolytope, p: [f64; 2], tol: f64) -> bool {
        match out.len() {
            1 => seg_distance(p, out.vertex(0), out.vertex(0)) <= tol,
            2 => seg_distance(p, out.vertex(0), out.vertex(1)) <= tol,
            _ => edges_as_halfplanes(&as_pairs(out)).contains(&p, tol),
        }
    }

    #[test]
    fn triangle_clip_matches_dense_sampling_hull() {
        let tri = poly(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]]);
        let hp = Halfplane::new(vec![1.0, -1.0], 0.0).unwrap();
        let got = clip_polygon(&tri, &hp).unwrap();
        let mut kept = Vec::new();
        // Integer grid at spacing 0.1, scaled after the hull so it stays exact.
        for i in 0..=200 {
            for j in 0..=200 - i {
                if i <= j {
                    kept.push([i as f64, j as f64]);
                }
            }
        }
        let scaled: Vec<[f64; 2]> = hull(kept).iter().map(|p| [p[0] / 10.0, p[1] / 10.0]).collect();
        let oracle = canonical_order(&scaled).unwrap();
        assert!(got.approx_eq(&oracle, 1e-9), "{got:?} vs {oracle:?}");
        assert!(got.approx_eq(&poly(&[[0.0, 0.0], [10.0, 10.0], [0.0, 20.0]]), 1e-12));
    }

    #[test]
    fn slab_fallback_matches_dense_boundary_search() {
        let tri = poly(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]]);
        let slab = HalfplaneSet::new(vec![
            Halfplane::new(vec![-1.0, 1.0], -40.0).unwrap(),
            Halfplane::new(vec![1.0, -1.0], 50.0).unwrap(),
        ])
        .unwrap();
        let mut best = ([0.0, 0.0], f64::INFINITY);
        for i in 0..3 {
            let (a, b) = (tri.vertex(i), tri.vertex((i + 1) % 3));
            for k in 0..=4000 {
                let t = k as f64 / 4000.0;
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                // Distance from p to the slab 40 <= u1 - u2 <= 50.
                let g = p[0] - p[1];
                let d = ((40.0 - g).max(0.0) + (g - 50.0).max(0.0)) / 2f64.sqrt();
                if d < best.1 {
                    best = (p, d);
                }
            }
        }
        let got = closest_point_fallback(&slab, &tri);
        assert_eq!(got.len(), 1);
        assert!((got.vertex(0)[0] - best.0[0]).abs() < 1e-9);
        assert!((got.vertex(0)[1] - best.0[1]).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn polygon() -> impl Strategy<Value = Vec<[f64; 2]>> {
            prop::collection::vec(prop::array::uniform2(-20.0..20.0f64), 3..12)
                .prop_map(hull)
                .prop_filter("non-degenerate polygon", |h| h.len() >= 3 && area(h) > 1e-2)
        }

        fn halfplane() -> impl Strategy<Value = (f64, f64)> {
            (0.0..std::f64::consts::TAU, -25.0..25.0f64)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn clip_is_sound_and_complete(
                v in polygon(),
                (angle, offset) in halfplane(),
                samples in prop::collection::vec(prop::array::uniform3(0.0..1.0f64), 64),
            ) {
                let input = canonical_order(&v).unwrap();
                let gen = edges_as_halfplanes(&v);
                let hp = Halfplane::new(vec![angle.cos(), angle.sin()], offset).unwrap();
                let out = clip_polygon(&input, &hp);
                if let Some(out) = &out {
                    for u in out.vertices() {
                        prop_assert!(hp.contains(u, MEMBERSHIP_TOL));
                        prop_assert!(gen.contains(u, MEMBERSHIP_TOL));
                    }
                    let pts = as_pairs(out);
                    for i in 0..pts.len() {
                        for j in 0..i {
                            prop_assert!((pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]) > DEDUP_TOL);
                        }
                    }
                }
                for r in samples {
                    let p = sample_polygon(&v, r);
                    if hp.contains(&p, 0.0) {
                        let out = out.as_ref();
                        prop_assert!(out.is_some(), "sampled point {p:?} kept but result empty");
                        prop_assert!(in_result(out.unwrap(), p, 1e-6), "{p:?} not in {out:?}");
                    }
                }
            }

            #[test]
            fn inactive_clip_is_identity(v in polygon(), angle in 0.0..std::f64::consts::TAU, margin in 0.0..10.0f64) {
                let input = canonical_order(&v).unwrap();
                let n = [angle.cos(), angle.sin()];
                let top = v.iter().map(|p| n[0] * p[0] + n[1] * p[1]).fold(f64::NEG_INFINITY, f64::max);
                let hp = Halfplane::new(n.to_vec(), top + margin).unwrap();
                let out = clip_polygon(&input, &hp).unwrap();
                prop_assert!(out.approx_eq(&input, 1e-9));
            }

            #[test]
            fn canonical_order_ignores_permutation(
                v in prop::collection::vec(prop::array::uniform2(-20.0..20.0f64), 1..10),
                seed in any::<u64>(),
            ) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let pts = hull(v);
                let mut shuffled = pts.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let a = canonical_order(&pts).unwrap();
                let b = canonical_order(&shuffled).unwrap();
                prop_assert_eq!(a.points().coords(), b.points().coords());
                let first = a.vertex(0);
                for u in a.vertices() {
                    prop_assert!((first[0], first[1]) <= (u[0], u[1]));
                }
                if a.len() >= 3 {
                    prop_assert!(area(&as_pairs(&a)) > 0.0);
                }
            }

            #[test]
            fn convex_combination_stays_inside(
                v in polygon(),
                raw in prop::collection::vec(0.0..1.0f64, 12),
            ) {
                let input = canonical_order(&v).unwrap();
                let gen = edges_as_halfplanes(&v);
                let w: Vec<f64> = raw[..input.len()].iter().map(|x| x + 1e-3).collect();
                let total: f64 = w.iter().sum();
                let w: Vec<f64> = w.iter().map(|x| x / total).collect();
                let p = convex_combination(input.points(), &w).unwrap();
                prop_assert!(gen.contains(&p, MEMBERSHIP_TOL));
            }

            #[test]
            fn interval_clip_agrees_with_interval_intersection(
                a in -20.0..20.0f64, b in -20.0..20.0f64, c in -30.0..30.0f64, d in -30.0..30.0f64,
            ) {
                let (lo, hi) = (a.min(b), a.max(b));
                let (slo, shi) = (c.min(d), c.max(d));
                let hs = HalfplaneSet::from_box(&[slo], &[shi]).unwrap();
                let got = intersect(&VertexPolytope::from_interval(lo, hi), &hs);
                match intersect_interval(lo, hi, slo, shi) {
                    None => prop_assert!(got.is_none()),
                    Some((l, h)) => {
                        let got = got.unwrap();
                        prop_assert!((got.vertex(0)[0] - l).abs() < 1e-12);
                        prop_assert!((got.vertex(got.len() - 1)[0] - h).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
