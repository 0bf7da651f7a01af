//! Planar convex hulls and intersection tests between them.
//!
//! Hulls are built with Andrew's monotone chain. Intersection uses separating
//! axes: two convex polygons are disjoint iff their projections onto some
//! edge normal of either polygon are disjoint. Hulls of one or two points
//! are a point or a segment; a segment also contributes its own direction as
//! an axis, and two points use their difference, which covers the cases
//! where the Minkowski difference is itself degenerate.

use crate::geom::Vec2;

/// Absolute tolerance, in meters, on orientation and projection tests.
pub const EPS_GEO: f64 = 1e-9;

/// Convex hull with vertices in counter-clockwise order, collinear points
/// dropped. Zero, one or two vertices for degenerate inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    vertices: Vec<Vec2>,
}

/// Signed distance of `c` from the directed line `a -> b` (positive on the
/// left). Falls back to the plain distance when `a == b`.
pub fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let ab = b - a;
    match ab.normalized() {
        Some(u) => u.cross(c - a),
        None => (c - a).norm(),
    }
}

impl ConvexHull {
    pub fn new(points: &[Vec2]) -> Self {
        let mut pts: Vec<Vec2> = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() <= 2 {
            return Self { vertices: pts };
        }
        let turn = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);
        let mut lower: Vec<Vec2> = Vec::with_capacity(pts.len());
        for &p in &pts {
            while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0
            {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Vec2> = Vec::with_capacity(pts.len());
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0
            {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        // all points collinear: keep the two extremes
        if lower.len() == 2 || lower.is_empty() {
            return Self {
                vertices: vec![pts[0], pts[pts.len() - 1]],
            };
        }
        Self { vertices: lower }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as `(start, end)` pairs; a segment hull has one edge.
    pub fn edges(&self) -> Vec<(Vec2, Vec2)> {
        match self.vertices.len() {
            0 | 1 => Vec::new(),
            2 => vec![(self.vertices[0], self.vertices[1])],
            n => (0..n)
                .map(|i| (self.vertices[i], self.vertices[(i + 1) % n]))
                .collect(),
        }
    }

    fn axes(&self) -> Vec<Vec2> {
        let mut axes = Vec::new();
        for (a, b) in self.edges() {
            if let Some(d) = (b - a).normalized() {
                axes.push(d.perp());
                if self.vertices.len() == 2 {
                    axes.push(d);
                }
            }
        }
        axes
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        self.vertices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                let p = v.dot(axis);
                (lo.min(p), hi.max(p))
            })
    }

    /// True when the hulls share a point (within [`EPS_GEO`]). An empty hull
    /// intersects nothing.
    pub fn intersects(&self, other: &ConvexHull) -> bool {
        if self.is_empty() || other.is_empty() {
            return false;
        }
        let mut axes = self.axes();
        axes.extend(other.axes());
        if self.vertices.len() == 1 && other.vertices.len() == 1 {
            match (other.vertices[0] - self.vertices[0]).normalized() {
                Some(d) => axes.push(d),
                None => return true,
            }
        }
        !axes.iter().any(|&axis| {
            let (a_lo, a_hi) = self.project(axis);
            let (b_lo, b_hi) = other.project(axis);
            a_hi + EPS_GEO < b_lo || b_hi + EPS_GEO < a_lo
        })
    }

    /// Closed containment (boundary counts as inside, within [`EPS_GEO`]).
    pub fn contains(&self, p: Vec2) -> bool {
        self.intersects(&ConvexHull { vertices: vec![p] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    // Independent check: any pair of hull edges crossing, or any vertex of one
    // hull inside the other (ray casting / on-segment tests).
    fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
        let len = (b - a).norm();
        if len == 0.0 {
            return (p - a).norm() <= EPS_GEO;
        }
        let dist = ((b - a).cross(p - a) / len).abs();
        let t = (p - a).dot(b - a) / (len * len);
        dist <= EPS_GEO && t >= -EPS_GEO / len && t <= 1.0 + EPS_GEO / len
    }

    fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
        let o1 = (b - a).cross(c - a);
        let o2 = (b - a).cross(d - a);
        let o3 = (d - c).cross(a - c);
        let o4 = (d - c).cross(b - c);
        if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
            return true;
        }
        on_segment(c, a, b) || on_segment(d, a, b) || on_segment(a, c, d) || on_segment(b, c, d)
    }

    fn inside_polygon(p: Vec2, poly: &[Vec2]) -> bool {
        match poly.len() {
            0 => false,
            1 => (p - poly[0]).norm() <= EPS_GEO,
            2 => on_segment(p, poly[0], poly[1]),
            n => {
                let mut inside = false;
                for i in 0..n {
                    let (a, b) = (poly[i], poly[(i + 1) % n]);
                    if on_segment(p, a, b) {
                        return true;
                    }
                    if (a.y > p.y) != (b.y > p.y) {
                        let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                        if p.x < x {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    fn brute_force_intersect(a: &ConvexHull, b: &ConvexHull) -> bool {
        let (va, vb) = (a.vertices(), b.vertices());
        if va.is_empty() || vb.is_empty() {
            return false;
        }
        let segs = |h: &[Vec2]| -> Vec<(Vec2, Vec2)> {
            match h.len() {
                1 => vec![(h[0], h[0])],
                2 => vec![(h[0], h[1])],
                n => (0..n).map(|i| (h[i], h[(i + 1) % n])).collect(),
            }
        };
        for &(p, q) in &segs(va) {
            for &(r, s) in &segs(vb) {
                if segments_cross(p, q, r, s) {
                    return true;
                }
            }
        }
        inside_polygon(va[0], vb) || inside_polygon(vb[0], va)
    }

    #[test]
    fn square_hull_drops_interior_and_collinear() {
        let pts = [
            v(0., 0.),
            v(1., 0.),
            v(2., 0.),
            v(2., 2.),
            v(0., 2.),
            v(1., 1.),
        ];
        let h = ConvexHull::new(&pts);
        assert_eq!(h.vertices(), &[v(0., 0.), v(2., 0.), v(2., 2.), v(0., 2.)]);
    }

    #[test]
    fn collinear_input_is_a_segment() {
        let h = ConvexHull::new(&[v(1., 1.), v(3., 3.), v(2., 2.)]);
        assert_eq!(h.vertices(), &[v(1., 1.), v(3., 3.)]);
    }

    #[test]
    fn single_points_disjoint_iff_distinct() {
        let a = ConvexHull::new(&[v(0., 0.)]);
        let b = ConvexHull::new(&[v(1., 0.)]);
        assert!(!a.intersects(&b));
        assert!(a.intersects(&ConvexHull::new(&[v(0., 0.)])));
    }

    #[test]
    fn empty_hull_never_intersects() {
        let a = ConvexHull::new(&[]);
        let b = ConvexHull::new(&[v(0., 0.), v(1., 0.), v(0., 1.)]);
        assert!(!a.intersects(&b));
        assert!(!b.intersects(&a));
    }

    #[test]
    fn collinear_disjoint_segments() {
        let a = ConvexHull::new(&[v(0., 0.), v(1., 0.)]);
        let b = ConvexHull::new(&[v(2., 0.), v(3., 0.)]);
        assert!(!a.intersects(&b));
        let c = ConvexHull::new(&[v(0.5, 0.), v(3., 0.)]);
        assert!(a.intersects(&c));
    }

    #[test]
    fn containment_includes_boundary() {
        let h = ConvexHull::new(&[v(0., 0.), v(2., 0.), v(0., 2.)]);
        assert!(h.contains(v(0.5, 0.5)));
        assert!(h.contains(v(1.0, 0.0)));
        assert!(!h.contains(v(1.5, 1.5)));
    }

    fn small_cloud() -> impl Strategy<Value = Vec<Vec2>> {
        // integer-ish coordinates provoke touching and collinear cases
        prop::collection::vec((0i32..6, 0i32..6), 1..6).prop_map(|v| {
            v.into_iter()
                .map(|(x, y)| Vec2::new(x as f64, y as f64))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn sat_agrees_with_segment_oracle(a in small_cloud(), b in small_cloud()) {
            let (ha, hb) = (ConvexHull::new(&a), ConvexHull::new(&b));
            prop_assert_eq!(ha.intersects(&hb), brute_force_intersect(&ha, &hb));
            prop_assert_eq!(ha.intersects(&hb), hb.intersects(&ha));
        }

        #[test]
        fn sat_agrees_with_oracle_continuous(
            a in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..8),
            b in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..8),
        ) {
            let a: Vec<Vec2> = a.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
            let b: Vec<Vec2> = b.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
            let (ha, hb) = (ConvexHull::new(&a), ConvexHull::new(&b));
            prop_assert_eq!(ha.intersects(&hb), brute_force_intersect(&ha, &hb));
        }

        #[test]
        fn hull_contains_its_inputs(a in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..20)) {
            let pts: Vec<Vec2> = a.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
            let h = ConvexHull::new(&pts);
            for p in &pts {
                prop_assert!(h.contains(*p));
            }
        }
    }
}
