//! Embedded-graph data model and the elementary measurements on
//! polyline arcs: lengths, one-sided tangents, turning angles, total
//! curvature, arc-pair distances and corner detection.

use crate::geo::{segment_distance, Direction, Point};
use crate::Error;

pub const CURVATURE_BUDGET: f64 = std::f64::consts::FRAC_PI_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArcId(pub usize);

/// An open or closed polyline in space. A closed arc repeats its first
/// point as its last and turns at the base point count toward total
/// curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct PolylineArc {
    pub points: Vec<Point>,
    pub closed: bool,
}

impl PolylineArc {
    pub fn open(points: Vec<Point>) -> PolylineArc {
        PolylineArc { points, closed: false }
    }

    /// Closed loop through the given distinct points; the first point is
    /// the base vertex and is repeated at the end.
    pub fn closed_loop(mut points: Vec<Point>) -> PolylineArc {
        if points.first() != points.last() {
            let first = points[0];
            points.push(first);
        }
        PolylineArc { points, closed: true }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn segment_count(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    /// Structural validation: enough points, consecutive points
    /// distinct, all coordinates finite, and simplicity.
    pub fn validate(&self) -> Result<(), Error> {
        if self.points.len() < 2 {
            return Err(Error::InvalidArc("fewer than 2 points".into()));
        }
        for p in &self.points {
            if !p.is_finite() {
                return Err(Error::InvalidArc("non-finite coordinate".into()));
            }
        }
        for (i, (a, b)) in self.segments().enumerate() {
            if a.dist(b) == 0.0 {
                return Err(Error::InvalidArc(format!("zero-length segment at index {i}")));
            }
        }
        if self.closed && self.points.first() != self.points.last() {
            return Err(Error::InvalidArc("closed arc does not return to base point".into()));
        }
        if !self.is_simple() {
            return Err(Error::InvalidArc("self-intersecting arc".into()));
        }
        Ok(())
    }

    /// Pairwise segment scan; adjacent segments may share exactly their
    /// common endpoint.
    pub fn is_simple(&self) -> bool {
        let n = self.segment_count();
        let pts = &self.points;
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (self.closed && i == 0 && j == n - 1);
                let d = segment_distance(pts[i], pts[i + 1], pts[j], pts[j + 1]);
                if adjacent {
                    // Shared endpoint is fine; anything closer elsewhere is not.
                    // Back-tracking onto the previous segment shows up as an
                    // interior overlap.
                    let (shared, a, b) = if j == i + 1 {
                        (pts[j], pts[i], pts[j + 1])
                    } else {
                        (pts[0], pts[n - 1], pts[1])
                    };
                    let gap = a.dist(shared).min(b.dist(shared));
                    // Distance between the two non-shared endpoints must be
                    // positive and the segments must only meet at the vertex.
                    if overlap_beyond_vertex(shared, a, b, gap) {
                        return false;
                    }
                } else if d == 0.0 {
                    return false;
                }
            }
        }
        true
    }

    pub fn total_length(&self) -> f64 {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }

    /// Cumulative arclength at each vertex (starts at 0).
    pub fn cumulative_lengths(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.points.len());
        out.push(0.0);
        for (a, b) in self.segments() {
            acc += a.dist(b);
            out.push(acc);
        }
        out
    }

    /// Point at arclength `s` from the start (clamped to the arc).
    pub fn point_at_arclength(&self, s: f64) -> Point {
        let cum = self.cumulative_lengths();
        let total = *cum.last().unwrap();
        let s = s.clamp(0.0, total);
        match cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => self.points[i],
            Err(i) => {
                let i = i.min(cum.len() - 1);
                let seg_len = cum[i] - cum[i - 1];
                let t = if seg_len > 0.0 { (s - cum[i - 1]) / seg_len } else { 0.0 };
                self.points[i - 1].lerp(self.points[i], t)
            }
        }
    }

    /// Turning angle at interior vertex `index`; for closed arcs index 0
    /// (== last) refers to the base-point turn.
    pub fn turning_at(&self, index: usize) -> Result<f64, Error> {
        let (inc, out) = self.one_sided_tangents_any(index)?;
        Ok(turning_angle(inc, out))
    }

    fn one_sided_tangents_any(&self, index: usize) -> Result<(Direction, Direction), Error> {
        if self.closed && (index == 0 || index + 1 == self.points.len()) {
            let n = self.points.len();
            let inc = Direction::between(self.points[n - 2], self.points[n - 1])
                .ok_or_else(|| Error::InvalidArc("degenerate segment".into()))?;
            let out = Direction::between(self.points[0], self.points[1])
                .ok_or_else(|| Error::InvalidArc("degenerate segment".into()))?;
            return Ok((inc, out));
        }
        one_sided_tangents(self, index)
    }

    pub fn reversed(&self) -> PolylineArc {
        let mut points = self.points.clone();
        points.reverse();
        PolylineArc { points, closed: self.closed }
    }

    /// Largest coordinate spread; used to scale tolerances.
    pub fn diameter_bound(&self) -> f64 {
        diameter_bound(&self.points)
    }
}

fn overlap_beyond_vertex(shared: Point, a: Point, b: Point, gap: f64) -> bool {
    if gap == 0.0 {
        return true; // degenerate, caught elsewhere as zero-length segment
    }
    // The two segments emanating from `shared` toward a and b overlap iff
    // the directions coincide; a back-tracking corner (opposite directions)
    // is allowed.
    let da = (a - shared).normalized();
    let db = (b - shared).normalized();
    match (da, db) {
        (Some(da), Some(db)) => {
            let ang = da.angle_to(db);
            if ang < 1e-12 {
                return true;
            }
            false
        }
        _ => true,
    }
}

pub fn diameter_bound(points: &[Point]) -> f64 {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    lo.dist(hi)
}

/// A combinatorial multigraph embedded in space: vertices are points,
/// every edge is realized by a polyline arc.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedGraph {
    pub vertices: Vec<(VertexId, Point)>,
    pub arcs: Vec<(ArcId, PolylineArc, VertexId, VertexId)>,
}

impl EmbeddedGraph {
    /// Single closed loop as a graph: one vertex at the base point.
    pub fn from_loop(arc: PolylineArc) -> EmbeddedGraph {
        assert!(arc.closed, "from_loop expects a closed arc");
        let base = arc.points[0];
        EmbeddedGraph {
            vertices: vec![(VertexId(0), base)],
            arcs: vec![(ArcId(0), arc, VertexId(0), VertexId(0))],
        }
    }

    /// Disjoint union of closed loops (a link).
    pub fn from_loops(loops: Vec<PolylineArc>) -> EmbeddedGraph {
        let mut vertices = Vec::new();
        let mut arcs = Vec::new();
        for (i, arc) in loops.into_iter().enumerate() {
            assert!(arc.closed);
            vertices.push((VertexId(i), arc.points[0]));
            arcs.push((ArcId(i), arc, VertexId(i), VertexId(i)));
        }
        EmbeddedGraph { vertices, arcs }
    }

    pub fn vertex_point(&self, id: VertexId) -> Option<Point> {
        self.vertices.iter().find(|(v, _)| *v == id).map(|(_, p)| *p)
    }

    pub fn arc(&self, id: ArcId) -> Option<&PolylineArc> {
        self.arcs.iter().find(|(a, _, _, _)| *a == id).map(|(_, arc, _, _)| arc)
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.arcs
            .iter()
            .map(|(_, _, h, t)| (*h == v) as usize + (*t == v) as usize)
            .sum()
    }

    /// Validate endpoint coincidence, per-arc structure, and pairwise
    /// disjointness away from shared vertices.
    pub fn validate(&self) -> Result<(), Error> {
        for (id, arc, head, tail) in &self.arcs {
            arc.validate()?;
            let hp = self
                .vertex_point(*head)
                .ok_or_else(|| Error::InvalidGraph(format!("arc {} references missing vertex {}", id.0, head.0)))?;
            let tp = self
                .vertex_point(*tail)
                .ok_or_else(|| Error::InvalidGraph(format!("arc {} references missing vertex {}", id.0, tail.0)))?;
            if arc.points[0].dist(hp) > 0.0 {
                return Err(Error::InvalidGraph(format!("arc {} head does not coincide with vertex", id.0)));
            }
            if arc.points[arc.points.len() - 1].dist(tp) > 0.0 {
                return Err(Error::InvalidGraph(format!("arc {} tail does not coincide with vertex", id.0)));
            }
        }
        if self.min_inter_arc_distance_excluding_shared() == 0.0 {
            return Err(Error::InvalidGraph("distinct arcs intersect away from shared vertices".into()));
        }
        Ok(())
    }

    /// Minimum distance between segments of distinct arcs, skipping
    /// segment pairs that legitimately meet at a shared graph vertex.
    fn min_inter_arc_distance_excluding_shared(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.arcs.len() {
            for j in (i + 1)..self.arcs.len() {
                let (_, a, ah, at) = &self.arcs[i];
                let (_, b, bh, bt) = &self.arcs[j];
                let shared: Vec<Point> = [*ah, *at]
                    .iter()
                    .filter(|v| *v == bh || *v == bt)
                    .filter_map(|v| self.vertex_point(*v))
                    .collect();
                for (sa, sb) in a.segments() {
                    for (ta, tb) in b.segments() {
                        let d = segment_distance(sa, sb, ta, tb);
                        if d == 0.0 {
                            // Allowed only when both segments touch a shared vertex.
                            let at_shared = shared.iter().any(|s| {
                                (sa.dist(*s) == 0.0 || sb.dist(*s) == 0.0)
                                    && (ta.dist(*s) == 0.0 || tb.dist(*s) == 0.0)
                            });
                            if !at_shared {
                                return 0.0;
                            }
                        } else {
                            min = min.min(d);
                        }
                    }
                }
            }
        }
        min
    }

    pub fn all_points(&self) -> Vec<Point> {
        self.arcs.iter().flat_map(|(_, arc, _, _)| arc.points.iter().copied()).collect()
    }

    pub fn diameter_bound(&self) -> f64 {
        diameter_bound(&self.all_points())
    }

    pub fn transformed(&self, f: impl Fn(Point) -> Point) -> EmbeddedGraph {
        EmbeddedGraph {
            vertices: self.vertices.iter().map(|(v, p)| (*v, f(*p))).collect(),
            arcs: self
                .arcs
                .iter()
                .map(|(a, arc, h, t)| {
                    (
                        *a,
                        PolylineArc {
                            points: arc.points.iter().map(|p| f(*p)).collect(),
                            closed: arc.closed,
                        },
                        *h,
                        *t,
                    )
                })
                .collect(),
        }
    }
}

/// Sum of segment lengths of an arc.
pub fn arc_length(arc: &PolylineArc) -> f64 {
    arc.total_length()
}

/// Unit directions of the segments before and after an interior vertex.
pub fn one_sided_tangents(arc: &PolylineArc, index: usize) -> Result<(Direction, Direction), Error> {
    if index == 0 || index + 1 >= arc.points.len() {
        return Err(Error::InvalidArc(format!("vertex index {index} is not interior")));
    }
    let inc = Direction::between(arc.points[index - 1], arc.points[index])
        .ok_or_else(|| Error::InvalidArc("degenerate zero-length segment".into()))?;
    let out = Direction::between(arc.points[index], arc.points[index + 1])
        .ok_or_else(|| Error::InvalidArc("degenerate zero-length segment".into()))?;
    Ok((inc, out))
}

/// Angle in [0, pi] between an incoming and outgoing direction.
pub fn turning_angle(incoming: Direction, outgoing: Direction) -> f64 {
    incoming.angle_to(outgoing)
}

/// Total curvature of an arc: the sum of turning angles over interior
/// vertices. Endpoint turning is excluded for open arcs; a closed arc
/// adds the turn at its base point.
pub fn total_curvature(arc: &PolylineArc) -> f64 {
    let mut sum = 0.0;
    for i in 1..arc.points.len() - 1 {
        if let Ok((inc, out)) = one_sided_tangents(arc, i) {
            sum += turning_angle(inc, out);
        }
    }
    if arc.closed {
        if let Ok(t) = arc.turning_at(0) {
            sum += t;
        }
    }
    sum
}

/// Exact minimum distance between two arcs over all segment pairs.
pub fn arc_pair_distance(a: &PolylineArc, b: &PolylineArc) -> f64 {
    let mut min = f64::INFINITY;
    for (sa, sb) in a.segments() {
        for (ta, tb) in b.segments() {
            let d = segment_distance(sa, sb, ta, tb);
            if d < min {
                min = d;
            }
        }
    }
    min
}

/// All interior polyline vertices of the graph with turning angle at
/// least `threshold`.
pub fn corner_set(graph: &EmbeddedGraph, threshold: f64) -> Vec<(ArcId, usize, f64)> {
    assert!(threshold > 0.0 && threshold <= std::f64::consts::PI + 1e-12);
    let mut out = Vec::new();
    for (id, arc, _, _) in &graph.arcs {
        for i in 1..arc.points.len() - 1 {
            if let Ok((inc, outg)) = one_sided_tangents(arc, i) {
                let t = turning_angle(inc, outg);
                if t >= threshold {
                    out.push((*id, i, t));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    pub fn regular_ngon(n: usize, radius: f64) -> PolylineArc {
        let pts: Vec<Point> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                p(radius * t.cos(), radius * t.sin(), 0.0)
            })
            .collect();
        PolylineArc::closed_loop(pts)
    }

    #[test]
    fn arc_length_examples() {
        let seg = PolylineArc::open(vec![p(0.0, 0.0, 0.0), p(3.0, 4.0, 0.0)]);
        assert_eq!(arc_length(&seg), 5.0);

        let square = PolylineArc::closed_loop(vec![
            p(0.0, 0.0, 0.0),
            p(1.0, 0.0, 0.0),
            p(1.0, 1.0, 0.0),
            p(0.0, 1.0, 0.0),
        ]);
        assert_eq!(arc_length(&square), 4.0);

        // Regular 64-gon inscribed in the unit circle: closed-form chord sum.
        let gon = regular_ngon(64, 1.0);
        let expected = 64.0 * 2.0 * (PI / 64.0).sin();
        assert!((arc_length(&gon) - expected).abs() < 1e-12);
        assert!((expected - 6.2807).abs() < 1e-4);
    }

    #[test]
    fn tangents_examples() {
        let line = PolylineArc::open(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(2.0, 0.0, 0.0)]);
        let (inc, out) = one_sided_tangents(&line, 1).unwrap();
        assert!(inc.angle_to(out) < 1e-15);

        let corner = PolylineArc::open(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(1.0, 1.0, 0.0)]);
        let (inc, out) = one_sided_tangents(&corner, 1).unwrap();
        assert!((inc.vec().x - 1.0).abs() < 1e-15);
        assert!((out.vec().y - 1.0).abs() < 1e-15);
        assert!((turning_angle(inc, out) - FRAC_PI_2).abs() < 1e-15);

        let back = PolylineArc::open(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.5, 0.0, 0.0)]);
        let (inc, out) = one_sided_tangents(&back, 1).unwrap();
        assert!((turning_angle(inc, out) - PI).abs() < 1e-15);
        assert!((inc.vec() + out.vec()).norm() < 1e-15);
    }

    #[test]
    fn tangent_errors() {
        let line = PolylineArc::open(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)]);
        assert!(one_sided_tangents(&line, 0).is_err());
        let degen = PolylineArc {
            points: vec![p(0.0, 0.0, 0.0), p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)],
            closed: false,
        };
        assert!(one_sided_tangents(&degen, 1).is_err());
    }

    #[test]
    fn total_curvature_examples() {
        let seg = PolylineArc::open(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)]);
        assert_eq!(total_curvature(&seg), 0.0);

        // Closed regular n-gon: exterior angle sum 2*pi.
        for n in [4usize, 5, 64] {
            let gon = regular_ngon(n, 1.0);
            assert!((total_curvature(&gon) - 2.0 * PI).abs() < 1e-9, "n = {n}");
        }

        // Planar zig-zag with 3 right-angle corners.
        let zig = PolylineArc::open(vec![
            p(0.0, 0.0, 0.0),
            p(1.0, 0.0, 0.0),
            p(1.0, 1.0, 0.0),
            p(2.0, 1.0, 0.0),
            p(2.0, 2.0, 0.0),
        ]);
        assert!((total_curvature(&zig) - 3.0 * FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn square_total_curvature_exact() {
        let square = regular_ngon(4, 1.0);
        assert!((total_curvature(&square) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn arc_pair_distance_examples() {
        let a = PolylineArc::open(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)]);
        let b = PolylineArc::open(vec![p(0.0, 0.0, 1.0), p(1.0, 0.0, 1.0)]);
        assert!((arc_pair_distance(&a, &b) - 1.0).abs() < 1e-15);

        let c = PolylineArc::open(vec![p(1.0, 0.0, 0.0), p(1.0, 1.0, 0.0)]);
        assert_eq!(arc_pair_distance(&a, &c), 0.0);

        let d = PolylineArc::open(vec![p(0.5, -1.0, 0.5), p(0.5, 1.0, 0.5)]);
        assert!((arc_pair_distance(&a, &d) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn corner_set_examples() {
        let gon = EmbeddedGraph::from_loop(regular_ngon(64, 1.0));
        assert!(corner_set(&gon, CURVATURE_BUDGET).is_empty());

        let square = EmbeddedGraph::from_loop(regular_ngon(4, 1.0));
        let corners = corner_set(&square, CURVATURE_BUDGET);
        // Interior vertices only: the base point is an endpoint of the arc.
        assert_eq!(corners.len(), 3);
        for (_, _, t) in &corners {
            assert!((t - FRAC_PI_2).abs() < 1e-12);
        }
        assert!(corner_set(&square, PI - 1e-9).is_empty());

        let back = EmbeddedGraph {
            vertices: vec![(VertexId(0), p(0.0, 0.0, 0.0)), (VertexId(1), p(0.5, 0.0, 0.0))],
            arcs: vec![(
                ArcId(0),
                PolylineArc::open(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.5, 1e-9, 0.0)]),
                VertexId(0),
                VertexId(1),
            )],
        };
        let corners = corner_set(&back, PI - 1e-3);
        assert_eq!(corners.len(), 1);
    }

    #[test]
    fn reversed_tangents_swap_and_negate() {
        let arc = PolylineArc::open(vec![
            p(0.0, 0.0, 0.0),
            p(1.0, 0.2, 0.0),
            p(2.0, -0.3, 0.4),
            p(3.0, 0.0, 0.0),
        ]);
        let rev = arc.reversed();
        let n = arc.points.len();
        for i in 1..n - 1 {
            let (inc, out) = one_sided_tangents(&arc, i).unwrap();
            let (rinc, rout) = one_sided_tangents(&rev, n - 1 - i).unwrap();
            assert!((rinc.vec() + out.vec()).norm() < 1e-12);
            assert!((rout.vec() + inc.vec()).norm() < 1e-12);
        }
    }

    #[test]
    fn simplicity_detects_crossing() {
        let bad = PolylineArc::open(vec![
            p(0.0, 0.0, 0.0),
            p(2.0, 0.0, 0.0),
            p(2.0, 1.0, 0.0),
            p(1.0, -1.0, 0.0),
        ]);
        assert!(!bad.is_simple());
        let good = regular_ngon(16, 1.0);
        assert!(good.is_simple());
    }
}
