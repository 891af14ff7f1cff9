//! Closeness of embedded graphs ((delta, theta) measurement over a
//! correspondence), discrete thickness, distortion and the chord-angle
//! modulus.

use crate::geo::{Direction, Point};
use crate::graph_core::{ArcId, EmbeddedGraph, PolylineArc, VertexId};
use crate::Error;
use std::collections::HashMap;

/// Piecewise-linear, strictly increasing map [0,1] -> [0,1] written as
/// (s, s') breakpoints with fixed endpoints (0,0) and (1,1).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMap {
    pub breakpoints: Vec<(f64, f64)>,
}

impl ParamMap {
    pub fn identity() -> ParamMap {
        ParamMap { breakpoints: vec![(0.0, 0.0), (1.0, 1.0)] }
    }

    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<ParamMap, Error> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidCorrespondence("parameter map needs >= 2 breakpoints".into()));
        }
        let first = breakpoints[0];
        let last = breakpoints[breakpoints.len() - 1];
        if first != (0.0, 0.0) || last != (1.0, 1.0) {
            return Err(Error::InvalidCorrespondence("parameter map endpoints must be (0,0) and (1,1)".into()));
        }
        for w in breakpoints.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(Error::InvalidCorrespondence("parameter map must be strictly increasing".into()));
            }
        }
        Ok(ParamMap { breakpoints })
    }

    pub fn eval(&self, s: f64) -> f64 {
        piecewise_eval(&self.breakpoints, s, |bp| (bp.0, bp.1))
    }

    pub fn eval_inverse(&self, sp: f64) -> f64 {
        piecewise_eval(&self.breakpoints, sp, |bp| (bp.1, bp.0))
    }

    pub fn inverse(&self) -> ParamMap {
        ParamMap { breakpoints: self.breakpoints.iter().map(|&(a, b)| (b, a)).collect() }
    }
}

fn piecewise_eval(bps: &[(f64, f64)], x: f64, proj: impl Fn(&(f64, f64)) -> (f64, f64)) -> f64 {
    let x = x.clamp(0.0, 1.0);
    let mut prev = proj(&bps[0]);
    for bp in &bps[1..] {
        let cur = proj(bp);
        if x <= cur.0 {
            let t = if cur.0 > prev.0 { (x - prev.0) / (cur.0 - prev.0) } else { 0.0 };
            return prev.1 + t * (cur.1 - prev.1);
        }
        prev = cur;
    }
    proj(&bps[bps.len() - 1]).1
}

/// Arc-by-arc monotone pairing between two embedded graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    /// (arc of g, arc of g2, parameter map from g-arclength fraction to
    /// g2-arclength fraction).
    pub pairs: Vec<(ArcId, ArcId, ParamMap)>,
}

impl Correspondence {
    pub fn map_for(&self, a: ArcId) -> Option<&ParamMap> {
        self.pairs.iter().find(|(x, _, _)| *x == a).map(|(_, _, m)| m)
    }

    pub fn partner_of(&self, a: ArcId) -> Option<ArcId> {
        self.pairs.iter().find(|(x, _, _)| *x == a).map(|(_, b, _)| *b)
    }

    pub fn inverted(&self) -> Correspondence {
        Correspondence {
            pairs: self.pairs.iter().map(|(a, b, m)| (*b, *a, m.inverse())).collect(),
        }
    }
}

/// Max point distance / max tangent angle over a correspondence, with
/// witness locations for each maximum.
#[derive(Debug, Clone)]
pub struct ClosenessReport {
    pub delta: f64,
    pub theta: f64,
    pub delta_witness: (Point, Point),
    pub theta_witness: (Point, Point),
}

/// Discrete thickness estimate of a closed polyline.
#[derive(Debug, Clone)]
pub struct ThicknessReport {
    pub tau_hat: f64,
    pub min_rad: f64,
    pub dcsd: f64,
    pub mechanism: ThicknessMechanism,
    /// Vertex index of the middle of the binding circumradius triple.
    pub min_rad_witness: Option<usize>,
    /// Vertex indices of the binding doubly-critical pair.
    pub dcsd_witness: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThicknessMechanism {
    Curvature,
    SelfDistance,
}

/// Arclength-fraction parameterization helpers for one arc.
pub struct ArcParam<'a> {
    pub arc: &'a PolylineArc,
    cum: Vec<f64>,
    total: f64,
}

impl<'a> ArcParam<'a> {
    pub fn new(arc: &'a PolylineArc) -> ArcParam<'a> {
        let cum = arc.cumulative_lengths();
        let total = *cum.last().unwrap();
        ArcParam { arc, cum, total }
    }

    pub fn total_length(&self) -> f64 {
        self.total
    }

    /// Arclength fractions of the polyline vertices.
    pub fn vertex_fractions(&self) -> Vec<f64> {
        self.cum.iter().map(|c| c / self.total).collect()
    }

    pub fn point_at(&self, s: f64) -> Point {
        self.arc.point_at_arclength(s.clamp(0.0, 1.0) * self.total)
    }

    /// Direction of the segment containing fraction `s` (interior bias:
    /// exactly at a vertex it returns the outgoing segment).
    pub fn direction_at(&self, s: f64) -> Option<Direction> {
        let target = s.clamp(0.0, 1.0) * self.total;
        let mut i = match self.cum.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i + 1 >= self.arc.points.len() {
            i = self.arc.points.len() - 2;
        }
        Direction::between(self.arc.points[i], self.arc.points[i + 1])
    }

    /// Fraction of the vertex nearest to arclength fraction `s`.
    pub fn fraction_of_vertex(&self, index: usize) -> f64 {
        self.cum[index] / self.total
    }
}

/// Proportional-arclength correspondence for a given arc pairing.
/// Errors when the pairing does not define a combinatorial isomorphism.
pub fn default_correspondence(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    pairing: &[(ArcId, ArcId)],
) -> Result<Correspondence, Error> {
    if pairing.len() != g.arcs.len() || g.arcs.len() != g2.arcs.len() {
        return Err(Error::InvalidCorrespondence("pairing must cover all arcs of both graphs".into()));
    }
    let mut vertex_map: HashMap<VertexId, VertexId> = HashMap::new();
    let mut used: HashMap<ArcId, ()> = HashMap::new();
    for (a, b) in pairing {
        let (_, _, ah, at) = g
            .arcs
            .iter()
            .find(|(id, _, _, _)| id == a)
            .ok_or_else(|| Error::InvalidCorrespondence(format!("arc {} not in first graph", a.0)))?;
        let (_, _, bh, bt) = g2
            .arcs
            .iter()
            .find(|(id, _, _, _)| id == b)
            .ok_or_else(|| Error::InvalidCorrespondence(format!("arc {} not in second graph", b.0)))?;
        if used.insert(*b, ()).is_some() {
            return Err(Error::InvalidCorrespondence("pairing is not a bijection".into()));
        }
        for (va, vb) in [(ah, bh), (at, bt)] {
            if let Some(prev) = vertex_map.insert(*va, *vb) {
                if prev != *vb {
                    return Err(Error::InvalidCorrespondence(format!(
                        "pairing does not respect vertex incidences at vertex {}",
                        va.0
                    )));
                }
            }
        }
    }
    // The induced vertex map must itself be injective.
    let mut seen = HashMap::new();
    for (_, vb) in vertex_map.iter() {
        if seen.insert(*vb, ()).is_some() {
            return Err(Error::InvalidCorrespondence("induced vertex map is not injective".into()));
        }
    }
    Ok(Correspondence {
        pairs: pairing.iter().map(|(a, b)| (*a, *b, ParamMap::identity())).collect(),
    })
}

/// Identity correspondence for two graphs with identical arc ids.
pub fn identity_correspondence(g: &EmbeddedGraph) -> Correspondence {
    Correspondence {
        pairs: g.arcs.iter().map(|(id, _, _, _)| (*id, *id, ParamMap::identity())).collect(),
    }
}

/// Measure (delta, theta) closeness of g2 to g under a correspondence.
///
/// delta is exact: the matched-point distance is piecewise linear in the
/// common parameter, so the sup is attained at a breakpoint. theta is
/// the essential sup of the tangent angle, evaluated on open intervals
/// between breakpoints (corner parameters are a null set).
pub fn measure_closeness(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    c: &Correspondence,
) -> Result<ClosenessReport, Error> {
    let mut delta = 0.0_f64;
    let mut theta = 0.0_f64;
    let mut delta_witness = (Point::ORIGIN, Point::ORIGIN);
    let mut theta_witness = (Point::ORIGIN, Point::ORIGIN);
    for (a_id, b_id, map) in &c.pairs {
        let arc_a = g
            .arc(*a_id)
            .ok_or_else(|| Error::InvalidCorrespondence(format!("missing arc {}", a_id.0)))?;
        let arc_b = g2
            .arc(*b_id)
            .ok_or_else(|| Error::InvalidCorrespondence(format!("missing arc {}", b_id.0)))?;
        let pa = ArcParam::new(arc_a);
        let pb = ArcParam::new(arc_b);

        let mut s_values: Vec<f64> = pa.vertex_fractions();
        s_values.extend(pb.vertex_fractions().iter().map(|sp| map.eval_inverse(*sp)));
        s_values.extend(map.breakpoints.iter().map(|(s, _)| *s));
        s_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s_values.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        for &s in &s_values {
            let qa = pa.point_at(s);
            let qb = pb.point_at(map.eval(s));
            let d = qa.dist(qb);
            if d > delta {
                delta = d;
                delta_witness = (qa, qb);
            }
        }
        for w in s_values.windows(2) {
            if w[1] - w[0] < 1e-14 {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            let da = pa.direction_at(mid);
            let db = pb.direction_at(map.eval(mid));
            if let (Some(da), Some(db)) = (da, db) {
                let ang = da.angle_to(db);
                if ang > theta {
                    theta = ang;
                    theta_witness = (pa.point_at(mid), pb.point_at(map.eval(mid)));
                }
            }
        }
    }
    Ok(ClosenessReport { delta, theta, delta_witness, theta_witness })
}

/// Dynamic-programming search (discrete-Fréchet style) over monotone
/// vertex matchings, returning a correspondence whose measured delta is
/// never larger than the input's.
pub fn refine_correspondence(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    c: &Correspondence,
) -> Result<Correspondence, Error> {
    let baseline = measure_closeness(g, g2, c)?;
    let mut pairs = Vec::with_capacity(c.pairs.len());
    for (a_id, b_id, map) in &c.pairs {
        let arc_a = g.arc(*a_id).unwrap();
        let arc_b = g2.arc(*b_id).unwrap();
        let candidate = frechet_param_map(arc_a, arc_b);
        pairs.push((*a_id, *b_id, candidate.unwrap_or_else(|| map.clone())));
    }
    let refined = Correspondence { pairs };
    let measured = measure_closeness(g, g2, &refined)?;
    if measured.delta <= baseline.delta {
        Ok(refined)
    } else {
        Ok(c.clone())
    }
}

/// Discrete Fréchet coupling between the vertex sequences, converted to
/// a strictly increasing parameter map.
fn frechet_param_map(a: &PolylineArc, b: &PolylineArc) -> Option<ParamMap> {
    let pa = ArcParam::new(a);
    let pb = ArcParam::new(b);
    let av = &a.points;
    let bv = &b.points;
    let n = av.len();
    let m = bv.len();
    if n < 2 || m < 2 {
        return None;
    }
    let mut dp = vec![f64::INFINITY; n * m];
    let idx = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let d = av[i].dist(bv[j]);
            let best_prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut b = f64::INFINITY;
                if i > 0 {
                    b = b.min(dp[idx(i - 1, j)]);
                }
                if j > 0 {
                    b = b.min(dp[idx(i, j - 1)]);
                }
                if i > 0 && j > 0 {
                    b = b.min(dp[idx(i - 1, j - 1)]);
                }
                b
            };
            dp[idx(i, j)] = d.max(best_prev);
        }
    }
    // Backtrack a cheapest coupling path.
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let mut best = f64::INFINITY;
        let mut step = (i, j);
        if i > 0 && j > 0 && dp[idx(i - 1, j - 1)] < best {
            best = dp[idx(i - 1, j - 1)];
            step = (i - 1, j - 1);
        }
        if i > 0 && dp[idx(i - 1, j)] < best {
            best = dp[idx(i - 1, j)];
            step = (i - 1, j);
        }
        if j > 0 && dp[idx(i, j - 1)] < best {
            step = (i, j - 1);
        }
        path.push(step);
        (i, j) = step;
    }
    path.reverse();
    // Keep only strictly advancing pairs so the map is strictly increasing.
    let mut bps: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for &(i, j) in &path {
        let s = pa.fraction_of_vertex(i);
        let sp = pb.fraction_of_vertex(j);
        let last = *bps.last().unwrap();
        if s > last.0 + 1e-12 && sp > last.1 + 1e-12 && s < 1.0 - 1e-12 && sp < 1.0 - 1e-12 {
            bps.push((s, sp));
        }
    }
    bps.push((1.0, 1.0));
    ParamMap::new(bps).ok()
}

/// Discrete thickness surrogate of a closed simple polyline:
/// min(2 * minimal consecutive-triple circumradius, doubly-critical
/// self-distance).
pub fn discrete_thickness(k: &PolylineArc) -> Result<ThicknessReport, Error> {
    if !k.closed {
        return Err(Error::InvalidParameter("discrete_thickness requires a closed polyline".into()));
    }
    // Distinct vertices (drop the repeated base point).
    let v: Vec<Point> = k.points[..k.points.len() - 1].to_vec();
    let n = v.len();
    if n < 4 {
        return Err(Error::InvalidParameter("discrete_thickness requires >= 4 vertices".into()));
    }
    let at = |i: usize| v[i % n];

    let mut min_rad = f64::INFINITY;
    let mut min_rad_witness = None;
    for i in 0..n {
        let r = crate::geo::circumradius(at(i + n - 1), at(i), at(i + 1));
        if r < min_rad {
            min_rad = r;
            min_rad_witness = Some(i);
        }
    }

    // Segment directions and turning angles per vertex.
    let seg_dir: Vec<Direction> = (0..n)
        .map(|i| Direction::between(at(i), at(i + 1)).expect("validated polyline"))
        .collect();
    let turn: Vec<f64> = (0..n).map(|i| seg_dir[(i + n - 1) % n].angle_to(seg_dir[i])).collect();
    // Local turning allowance: max turning angle at the vertex and its
    // immediate neighbors.
    let allow: Vec<f64> = (0..n)
        .map(|i| turn[(i + n - 1) % n].max(turn[i]).max(turn[(i + 1) % n]))
        .collect();

    let doubly_critical_end = |i: usize, chord: crate::geo::Vec3| -> bool {
        let tol = allow[i].sin() + 1e-9;
        let c = chord.normalized().expect("nonzero chord");
        let din = seg_dir[(i + n - 1) % n].vec();
        let dout = seg_dir[i].vec();
        c.dot(din).abs() <= tol && c.dot(dout).abs() <= tol
    };

    let mut dcsd = f64::INFINITY;
    let mut dcsd_witness = None;
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue; // cyclically adjacent
            }
            let chord = v[j] - v[i];
            let len = chord.norm();
            if len == 0.0 || len >= dcsd {
                continue;
            }
            if doubly_critical_end(i, chord) && doubly_critical_end(j, chord) {
                dcsd = len;
                dcsd_witness = Some((i, j));
            }
        }
    }

    let tau_hat = (2.0 * min_rad).min(dcsd);
    let mechanism = if dcsd <= 2.0 * min_rad {
        ThicknessMechanism::SelfDistance
    } else {
        ThicknessMechanism::Curvature
    };
    Ok(ThicknessReport { tau_hat, min_rad, dcsd, mechanism, min_rad_witness, dcsd_witness })
}

/// Supremal arc/chord ratio over vertex pairs; for closed loops the
/// shorter arc is used.
pub fn distortion(arc: &PolylineArc) -> f64 {
    let pts: &[Point] = if arc.closed { &arc.points[..arc.points.len() - 1] } else { &arc.points };
    let cum = arc.cumulative_lengths();
    let total = *cum.last().unwrap();
    let n = pts.len();
    let mut sup = 1.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let chord = pts[i].dist(pts[j]);
            if chord == 0.0 {
                continue;
            }
            let mut along = cum[j] - cum[i];
            if arc.closed {
                along = along.min(total - along);
            }
            sup = sup.max(along / chord);
        }
    }
    sup
}

/// Largest dyadic-grid arclength `l` such that every vertex-to-vertex
/// subarc of length <= `l` keeps all its segment directions within
/// `theta` of the endpoint chord direction.
pub fn chord_angle_modulus(arc: &PolylineArc, theta: f64) -> Result<f64, Error> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidParameter("theta must lie in (0, pi/2]".into()));
    }
    let cum = arc.cumulative_lengths();
    let total = *cum.last().unwrap();
    let pts = &arc.points;
    let nseg = arc.segment_count();
    // For closed arcs subarcs may wrap across the base point; indices run
    // over a doubled copy of the vertex list.
    let max_index = if arc.closed { 2 * nseg } else { nseg };
    let vertex = |i: usize| -> Point {
        if i <= nseg {
            pts[i]
        } else {
            pts[i - nseg] // closed: pts[0] == pts[nseg]
        }
    };
    let len_at = |i: usize| if i <= nseg { cum[i] } else { total + cum[i - nseg] };
    let passes = |l: f64| -> bool {
        for i in 0..nseg {
            for j in (i + 2)..=max_index {
                let along = len_at(j) - len_at(i);
                if along > l || (arc.closed && along >= total) {
                    break;
                }
                let chord = match (vertex(j) - vertex(i)).normalized() {
                    Some(c) => c,
                    None => return false,
                };
                for k in i..j {
                    let d = match (vertex(k + 1) - vertex(k)).normalized() {
                        Some(d) => d,
                        None => return false,
                    };
                    if d.angle_to(chord) > theta + 1e-12 {
                        return false;
                    }
                }
            }
        }
        true
    };
    for k in 0..=20 {
        let l = total / (1u64 << k) as f64;
        if passes(l) {
            return Ok(l);
        }
    }
    Err(Error::InvalidParameter(
        "no positive chord-angle modulus exists at the smallest grid scale".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Vec3;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    fn regular_ngon(n: usize, radius: f64) -> PolylineArc {
        let pts: Vec<Point> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                p(radius * t.cos(), radius * t.sin(), 0.0)
            })
            .collect();
        PolylineArc::closed_loop(pts)
    }

    #[test]
    fn identity_closeness_is_zero() {
        let g = EmbeddedGraph::from_loop(regular_ngon(32, 1.0));
        let c = identity_correspondence(&g);
        let r = measure_closeness(&g, &g, &c).unwrap();
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.theta, 0.0);
    }

    #[test]
    fn translated_copy_closeness() {
        let g = EmbeddedGraph::from_loop(regular_ngon(32, 1.0));
        let v = Vec3::new(0.3, -0.1, 0.2);
        let g2 = g.transformed(|q| q + v);
        let c = identity_correspondence(&g);
        let r = measure_closeness(&g, &g2, &c).unwrap();
        assert!((r.delta - v.norm()).abs() < 1e-12);
        assert!(r.theta < 1e-12);
    }

    #[test]
    fn rotated_segment_closeness() {
        // Unit segment vs itself rotated by phi about its midpoint:
        // theta = phi and delta = sin(phi/2) (endpoint displacement).
        let phi = 0.4_f64;
        let a = PolylineArc::open(vec![p(-0.5, 0.0, 0.0), p(0.5, 0.0, 0.0)]);
        let b = PolylineArc::open(vec![
            p(-0.5 * phi.cos(), -0.5 * phi.sin(), 0.0),
            p(0.5 * phi.cos(), 0.5 * phi.sin(), 0.0),
        ]);
        let g = EmbeddedGraph {
            vertices: vec![(VertexId(0), a.points[0]), (VertexId(1), a.points[1])],
            arcs: vec![(ArcId(0), a, VertexId(0), VertexId(1))],
        };
        let g2 = EmbeddedGraph {
            vertices: vec![(VertexId(0), b.points[0]), (VertexId(1), b.points[1])],
            arcs: vec![(ArcId(0), b, VertexId(0), VertexId(1))],
        };
        let c = identity_correspondence(&g);
        let r = measure_closeness(&g, &g2, &c).unwrap();
        assert!((r.theta - phi).abs() < 1e-12);
        assert!((r.delta - (phi / 2.0).sin()).abs() < 1e-12);

        // Brute-force oracle over a dense parameter grid.
        let pa = ArcParam::new(g.arc(ArcId(0)).unwrap());
        let pb = ArcParam::new(g2.arc(ArcId(0)).unwrap());
        let mut brute = 0.0_f64;
        for k in 0..=10_000 {
            let s = k as f64 / 10_000.0;
            brute = brute.max(pa.point_at(s).dist(pb.point_at(s)));
        }
        assert!((r.delta - brute).abs() < 1e-9);
    }

    #[test]
    fn closeness_symmetry() {
        let g = EmbeddedGraph::from_loop(regular_ngon(16, 1.0));
        let g2 = g.transformed(|q| {
            Point::from_vec(q.to_vec().rotated(Vec3::new(0.0, 0.0, 1.0), 0.05)) + Vec3::new(0.02, 0.0, 0.01)
        });
        let c = identity_correspondence(&g);
        let fwd = measure_closeness(&g, &g2, &c).unwrap();
        let bwd = measure_closeness(&g2, &g, &c.inverted()).unwrap();
        assert!((fwd.delta - bwd.delta).abs() < 1e-12);
        assert!((fwd.theta - bwd.theta).abs() < 1e-12);
    }

    #[test]
    fn default_correspondence_rejects_bad_pairing() {
        let a = regular_ngon(8, 1.0);
        let b = regular_ngon(8, 1.0);
        let g = EmbeddedGraph::from_loops(vec![a.clone(), b.clone()]);
        let g2 = EmbeddedGraph::from_loops(vec![
            a.clone(),
            PolylineArc::closed_loop(b.points.iter().map(|q| *q + Vec3::new(5.0, 0.0, 0.0)).collect()),
        ]);
        assert!(default_correspondence(&g, &g2, &[(ArcId(0), ArcId(0)), (ArcId(1), ArcId(1))]).is_ok());
        assert!(default_correspondence(&g, &g2, &[(ArcId(0), ArcId(0)), (ArcId(1), ArcId(0))]).is_err());
    }

    #[test]
    fn refine_reduces_delta_for_warped_sampling() {
        // The same quarter-circle sampled uniformly vs warped (t^2).
        let n = 24;
        let uniform: Vec<Point> = (0..=n)
            .map(|k| {
                let t = FRAC_PI_2 * k as f64 / n as f64;
                p(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let warped: Vec<Point> = (0..=n)
            .map(|k| {
                let u = k as f64 / n as f64;
                let t = FRAC_PI_2 * u * u;
                p(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let mk = |pts: Vec<Point>| {
            let head = pts[0];
            let tail = pts[pts.len() - 1];
            EmbeddedGraph {
                vertices: vec![(VertexId(0), head), (VertexId(1), tail)],
                arcs: vec![(ArcId(0), PolylineArc::open(pts), VertexId(0), VertexId(1))],
            }
        };
        let g = mk(uniform);
        let g2 = mk(warped);
        let naive = identity_correspondence(&g);
        let before = measure_closeness(&g, &g2, &naive).unwrap();
        let refined = refine_correspondence(&g, &g2, &naive).unwrap();
        let after = measure_closeness(&g, &g2, &refined).unwrap();
        // Refinement never increases delta; on this warped sampling it
        // should do at least as well as the naive identity map.
        assert!(after.delta <= before.delta, "{} vs {}", after.delta, before.delta);

        // Soundness floor: any bijective correspondence moves each point
        // by at least the (vertex-sampled) Hausdorff distance between
        // the two curves.
        let seg_dist = |q: Point, a: Point, b: Point| -> f64 {
            let ab = b - a;
            let t = ((q - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
            q.dist(a + ab * t)
        };
        let directed = |from: &[Point], to: &[Point]| -> f64 {
            from.iter()
                .map(|q| {
                    to.windows(2)
                        .map(|w| seg_dist(*q, w[0], w[1]))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        };
        let av = &g.arc(ArcId(0)).unwrap().points;
        let bv = &g2.arc(ArcId(0)).unwrap().points;
        let hausdorff = directed(av, bv).max(directed(bv, av));
        assert!(after.delta + 1e-12 >= hausdorff);
    }

    #[test]
    fn refine_is_idempotent_at_fixed_point() {
        let g = EmbeddedGraph::from_loop(regular_ngon(16, 1.0));
        let c = identity_correspondence(&g);
        let refined = refine_correspondence(&g, &g, &c).unwrap();
        let r = measure_closeness(&g, &g, &refined).unwrap();
        assert!(r.delta < 1e-12);
    }

    #[test]
    fn thickness_of_64gon() {
        // Brute-force oracle over all triples confirms min_rad = 1.
        let gon = regular_ngon(64, 1.0);
        let v = &gon.points[..64];
        let mut brute = f64::INFINITY;
        for i in 0..64 {
            for j in (i + 1)..64 {
                for k in (j + 1)..64 {
                    brute = brute.min(crate::geo::circumradius(v[i], v[j], v[k]));
                }
            }
        }
        let r = discrete_thickness(&gon).unwrap();
        assert!((r.min_rad - 1.0).abs() < 1e-12);
        assert!(r.min_rad + 1e-12 >= brute);
        assert!((r.dcsd - 2.0).abs() < 0.01);
        assert!((r.tau_hat - 2.0).abs() < 0.02);

        let scaled = PolylineArc::closed_loop(
            gon.points[..64].iter().map(|q| Point::new(q.x * 3.0, q.y * 3.0, q.z * 3.0)).collect(),
        );
        let rs = discrete_thickness(&scaled).unwrap();
        assert!((rs.tau_hat - 3.0 * r.tau_hat).abs() < 1e-9);
    }

    #[test]
    fn thickness_of_stadium_is_self_distance_controlled() {
        // 10 x 1 slab with semicircular caps of radius 0.5.
        let slab = crate::fixtures::stadium(9.0, 0.5, 40, 180);
        let r = discrete_thickness(&slab).unwrap();
        assert!((r.dcsd - 1.0).abs() < 0.01, "dcsd = {}", r.dcsd);
        assert!((r.tau_hat - 1.0).abs() < 0.01);
        assert_eq!(r.mechanism, ThicknessMechanism::SelfDistance);
    }

    #[test]
    fn convex_curve_is_curvature_controlled() {
        // Ellipse samples: tau_hat = 2 * min_rad.
        let pts: Vec<Point> = (0..256)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 256.0;
                p(2.0 * t.cos(), t.sin(), 0.0)
            })
            .collect();
        let e = PolylineArc::closed_loop(pts);
        let r = discrete_thickness(&e).unwrap();
        assert_eq!(r.mechanism, ThicknessMechanism::Curvature);
        assert!((r.tau_hat - 2.0 * r.min_rad).abs() < 1e-12);
        // min radius of curvature of the ellipse is b^2/a = 0.5
        assert!((r.min_rad - 0.5).abs() < 0.01);
    }

    #[test]
    fn distortion_examples() {
        let seg = PolylineArc::open(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)]);
        assert_eq!(distortion(&seg), 1.0);

        let semi: Vec<Point> = (0..=128)
            .map(|k| {
                let t = PI * k as f64 / 128.0;
                p(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let arc = PolylineArc::open(semi);
        assert!((distortion(&arc) - FRAC_PI_2).abs() < 0.01);

        let circle = regular_ngon(512, 1.0);
        assert!((distortion(&circle) - FRAC_PI_2).abs() < 0.01 * FRAC_PI_2);
    }

    #[test]
    fn chord_angle_modulus_examples() {
        let line = PolylineArc::open(vec![
            p(0.0, 0.0, 0.0),
            p(1.0, 0.0, 0.0),
            p(2.0, 0.0, 0.0),
            p(3.5, 0.0, 0.0),
        ]);
        let l = chord_angle_modulus(&line, FRAC_PI_8).unwrap();
        assert_eq!(l, 3.5);

        let circle = regular_ngon(256, 1.0);
        let l = chord_angle_modulus(&circle, FRAC_PI_8).unwrap();
        assert!((l - FRAC_PI_4).abs() < 0.1 * FRAC_PI_4, "l = {l}");

        let square = regular_ngon(4, 1.0);
        let l = chord_angle_modulus(&square, FRAC_PI_8).unwrap();
        let side = square.points[0].dist(square.points[1]);
        assert!(l <= side + 1e-12, "l = {l}, side = {side}");
    }
}
