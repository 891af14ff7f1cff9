//! The two isotopy-sufficiency criteria: the thickness criterion for
//! C^{1,1} links and the finite-total-curvature criterion for graphs,
//! including the full constant chain and the ball-and-tube neighborhood
//! construction. Output is a machine-checkable certificate or a
//! structured refusal (never a claim of non-isotopy).

use crate::geo::{point_segment_distance, segment_distance, segment_sphere_exit, Direction, Point};
use crate::graph_core::{ArcId, EmbeddedGraph, CURVATURE_BUDGET};
use crate::metrics::{
    default_correspondence, measure_closeness, ArcParam, ClosenessReport, Correspondence,
    ThicknessReport,
};
use crate::Error;
use rayon::prelude::*;
use std::f64::consts::PI;

/// theta(delta, tau) = pi/2 - 2 asin(2 delta / tau), the angle making
/// (delta, theta)-closeness sufficient for isotopy at thickness tau.
pub fn theta_of(delta: f64, tau: f64) -> Result<f64, Error> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !(delta > 0.0 && delta < tau / 4.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, tau/4) = (0, {}), got {delta}",
            tau / 4.0
        )));
    }
    Ok(PI / 2.0 - 2.0 * (2.0 * delta / tau).asin())
}

/// A decomposition point: a graph vertex or an interior corner chosen
/// by the greedy scan.
#[derive(Debug, Clone)]
pub struct DecompPoint {
    pub arc: ArcId,
    /// Vertex index within the arc polyline (closed arcs use index 0
    /// for the base point).
    pub vertex: usize,
    pub fraction: f64,
    pub point: Point,
}

/// One subarc of the decomposition, with interior curvature below the
/// budget.
#[derive(Debug, Clone)]
pub struct Subarc {
    pub arc: ArcId,
    pub start: usize,
    pub end: usize,
    pub points: Vec<Point>,
    /// Sum of turning angles at the subarc's strictly interior vertices.
    pub curvature: f64,
    /// Indices into `CornerDecomposition::points`.
    pub p_start: usize,
    pub p_end: usize,
}

#[derive(Debug, Clone)]
pub struct CornerDecomposition {
    pub points: Vec<DecompPoint>,
    pub subarcs: Vec<Subarc>,
    pub budget: f64,
}

/// Greedy corner decomposition: split every arc at its endpoints and
/// wherever accumulated turning would reach the curvature budget, so
/// each piece's interior curvature stays strictly below pi/8.
pub fn corner_decomposition(g: &EmbeddedGraph) -> Result<CornerDecomposition, Error> {
    corner_decomposition_with(g, CURVATURE_BUDGET - 1e-9, &[])
}

/// Decomposition with an explicit budget and forced cut vertices.
pub fn corner_decomposition_with(
    g: &EmbeddedGraph,
    budget: f64,
    forced: &[(ArcId, usize)],
) -> Result<CornerDecomposition, Error> {
    let mut points: Vec<DecompPoint> = Vec::new();
    let mut subarcs: Vec<Subarc> = Vec::new();
    // Graph vertices shared between arcs map to one decomposition point.
    let mut vertex_slot: Vec<(crate::graph_core::VertexId, usize)> = Vec::new();

    for (arc_id, arc, head, tail) in &g.arcs {
        let n = arc.points.len();
        if n < 2 {
            return Err(Error::InvalidArc(format!("arc {} has fewer than 2 points", arc_id.0)));
        }
        let param = ArcParam::new(arc);

        let mut slot_for_vertex = |vid: crate::graph_core::VertexId,
                                   pts: &mut Vec<DecompPoint>,
                                   dp: DecompPoint|
         -> usize {
            if let Some((_, s)) = vertex_slot.iter().find(|(w, _)| *w == vid) {
                return *s;
            }
            pts.push(dp);
            vertex_slot.push((vid, pts.len() - 1));
            pts.len() - 1
        };

        let head_slot = slot_for_vertex(
            *head,
            &mut points,
            DecompPoint { arc: *arc_id, vertex: 0, fraction: 0.0, point: arc.points[0] },
        );
        let tail_slot = slot_for_vertex(
            *tail,
            &mut points,
            DecompPoint {
                arc: *arc_id,
                vertex: if arc.closed { 0 } else { n - 1 },
                fraction: 1.0,
                point: arc.points[n - 1],
            },
        );

        // Greedy scan over interior vertices.
        let mut cuts: Vec<(usize, usize)> = vec![(0, head_slot)]; // (vertex index, slot)
        let mut acc = 0.0;
        let mut curvatures = Vec::new();
        for i in 1..n - 1 {
            let t = arc.turning_at(i)?;
            let force = forced.iter().any(|(a, v)| a == arc_id && *v == i);
            if acc + t >= budget || force {
                points.push(DecompPoint {
                    arc: *arc_id,
                    vertex: i,
                    fraction: param.fraction_of_vertex(i),
                    point: arc.points[i],
                });
                cuts.push((i, points.len() - 1));
                curvatures.push(acc);
                acc = 0.0;
            } else {
                acc += t;
            }
        }
        cuts.push((n - 1, tail_slot));
        curvatures.push(acc);

        for (w, curv) in cuts.windows(2).zip(curvatures) {
            let (s, s_slot) = w[0];
            let (e, e_slot) = w[1];
            subarcs.push(Subarc {
                arc: *arc_id,
                start: s,
                end: e,
                points: arc.points[s..=e].to_vec(),
                curvature: curv,
                p_start: s_slot,
                p_end: e_slot,
            });
        }
    }
    Ok(CornerDecomposition { points, subarcs, budget })
}

impl CornerDecomposition {
    /// Do two subarcs share a decomposition point?
    pub fn incident(&self, i: usize, j: usize) -> bool {
        let a = &self.subarcs[i];
        let b = &self.subarcs[j];
        a.p_start == b.p_start || a.p_start == b.p_end || a.p_end == b.p_start || a.p_end == b.p_end
    }
}

/// The radii chain r1 >= 2 r2, r3 <= 2 r2, r4 = r3/6, delta = r4/3 of
/// the finite-total-curvature criterion.
#[derive(Debug, Clone, Copy)]
pub struct RadiiChain {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub delta: f64,
    pub epsilon: f64,
}

fn poly_pair_distance(a: &[Point], b: &[Point]) -> f64 {
    let seg = |pts: &[Point]| -> Vec<(Point, Point)> {
        if pts.len() == 1 {
            vec![(pts[0], pts[0])]
        } else {
            pts.windows(2).map(|w| (w[0], w[1])).collect()
        }
    };
    let sa = seg(a);
    let sb = seg(b);
    let mut best = f64::INFINITY;
    for (p1, q1) in &sa {
        for (p2, q2) in &sb {
            best = best.min(segment_distance(*p1, *q1, *p2, *q2));
        }
    }
    best
}

/// Clip a subarc to the complement of the balls of radius r2 around its
/// two decomposition endpoints. Returns None when no portion survives.
fn clip_beta(points: &[Point], r2: f64) -> Option<Vec<Point>> {
    let n = points.len();
    let ca = points[0];
    let cb = points[n - 1];
    let mut i = 0;
    while i < n && points[i].dist(ca) <= r2 {
        i += 1;
    }
    if i == n {
        return None; // never leaves the start ball
    }
    let ta = segment_sphere_exit(points[i - 1], points[i], ca, r2)?;
    let a = points[i - 1].lerp(points[i], ta);
    let mut j = n - 1;
    while points[j].dist(cb) <= r2 {
        if j == 0 {
            return None;
        }
        j -= 1;
    }
    let tb = segment_sphere_exit(points[j + 1], points[j], cb, r2)?;
    let b = points[j + 1].lerp(points[j], tb);
    if i > j {
        // No full vertex outside both balls; keep the chord piece.
        return if a.dist(b) > 1e-12 * r2 { Some(vec![a, b]) } else { None };
    }
    // Interior vertices must stay outside both balls (no re-entry).
    for p in &points[i..=j] {
        if p.dist(ca) <= r2 || p.dist(cb) <= r2 {
            return None;
        }
    }
    let mut beta = vec![a];
    for p in &points[i..=j] {
        if p.dist(*beta.last().unwrap()) > 1e-12 * r2 {
            beta.push(*p);
        }
    }
    if b.dist(*beta.last().unwrap()) > 1e-12 * r2 {
        beta.push(b);
    }
    if beta.len() < 2 {
        return None;
    }
    Some(beta)
}

/// Compute the radii chain for a decomposition and motion budget
/// epsilon.
pub fn ftc_radii(
    g: &EmbeddedGraph,
    d: &CornerDecomposition,
    epsilon: f64,
) -> Result<RadiiChain, Error> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let ns = d.subarcs.len();
    let mut pair_candidates: Vec<(usize, usize)> = Vec::new();
    for i in 0..ns {
        for j in i + 1..ns {
            if !d.incident(i, j) {
                pair_candidates.push((i, j));
            }
        }
    }
    let arc_min = pair_candidates
        .par_iter()
        .map(|(i, j)| poly_pair_distance(&d.subarcs[*i].points, &d.subarcs[*j].points))
        .reduce(|| f64::INFINITY, f64::min);
    let mut point_min = f64::INFINITY;
    for i in 0..d.points.len() {
        for j in i + 1..d.points.len() {
            point_min = point_min.min(d.points[i].point.dist(d.points[j].point));
        }
    }
    let r1 = arc_min.min(point_min);
    if !r1.is_finite() {
        return Err(Error::InvalidGraph(
            "decomposition has no distance candidates (need at least two decomposition points)"
                .into(),
        ));
    }
    if r1 <= 0.0 {
        return Err(Error::NotEmbedded("distinct decomposition pieces touch (r1 = 0)".into()));
    }
    let r2 = (r1 / 2.0).min(epsilon / 2.0);

    // r3: minimum distance between distinct clipped strands beta_k,
    // never exceeding the 2 r2 forced by strands sharing a ball. The
    // clamp keeps delta < r2/9 strict for exactly-straight strands.
    let r3_cap = 2.0 * r2 * (1.0 - 1e-12);
    let betas: Vec<Option<Vec<Point>>> =
        d.subarcs.iter().map(|s| clip_beta(&s.points, r2)).collect();
    let live: Vec<&Vec<Point>> = betas.iter().flatten().collect();
    let mut r3 = r3_cap;
    let beta_pairs: Vec<(usize, usize)> =
        (0..live.len()).flat_map(|i| (i + 1..live.len()).map(move |j| (i, j))).collect();
    let beta_min = beta_pairs
        .par_iter()
        .map(|(i, j)| poly_pair_distance(live[*i], live[*j]))
        .reduce(|| f64::INFINITY, f64::min);
    if beta_min.is_finite() {
        r3 = r3.min(beta_min);
    }
    if r3 <= 0.0 {
        return Err(Error::NotEmbedded("clipped strands touch (r3 = 0)".into()));
    }
    let r4 = r3 / 6.0;
    let delta = r4 / 3.0;
    let _ = g; // graph is implicit in the decomposition
    Ok(RadiiChain { r1, r2, r3, r4, delta, epsilon })
}

/// The leaf family foliating the complement of the two end balls of
/// one strand: the coaxial (Apollonius) sphere pencil whose extreme
/// leaves are the ball boundaries and whose middle leaf is the
/// bisecting plane. The leaf index s is chosen so the signed curvature
/// (1 - 2s)/r2 varies linearly from +1/r2 through 0 to -1/r2.
#[derive(Debug, Clone, Copy)]
pub struct LeafFamily {
    /// Ball centers p_j, p_j'.
    pub a: Point,
    pub b: Point,
    pub u: Direction,
    pub r2: f64,
    /// Focal half-distance: the pencil's limit points sit at
    /// midpoint +- focal * u, inside the two balls.
    focal: f64,
}

impl LeafFamily {
    pub fn new(a: Point, b: Point, r2: f64) -> Result<LeafFamily, Error> {
        let u = Direction::between(a, b)
            .ok_or_else(|| Error::Neighborhood("degenerate strand axis".into()))?;
        let half = 0.5 * a.dist(b);
        if half <= r2 {
            return Err(Error::Neighborhood(
                "end balls touch; no room for a leaf family".into(),
            ));
        }
        let focal = (half * half - r2 * r2).sqrt();
        Ok(LeafFamily { a, b, u, r2, focal })
    }

    fn foci(&self) -> (Point, Point) {
        let m = self.a.midpoint(self.b);
        (m - self.u.vec() * self.focal, m + self.u.vec() * self.focal)
    }

    /// Log-ratio coordinate of a point: constant exactly on each pencil
    /// sphere, -asinh(f/r2) on the first ball boundary, 0 on the
    /// bisecting plane, +asinh(f/r2) on the second.
    pub fn rho(&self, p: Point) -> f64 {
        let (f1, f2) = self.foci();
        (p.dist(f1) / p.dist(f2)).ln()
    }

    /// rho of the leaf with index s (signed curvature (1-2s)/r2).
    pub fn rho_of(&self, s: f64) -> f64 {
        (self.focal * (2.0 * s - 1.0) / self.r2).asinh()
    }

    /// Signed curvature of leaf s.
    pub fn kappa(&self, s: f64) -> f64 {
        (1.0 - 2.0 * s) / self.r2
    }

    /// Signed side of leaf s: positive past the leaf (toward b).
    pub fn side(&self, s: f64, p: Point) -> f64 {
        self.rho(p) - self.rho_of(s)
    }

    /// Leaf index of a point: closed form, defined everywhere off the
    /// two focal points (indices run past [0, 1] inside the balls).
    pub fn leaf_index(&self, p: Point) -> Option<f64> {
        let (f1, f2) = self.foci();
        if p.dist(f1) < 1e-14 * self.r2 || p.dist(f2) < 1e-14 * self.r2 {
            return None;
        }
        Some(0.5 * (1.0 + self.rho(p).sinh() * self.r2 / self.focal))
    }

    /// Unit normal of the leaf through p, oriented toward increasing s.
    pub fn normal_at(&self, _s: f64, p: Point) -> Direction {
        let (f1, f2) = self.foci();
        let v1 = p - f1;
        let v2 = p - f2;
        let g = v1 / v1.norm_sq() - v2 / v2.norm_sq();
        Direction::from_vec(g).unwrap_or(self.u)
    }

    /// Center and radius of the leaf sphere with index s; None for the
    /// (near-)flat middle leaf.
    pub fn leaf_sphere(&self, s: f64) -> Option<(Point, f64)> {
        let rho = self.rho_of(s);
        if rho.abs() < 1e-6 {
            return None;
        }
        let (f1, f2) = self.foci();
        let k2 = (2.0 * rho).exp();
        let w = 1.0 / (1.0 - k2);
        // Affine combination of the foci with weights w and 1 - w.
        let c = Point::from_vec(f1.to_vec() * w + f2.to_vec() * (1.0 - w));
        let r = 2.0 * self.focal * rho.exp() / (1.0 - k2).abs();
        Some((c, r))
    }

    /// Move `from` toward `to` within leaf s, by fraction t of the leaf
    /// geodesic between them (great-circle arc, or straight line on the
    /// near-flat middle leaves where the chord deviation is negligible).
    pub fn geodesic(&self, s: f64, from: Point, to: Point, t: f64) -> Point {
        let (c, _) = match self.leaf_sphere(s) {
            Some(v) => v,
            None => return from.lerp(to, t),
        };
        let vf = from - c;
        let vt = to - c;
        let (df, dt_) = match (Direction::from_vec(vf), Direction::from_vec(vt)) {
            (Some(a), Some(b)) => (a, b),
            _ => return from.lerp(to, t),
        };
        let r = vf.norm() + t * (vt.norm() - vf.norm());
        c + df.slerp(dt_, t).vec() * r
    }
}

/// One tube of the neighborhood: a strand beta_k with its leaf family,
/// disk radius r4, and measured quality numbers.
#[derive(Debug, Clone)]
pub struct Tube {
    pub subarc: usize,
    pub beta: Vec<Point>,
    pub leaf: LeafFamily,
    pub r4: f64,
    /// Leaf index of each beta vertex (strictly increasing).
    pub beta_leaf: Vec<f64>,
    /// Max angle between strand direction and leaf normal (<= pi/4).
    pub max_strand_angle: f64,
    /// Max pairwise angle between sampled leaf normals.
    pub normal_drift: f64,
}

impl Tube {
    /// The point of beta on leaf s (the center of that leaf's disk).
    pub fn center_on_leaf(&self, s: f64) -> Point {
        let s = s.clamp(self.beta_leaf[0], *self.beta_leaf.last().unwrap());
        let i = match self
            .beta_leaf
            .windows(2)
            .position(|w| s >= w[0] - 1e-12 && s <= w[1] + 1e-12)
        {
            Some(i) => i,
            None => return *self.beta.last().unwrap(),
        };
        let (a, b) = (self.beta[i], self.beta[i + 1]);
        // Bisect the segment parameter against the leaf.
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if self.leaf.side(s, a.lerp(b, mid)) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        a.lerp(b, 0.5 * (lo + hi))
    }
}

/// Ball-and-tube neighborhood of the graph: balls B_j at the
/// decomposition points and leaf-foliated tubes along the clipped
/// strands.
#[derive(Debug, Clone)]
pub struct NeighborhoodModel {
    pub balls: Vec<(Point, f64)>,
    pub tubes: Vec<Tube>,
    pub chain: RadiiChain,
}

/// Maximum admissible drift of disk normals within one tube.
pub fn normal_drift_bound() -> f64 {
    2.0 * (1.0_f64 / 6.0).asin()
}

pub fn build_neighborhood(
    g: &EmbeddedGraph,
    d: &CornerDecomposition,
    chain: &RadiiChain,
) -> Result<NeighborhoodModel, Error> {
    let r2 = chain.r2;
    let balls: Vec<(Point, f64)> = d.points.iter().map(|p| (p.point, r2)).collect();
    for i in 0..balls.len() {
        for j in i + 1..balls.len() {
            if balls[i].0.dist(balls[j].0) < 2.0 * r2 * (1.0 - 1e-9) {
                return Err(Error::Neighborhood(format!(
                    "balls {i} and {j} overlap (centers {:.6} apart, radius {r2:.6})",
                    balls[i].0.dist(balls[j].0)
                )));
            }
        }
    }

    let mut tubes = Vec::new();
    for (k, sub) in d.subarcs.iter().enumerate() {
        let pts = &sub.points;
        let ca = pts[0];
        let cb = *pts.last().unwrap();

        // Monotone exit: distance from the ball center must increase
        // strictly vertex-to-vertex while inside the ball.
        let check_monotone = |order: &mut dyn Iterator<Item = Point>, c: Point| -> bool {
            let mut prev = -1.0;
            for p in order {
                let dist = p.dist(c);
                if dist > r2 {
                    break;
                }
                if dist <= prev {
                    return false;
                }
                prev = dist;
            }
            true
        };
        if !check_monotone(&mut pts.iter().copied(), ca)
            || !check_monotone(&mut pts.iter().rev().copied(), cb)
        {
            return Err(Error::Neighborhood(format!(
                "subarc {k} does not exit its ball monotonically"
            )));
        }

        let beta = clip_beta(pts, r2).ok_or_else(|| {
            Error::Neighborhood(format!("subarc {k} vanishes inside its end balls"))
        })?;
        // Leaf family of the tube: anchored on the ball centers. When
        // the end balls are tangent (axis length exactly 2 r2) the
        // pencil degenerates, so the foliation uses slightly smaller
        // spheres concentric with the balls; the strand still crosses
        // every leaf between its entry and exit indices.
        let rt = r2.min(0.499 * ca.dist(cb));
        let leaf = LeafFamily::new(ca, cb, rt)?;

        let mut beta_leaf = Vec::with_capacity(beta.len());
        for (vi, p) in beta.iter().enumerate() {
            let s = leaf.leaf_index(*p).ok_or_else(|| {
                Error::Neighborhood(format!("strand {k} vertex {vi} escapes its leaf family"))
            })?;
            if let Some(prev) = beta_leaf.last() {
                if s <= *prev {
                    return Err(Error::Neighborhood(format!(
                        "strand {k} is not monotone across leaves at vertex {vi}"
                    )));
                }
            }
            beta_leaf.push(s);
        }

        let mut max_strand_angle = 0.0_f64;
        let mut normals: Vec<Direction> = Vec::new();
        for w in beta.windows(2) {
            let dir = match Direction::between(w[0], w[1]) {
                Some(d) => d,
                None => continue,
            };
            let mid = w[0].midpoint(w[1]);
            let s = leaf.leaf_index(mid).unwrap_or(0.5);
            let n = leaf.normal_at(s, mid);
            normals.push(n);
            max_strand_angle = max_strand_angle.max(dir.angle_to(n));
        }
        for (p, s) in beta.iter().zip(&beta_leaf) {
            normals.push(leaf.normal_at(*s, *p));
        }
        if max_strand_angle > PI / 4.0 + 1e-9 {
            return Err(Error::Neighborhood(format!(
                "strand {k} meets a leaf at angle {max_strand_angle:.4} > pi/4"
            )));
        }
        let mut normal_drift = 0.0_f64;
        for i in 0..normals.len() {
            for j in i + 1..normals.len() {
                normal_drift = normal_drift.max(normals[i].angle_to(normals[j]));
            }
        }
        if normal_drift > normal_drift_bound() + 1e-9 {
            return Err(Error::Neighborhood(format!(
                "tube {k} disk normals drift by {normal_drift:.4} > 2 asin(1/6)"
            )));
        }

        tubes.push(Tube {
            subarc: k,
            beta,
            leaf,
            r4: chain.r4,
            beta_leaf,
            max_strand_angle,
            normal_drift,
        });
    }

    // Tubes may meet only their two end balls.
    for tube in &tubes {
        let sub = &d.subarcs[tube.subarc];
        for (pi, ball) in balls.iter().enumerate() {
            if pi == sub.p_start || pi == sub.p_end {
                continue;
            }
            let mut dist = f64::INFINITY;
            for w in tube.beta.windows(2) {
                dist = dist.min(point_segment_distance(ball.0, w[0], w[1]));
            }
            if dist <= r2 + chain.r4 {
                return Err(Error::Neighborhood(format!(
                    "tube {} intrudes into ball {pi}",
                    tube.subarc
                )));
            }
        }
    }

    let _ = g;
    Ok(NeighborhoodModel { balls, tubes, chain: *chain })
}

/// Which criterion issued a certificate, with its constants.
#[derive(Debug, Clone)]
pub enum Criterion {
    Thick { tau: f64, theta: f64 },
    Ftc { chain: RadiiChain },
}

#[derive(Debug, Clone)]
pub struct IsotopyCertificate {
    pub criterion: Criterion,
    pub motion_bound: f64,
    pub closeness: ClosenessReport,
    pub correspondence: Correspondence,
    pub valid: bool,
}

#[derive(Debug, Clone)]
pub enum RefusalReason {
    DeltaTooLarge { measured: f64, allowed: f64 },
    ThetaTooLarge { measured: f64, allowed: f64 },
    NotInNeighborhood { detail: String },
}

impl RefusalReason {
    pub fn tag(&self) -> &'static str {
        match self {
            RefusalReason::DeltaTooLarge { .. } => "delta-too-large",
            RefusalReason::ThetaTooLarge { .. } => "theta-too-large",
            RefusalReason::NotInNeighborhood { .. } => "not-in-neighborhood",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Refusal {
    pub reason: RefusalReason,
    pub closeness: ClosenessReport,
}

#[derive(Debug, Clone)]
pub enum CertifyOutcome {
    Certified(IsotopyCertificate),
    Refused(Refusal),
}

impl CertifyOutcome {
    pub fn certificate(&self) -> Option<&IsotopyCertificate> {
        match self {
            CertifyOutcome::Certified(c) => Some(c),
            CertifyOutcome::Refused(_) => None,
        }
    }

    pub fn refusal(&self) -> Option<&Refusal> {
        match self {
            CertifyOutcome::Certified(_) => None,
            CertifyOutcome::Refused(r) => Some(r),
        }
    }
}

/// Thickness criterion: graphs (delta, theta)-close with theta =
/// theta_of(delta, tau) are ambient isotopic by a motion of at most
/// delta.
pub fn certify_thick(
    k: &EmbeddedGraph,
    k2: &EmbeddedGraph,
    c: &Correspondence,
    tau: f64,
) -> Result<CertifyOutcome, Error> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter("tau must be positive".into()));
    }
    let closeness = measure_closeness(k, k2, c)?;
    let delta = closeness.delta;
    if delta >= tau / 4.0 {
        return Ok(CertifyOutcome::Refused(Refusal {
            reason: RefusalReason::DeltaTooLarge { measured: delta, allowed: tau / 4.0 },
            closeness,
        }));
    }
    let allowed = if delta > 0.0 { theta_of(delta, tau)? } else { PI / 2.0 };
    if closeness.theta >= allowed {
        return Ok(CertifyOutcome::Refused(Refusal {
            reason: RefusalReason::ThetaTooLarge { measured: closeness.theta, allowed },
            closeness,
        }));
    }
    Ok(CertifyOutcome::Certified(IsotopyCertificate {
        criterion: Criterion::Thick { tau, theta: allowed },
        motion_bound: delta,
        closeness,
        correspondence: c.clone(),
        valid: true,
    }))
}

/// Thickness criterion with tau measured from the first graph's closed
/// loops via the discrete thickness scan.
pub fn certify_thick_measured(
    k: &EmbeddedGraph,
    k2: &EmbeddedGraph,
    c: &Correspondence,
) -> Result<(CertifyOutcome, Vec<ThicknessReport>), Error> {
    let mut reports = Vec::new();
    let mut tau = f64::INFINITY;
    for (_, arc, _, _) in &k.arcs {
        if arc.closed {
            let rep = crate::metrics::discrete_thickness(arc)?;
            tau = tau.min(rep.tau_hat);
            reports.push(rep);
        }
    }
    if !tau.is_finite() {
        return Err(Error::InvalidParameter(
            "no closed loops to measure thickness from; pass tau explicitly".into(),
        ));
    }
    Ok((certify_thick(k, k2, c, tau)?, reports))
}

/// Everything produced by one finite-total-curvature certification run.
#[derive(Debug)]
pub struct FtcRun {
    pub outcome: CertifyOutcome,
    pub decomposition: CornerDecomposition,
    pub chain: RadiiChain,
    pub neighborhood: NeighborhoodModel,
    pub correspondence: Correspondence,
}

/// The finite-total-curvature criterion with the arc pairing inferred
/// in arc order.
pub fn certify_ftc(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    epsilon: f64,
) -> Result<FtcRun, Error> {
    if g.arcs.len() != g2.arcs.len() {
        return Err(Error::InvalidCorrespondence("graphs have different arc counts".into()));
    }
    let pairing: Vec<(ArcId, ArcId)> =
        g.arcs.iter().zip(&g2.arcs).map(|((a, _, _, _), (b, _, _, _))| (*a, *b)).collect();
    let corr = default_correspondence(g, g2, &pairing)?;
    certify_ftc_with(g, g2, &corr, epsilon)
}

/// Build the decomposition, chain, and neighborhood (retrying once with
/// the curvature budget halved if the construction fails), then check
/// the closeness of g2 against the chain.
pub fn certify_ftc_with(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    corr: &Correspondence,
    epsilon: f64,
) -> Result<FtcRun, Error> {
    let attempt = |budget: f64| -> Result<(CornerDecomposition, RadiiChain, NeighborhoodModel), Error> {
        let d = corner_decomposition_with(g, budget, &[])?;
        let chain = ftc_radii(g, &d, epsilon)?;
        let n = build_neighborhood(g, &d, &chain)?;
        Ok((d, chain, n))
    };
    let base = CURVATURE_BUDGET - 1e-9;
    let (decomposition, chain, neighborhood) = match attempt(base) {
        Ok(v) => v,
        Err(Error::Neighborhood(_)) => attempt(base / 2.0)?,
        Err(e) => return Err(e),
    };

    let closeness = measure_closeness(g, g2, corr)?;
    let refuse = |reason: RefusalReason, closeness: ClosenessReport| FtcRun {
        outcome: CertifyOutcome::Refused(Refusal { reason, closeness }),
        decomposition: decomposition.clone(),
        chain,
        neighborhood: neighborhood.clone(),
        correspondence: corr.clone(),
    };

    if closeness.theta > CURVATURE_BUDGET {
        return Ok(refuse(
            RefusalReason::ThetaTooLarge { measured: closeness.theta, allowed: CURVATURE_BUDGET },
            closeness.clone(),
        ));
    }
    if closeness.delta > chain.delta {
        return Ok(refuse(
            RefusalReason::DeltaTooLarge { measured: closeness.delta, allowed: chain.delta },
            closeness.clone(),
        ));
    }
    if let Err(detail) = verify_in_neighborhood(g, g2, corr, &decomposition, &neighborhood) {
        return Ok(refuse(RefusalReason::NotInNeighborhood { detail }, closeness.clone()));
    }

    Ok(FtcRun {
        outcome: CertifyOutcome::Certified(IsotopyCertificate {
            criterion: Criterion::Ftc { chain },
            motion_bound: epsilon,
            closeness,
            correspondence: corr.clone(),
            valid: true,
        }),
        decomposition,
        chain,
        neighborhood,
        correspondence: corr.clone(),
    })
}

/// The proof's "(2 delta, pi/4)" claim, checked at runtime: every
/// sampled point of g2 over a tube portion lies on a leaf within
/// 2 delta of that leaf's strand center, and g2 meets the leaves at
/// angle <= pi/4 outside the balls.
fn verify_in_neighborhood(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    corr: &Correspondence,
    d: &CornerDecomposition,
    n: &NeighborhoodModel,
) -> Result<(), String> {
    let chain = n.chain;
    for tube in &n.tubes {
        let sub = &d.subarcs[tube.subarc];
        let arc = g.arc(sub.arc).ok_or("missing arc")?;
        let arc2_id = corr.partner_of(sub.arc).ok_or("uncovered arc")?;
        let arc2 = g2.arc(arc2_id).ok_or("missing partner arc")?;
        let map = corr.map_for(sub.arc).ok_or("uncovered arc")?;
        let pa = ArcParam::new(arc);
        let pb = ArcParam::new(arc2);
        let f0 = pa.fraction_of_vertex(sub.start);
        let f1 = pa.fraction_of_vertex(sub.end);
        let samples = 4 * (sub.points.len() - 1).max(4);
        let mut prev: Option<(f64, Point)> = None;
        for q in 0..=samples {
            let f = f0 + (f1 - f0) * q as f64 / samples as f64;
            let p = pa.point_at(f);
            // Only the portion outside both end balls is leaf-checked.
            if p.dist(sub.points[0]) <= chain.r2 || p.dist(*sub.points.last().unwrap()) <= chain.r2
            {
                prev = None;
                continue;
            }
            let p2 = pb.point_at(map.eval(f));
            let s = match tube.leaf.leaf_index(p2) {
                Some(s) => s,
                None => {
                    return Err(format!(
                        "point of the second graph over strand {} escapes the leaf family",
                        tube.subarc
                    ))
                }
            };
            let center = tube.center_on_leaf(s);
            if p2.dist(center) > 2.0 * chain.delta + 1e-9 {
                return Err(format!(
                    "leaf-mate distance {:.3e} exceeds 2 delta = {:.3e} on strand {}",
                    p2.dist(center),
                    2.0 * chain.delta,
                    tube.subarc
                ));
            }
            if let Some((_, prev_p)) = prev {
                if let Some(dir) = Direction::between(prev_p, p2) {
                    let normal = tube.leaf.normal_at(s, p2);
                    if dir.angle_to(normal) > PI / 4.0 + 1e-6 {
                        return Err(format!(
                            "second graph meets leaves of strand {} at angle {:.4} > pi/4",
                            tube.subarc,
                            dir.angle_to(normal)
                        ));
                    }
                }
            }
            prev = Some((f, p2));
        }
    }
    Ok(())
}

/// Local flatness witness at a point of the graph: the ball of the
/// local decomposition and the number of radially monotone strands in
/// it.
#[derive(Debug, Clone)]
pub struct LocalFlatness {
    pub center: Point,
    pub radius: f64,
    pub k: usize,
    pub monotone: bool,
}

pub fn locally_flat_witness(g: &EmbeddedGraph, p0: Point) -> Result<LocalFlatness, Error> {
    // Locate p0 on the graph; insert it as a polyline vertex if needed.
    let tol = 1e-9 * g.diameter_bound().max(1.0);
    let mut g = g.clone();
    let mut forced: Vec<(ArcId, usize)> = Vec::new();
    let mut located = false;
    'outer: for (arc_id, arc, _, _) in &mut g.arcs {
        for (i, p) in arc.points.iter().enumerate() {
            if p.dist(p0) <= tol {
                if i != 0 && i + 1 != arc.points.len() {
                    forced.push((*arc_id, i));
                }
                located = true;
                break 'outer;
            }
        }
        for i in 0..arc.points.len() - 1 {
            let (a, b) = (arc.points[i], arc.points[i + 1]);
            if point_segment_distance(p0, a, b) <= tol {
                let t = ((p0 - a).dot(b - a) / (b - a).norm_sq()).clamp(0.0, 1.0);
                arc.points.insert(i + 1, a.lerp(b, t));
                forced.push((*arc_id, i + 1));
                located = true;
                break 'outer;
            }
        }
    }
    if !located {
        return Err(Error::InvalidParameter("point does not lie on the graph".into()));
    }

    let d = corner_decomposition_with(&g, CURVATURE_BUDGET - 1e-9, &forced)?;
    let chain = ftc_radii(&g, &d, g.diameter_bound().max(1.0))?;
    let slot = d
        .points
        .iter()
        .position(|dp| dp.point.dist(p0) <= tol)
        .ok_or_else(|| Error::Neighborhood("witness point lost in decomposition".into()))?;
    let incident: Vec<&Subarc> = d
        .subarcs
        .iter()
        .filter(|s| s.p_start == slot || s.p_end == slot)
        .collect();
    let center = d.points[slot].point;
    let mut monotone = true;
    for sub in &incident {
        let pts: Vec<Point> = if sub.p_start == slot {
            sub.points.clone()
        } else {
            sub.points.iter().rev().copied().collect()
        };
        let mut prev = 0.0;
        for p in &pts {
            let dist = p.dist(center);
            if dist > chain.r2 {
                break;
            }
            if dist < prev {
                monotone = false;
            }
            prev = dist;
        }
    }
    Ok(LocalFlatness { center, radius: chain.r2, k: incident.len(), monotone })
}
