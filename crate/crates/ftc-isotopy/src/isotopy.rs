//! Explicit ambient isotopies: the radial ball move (stage I), the
//! leaf-preserving tube move and in-ball strand matching (stage J), the
//! Alexander-trick combing isotopy, and the smallness verifier. The
//! frame assembler samples the composite motion and audits every frame
//! for embeddedness and for the certificate's displacement bound.

use crate::certify::{CornerDecomposition, FtcRun, IsotopyCertificate, NeighborhoodModel, Tube};
use crate::geo::{segment_distance, segment_sphere_exit, Direction, Point, Vec3};
use crate::graph_core::{EmbeddedGraph, PolylineArc};
use crate::metrics::{ArcParam, Correspondence};
use crate::Error;
use rayon::prelude::*;

/// Sampled displacement field p -> f(p) with its declared bound.
#[derive(Debug, Clone)]
pub struct DisplacementField {
    pub samples: Vec<(Point, Vec3)>,
    pub bound: f64,
}

/// delta = max |f|, lambda = max pairwise difference quotient; the
/// motion is then (delta, arctan lambda)-small.
pub fn smallness_verifier(field: &DisplacementField) -> Result<(f64, f64), Error> {
    if field.samples.len() < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let delta = field.samples.iter().map(|(_, f)| f.norm()).fold(0.0, f64::max);
    let mut lambda = 0.0_f64;
    let mut any_pair = false;
    for i in 0..field.samples.len() {
        for j in i + 1..field.samples.len() {
            let (p, fp) = field.samples[i];
            let (q, fq) = field.samples[j];
            let d = p.dist(q);
            if d < 1e-14 {
                continue;
            }
            any_pair = true;
            lambda = lambda.max((fp - fq).norm() / d);
        }
    }
    if !any_pair {
        return Err(Error::InvalidParameter("all sample points coincide".into()));
    }
    Ok((delta, lambda.atan()))
}

/// Time-t image of x under the ball map that carries p'_j to p_j, is
/// linear on each segment from p'_j to the boundary, and fixes the
/// boundary sphere. Points outside the ball are fixed.
pub fn radial_ball_map(
    center: Point,
    radius: f64,
    p_j: Point,
    p_j_prime: Point,
    t: f64,
    x: Point,
) -> Result<Point, Error> {
    if p_j.dist(center) >= radius || p_j_prime.dist(center) >= radius {
        return Err(Error::Isotopy("ball map anchor lies outside the ball".into()));
    }
    if x.dist(center) >= radius * (1.0 - 1e-12) {
        return Ok(x);
    }
    let m = p_j_prime.lerp(p_j, t);
    let d = x - p_j_prime;
    let dn = d.norm();
    if dn < 1e-15 * radius {
        return Ok(m);
    }
    // Boundary point q on the ray p'_j -> x: |p'_j + s d - center| = radius.
    let w = p_j_prime - center;
    let qa = d.norm_sq();
    let qb = 2.0 * w.dot(d);
    let qc = w.norm_sq() - radius * radius;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
    let s = (-qb + disc.sqrt()) / (2.0 * qa);
    let q = p_j_prime + d * s;
    let lambda = 1.0 / s; // x = p'_j + lambda (q - p'_j)
    Ok(m + (q - m) * lambda)
}

/// Apply the radial ball map to whole strands.
pub fn radial_ball_isotopy(
    ball: (Point, f64),
    p_j: Point,
    p_j_prime: Point,
    strands: &[Vec<Point>],
    t: f64,
) -> Result<Vec<Vec<Point>>, Error> {
    strands
        .iter()
        .map(|s| {
            s.iter().map(|x| radial_ball_map(ball.0, ball.1, p_j, p_j_prime, t, *x)).collect()
        })
        .collect()
}

/// A strand inside a ball, radially monotone from the center out.
struct RadialPiece {
    center: Point,
    pts: Vec<Point>,
    radii: Vec<f64>,
}

impl RadialPiece {
    fn new(center: Point, pts: Vec<Point>) -> Result<RadialPiece, Error> {
        let radii: Vec<f64> = pts.iter().map(|p| p.dist(center)).collect();
        for w in radii.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Isotopy("strand is not radially monotone".into()));
            }
        }
        Ok(RadialPiece { center, pts, radii })
    }

    /// Exact point of the polyline at distance r from the center.
    fn point_at_radius(&self, r: f64) -> Point {
        let r = r.clamp(self.radii[0], *self.radii.last().unwrap());
        let i = match self.radii.windows(2).position(|w| r >= w[0] && r <= w[1]) {
            Some(i) => i,
            None => return *self.pts.last().unwrap(),
        };
        let (a, b) = (self.pts[i], self.pts[i + 1]);
        let d = b - a;
        let w = a - self.center;
        let qa = d.norm_sq();
        let qb = 2.0 * w.dot(d);
        let qc = w.norm_sq() - r * r;
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        let t = ((-qb + disc.sqrt()) / (2.0 * qa)).clamp(0.0, 1.0);
        a.lerp(b, t)
    }

    fn direction_at_radius(&self, r: f64) -> Option<Direction> {
        Direction::between(self.center, self.point_at_radius(r))
    }
}

/// Alexander-trick combing: strands run from the ball center to the
/// boundary; at time t the sphere of scale lambda shows the pattern
/// initially at scale lambda + (1 - lambda) t, so t = 1 leaves straight
/// radii. Output strands are sampled at the input vertex radii.
pub fn combing_isotopy(
    ball: (Point, f64),
    strands: &[Vec<Point>],
    targets: &[Point],
    t: f64,
) -> Result<Vec<Vec<Point>>, Error> {
    let (center, radius) = ball;
    if targets.len() != strands.len() {
        return Err(Error::InvalidParameter("one boundary target per strand".into()));
    }
    let mut dirs: Vec<Vec<(f64, Direction)>> = Vec::new();
    for (k, strand) in strands.iter().enumerate() {
        if strand.len() < 2 || strand[0].dist(center) > 1e-9 * radius {
            return Err(Error::Isotopy(format!("strand {k} must start at the ball center")));
        }
        let mut rd = Vec::new();
        for p in &strand[1..] {
            let r = p.dist(center);
            if let Some(prev) = rd.last().map(|(r, _)| *r) {
                if r <= prev {
                    return Err(Error::Isotopy(format!("strand {k} is not radially monotone")));
                }
            }
            rd.push((
                r,
                Direction::between(center, *p)
                    .ok_or_else(|| Error::Isotopy("zero-length strand step".into()))?,
            ));
        }
        let (rl, _) = *rd.last().unwrap();
        if (rl - radius).abs() > 1e-7 * radius {
            return Err(Error::Isotopy(format!("strand {k} does not reach the boundary")));
        }
        if strand.last().unwrap().dist(targets[k]) > 1e-7 * radius {
            return Err(Error::Isotopy(format!("strand {k} does not end at its target")));
        }
        dirs.push(rd);
    }

    let dir_at = |k: usize, r: f64| -> Direction {
        let rd = &dirs[k];
        if r <= rd[0].0 {
            return rd[0].1;
        }
        for w in rd.windows(2) {
            if r <= w[1].0 {
                let u = (r - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1.slerp(w[1].1, u);
            }
        }
        rd.last().unwrap().1
    };

    // Embeddedness of the input: no two strands may share a direction
    // on any common sphere.
    for i in 0..strands.len() {
        for j in i + 1..strands.len() {
            for q in 1..=64 {
                let r = radius * q as f64 / 64.0;
                if dir_at(i, r).angle_to(dir_at(j, r)) < 1e-9 {
                    return Err(Error::Isotopy(format!(
                        "strands {i} and {j} coincide on the sphere of radius {r:.6}"
                    )));
                }
            }
        }
    }

    let out = strands
        .iter()
        .enumerate()
        .map(|(k, strand)| {
            strand
                .iter()
                .map(|p| {
                    let r = p.dist(center);
                    if r < 1e-15 * radius {
                        return center;
                    }
                    let r_src = r + (radius - r) * t;
                    let d_src = dir_at(k, r_src);
                    // Exact identity when the combing does not change
                    // the direction (radial strands, or t = 0).
                    if d_src.vec() == dir_at(k, r).vec() {
                        return *p;
                    }
                    center + d_src.vec() * r
                })
                .collect()
        })
        .collect();
    Ok(out)
}

/// Stage-J motion on one tube: each point moves within its leaf toward
/// the leaf's strand center by fraction t.
pub fn leaf_isotopy(tube: &Tube, points: &[Point], t: f64) -> Result<Vec<Point>, Error> {
    points
        .iter()
        .map(|p| {
            let s = tube
                .leaf
                .leaf_index(*p)
                .ok_or_else(|| Error::Isotopy("point escapes the leaf family".into()))?;
            let center = tube.center_on_leaf(s);
            if p.dist(center) > tube.r4 * (1.0 + 1e-9) {
                return Err(Error::Isotopy("point lies outside its leaf disk".into()));
            }
            Ok(tube.leaf.geodesic(s, *p, center, t))
        })
        .collect()
}

/// Sampled frames of a certified isotopy, with per-frame audit results.
#[derive(Debug, Clone)]
pub struct IsotopyFrames {
    pub times: Vec<f64>,
    pub frames: Vec<EmbeddedGraph>,
    pub min_self_distance: Vec<f64>,
    pub embedded: Vec<bool>,
    pub max_displacement: f64,
}

/// Minimum distance between segments that do not share an endpoint.
pub fn min_self_distance(g: &EmbeddedGraph) -> f64 {
    let mut segs: Vec<(Point, Point)> = Vec::new();
    for (_, arc, _, _) in &g.arcs {
        segs.extend(arc.segments());
    }
    let idx: Vec<usize> = (0..segs.len()).collect();
    idx.par_iter()
        .map(|&i| {
            let mut best = f64::INFINITY;
            let (a1, b1) = segs[i];
            for &(a2, b2) in segs.iter().skip(i + 1) {
                let share = a1.dist(a2).min(a1.dist(b2)).min(b1.dist(a2)).min(b1.dist(b2));
                if share < 1e-12 {
                    continue;
                }
                best = best.min(segment_distance(a1, b1, a2, b2));
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Per-sample motion through the two stages.
enum Motion {
    /// Fixed in stage I, fixed in stage J (should not occur for
    /// certified inputs; kept as an inert fallback).
    Still,
    /// Inside a ball: radial map in stage I, strand matching in stage J.
    Ball { slot: usize, lambda: f64, d_src: Direction, d_tgt: Direction },
    /// In a tube: fixed in stage I, leaf motion in stage J.
    Leaf { tube: usize, s: f64, center: Point },
}

struct ArcTrack {
    arc2: crate::graph_core::ArcId,
    closed: bool,
    x0: Vec<Point>,
    xh: Vec<Point>,
    motion: Vec<Motion>,
}

impl ArcTrack {
    fn position(&self, i: usize, t: f64, r2: f64, balls: &[(Point, Point)], tubes: &[Tube]) -> Point {
        if t <= 0.5 {
            let u = 2.0 * t;
            match &self.motion[i] {
                Motion::Ball { slot, .. } => {
                    let (p_j, p_jp) = balls[*slot];
                    radial_ball_map(p_j, r2, p_j, p_jp, u, self.x0[i]).unwrap_or(self.x0[i])
                }
                _ => self.x0[i],
            }
        } else {
            let u = 2.0 * t - 1.0;
            match &self.motion[i] {
                Motion::Ball { slot, lambda, d_src, d_tgt } => {
                    let c = balls[*slot].0;
                    if *lambda < 1e-14 {
                        c
                    } else {
                        c + d_src.slerp(*d_tgt, u).vec() * (lambda * r2)
                    }
                }
                Motion::Leaf { tube, s, center } => {
                    tubes[*tube].leaf.geodesic(*s, self.xh[i], *center, u)
                }
                Motion::Still => self.xh[i],
            }
        }
    }
}

fn frame_graph(
    g2: &EmbeddedGraph,
    tracks: &[ArcTrack],
    t: f64,
    r2: f64,
    balls: &[(Point, Point)],
    tubes: &[Tube],
) -> (EmbeddedGraph, f64) {
    let mut arcs = Vec::new();
    let mut vertex_pos: Vec<(crate::graph_core::VertexId, Point)> = Vec::new();
    let mut displacement = 0.0_f64;
    for track in tracks {
        let (_, _, head, tail) = g2
            .arcs
            .iter()
            .find(|(id, _, _, _)| *id == track.arc2)
            .expect("track arc present");
        let mut points: Vec<Point> = Vec::with_capacity(track.x0.len());
        for i in 0..track.x0.len() {
            let p = track.position(i, t, r2, balls, tubes);
            displacement = displacement.max(p.dist(track.x0[i]));
            if let Some(last) = points.last() {
                if p.dist(*last) < 1e-13 {
                    continue;
                }
            }
            points.push(p);
        }
        if track.closed {
            let first = points[0];
            if points.last().unwrap().dist(first) < 1e-13 {
                *points.last_mut().unwrap() = first;
            } else {
                points.push(first);
            }
        }
        let first = points[0];
        let last = *points.last().unwrap();
        for (v, p) in [(head, first), (tail, last)] {
            if !vertex_pos.iter().any(|(w, _)| w == v) {
                vertex_pos.push((*v, p));
            }
        }
        arcs.push((track.arc2, PolylineArc { points, closed: track.closed }, *head, *tail));
    }
    (EmbeddedGraph { vertices: vertex_pos, arcs }, displacement)
}

/// Uniform time grid over [0, 1] including the stage handoff at 1/2.
fn time_grid(m: usize) -> Vec<f64> {
    let m = m.max(2);
    let mut times: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
    if !times.iter().any(|t| (*t - 0.5).abs() < 1e-12) {
        times.push(0.5);
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    times
}

/// Sample the composite isotopy of a finite-total-curvature
/// certificate: stage I on [0, 1/2] (radial ball maps carrying each
/// p'_j to p_j), stage J on [1/2, 1] (leaf-preserving tube motion and
/// in-ball strand matching). Frames run from g2 at t = 0 to g at t = 1.
pub fn assemble_frames(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    run: &FtcRun,
    m: usize,
) -> Result<IsotopyFrames, Error> {
    let cert = run
        .outcome
        .certificate()
        .ok_or_else(|| Error::Isotopy("frames require a certificate, not a refusal".into()))?;
    let tracks = build_tracks(g, g2, &run.correspondence, &run.decomposition, &run.neighborhood)?;
    let chain = run.chain;

    // Ball anchors: (p_j, p'_j) per decomposition point.
    let balls = ball_anchors(g, g2, &run.correspondence, &run.decomposition)?;

    let times = time_grid(m);
    let diam = g.diameter_bound().max(g2.diameter_bound());
    let results: Vec<(EmbeddedGraph, f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let (frame, disp) =
                frame_graph(g2, &tracks, t, chain.r2, &balls, &run.neighborhood.tubes);
            let msd = min_self_distance(&frame);
            (frame, disp, msd)
        })
        .collect();

    let mut frames = Vec::new();
    let mut min_sd = Vec::new();
    let mut embedded = Vec::new();
    let mut max_displacement = 0.0_f64;
    for (frame, disp, msd) in results {
        embedded.push(msd > 1e-9 * diam);
        min_sd.push(msd);
        frames.push(frame);
        max_displacement = max_displacement.max(disp);
    }
    let _ = cert;
    Ok(IsotopyFrames { times, frames, min_self_distance: min_sd, embedded, max_displacement })
}

/// Straight-line frame interpolation along the correspondence, used
/// for thickness certificates (the thick criterion's normal-disk
/// isotopy is non-constructive; the matched points are closer than
/// tau/4, so linear motion stays within the embedded normal tube).
pub fn assemble_frames_linear(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    cert: &IsotopyCertificate,
    m: usize,
) -> Result<IsotopyFrames, Error> {
    let corr = &cert.correspondence;
    let times = time_grid(m);
    let diam = g.diameter_bound().max(g2.diameter_bound());

    struct Pair {
        arc2: crate::graph_core::ArcId,
        closed: bool,
        from: Vec<Point>,
        to: Vec<Point>,
    }
    let mut pairs = Vec::new();
    for (a_id, b_id, map) in &corr.pairs {
        let arc = g.arc(*a_id).ok_or_else(|| Error::InvalidCorrespondence("missing arc".into()))?;
        let arc2 =
            g2.arc(*b_id).ok_or_else(|| Error::InvalidCorrespondence("missing arc".into()))?;
        let pa = ArcParam::new(arc);
        let pb = ArcParam::new(arc2);
        let mut fr: Vec<f64> = pa.vertex_fractions();
        fr.extend(pb.vertex_fractions().iter().map(|sp| map.eval_inverse(*sp)));
        fr.sort_by(|a, b| a.partial_cmp(b).unwrap());
        fr.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        let from: Vec<Point> = fr.iter().map(|s| pb.point_at(map.eval(*s))).collect();
        let to: Vec<Point> = fr.iter().map(|s| pa.point_at(*s)).collect();
        pairs.push(Pair { arc2: *b_id, closed: arc2.closed, from, to });
    }

    let results: Vec<(EmbeddedGraph, f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let mut arcs = Vec::new();
            let mut vertex_pos: Vec<(crate::graph_core::VertexId, Point)> = Vec::new();
            let mut disp = 0.0_f64;
            for pair in &pairs {
                let (_, _, head, tail) = g2
                    .arcs
                    .iter()
                    .find(|(id, _, _, _)| *id == pair.arc2)
                    .expect("arc present");
                let mut points = Vec::with_capacity(pair.from.len());
                for (a, b) in pair.from.iter().zip(&pair.to) {
                    let p = a.lerp(*b, t);
                    disp = disp.max(p.dist(*a));
                    if let Some(last) = points.last() {
                        if p.dist(*last) < 1e-13 {
                            continue;
                        }
                    }
                    points.push(p);
                }
                if pair.closed {
                    let first = points[0];
                    if points.last().unwrap().dist(first) < 1e-13 {
                        *points.last_mut().unwrap() = first;
                    } else {
                        points.push(first);
                    }
                }
                for (v, p) in [(head, points[0]), (tail, *points.last().unwrap())] {
                    if !vertex_pos.iter().any(|(w, _)| w == v) {
                        vertex_pos.push((*v, p));
                    }
                }
                arcs.push((pair.arc2, PolylineArc { points, closed: pair.closed }, *head, *tail));
            }
            let frame = EmbeddedGraph { vertices: vertex_pos, arcs };
            let msd = min_self_distance(&frame);
            (frame, disp, msd)
        })
        .collect();

    let mut frames = Vec::new();
    let mut min_sd = Vec::new();
    let mut embedded = Vec::new();
    let mut max_displacement = 0.0_f64;
    for (frame, disp, msd) in results {
        embedded.push(msd > 1e-9 * diam);
        min_sd.push(msd);
        frames.push(frame);
        max_displacement = max_displacement.max(disp);
    }
    Ok(IsotopyFrames { times, frames, min_self_distance: min_sd, embedded, max_displacement })
}

fn ball_anchors(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    corr: &Correspondence,
    d: &CornerDecomposition,
) -> Result<Vec<(Point, Point)>, Error> {
    d.points
        .iter()
        .map(|dp| {
            let map = corr
                .map_for(dp.arc)
                .ok_or_else(|| Error::InvalidCorrespondence("uncovered arc".into()))?;
            let b_id = corr
                .partner_of(dp.arc)
                .ok_or_else(|| Error::InvalidCorrespondence("uncovered arc".into()))?;
            let arc2 = g2
                .arc(b_id)
                .ok_or_else(|| Error::InvalidCorrespondence("missing partner arc".into()))?;
            let pb = ArcParam::new(arc2);
            let _ = g;
            Ok((dp.point, pb.point_at(map.eval(dp.fraction))))
        })
        .collect()
}

/// Build the per-arc sample tracks: master fractions (vertices of both
/// graphs plus tracked preimages of the target's in-ball vertex radii
/// and in-tube leaf indices), stage-I end positions, and stage-J
/// motions.
fn build_tracks(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    corr: &Correspondence,
    d: &CornerDecomposition,
    n: &NeighborhoodModel,
) -> Result<Vec<ArcTrack>, Error> {
    let chain = n.chain;
    let r2 = chain.r2;
    let anchors = ball_anchors(g, g2, corr, d)?;

    let ball_of = |p: Point| -> Option<usize> {
        d.points.iter().position(|dp| p.dist(dp.point) < r2 * (1.0 - 1e-12))
    };
    let stage_i_end = |p: Point| -> Result<Point, Error> {
        match ball_of(p) {
            Some(slot) => {
                let (p_j, p_jp) = anchors[slot];
                radial_ball_map(p_j, r2, p_j, p_jp, 1.0, p)
            }
            None => Ok(p),
        }
    };

    let mut tracks = Vec::new();
    for (a_id, b_id, map) in &corr.pairs {
        let arc = g.arc(*a_id).ok_or_else(|| Error::InvalidCorrespondence("missing arc".into()))?;
        let arc2 =
            g2.arc(*b_id).ok_or_else(|| Error::InvalidCorrespondence("missing arc".into()))?;
        let pa = ArcParam::new(arc);
        let pb = ArcParam::new(arc2);
        let x0_at = |f: f64| pb.point_at(map.eval(f));

        let mut fracs: Vec<f64> = pa.vertex_fractions();
        fracs.extend(pb.vertex_fractions().iter().map(|sp| map.eval_inverse(*sp)));
        fracs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        fracs.dedup_by(|a, b| (*a - *b).abs() < 1e-13);

        // Tracked fractions: preimages of the target's geometry so the
        // final frame hits g exactly.
        let mut tracked: Vec<f64> = Vec::new();
        let subarcs: Vec<(usize, &crate::certify::Subarc)> = d
            .subarcs
            .iter()
            .enumerate()
            .filter(|(_, s)| s.arc == *a_id)
            .collect();
        for (k, sub) in &subarcs {
            let f0 = pa.fraction_of_vertex(sub.start);
            let f1 = pa.fraction_of_vertex(sub.end);
            let in_range: Vec<f64> =
                fracs.iter().copied().filter(|f| *f >= f0 - 1e-13 && *f <= f1 + 1e-13).collect();
            if in_range.len() < 2 {
                continue;
            }
            let tube = &n.tubes[*k];

            // Leaf indices of the target's interior strand vertices,
            // plus the two strand endpoints (leaves 0 and 1).
            let mut leaf_targets: Vec<f64> = vec![0.0, 1.0];
            leaf_targets.extend(tube.beta_leaf[1..tube.beta_leaf.len() - 1].iter().copied());
            for s_v in leaf_targets {
                let objective = |f: f64| tube.leaf.side(s_v, x0_at(f));
                if let Some(f) = bisect_on_grid(&in_range, objective) {
                    tracked.push(f);
                }
            }

            // Radii of the target's in-ball strand vertices.
            for (center, pts_in_order) in [
                (sub.points[0], sub.points.clone()),
                (*sub.points.last().unwrap(), {
                    let mut r = sub.points.clone();
                    r.reverse();
                    r
                }),
            ] {
                for p in pts_in_order.iter().skip(1) {
                    let rho = p.dist(center);
                    if rho >= r2 {
                        break;
                    }
                    let objective = |f: f64| -> f64 {
                        let x = stage_i_end(x0_at(f)).unwrap_or_else(|_| x0_at(f));
                        // Signed by position along the strand relative
                        // to the crossing of radius rho around center.
                        x.dist(center) - rho
                    };
                    // The radius function decreases into the start ball
                    // and increases out of it; a sign change between
                    // consecutive master samples brackets the preimage.
                    if let Some(f) = bisect_on_grid(&in_range, objective) {
                        tracked.push(f);
                    }
                }
            }
        }
        fracs.extend(tracked);
        fracs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        fracs.dedup_by(|a, b| (*a - *b).abs() < 1e-13);

        let x0: Vec<Point> = fracs.iter().map(|f| x0_at(*f)).collect();
        let xh: Vec<Point> = x0.iter().map(|p| stage_i_end(*p)).collect::<Result<_, _>>()?;

        // Subarc index per fraction (for tube lookup).
        let sub_of = |f: f64| -> Option<usize> {
            subarcs
                .iter()
                .find(|(_, s)| {
                    f >= pa.fraction_of_vertex(s.start) - 1e-12
                        && f <= pa.fraction_of_vertex(s.end) + 1e-12
                })
                .map(|(k, _)| *k)
        };

        // Source strands per (ball slot): needed for stage-J matching.
        // For each in-ball sample, the source direction is just its own
        // stage-I position; the target direction comes from the exact
        // target strand polyline at the same radius.
        let mut target_pieces: Vec<Option<(RadialPiece, RadialPiece)>> =
            Vec::with_capacity(d.subarcs.len());
        for sub in &d.subarcs {
            if sub.arc != *a_id {
                target_pieces.push(None);
                continue;
            }
            let start_piece = ball_piece(&sub.points, r2)?;
            let rev: Vec<Point> = sub.points.iter().rev().copied().collect();
            let end_piece = ball_piece(&rev, r2)?;
            target_pieces.push(Some((start_piece, end_piece)));
        }

        let mut motion = Vec::with_capacity(fracs.len());
        for (i, f) in fracs.iter().enumerate() {
            let x = xh[i];
            if let Some(slot) = ball_of(x0[i]) {
                // Of the subarcs of this arc touching the ball, pick
                // the one whose fraction range contains this sample.
                let found = subarcs.iter().find_map(|(k, s)| {
                    if s.p_start != slot && s.p_end != slot {
                        return None;
                    }
                    let f0 = pa.fraction_of_vertex(s.start);
                    let f1 = pa.fraction_of_vertex(s.end);
                    if *f >= f0 - 1e-12 && *f <= f1 + 1e-12 {
                        Some((*k, s.p_start == slot))
                    } else {
                        None
                    }
                });
                let (k, is_start) = match found {
                    Some(v) => v,
                    None => {
                        motion.push(Motion::Still);
                        continue;
                    }
                };
                let c = d.points[slot].point;
                let lambda = x.dist(c) / r2;
                if lambda < 1e-14 {
                    motion.push(Motion::Ball {
                        slot,
                        lambda: 0.0,
                        d_src: Direction::from_unit(Vec3::new(1.0, 0.0, 0.0)).unwrap(),
                        d_tgt: Direction::from_unit(Vec3::new(1.0, 0.0, 0.0)).unwrap(),
                    });
                    continue;
                }
                let d_src = Direction::between(c, x)
                    .ok_or_else(|| Error::Isotopy("degenerate ball sample".into()))?;
                let pieces = target_pieces[k]
                    .as_ref()
                    .ok_or_else(|| Error::Isotopy("missing target strand".into()))?;
                let piece = if is_start { &pieces.0 } else { &pieces.1 };
                let d_tgt = piece
                    .direction_at_radius(lambda * r2)
                    .ok_or_else(|| Error::Isotopy("degenerate target strand".into()))?;
                motion.push(Motion::Ball { slot, lambda, d_src, d_tgt });
            } else if let Some(k) = sub_of(*f) {
                let tube = &n.tubes[k];
                match tube.leaf.leaf_index(x) {
                    Some(s) => {
                        let center = tube.center_on_leaf(s);
                        motion.push(Motion::Leaf { tube: k, s, center });
                    }
                    None => motion.push(Motion::Still),
                }
            } else {
                motion.push(Motion::Still);
            }
        }

        tracks.push(ArcTrack { arc2: *b_id, closed: arc2.closed, x0, xh, motion });
    }
    Ok(tracks)
}

/// Target strand inside the ball of radius r2 around pts[0]: the
/// polyline from the center to its boundary crossing.
fn ball_piece(pts: &[Point], r2: f64) -> Result<RadialPiece, Error> {
    let c = pts[0];
    let mut piece = vec![c];
    for w in pts.windows(2) {
        if w[1].dist(c) < r2 {
            piece.push(w[1]);
        } else {
            let t = segment_sphere_exit(w[0], w[1], c, r2)
                .ok_or_else(|| Error::Isotopy("strand fails to cross its ball boundary".into()))?;
            piece.push(w[0].lerp(w[1], t));
            return RadialPiece::new(c, piece);
        }
    }
    Err(Error::Isotopy("strand never leaves its ball".into()))
}

/// Find a zero of `objective` between consecutive grid values where its
/// sign changes, by bisection. Returns None without a sign change.
fn bisect_on_grid(grid: &[f64], objective: impl Fn(f64) -> f64) -> Option<f64> {
    let vals: Vec<f64> = grid.iter().map(|f| objective(*f)).collect();
    for i in 0..grid.len() - 1 {
        let (va, vb) = (vals[i], vals[i + 1]);
        if va == 0.0 {
            return Some(grid[i]);
        }
        if va * vb < 0.0 {
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            let (mut vlo, _) = (va, vb);
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                let vm = objective(mid);
                if vm == 0.0 {
                    return Some(mid);
                }
                if vlo * vm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    vlo = vm;
                }
            }
            return Some(0.5 * (lo + hi));
        }
    }
    if *vals.last().unwrap() == 0.0 {
        return Some(*grid.last().unwrap());
    }
    None
}

/// Max distance from any vertex of `arc` to the polyline `target`.
pub fn support_distance(arc: &PolylineArc, target: &PolylineArc) -> f64 {
    let mut worst = 0.0_f64;
    for p in &arc.points {
        let mut best = f64::INFINITY;
        for (a, b) in target.segments() {
            best = best.min(crate::geo::point_segment_distance(*p, a, b));
        }
        worst = worst.max(best);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certify_ftc, certify_thick, corner_decomposition, ftc_radii};
    use crate::fixtures;
    use crate::metrics::identity_correspondence;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn radial_map_trivial_cases() {
        let c = Point::new(0.0, 0.0, 0.0);
        let p = Point::new(0.1, 0.0, 0.0);
        // p'_j = p_j: identity for all t.
        for t in [0.0, 0.3, 1.0] {
            let x = Point::new(0.2, 0.3, -0.1);
            assert_relative_eq!(radial_ball_map(c, 1.0, p, p, t, x).unwrap().dist(x), 0.0);
        }
        // t = 0: identity.
        let pp = Point::new(-0.05, 0.2, 0.0);
        let x = Point::new(0.4, -0.1, 0.3);
        assert!(radial_ball_map(c, 1.0, p, pp, 0.0, x).unwrap().dist(x) < 1e-12);
        // Anchor outside the ball is an error.
        assert!(radial_ball_map(c, 1.0, p, Point::new(2.0, 0.0, 0.0), 0.5, x).is_err());
    }

    #[test]
    fn radial_map_straight_strand() {
        // A straight strand through p'_j maps at t = 1 to a bent strand
        // through p_j with both boundary points unchanged.
        let c = Point::new(0.0, 0.0, 0.0);
        let pp = Point::new(0.2, 0.0, 0.0);
        let p = Point::new(0.0, 0.1, 0.0);
        let strand: Vec<Point> =
            (0..=20).map(|k| Point::new(-1.0 + 2.0 * k as f64 / 20.0, 0.0, 0.0)).collect();
        let moved = radial_ball_isotopy((c, 1.0), p, pp, &[strand.clone()], 1.0).unwrap();
        assert!(moved[0][0].dist(strand[0]) < 1e-12);
        assert!(moved[0][20].dist(strand[20]) < 1e-12);
        // The image of p'_j itself is p_j.
        let im = radial_ball_map(c, 1.0, p, pp, 1.0, pp).unwrap();
        assert!(im.dist(p) < 1e-12);
        // Each intermediate image stays inside the ball.
        for q in &moved[0] {
            assert!(q.dist(c) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn combing_straight_radii_is_identity() {
        let c = Point::new(0.0, 0.0, 0.0);
        let dirs = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let strands: Vec<Vec<Point>> = dirs
            .iter()
            .map(|d| (0..=10).map(|k| c + *d * (k as f64 / 10.0)).collect())
            .collect();
        let targets: Vec<Point> = strands.iter().map(|s| *s.last().unwrap()).collect();
        for t in [0.0, 0.25, 0.5, 1.0] {
            let out = combing_isotopy((c, 1.0), &strands, &targets, t).unwrap();
            for (s, o) in strands.iter().zip(&out) {
                for (a, b) in s.iter().zip(o) {
                    assert_eq!(a.dist(*b), 0.0);
                }
            }
        }
    }

    fn twisted_strands(c: Point, radius: f64, n: usize) -> Vec<Vec<Point>> {
        // Two strands wrapping one full mutual twist about the z-axis.
        (0..2)
            .map(|i| {
                let mut pts = vec![c];
                for k in 1..=n {
                    let lam = k as f64 / n as f64;
                    let ang = 2.0 * PI * lam + PI * i as f64;
                    let d = Vec3::new(ang.cos(), ang.sin(), 0.5).normalized().unwrap();
                    pts.push(c + d * (lam * radius));
                }
                pts
            })
            .collect()
    }

    #[test]
    fn combing_untwists_two_strands() {
        let c = Point::new(0.0, 0.0, 0.0);
        let strands = twisted_strands(c, 1.0, 64);
        let targets: Vec<Point> = strands.iter().map(|s| *s.last().unwrap()).collect();
        let out = combing_isotopy((c, 1.0), &strands, &targets, 1.0).unwrap();
        for (k, strand) in out.iter().enumerate() {
            let d = Direction::between(c, targets[k]).unwrap();
            for p in &strand[1..] {
                let r = p.dist(c);
                assert!(p.dist(c + d.vec() * r) < 1e-6);
            }
            assert!(strand.last().unwrap().dist(targets[k]) < 1e-9);
        }
        // Intermediate frames keep the strands apart sphere by sphere.
        for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let out = combing_isotopy((c, 1.0), &strands, &targets, t).unwrap();
            for q in 1..=32 {
                let r = q as f64 / 32.0;
                let a = RadialPiece::new(c, out[0].clone()).unwrap().point_at_radius(r);
                let b = RadialPiece::new(c, out[1].clone()).unwrap().point_at_radius(r);
                assert!(a.dist(b) > 1e-3 * r);
            }
        }
    }

    #[test]
    fn leaf_isotopy_moves_to_centers() {
        let g = fixtures::circle_graph(64, 1.0);
        let d = corner_decomposition(&g).unwrap();
        let chain = ftc_radii(&g, &d, 0.5).unwrap();
        let n = crate::certify::build_neighborhood(&g, &d, &chain).unwrap();
        let tube = &n.tubes[0];
        // Offset a strand midpoint within its leaf disk.
        let s = 0.5 * (tube.beta_leaf[0] + tube.beta_leaf[tube.beta_leaf.len() - 1]);
        let center = tube.center_on_leaf(s);
        let nrm = tube.leaf.normal_at(s, center);
        let side = crate::geo::orthonormal_to(nrm.vec());
        let p = center + side * (0.5 * tube.r4);
        // Identity when already central.
        let out = leaf_isotopy(tube, &[center], 0.7).unwrap();
        assert!(out[0].dist(center) < 1e-9);
        // Full motion ends at the center; max move below r4.
        let out = leaf_isotopy(tube, &[p], 1.0).unwrap();
        assert!(out[0].dist(center) < 1e-7);
        assert!(p.dist(out[0]) < tube.r4);
        // Outside the disk is an error.
        let far = center + side * (3.0 * tube.r4);
        assert!(leaf_isotopy(tube, &[far], 1.0).is_err());
    }

    #[test]
    fn smallness_of_fields() {
        let pts: Vec<Point> = (0..8).map(|k| Point::new(k as f64, 0.0, 0.0)).collect();
        let v = Vec3::new(0.1, -0.2, 0.05);
        let constant =
            DisplacementField { samples: pts.iter().map(|p| (*p, v)).collect(), bound: 1.0 };
        let (delta, theta) = smallness_verifier(&constant).unwrap();
        assert_relative_eq!(delta, v.norm(), epsilon = 1e-15);
        assert_eq!(theta, 0.0);

        let lam0 = 0.3;
        let e = Vec3::new(1.0, 0.0, 0.0);
        let linear = DisplacementField {
            samples: pts.iter().map(|p| (*p, e * (lam0 * p.x))).collect(),
            bound: 10.0,
        };
        let (_, theta) = smallness_verifier(&linear).unwrap();
        assert_relative_eq!(theta, lam0.atan(), epsilon = 1e-9);

        let zero = DisplacementField {
            samples: pts.iter().map(|p| (*p, Vec3::new(0.0, 0.0, 0.0))).collect(),
            bound: 1.0,
        };
        assert_eq!(smallness_verifier(&zero).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn frames_identity_input() {
        let g = EmbeddedGraph::from_loop(fixtures::trefoil(120));
        let run = certify_ftc(&g, &g, 0.1).unwrap();
        let frames = assemble_frames(&g, &g, &run, 9).unwrap();
        assert!(frames.max_displacement < 1e-9);
        for frame in &frames.frames {
            assert!(support_distance(&frame.arcs[0].1, &g.arcs[0].1) < 1e-9);
        }
        assert!(frames.embedded.iter().all(|e| *e));
    }

    #[test]
    fn frames_translated_circle_thick() {
        let g = fixtures::circle_graph(256, 1.0);
        let g2 = g.transformed(|p| p + Vec3::new(0.05, 0.0, 0.0));
        let c = identity_correspondence(&g);
        let out = certify_thick(&g, &g2, &c, 2.0).unwrap();
        let cert = out.certificate().unwrap();
        let frames = assemble_frames_linear(&g, &g2, cert, 21).unwrap();
        assert!(frames.max_displacement <= cert.motion_bound + 1e-9);
        assert!(frames.embedded.iter().all(|e| *e));
        // Monotone displacement from frame 0.
        let mut prev = -1.0;
        for (frame, t) in frames.frames.iter().zip(&frames.times) {
            let d = support_distance(&frame.arcs[0].1, &g2.arcs[0].1);
            assert!(d >= prev - 1e-12, "displacement not monotone at t={t}");
            prev = d;
        }
        // Last frame sits on the target.
        assert!(support_distance(frames.frames.last().unwrap().arc(crate::graph_core::ArcId(0)).unwrap(), &g.arcs[0].1) < 1e-9);
    }

    #[test]
    fn frames_perturbed_trefoil_ftc() {
        let g = EmbeddedGraph::from_loop(fixtures::trefoil(150));
        let chain = {
            let d = corner_decomposition(&g).unwrap();
            ftc_radii(&g, &d, 0.1).unwrap()
        };
        let g2 = fixtures::perturb(&g, 11, chain.delta / 2.0);
        let run = certify_ftc(&g, &g2, 0.1).unwrap();
        assert!(run.outcome.certificate().is_some());
        let frames = assemble_frames(&g, &g2, &run, 50).unwrap();
        assert_eq!(frames.frames.len(), frames.times.len());
        assert!(frames.max_displacement <= 0.1 + 1e-9);
        assert!(frames.embedded.iter().all(|e| *e), "all frames embedded");
        // Frame 0 lies on g2, frame 1 on g, both ways around.
        let f0 = &frames.frames[0].arcs[0].1;
        let f1 = &frames.frames.last().unwrap().arcs[0].1;
        assert!(support_distance(f0, &g2.arcs[0].1) < 1e-9);
        assert!(support_distance(&g2.arcs[0].1, f0) < 1e-9);
        assert!(support_distance(f1, &g.arcs[0].1) < 1e-9);
        assert!(support_distance(&g.arcs[0].1, f1) < 1e-9);
    }
}
