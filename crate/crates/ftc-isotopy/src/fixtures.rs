//! Canonical test curves: round polygons, knot models, links, and
//! seeded perturbation helpers. Used by the test suites and by the CLI
//! fixture generator.

use crate::geo::{Point, Vec3};
use crate::graph_core::{ArcId, EmbeddedGraph, PolylineArc, VertexId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Regular n-gon of the given radius in the xy-plane, as a closed arc.
pub fn regular_ngon(n: usize, radius: f64) -> PolylineArc {
    let pts: Vec<Point> = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            Point::new(radius * t.cos(), radius * t.sin(), 0.0)
        })
        .collect();
    PolylineArc::closed_loop(pts)
}

pub fn circle_graph(n: usize, radius: f64) -> EmbeddedGraph {
    EmbeddedGraph::from_loop(regular_ngon(n, radius))
}

pub fn square(side: f64) -> PolylineArc {
    let h = side / 2.0;
    PolylineArc::closed_loop(vec![
        Point::new(-h, -h, 0.0),
        Point::new(h, -h, 0.0),
        Point::new(h, h, 0.0),
        Point::new(-h, h, 0.0),
    ])
}

/// Stadium curve: straight sides of length `side_len` at y = ±radius,
/// joined by semicircular caps.
pub fn stadium(side_len: f64, radius: f64, n_side: usize, n_cap: usize) -> PolylineArc {
    let hl = side_len / 2.0;
    let mut pts = Vec::new();
    for k in 0..n_side {
        let x = -hl + side_len * k as f64 / n_side as f64;
        pts.push(Point::new(x, -radius, 0.0));
    }
    for k in 0..n_cap {
        let t = -PI / 2.0 + PI * k as f64 / n_cap as f64;
        pts.push(Point::new(hl + radius * t.cos(), radius * t.sin(), 0.0));
    }
    for k in 0..n_side {
        let x = hl - side_len * k as f64 / n_side as f64;
        pts.push(Point::new(x, radius, 0.0));
    }
    for k in 0..n_cap {
        let t = PI / 2.0 + PI * k as f64 / n_cap as f64;
        pts.push(Point::new(-hl + radius * t.cos(), radius * t.sin(), 0.0));
    }
    PolylineArc::closed_loop(pts)
}

/// Standard polygonal trefoil: (2+cos 3t)(cos 2t, sin 2t), sin 3t.
pub fn trefoil(n: usize) -> PolylineArc {
    let pts: Vec<Point> = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            let r = 2.0 + (3.0 * t).cos();
            Point::new(r * (2.0 * t).cos(), r * (2.0 * t).sin(), (3.0 * t).sin())
        })
        .collect();
    PolylineArc::closed_loop(pts)
}

/// Figure-eight knot model: (2+cos 2t)(cos 3t, sin 3t), sin 4t.
pub fn figure_eight(n: usize) -> PolylineArc {
    let pts: Vec<Point> = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            let r = 2.0 + (2.0 * t).cos();
            Point::new(r * (3.0 * t).cos(), r * (3.0 * t).sin(), (4.0 * t).sin())
        })
        .collect();
    PolylineArc::closed_loop(pts)
}

/// Hopf link: unit circles in orthogonal planes, each through the
/// other's center.
pub fn hopf(n: usize) -> EmbeddedGraph {
    let c1: Vec<Point> = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            Point::new(t.cos(), t.sin(), 0.0)
        })
        .collect();
    let c2: Vec<Point> = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            Point::new(1.0 + t.cos(), 0.0, t.sin())
        })
        .collect();
    EmbeddedGraph::from_loops(vec![PolylineArc::closed_loop(c1), PolylineArc::closed_loop(c2)])
}

/// (2,4)-torus link: two parallel (2,2)-cables around a common torus.
pub fn torus_link_2_4(n: usize) -> EmbeddedGraph {
    let component = |phase: f64| -> PolylineArc {
        let pts: Vec<Point> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let ang = 2.0 * t + phase;
                let r = 2.0 + 0.5 * ang.cos();
                Point::new(r * t.cos(), r * t.sin(), 0.5 * ang.sin())
            })
            .collect();
        PolylineArc::closed_loop(pts)
    };
    EmbeddedGraph::from_loops(vec![component(0.0), component(PI)])
}

/// Seeded random closed Fourier curve; retries seeds until embedded.
pub fn random_fourier_knot(seed: u64, n: usize) -> EmbeddedGraph {
    for attempt in 0..64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt * 0x9e37_79b9));
        let mut coef = [[0.0f64; 6]; 3]; // per coordinate: a1..a3, b1..b3
        for c in coef.iter_mut() {
            for (h, x) in c.iter_mut().enumerate() {
                let k = (h % 3 + 1) as f64;
                *x = rng.gen_range(-0.35..0.35) / k;
            }
        }
        let pts: Vec<Point> = (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let eval = |c: &[f64; 6], base: f64| -> f64 {
                    let mut v = base;
                    for h in 0..3 {
                        let kk = (h + 1) as f64;
                        v += c[h] * (kk * t).cos() + c[h + 3] * (kk * t).sin();
                    }
                    v
                };
                Point::new(
                    eval(&coef[0], 2.0 * t.cos()),
                    eval(&coef[1], 2.0 * t.sin()),
                    eval(&coef[2], 0.0),
                )
            })
            .collect();
        let arc = PolylineArc::closed_loop(pts);
        if arc.validate().is_ok() {
            return EmbeddedGraph::from_loop(arc);
        }
    }
    panic!("no embedded Fourier curve found for seed {seed}");
}

/// Move every polyline vertex by an independent random offset of norm
/// at most `max_move`, keeping graph-vertex coincidences intact.
pub fn perturb(g: &EmbeddedGraph, seed: u64, max_move: f64) -> EmbeddedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rand_offset = |rng: &mut ChaCha8Rng| -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if v.norm() <= 1.0 && v.norm() > 1e-3 {
                return v * (max_move * rng.gen_range(0.0..1.0) / v.norm());
            }
        }
    };
    let vertex_offsets: Vec<(VertexId, Vec3)> =
        g.vertices.iter().map(|(v, _)| (*v, rand_offset(&mut rng))).collect();
    let offset_of = |v: VertexId| vertex_offsets.iter().find(|(w, _)| *w == v).unwrap().1;
    let vertices: Vec<(VertexId, Point)> =
        g.vertices.iter().map(|(v, p)| (*v, *p + offset_of(*v))).collect();
    let arcs = g
        .arcs
        .iter()
        .map(|(id, arc, h, t)| {
            let n = arc.points.len();
            let points: Vec<Point> = arc
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    if i == 0 {
                        *p + offset_of(*h)
                    } else if i == n - 1 {
                        *p + offset_of(*t)
                    } else {
                        *p + rand_offset(&mut rng)
                    }
                })
                .collect();
            (*id, PolylineArc { points, closed: arc.closed }, *h, *t)
        })
        .collect();
    EmbeddedGraph { vertices, arcs }
}

/// Splice a small trefoil summand into the closed loop of `g` at the
/// given segment, scaled by `scale`. The result is the connected sum of
/// the original knot type with a trefoil.
pub fn insert_trefoil_summand(arc: &PolylineArc, segment: usize, scale: f64) -> PolylineArc {
    assert!(arc.closed);
    let a = arc.points[segment];
    let b = arc.points[segment + 1];
    let dir = (b - a).normalized().expect("nonzero segment");

    // Open trefoil template, cut near t = 0.
    let gap = 0.35;
    let m = 120;
    let template: Vec<Point> = (0..=m)
        .map(|k| {
            let t = gap + (2.0 * PI - 2.0 * gap) * k as f64 / m as f64;
            let r = 2.0 + (3.0 * t).cos();
            Point::new(r * (2.0 * t).cos(), r * (2.0 * t).sin(), (3.0 * t).sin())
        })
        .collect();
    let e1 = template[0];
    let e2 = template[m];
    let span = e2 - e1;
    let span_dir = span.normalized().expect("open template");

    // Rotate template span onto the host segment direction and scale.
    let axis = span_dir.cross(dir);
    let angle = span_dir.angle_to(dir);
    let rotate = |v: Vec3| -> Vec3 {
        match axis.normalized() {
            Some(ax) => v.rotated(ax, angle),
            None => {
                if span_dir.dot(dir) > 0.0 {
                    v
                } else {
                    // Antipodal: rotate half-turn about any orthogonal axis.
                    v.rotated(crate::geo::orthonormal_to(span_dir), PI)
                }
            }
        }
    };
    let mid = a.midpoint(b);
    let start = mid + dir * (-0.5 * scale * span.norm());
    let mapped: Vec<Point> = template
        .iter()
        .map(|p| start + rotate((*p - e1) * scale))
        .collect();

    let mut points = Vec::new();
    points.extend_from_slice(&arc.points[..=segment]);
    points.extend_from_slice(&mapped);
    points.extend_from_slice(&arc.points[segment + 1..]);
    PolylineArc { points, closed: true }
}

/// Arc and vertex ids for a theta graph with three arcs joining two
/// vertices.
pub fn theta_graph(alpha: Vec<Point>, beta: Vec<Point>, gamma: Vec<Point>) -> EmbeddedGraph {
    let p = alpha[0];
    let q = alpha[alpha.len() - 1];
    for arc in [&beta, &gamma] {
        assert!(arc[0] == p && arc[arc.len() - 1] == q, "theta arcs must share endpoints");
    }
    EmbeddedGraph {
        vertices: vec![(VertexId(0), p), (VertexId(1), q)],
        arcs: vec![
            (ArcId(0), PolylineArc::open(alpha), VertexId(0), VertexId(1)),
            (ArcId(1), PolylineArc::open(beta), VertexId(0), VertexId(1)),
            (ArcId(2), PolylineArc::open(gamma), VertexId(0), VertexId(1)),
        ],
    }
}

/// Theta graph with nearly straight edges: two vertices joined by
/// three arcs, the outer two bowed just enough to stay disjoint (their
/// interior turning stays well under any decomposition budget).
pub fn straight_theta() -> EmbeddedGraph {
    let p = Point::new(-1.0, 0.0, 0.0);
    let q = Point::new(1.0, 0.0, 0.0);
    theta_graph(
        vec![p, Point::new(0.0, 0.05, 0.0), q],
        vec![p, q],
        vec![p, Point::new(0.0, -0.05, 0.0), q],
    )
}
