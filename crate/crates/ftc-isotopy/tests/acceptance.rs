//! Acceptance suite: one test per criterion, each printing a single
//! pass line on success (run with `--nocapture` to see all of them).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use ftc_isotopy::certify::{certify_ftc, normal_drift_bound, theta_of, CertifyOutcome};
use ftc_isotopy::fixtures;
use ftc_isotopy::geo::{Point, RigidMotion, Vec3};
use ftc_isotopy::graph_core::{total_curvature, ArcId, EmbeddedGraph, PolylineArc};
use ftc_isotopy::invariants::{knot_determinant, linking_number};
use ftc_isotopy::isotopy::{
    assemble_frames, combing_isotopy, smallness_verifier, DisplacementField,
};
use ftc_isotopy::metrics::{
    default_correspondence, discrete_thickness, measure_closeness,
};
use ftc_isotopy::refine::{
    dcsd_tube_check, equal_arclength_points, fillet_round, inscribe_polygon,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Certify with epsilon back-off: balls of radius eps/2 can swallow a
/// short subarc, in which case a smaller scale must be used.
fn certify_backoff(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    mut eps: f64,
) -> (ftc_isotopy::certify::FtcRun, f64) {
    loop {
        match certify_ftc(g, g2, eps) {
            Ok(run) => return (run, eps),
            Err(ftc_isotopy::Error::Neighborhood(_)) => eps /= 2.0,
            Err(e) => panic!("certify failed: {e}"),
        }
    }
}

fn random_rigid(rng: &mut ChaCha8Rng) -> RigidMotion {
    let axis = loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm() > 1e-3 && v.norm() <= 1.0 {
            break v.normalized().unwrap();
        }
    };
    RigidMotion {
        axis,
        angle: rng.gen_range(0.0..TAU),
        translation: Vec3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ),
    }
}

#[test]
fn criterion_1_formula_fidelity() {
    let tau = 1.7;
    let theta = theta_of(tau / 4.0 * (1.0 - 1e-12), tau).unwrap();
    assert!((theta - PI / 6.0).abs() < 1e-9, "theta(tau/4) = {theta}");

    // delta -> 0 recovers pi/2.
    let mut prev = theta_of(tau / 8.0, tau).unwrap();
    for k in 2..16 {
        let t = theta_of(tau / 4.0 * 0.5_f64.powi(k), tau).unwrap();
        assert!(t > prev);
        prev = t;
    }
    assert!((prev - FRAC_PI_2).abs() < 1e-3);

    // Scale invariance on a random grid.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        let tau: f64 = rng.gen_range(1e-6..1e6);
        let delta = tau / 4.0 * rng.gen_range(1e-9..1.0_f64);
        let a = theta_of(delta, tau).unwrap();
        let b = theta_of(2.0 * delta, 2.0 * tau).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.max(1.0), "scale invariance: {a} vs {b}");
    }
    println!("acceptance 1: pass (theta_of fidelity and scale invariance)");
}

#[test]
fn criterion_2_constant_chain_audit() {
    let audits: Vec<String> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let g = fixtures::random_fourier_knot(seed, 128);
            let (run, _) = certify_backoff(&g, &g, 0.05 * g.diameter_bound());
            let c = run.chain;
            assert_eq!(c.r2, (c.r1 / 2.0).min(c.epsilon / 2.0), "seed {seed}");
            assert_eq!(c.r4, c.r3 / 6.0, "seed {seed}");
            assert_eq!(c.delta, c.r4 / 3.0, "seed {seed}");
            assert!(c.delta < c.r2 / 9.0, "seed {seed}");
            assert!(c.r3 <= 2.0 * c.r2, "seed {seed}");
            for tube in &run.neighborhood.tubes {
                assert!(
                    tube.normal_drift <= normal_drift_bound() + 1e-12,
                    "seed {seed}: drift {} > {}",
                    tube.normal_drift,
                    normal_drift_bound()
                );
            }
            format!("seed {seed}: delta {:.3e}", c.delta)
        })
        .collect();
    assert_eq!(audits.len(), 20);
    println!("acceptance 2: pass (radii chain identities and tube drift on 20 fixtures)");
}

enum Oracle {
    Det(u64),
    Lk,
}

fn invariant_of(g: &EmbeddedGraph, oracle: &Oracle) -> i64 {
    match oracle {
        Oracle::Det(_) => {
            let (_, arc, _, _) = &g.arcs[0];
            knot_determinant(arc).unwrap() as i64
        }
        Oracle::Lk => {
            let a = &g.arcs[0].1;
            let b = &g.arcs[1].1;
            linking_number(a, b).unwrap()
        }
    }
}

#[test]
fn criterion_3_certificate_soundness() {
    let suite: Vec<(EmbeddedGraph, Oracle)> = vec![
        (fixtures::circle_graph(48, 1.0), Oracle::Det(1)),
        (EmbeddedGraph::from_loop(fixtures::trefoil(128)), Oracle::Det(3)),
        (EmbeddedGraph::from_loop(fixtures::figure_eight(144)), Oracle::Det(5)),
        (fixtures::hopf(64), Oracle::Lk),
    ];
    let mut certified = 0usize;
    for (g, oracle) in &suite {
        let (base, eps) = certify_backoff(g, g, 0.05 * g.diameter_bound());
        let step = 0.45 * base.chain.delta;
        let expected = invariant_of(g, oracle);
        if let Oracle::Det(known) = oracle {
            assert_eq!(expected, *known as i64);
        } else {
            assert_eq!(expected.abs(), 1);
        }

        let counts: Vec<usize> = (0..50u64)
            .into_par_iter()
            .map(|seed| {
                let g2 = fixtures::perturb(g, seed, step);
                let run = certify_ftc(g, &g2, eps).unwrap();
                let cert = match &run.outcome {
                    CertifyOutcome::Certified(c) => c,
                    CertifyOutcome::Refused(r) => {
                        panic!("seed {seed} refused within certified bounds: {:?}", r.reason)
                    }
                };
                assert!(cert.valid);
                assert_eq!(invariant_of(&g2, oracle), expected, "endpoint, seed {seed}");
                let frames = assemble_frames(g, &g2, &run, 50).unwrap();
                assert_eq!(frames.frames.len(), 51);
                for (i, frame) in frames.frames.iter().enumerate() {
                    assert!(frames.embedded[i], "seed {seed} frame {i} not embedded");
                    assert_eq!(
                        invariant_of(frame, oracle),
                        expected,
                        "seed {seed} frame {i}"
                    );
                }
                1
            })
            .collect();
        certified += counts.len();
    }
    assert_eq!(certified, 200);
    println!("acceptance 3: pass (200 certificates, invariants constant on all frames)");
}

#[test]
fn criterion_4_negative_control() {
    let t = fixtures::trefoil(256);
    let g = EmbeddedGraph::from_loop(t.clone());
    let eps = 0.05 * g.diameter_bound();
    let base = certify_ftc(&g, &g, eps).unwrap();

    // Local trefoil summand at a scale far below the certified delta:
    // a tangent excursion above pi/8 that delta alone cannot see.
    let spliced = fixtures::insert_trefoil_summand(&t, 10, base.chain.delta / 20.0);
    let g2 = EmbeddedGraph::from_loop(spliced.clone());
    let run = certify_ftc(&g, &g2, eps).unwrap();
    assert!(
        run.outcome.refusal().is_some(),
        "knot-type change must be refused"
    );

    assert_eq!(knot_determinant(&t).unwrap(), 3);
    // The connected sum with two more trefoil crossings-worth: 3 * 3.
    let big = fixtures::insert_trefoil_summand(&t, 40, 0.25);
    assert_eq!(knot_determinant(&big).unwrap(), 9);
    println!("acceptance 4: pass (local summand refused; determinants 3 vs 9)");
}

#[test]
fn criterion_5_combing_correctness() {
    let c = Point::new(0.0, 0.0, 0.0);
    // Radial strands: combing is the identity exactly.
    let dirs = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
    let strands: Vec<Vec<Point>> = dirs
        .iter()
        .map(|d| (0..=12).map(|k| c + d.normalized().unwrap() * (k as f64 / 12.0)).collect())
        .collect();
    let targets: Vec<Point> = strands.iter().map(|s| *s.last().unwrap()).collect();
    for t in [0.0, 0.3, 0.7, 1.0] {
        let out = combing_isotopy((c, 1.0), &strands, &targets, t).unwrap();
        let max: f64 = strands
            .iter()
            .zip(&out)
            .flat_map(|(s, o)| s.iter().zip(o).map(|(a, b)| a.dist(*b)))
            .fold(0.0, f64::max);
        assert_eq!(max, 0.0, "radial input must comb by the identity");
    }

    // Two strands with one full mutual twist comb straight.
    let twisted: Vec<Vec<Point>> = (0..2)
        .map(|i| {
            let mut pts = vec![c];
            for k in 1..=64 {
                let lam = k as f64 / 64.0;
                let ang = TAU * lam + PI * i as f64;
                let d = Vec3::new(ang.cos(), ang.sin(), 0.5).normalized().unwrap();
                pts.push(c + d * lam);
            }
            pts
        })
        .collect();
    let targets: Vec<Point> = twisted.iter().map(|s| *s.last().unwrap()).collect();
    let out = combing_isotopy((c, 1.0), &twisted, &targets, 1.0).unwrap();
    for (k, strand) in out.iter().enumerate() {
        let d = (targets[k] - c).normalized().unwrap();
        for p in &strand[1..] {
            let radial = c + d * p.dist(c);
            assert!(p.dist(radial) < 1e-6, "strand {k} not straight: {}", p.dist(radial));
        }
    }
    // Intermediate frames stay embedded (strands apart on every sphere).
    for t in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let out = combing_isotopy((c, 1.0), &twisted, &targets, t).unwrap();
        for q in 1..=32 {
            let r = q as f64 / 32.0;
            let at_r = |s: &Vec<Point>| -> Point {
                // Piecewise point at radius r along a radially monotone strand.
                let mut prev = s[0];
                for p in &s[1..] {
                    if p.dist(c) >= r {
                        let (r0, r1) = (prev.dist(c), p.dist(c));
                        let u = if r1 > r0 { (r - r0) / (r1 - r0) } else { 0.0 };
                        return prev.lerp(*p, u.clamp(0.0, 1.0));
                    }
                    prev = *p;
                }
                *s.last().unwrap()
            };
            assert!(at_r(&out[0]).dist(at_r(&out[1])) > 1e-4 * r, "t {t} r {r}");
        }
    }
    println!("acceptance 5: pass (identity combing exact; twist combs straight, frames embedded)");
}

#[test]
fn criterion_6_motion_bound() {
    let suite: Vec<EmbeddedGraph> = vec![
        fixtures::circle_graph(64, 1.0),
        EmbeddedGraph::from_loop(fixtures::trefoil(160)),
        EmbeddedGraph::from_loop(fixtures::figure_eight(192)),
        fixtures::hopf(96),
    ];
    for (i, g) in suite.iter().enumerate() {
        let (base, eps) = certify_backoff(g, g, 0.05 * g.diameter_bound());
        for seed in 100..105u64 {
            let g2 = fixtures::perturb(g, seed, 0.45 * base.chain.delta);
            let run = certify_ftc(g, &g2, eps).unwrap();
            let cert = run.outcome.certificate().unwrap_or_else(|| {
                panic!("fixture {i} seed {seed} refused")
            });
            let frames = assemble_frames(g, &g2, &run, 50).unwrap();
            assert!(
                frames.max_displacement <= cert.motion_bound + 1e-9,
                "fixture {i} seed {seed}: moved {} > bound {}",
                frames.max_displacement,
                cert.motion_bound
            );
        }
    }
    println!("acceptance 6: pass (max displacement within motion bound on all certified pairs)");
}

#[test]
fn criterion_7_inscribed_polygon_recovery() {
    for (name, g, divisor, eps) in [
        ("circle", fixtures::circle_graph(1024, 1.0), 64.0, 0.4),
        ("trefoil", EmbeddedGraph::from_loop(fixtures::trefoil(1024)), 256.0, 0.5),
    ] {
        let len = g.arc(ArcId(0)).unwrap().total_length();
        let inscribed = inscribe_polygon(&g, len / divisor).unwrap();
        let c = default_correspondence(&g, &inscribed, &[(ArcId(0), ArcId(0))]).unwrap();
        let close = measure_closeness(&g, &inscribed, &c).unwrap();
        assert!(close.theta <= PI / 16.0, "{name}: theta {}", close.theta);
        let run = certify_ftc(&g, &inscribed, eps).unwrap();
        assert!(
            run.outcome.certificate().is_some(),
            "{name} refused: {:?}",
            run.outcome.refusal().map(|r| &r.reason)
        );
    }
    println!("acceptance 7: pass (fine inscribed polygons certified isotopic)");
}

#[test]
fn criterion_8_rounding_pipeline() {
    let k = fixtures::regular_ngon(720, 1.0);
    let tau = 2.0;
    let (pts, r) = equal_arclength_points(&k, tau).unwrap();
    assert!(r > tau / 50.0 && r < tau / 40.0, "spacing {r}");
    let polygon = PolylineArc::closed_loop(pts);
    let (rounded, report) = fillet_round(&polygon, 5.0 * r).unwrap();
    assert!(report.min_radius >= 5.0 * r * (1.0 - 1e-6), "min radius {}", report.min_radius);
    let check = dcsd_tube_check(&rounded, tau / 5.0).unwrap();
    assert!(check.pass);

    // Smallness verifier on constant and linear displacement fields.
    let samples: Vec<Point> = (0..16).map(|i| Point::new(0.3 * i as f64, 0.0, 0.0)).collect();
    let v = Vec3::new(0.2, -0.1, 0.3);
    let constant = DisplacementField {
        samples: samples.iter().map(|p| (*p, v)).collect(),
        bound: 2.0,
    };
    let (delta, theta) = smallness_verifier(&constant).unwrap();
    assert_eq!(delta, v.norm());
    assert_eq!(theta, 0.0);

    let lam0 = 0.42;
    let linear = DisplacementField {
        samples: samples.iter().map(|p| (*p, Vec3::new(lam0 * p.x, 0.0, 0.0))).collect(),
        bound: 10.0,
    };
    let (_, theta) = smallness_verifier(&linear).unwrap();
    assert!((theta - lam0.atan()).abs() < 1e-6, "theta {theta} vs {}", lam0.atan());
    println!("acceptance 8: pass (spacing, fillet radius, tube check, smallness verifier)");
}

#[test]
fn criterion_9_metric_invariances() {
    let square = fixtures::square(1.0);
    assert_eq!(total_curvature(&square), TAU, "square total curvature must be exactly 2 pi");

    let ngon = fixtures::regular_ngon(64, 1.0);
    let tau = discrete_thickness(&ngon).unwrap().tau_hat;
    assert!((tau - 2.0).abs() < 0.02, "64-gon thickness {tau}");

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let m = random_rigid(&mut rng);
        let sq = PolylineArc {
            points: square.points.iter().map(|p| m.apply(*p)).collect(),
            closed: true,
        };
        assert!((total_curvature(&sq) - TAU).abs() < 1e-9);
        let ng = PolylineArc {
            points: ngon.points.iter().map(|p| m.apply(*p)).collect(),
            closed: true,
        };
        assert!((discrete_thickness(&ng).unwrap().tau_hat - tau).abs() < 1e-9);
    }
    println!("acceptance 9: pass (exact curvature, thickness, rigid invariance)");
}
