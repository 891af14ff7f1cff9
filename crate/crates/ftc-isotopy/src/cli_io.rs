//! Graph file format, command-line dispatch, and mesh/frame export.
//!
//! The graph format is line-based plain text:
//!
//! ```text
//! # ftc-graph 1
//! v <id> <x> <y> <z>
//! a <id> <head-vertex> <tail-vertex> [closed]
//! p <x> <y> <z>
//! ```
//!
//! `p` lines list the polyline points of the most recent arc, in order,
//! starting at the head vertex. Closed arcs (head = tail) carry the
//! `closed` flag and do not repeat the first point. Lines starting with
//! `#` and blank lines are ignored. Serialization is canonical (floats
//! print in the shortest form that parses back exactly), so
//! parse -> serialize -> parse is the identity.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Once;

use clap::{Args, Parser, Subcommand};

use crate::certify::{
    certify_ftc_with, certify_thick, ftc_radii, build_neighborhood, CertifyOutcome, Criterion,
    FtcRun, IsotopyCertificate, NeighborhoodModel, Refusal,
};
use crate::geo::{orthonormal_to, Point};
use crate::graph_core::{total_curvature, ArcId, EmbeddedGraph, PolylineArc, VertexId};
use crate::invariants::{knot_determinant_seeded, linking_number_seeded, make_theta_seeded};
use crate::isotopy::{assemble_frames, IsotopyFrames};
use crate::metrics::{
    default_correspondence, discrete_thickness, measure_closeness, refine_correspondence,
    Correspondence, ThicknessMechanism,
};
use crate::refine::{dcsd_tube_check, equal_arclength_points, fillet_round, inscribe_polygon, TubeWitness};
use crate::Error;

pub const FORMAT_HEADER: &str = "# ftc-graph 1";

/// Run configuration shared by the certifying subcommands.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Closeness scale for the FTC criterion.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Numerical tolerance for embeddedness checks.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Number of sampled isotopy frames.
    #[arg(short, long, default_value_t = 50)]
    pub m: usize,
    /// Seed for the randomized searches.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Correspondence mode: default | refined.
    #[arg(long, default_value = "default")]
    pub correspondence: String,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            epsilon: None,
            tolerance: 1e-9,
            m: 50,
            seed: 0,
            correspondence: "default".into(),
        }
    }
}

// ---------------------------------------------------------------------------
// Graph file parsing and serialization
// ---------------------------------------------------------------------------

fn parse_f64(tok: &str, line: usize) -> Result<f64, Error> {
    tok.parse().map_err(|_| Error::Parse { line, message: format!("bad number `{tok}`") })
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, Error> {
    tok.parse().map_err(|_| Error::Parse { line, message: format!("bad id `{tok}`") })
}

/// Parse GraphFile text into an embedded graph (structure only; run
/// `validate` for the embeddedness check).
pub fn parse_graph(text: &str) -> Result<EmbeddedGraph, Error> {
    struct ArcRec {
        id: usize,
        head: usize,
        tail: usize,
        closed: bool,
        points: Vec<Point>,
        line: usize,
    }
    let mut vertices: Vec<(VertexId, Point)> = Vec::new();
    let mut arcs: Vec<ArcRec> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        match toks[0] {
            "v" => {
                if toks.len() != 5 {
                    return Err(Error::Parse { line, message: "expected `v <id> <x> <y> <z>`".into() });
                }
                let id = parse_usize(toks[1], line)?;
                if vertices.iter().any(|(v, _)| v.0 == id) {
                    return Err(Error::Parse { line, message: format!("duplicate vertex id {id}") });
                }
                let p = Point::new(
                    parse_f64(toks[2], line)?,
                    parse_f64(toks[3], line)?,
                    parse_f64(toks[4], line)?,
                );
                vertices.push((VertexId(id), p));
            }
            "a" => {
                if toks.len() != 4 && !(toks.len() == 5 && toks[4] == "closed") {
                    return Err(Error::Parse {
                        line,
                        message: "expected `a <id> <head> <tail> [closed]`".into(),
                    });
                }
                let id = parse_usize(toks[1], line)?;
                if arcs.iter().any(|a| a.id == id) {
                    return Err(Error::Parse { line, message: format!("duplicate arc id {id}") });
                }
                let head = parse_usize(toks[2], line)?;
                let tail = parse_usize(toks[3], line)?;
                let closed = toks.len() == 5;
                if closed && head != tail {
                    return Err(Error::Parse {
                        line,
                        message: "closed arcs must have head = tail".into(),
                    });
                }
                arcs.push(ArcRec { id, head, tail, closed, points: Vec::new(), line });
            }
            "p" => {
                if toks.len() != 4 {
                    return Err(Error::Parse { line, message: "expected `p <x> <y> <z>`".into() });
                }
                let arc = arcs.last_mut().ok_or(Error::Parse {
                    line,
                    message: "point line before any arc record".into(),
                })?;
                arc.points.push(Point::new(
                    parse_f64(toks[1], line)?,
                    parse_f64(toks[2], line)?,
                    parse_f64(toks[3], line)?,
                ));
            }
            other => {
                return Err(Error::Parse { line, message: format!("unknown record `{other}`") });
            }
        }
    }
    let lookup = |id: usize, line: usize| -> Result<Point, Error> {
        vertices
            .iter()
            .find(|(v, _)| v.0 == id)
            .map(|(_, p)| *p)
            .ok_or(Error::Parse { line, message: format!("arc references missing vertex id {id}") })
    };
    let mut out_arcs = Vec::new();
    for rec in arcs {
        let hp = lookup(rec.head, rec.line)?;
        let tp = lookup(rec.tail, rec.line)?;
        let min_pts = if rec.closed { 3 } else { 2 };
        if rec.points.len() < min_pts {
            return Err(Error::Parse {
                line: rec.line,
                message: format!("arc {} needs at least {min_pts} points", rec.id),
            });
        }
        if rec.points[0] != hp {
            return Err(Error::Parse {
                line: rec.line,
                message: format!("arc {} does not start at vertex {}", rec.id, rec.head),
            });
        }
        if !rec.closed && *rec.points.last().unwrap() != tp {
            return Err(Error::Parse {
                line: rec.line,
                message: format!("arc {} does not end at vertex {}", rec.id, rec.tail),
            });
        }
        let arc = if rec.closed {
            PolylineArc::closed_loop(rec.points)
        } else {
            PolylineArc::open(rec.points)
        };
        out_arcs.push((ArcId(rec.id), arc, VertexId(rec.head), VertexId(rec.tail)));
    }
    Ok(EmbeddedGraph { vertices, arcs: out_arcs })
}

/// Canonical serialization of a graph.
pub fn serialize_graph(g: &EmbeddedGraph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{FORMAT_HEADER}");
    for (v, p) in &g.vertices {
        let _ = writeln!(s, "v {} {} {} {}", v.0, p.x, p.y, p.z);
    }
    for (a, arc, head, tail) in &g.arcs {
        let flag = if arc.closed { " closed" } else { "" };
        let _ = writeln!(s, "a {} {} {}{}", a.0, head.0, tail.0, flag);
        let pts = if arc.closed { &arc.points[..arc.points.len() - 1] } else { &arc.points[..] };
        for p in pts {
            let _ = writeln!(s, "p {} {} {}", p.x, p.y, p.z);
        }
    }
    s
}

pub fn read_graph(path: &Path) -> Result<EmbeddedGraph, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_graph(&text)
}

pub fn write_graph(path: &Path, g: &EmbeddedGraph) -> Result<(), Error> {
    std::fs::write(path, serialize_graph(g))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Mesh export
// ---------------------------------------------------------------------------

struct ObjMesh {
    vertices: Vec<Point>,
    faces: Vec<Vec<usize>>, // 0-based indices
}

impl ObjMesh {
    fn new() -> ObjMesh {
        ObjMesh { vertices: Vec::new(), faces: Vec::new() }
    }

    fn push_uv_sphere(&mut self, center: Point, radius: f64, lat: usize, lon: usize) {
        let base = self.vertices.len();
        for i in 0..=lat {
            let phi = std::f64::consts::PI * i as f64 / lat as f64;
            for j in 0..lon {
                let theta = std::f64::consts::TAU * j as f64 / lon as f64;
                self.vertices.push(Point::new(
                    center.x + radius * phi.sin() * theta.cos(),
                    center.y + radius * phi.sin() * theta.sin(),
                    center.z + radius * phi.cos(),
                ));
            }
        }
        for i in 0..lat {
            for j in 0..lon {
                let a = base + i * lon + j;
                let b = base + i * lon + (j + 1) % lon;
                let c = base + (i + 1) * lon + (j + 1) % lon;
                let d = base + (i + 1) * lon + j;
                self.faces.push(vec![a, b, c, d]);
            }
        }
    }

    /// Loft a sequence of disk boundary rings into a tube.
    fn push_loft(&mut self, rings: &[Vec<Point>]) {
        if rings.len() < 2 {
            return;
        }
        let n = rings[0].len();
        let base = self.vertices.len();
        for ring in rings {
            self.vertices.extend_from_slice(ring);
        }
        for i in 0..rings.len() - 1 {
            for j in 0..n {
                let a = base + i * n + j;
                let b = base + i * n + (j + 1) % n;
                let c = base + (i + 1) * n + (j + 1) % n;
                let d = base + (i + 1) * n + j;
                self.faces.push(vec![a, b, c, d]);
            }
        }
    }

    fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = write!(s, "f");
            for i in f {
                let _ = write!(s, " {}", i + 1);
            }
            let _ = writeln!(s);
        }
        s
    }
}

/// Export the neighborhood as two OBJ meshes: balls as UV spheres and
/// tubes as lofted disks along the leaf foliation.
pub fn export_neighborhood_meshes(
    n: &NeighborhoodModel,
    prefix: &Path,
) -> Result<(PathBuf, PathBuf), Error> {
    let mut balls = ObjMesh::new();
    for (c, r) in &n.balls {
        balls.push_uv_sphere(*c, *r, 12, 24);
    }
    let mut tubes = ObjMesh::new();
    for tube in &n.tubes {
        let lo = tube.beta_leaf[0];
        let hi = *tube.beta_leaf.last().unwrap();
        let steps = 32;
        let mut rings = Vec::new();
        for k in 0..=steps {
            let s = lo + (hi - lo) * k as f64 / steps as f64;
            let center = tube.center_on_leaf(s);
            let normal = tube.leaf.normal_at(s, center);
            let e1 = orthonormal_to(normal.vec());
            let e2 = normal.vec().cross(e1);
            let ring: Vec<Point> = (0..24)
                .map(|j| {
                    let a = std::f64::consts::TAU * j as f64 / 24.0;
                    center + (e1 * a.cos() + e2 * a.sin()) * tube.r4
                })
                .collect();
            rings.push(ring);
        }
        tubes.push_loft(&rings);
    }
    let ball_path = with_suffix(prefix, "_balls.obj");
    let tube_path = with_suffix(prefix, "_tubes.obj");
    std::fs::write(&ball_path, balls.to_obj())?;
    std::fs::write(&tube_path, tubes.to_obj())?;
    Ok((ball_path, tube_path))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Write one graph file per sampled time plus an index file.
pub fn export_frames(frames: &IsotopyFrames, prefix: &Path) -> Result<PathBuf, Error> {
    let mut index = String::new();
    for (i, (t, frame)) in frames.times.iter().zip(&frames.frames).enumerate() {
        let path = with_suffix(prefix, &format!("_frame_{i:04}.graph"));
        write_graph(&path, frame)?;
        let _ = writeln!(
            index,
            "frame {i} time {t} file {} min_self_distance {} embedded {}",
            path.display(),
            frames.min_self_distance[i],
            frames.embedded[i],
        );
    }
    let index_path = with_suffix(prefix, "_frames.txt");
    std::fs::write(&index_path, index)?;
    Ok(index_path)
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(name = "ftc-isotopy", version, about = "Isotopy certification for polygonal knots, links and knotted graphs", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Total curvature per arc.
    Tc { file: PathBuf },
    /// Discrete thickness of a single closed curve.
    Thickness { file: PathBuf },
    /// Measure (delta, theta) closeness of two graphs.
    Closeness {
        file1: PathBuf,
        file2: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Certify isotopy by the thickness criterion.
    CertifyThick {
        file1: PathBuf,
        file2: PathBuf,
        /// Thickness of the first curve; measured when omitted.
        #[arg(long)]
        tau: Option<f64>,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Certify isotopy by the finite-total-curvature criterion.
    CertifyFtc {
        file1: PathBuf,
        file2: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Build the ball-and-tube neighborhood and export meshes.
    Neighborhood {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Certify and export sampled isotopy frames.
    Frames {
        file1: PathBuf,
        file2: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Inscribe a coarser polygon at a given spacing.
    Inscribe {
        file: PathBuf,
        /// Target spacing (arclength between retained samples).
        #[arg(long)]
        spacing: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equal-arclength respacing and fillet rounding at radius 5r.
    Round {
        file: PathBuf,
        /// Thickness of the input curve.
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linking number of a two-component link.
    Lk {
        file: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Knot determinant of a single closed curve.
    Det {
        file: PathBuf,
        #[command(flatten)]
        config: RunConfig,
    },
    /// Build a theta-graph by joining two points of a knot with a chord.
    Theta {
        file: PathBuf,
        /// Arclength fraction of the first chord endpoint.
        #[arg(long)]
        from: f64,
        /// Arclength fraction of the second chord endpoint.
        #[arg(long)]
        to: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: RunConfig,
    },
}

static THREAD_POOL: Once = Once::new();

fn init_threads() {
    THREAD_POOL.call_once(|| {
        if let Ok(v) = std::env::var("FTC_ISOTOPY_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n > 0 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    });
}

/// Dispatch a full argument vector (including the binary name all the
/// way through) and write the report to `out`. Returns the exit code:
/// 0 success/certificate, 2 refusal, 1 error.
pub fn run_command(argv: &[&str], out: &mut String) -> i32 {
    init_threads();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = writeln!(out, "{e}");
            // Help/version requests are successes, not usage errors.
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli.cmd, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(out, "error {e}");
            1
        }
    }
}

fn single_loop(g: &EmbeddedGraph) -> Result<&PolylineArc, Error> {
    match g.arcs.as_slice() {
        [(_, arc, _, _)] if arc.closed => Ok(arc),
        _ => Err(Error::InvalidGraph("expected a single closed loop".into())),
    }
}

fn correspondence_for(
    g: &EmbeddedGraph,
    g2: &EmbeddedGraph,
    config: &RunConfig,
) -> Result<Correspondence, Error> {
    if g.arcs.len() != g2.arcs.len() {
        return Err(Error::InvalidCorrespondence("graphs have different arc counts".into()));
    }
    let pairing: Vec<(ArcId, ArcId)> =
        g.arcs.iter().zip(&g2.arcs).map(|((a, _, _, _), (b, _, _, _))| (*a, *b)).collect();
    let c = default_correspondence(g, g2, &pairing)?;
    match config.correspondence.as_str() {
        "default" => Ok(c),
        "refined" => refine_correspondence(g, g2, &c),
        other => Err(Error::InvalidParameter(format!(
            "unknown correspondence mode `{other}` (expected default | refined)"
        ))),
    }
}

fn print_certificate(out: &mut String, cert: &IsotopyCertificate) {
    let _ = writeln!(out, "outcome certified");
    match &cert.criterion {
        Criterion::Thick { tau, theta } => {
            let _ = writeln!(out, "criterion thick");
            let _ = writeln!(out, "tau {tau}");
            let _ = writeln!(out, "theta_bound {theta}");
        }
        Criterion::Ftc { chain } => {
            let _ = writeln!(out, "criterion ftc");
            let _ = writeln!(out, "epsilon {}", chain.epsilon);
            let _ = writeln!(out, "r1 {}", chain.r1);
            let _ = writeln!(out, "r2 {}", chain.r2);
            let _ = writeln!(out, "r3 {}", chain.r3);
            let _ = writeln!(out, "r4 {}", chain.r4);
            let _ = writeln!(out, "delta_bound {}", chain.delta);
        }
    }
    let _ = writeln!(out, "delta {}", cert.closeness.delta);
    let _ = writeln!(out, "theta {}", cert.closeness.theta);
    let _ = writeln!(out, "motion_bound {}", cert.motion_bound);
}

fn print_refusal(out: &mut String, r: &Refusal) {
    let _ = writeln!(out, "outcome refused");
    let _ = writeln!(out, "reason {}", r.reason.tag());
    match &r.reason {
        crate::certify::RefusalReason::DeltaTooLarge { measured, allowed }
        | crate::certify::RefusalReason::ThetaTooLarge { measured, allowed } => {
            let _ = writeln!(out, "measured {measured}");
            let _ = writeln!(out, "allowed {allowed}");
        }
        crate::certify::RefusalReason::NotInNeighborhood { detail } => {
            let _ = writeln!(out, "detail {detail}");
        }
    }
    let _ = writeln!(out, "delta {}", r.closeness.delta);
    let _ = writeln!(out, "theta {}", r.closeness.theta);
}

fn ftc_run(
    file1: &Path,
    file2: &Path,
    config: &RunConfig,
) -> Result<(EmbeddedGraph, EmbeddedGraph, FtcRun), Error> {
    let g = read_graph(file1)?;
    let g2 = read_graph(file2)?;
    g.validate()?;
    g2.validate()?;
    let epsilon = config
        .epsilon
        .ok_or_else(|| Error::InvalidParameter("--epsilon is required".into()))?;
    let corr = correspondence_for(&g, &g2, config)?;
    let run = certify_ftc_with(&g, &g2, &corr, epsilon)?;
    Ok((g, g2, run))
}

fn dispatch(cmd: Cmd, out: &mut String) -> Result<i32, Error> {
    match cmd {
        Cmd::Tc { file } => {
            let g = read_graph(&file)?;
            let mut total = 0.0;
            for (id, arc, _, _) in &g.arcs {
                let tc = total_curvature(arc);
                let _ = writeln!(out, "total_curvature_per_arc {} {}", id.0, tc);
                total += tc;
            }
            let _ = writeln!(out, "total_curvature {total}");
            Ok(0)
        }
        Cmd::Thickness { file } => {
            let g = read_graph(&file)?;
            let k = single_loop(&g)?;
            let report = discrete_thickness(k)?;
            let _ = writeln!(out, "thickness {}", report.tau_hat);
            let _ = writeln!(out, "min_rad {}", report.min_rad);
            let _ = writeln!(out, "dcsd {}", report.dcsd);
            let mech = match report.mechanism {
                ThicknessMechanism::Curvature => "curvature",
                ThicknessMechanism::SelfDistance => "self-distance",
            };
            let _ = writeln!(out, "mechanism {mech}");
            Ok(0)
        }
        Cmd::Closeness { file1, file2, config } => {
            let g = read_graph(&file1)?;
            let g2 = read_graph(&file2)?;
            let corr = correspondence_for(&g, &g2, &config)?;
            let report = measure_closeness(&g, &g2, &corr)?;
            let _ = writeln!(out, "delta {}", report.delta);
            let _ = writeln!(out, "theta {}", report.theta);
            Ok(0)
        }
        Cmd::CertifyThick { file1, file2, tau, config } => {
            let g = read_graph(&file1)?;
            let g2 = read_graph(&file2)?;
            g.validate()?;
            g2.validate()?;
            let tau = match tau {
                Some(t) => t,
                None => discrete_thickness(single_loop(&g)?)?.tau_hat,
            };
            let corr = correspondence_for(&g, &g2, &config)?;
            match certify_thick(&g, &g2, &corr, tau)? {
                CertifyOutcome::Certified(cert) => {
                    print_certificate(out, &cert);
                    Ok(0)
                }
                CertifyOutcome::Refused(r) => {
                    print_refusal(out, &r);
                    Ok(2)
                }
            }
        }
        Cmd::CertifyFtc { file1, file2, config } => {
            let (_, _, run) = ftc_run(&file1, &file2, &config)?;
            match &run.outcome {
                CertifyOutcome::Certified(cert) => {
                    print_certificate(out, cert);
                    Ok(0)
                }
                CertifyOutcome::Refused(r) => {
                    print_refusal(out, r);
                    Ok(2)
                }
            }
        }
        Cmd::Neighborhood { file, out: out_path, config } => {
            let g = read_graph(&file)?;
            g.validate()?;
            let epsilon = config
                .epsilon
                .ok_or_else(|| Error::InvalidParameter("--epsilon is required".into()))?;
            // Same retry as certify_ftc: halve the curvature budget when
            // the tube construction fails at the default decomposition.
            let attempt = |budget: f64| -> Result<_, Error> {
                let d = crate::certify::corner_decomposition_with(&g, budget, &[])?;
                let chain = ftc_radii(&g, &d, epsilon)?;
                let n = build_neighborhood(&g, &d, &chain)?;
                Ok((chain, n))
            };
            let base = crate::graph_core::CURVATURE_BUDGET - 1e-9;
            let (chain, n) = match attempt(base) {
                Ok(v) => v,
                Err(Error::Neighborhood(_)) => attempt(base / 2.0)?,
                Err(e) => return Err(e),
            };
            let _ = writeln!(out, "balls {}", n.balls.len());
            let _ = writeln!(out, "tubes {}", n.tubes.len());
            let _ = writeln!(out, "r2 {}", chain.r2);
            let _ = writeln!(out, "r4 {}", chain.r4);
            if let Some(prefix) = out_path {
                let (b, t) = export_neighborhood_meshes(&n, &prefix)?;
                let _ = writeln!(out, "balls_mesh {}", b.display());
                let _ = writeln!(out, "tubes_mesh {}", t.display());
            }
            Ok(0)
        }
        Cmd::Frames { file1, file2, out: out_path, config } => {
            let (g, g2, run) = ftc_run(&file1, &file2, &config)?;
            match &run.outcome {
                CertifyOutcome::Certified(cert) => {
                    let frames = assemble_frames(&g, &g2, &run, config.m)?;
                    print_certificate(out, cert);
                    let _ = writeln!(out, "frames {}", frames.frames.len());
                    let _ = writeln!(out, "max_displacement {}", frames.max_displacement);
                    let _ = writeln!(out, "all_embedded {}", frames.embedded.iter().all(|&b| b));
                    if let Some(prefix) = out_path {
                        let index = export_frames(&frames, &prefix)?;
                        let _ = writeln!(out, "index {}", index.display());
                    }
                    Ok(0)
                }
                CertifyOutcome::Refused(r) => {
                    print_refusal(out, r);
                    Ok(2)
                }
            }
        }
        Cmd::Inscribe { file, spacing, out: out_path } => {
            let g = read_graph(&file)?;
            let inscribed = inscribe_polygon(&g, spacing)?;
            let points: usize = inscribed.arcs.iter().map(|(_, a, _, _)| a.segment_count()).sum();
            let _ = writeln!(out, "points {points}");
            match out_path {
                Some(p) => {
                    write_graph(&p, &inscribed)?;
                    let _ = writeln!(out, "file {}", p.display());
                }
                None => out.push_str(&serialize_graph(&inscribed)),
            }
            Ok(0)
        }
        Cmd::Round { file, tau, out: out_path } => {
            let g = read_graph(&file)?;
            let k = single_loop(&g)?;
            let (pts, r) = equal_arclength_points(k, tau)?;
            let polygon = PolylineArc::closed_loop(pts);
            let (rounded, report) = fillet_round(&polygon, 5.0 * r)?;
            let check = dcsd_tube_check(&rounded, tau / 5.0)?;
            let _ = writeln!(out, "spacing {r}");
            let _ = writeln!(out, "fillet_radius {}", report.fillet_radius);
            let _ = writeln!(out, "d {}", report.d);
            let _ = writeln!(out, "phi {}", report.phi);
            let _ = writeln!(out, "min_radius {}", report.min_radius);
            let _ = writeln!(out, "tube_check {}", if check.pass { "pass" } else { "fail" });
            match check.witness {
                Some(TubeWitness::CurvatureTriple { index, radius }) => {
                    let _ = writeln!(out, "witness curvature-triple {index} {radius}");
                }
                Some(TubeWitness::DoublyCritical { i, j, dist }) => {
                    let _ = writeln!(out, "witness doubly-critical {i} {j} {dist}");
                }
                None => {}
            }
            if let Some(p) = out_path {
                write_graph(&p, &EmbeddedGraph::from_loop(rounded))?;
                let _ = writeln!(out, "file {}", p.display());
            }
            Ok(if check.pass { 0 } else { 2 })
        }
        Cmd::Lk { file, config } => {
            let g = read_graph(&file)?;
            let loops: Vec<&PolylineArc> = g
                .arcs
                .iter()
                .filter(|(_, a, _, _)| a.closed)
                .map(|(_, a, _, _)| a)
                .collect();
            if loops.len() != 2 || loops.len() != g.arcs.len() {
                return Err(Error::InvalidGraph("lk expects exactly two closed loops".into()));
            }
            let lk = linking_number_seeded(loops[0], loops[1], config.seed)?;
            let _ = writeln!(out, "linking_number {lk}");
            Ok(0)
        }
        Cmd::Det { file, config } => {
            let g = read_graph(&file)?;
            let k = single_loop(&g)?;
            let det = knot_determinant_seeded(k, config.seed)?;
            let _ = writeln!(out, "determinant {det}");
            Ok(0)
        }
        Cmd::Theta { file, from, to, out: out_path, config } => {
            let g = read_graph(&file)?;
            let k = single_loop(&g)?;
            let len = k.total_length();
            let p = k.point_at_arclength(from.rem_euclid(1.0) * len);
            let q = k.point_at_arclength(to.rem_euclid(1.0) * len);
            let eps = config.epsilon.unwrap_or(0.05 * p.dist(q));
            let theta = make_theta_seeded(k, p, q, eps, config.seed)?;
            let tg = theta.graph();
            let _ = writeln!(out, "p {} {} {}", theta.p.x, theta.p.y, theta.p.z);
            let _ = writeln!(out, "q {} {} {}", theta.q.x, theta.q.y, theta.q.z);
            let _ = writeln!(out, "beta_points {}", theta.beta.len());
            match out_path {
                Some(path) => {
                    write_graph(&path, &tg)?;
                    let _ = writeln!(out, "file {}", path.display());
                }
                None => out.push_str(&serialize_graph(&tg)),
            }
            Ok(0)
        }
    }
}

/// Entry point used by the binary: dispatch std::env::args and print.
pub fn main_entry() -> i32 {
    let args: Vec<String> = std::env::args().collect();
    let argv: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    let mut out = String::new();
    let code = run_command(&argv, &mut out);
    let _ = std::io::stdout().write_all(out.as_bytes());
    code
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::f64::consts::TAU;
    use tempfile::tempdir;

    fn write_fixture(dir: &Path, name: &str, g: &EmbeddedGraph) -> PathBuf {
        let p = dir.join(name);
        write_graph(&p, g).unwrap();
        p
    }

    fn run(args: &[&str]) -> (i32, String) {
        let mut out = String::new();
        let code = run_command(args, &mut out);
        (code, out)
    }

    #[test]
    fn minimal_file_parses() {
        let text = "v 0 0 0 0\nv 1 1 0 0\na 0 0 1\np 0 0 0\np 1 0 0\n";
        let g = parse_graph(text).unwrap();
        assert_eq!(g.arcs.len(), 1);
        assert_eq!(g.vertices.len(), 2);
        assert!(!g.arcs[0].1.closed);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let g = EmbeddedGraph::from_loop(fixtures::trefoil(120));
        let once = serialize_graph(&g);
        let twice = serialize_graph(&parse_graph(&once).unwrap());
        assert_eq!(once, twice);

        let theta = fixtures::straight_theta();
        let once = serialize_graph(&theta);
        let twice = serialize_graph(&parse_graph(&once).unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn missing_vertex_is_named() {
        let text = "v 0 0 0 0\na 0 0 7\np 0 0 0\np 1 0 0\n";
        match parse_graph(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains('7'), "message: {message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_line_number() {
        let text = "v 0 0 0 0\nv 1 1 0 0\nq nonsense\n";
        match parse_graph(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn tc_square_sums_to_two_pi() {
        let dir = tempdir().unwrap();
        let g = EmbeddedGraph::from_loop(fixtures::square(1.0));
        let f = write_fixture(dir.path(), "square.graph", &g);
        let (code, out) = run(&["ftc-isotopy", "tc", f.to_str().unwrap()]);
        assert_eq!(code, 0, "output: {out}");
        let total: f64 = out
            .lines()
            .find(|l| l.starts_with("total_curvature "))
            .unwrap()
            .split_whitespace()
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert!((total - TAU).abs() < 1e-12);
    }

    #[test]
    fn certify_thick_refuses_far_translation() {
        let dir = tempdir().unwrap();
        let g = fixtures::circle_graph(64, 1.0);
        let far = g.transformed(|p| Point::new(p.x + 10.0, p.y, p.z));
        let f1 = write_fixture(dir.path(), "a.graph", &g);
        let f2 = write_fixture(dir.path(), "b.graph", &far);
        let (code, out) =
            run(&["ftc-isotopy", "certify-thick", f1.to_str().unwrap(), f2.to_str().unwrap()]);
        assert_eq!(code, 2, "output: {out}");
        assert!(out.contains("reason delta-too-large"), "output: {out}");
        assert!(!out.contains("outcome certified"));
    }

    #[test]
    fn certify_ftc_echoes_chain() {
        let dir = tempdir().unwrap();
        let g = EmbeddedGraph::from_loop(fixtures::trefoil(256));
        let perturbed = fixtures::perturb(&g, 7, 1e-4);
        let f1 = write_fixture(dir.path(), "trefoil.graph", &g);
        let f2 = write_fixture(dir.path(), "trefoil_perturbed.graph", &perturbed);
        let (code, out) = run(&[
            "ftc-isotopy",
            "certify-ftc",
            f1.to_str().unwrap(),
            f2.to_str().unwrap(),
            "--epsilon",
            "0.1",
        ]);
        assert_eq!(code, 0, "output: {out}");
        for key in ["outcome certified", "criterion ftc", "r1 ", "r2 ", "r3 ", "r4 ", "delta_bound "] {
            assert!(out.contains(key), "missing `{key}` in: {out}");
        }
    }

    #[test]
    fn unknown_flag_is_an_error() {
        let (code, out) = run(&["ftc-isotopy", "tc", "--bogus", "x"]);
        assert_eq!(code, 1);
        assert!(out.to_lowercase().contains("usage"), "output: {out}");
    }

    #[test]
    fn lk_and_det_commands() {
        let dir = tempdir().unwrap();
        let hopf = write_fixture(dir.path(), "hopf.graph", &fixtures::hopf(96));
        let (code, out) = run(&["ftc-isotopy", "lk", hopf.to_str().unwrap()]);
        assert_eq!(code, 0, "output: {out}");
        let lk: i64 = out.trim().rsplit(' ').next().unwrap().parse().unwrap();
        assert_eq!(lk.abs(), 1);

        let tre = write_fixture(
            dir.path(),
            "trefoil.graph",
            &EmbeddedGraph::from_loop(fixtures::trefoil(200)),
        );
        let (code, out) = run(&["ftc-isotopy", "det", tre.to_str().unwrap()]);
        assert_eq!(code, 0, "output: {out}");
        assert!(out.contains("determinant 3"), "output: {out}");
    }

    #[test]
    fn inscribe_and_round_commands() {
        let dir = tempdir().unwrap();
        let g = fixtures::circle_graph(1024, 1.0);
        let f = write_fixture(dir.path(), "circle.graph", &g);
        let out_file = dir.path().join("inscribed.graph");
        let spacing = TAU / 16.0;
        let (code, out) = run(&[
            "ftc-isotopy",
            "inscribe",
            f.to_str().unwrap(),
            "--spacing",
            &spacing.to_string(),
            "--out",
            out_file.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "output: {out}");
        let inscribed = read_graph(&out_file).unwrap();
        assert_eq!(inscribed.arcs[0].1.segment_count(), 16);

        let (code, out) = run(&["ftc-isotopy", "round", f.to_str().unwrap(), "--tau", "2"]);
        assert_eq!(code, 0, "output: {out}");
        assert!(out.contains("tube_check pass"), "output: {out}");
    }

    #[test]
    fn neighborhood_and_frames_export_files() {
        let dir = tempdir().unwrap();
        let g = fixtures::circle_graph(128, 1.0);
        let perturbed = fixtures::perturb(&g, 3, 1e-4);
        let f1 = write_fixture(dir.path(), "c.graph", &g);
        let f2 = write_fixture(dir.path(), "cp.graph", &perturbed);

        let prefix = dir.path().join("nbhd");
        let (code, out) = run(&[
            "ftc-isotopy",
            "neighborhood",
            f1.to_str().unwrap(),
            "--epsilon",
            "0.1",
            "--out",
            prefix.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "output: {out}");
        assert!(with_suffix(&prefix, "_balls.obj").exists());
        assert!(with_suffix(&prefix, "_tubes.obj").exists());

        let prefix = dir.path().join("anim");
        let (code, out) = run(&[
            "ftc-isotopy",
            "frames",
            f1.to_str().unwrap(),
            f2.to_str().unwrap(),
            "--epsilon",
            "0.1",
            "-m",
            "5",
            "--out",
            prefix.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "output: {out}");
        assert!(out.contains("all_embedded true"), "output: {out}");
        assert!(with_suffix(&prefix, "_frames.txt").exists());
        assert!(with_suffix(&prefix, "_frame_0000.graph").exists());
        // Frame files parse back.
        let frame = read_graph(&with_suffix(&prefix, "_frame_0000.graph")).unwrap();
        assert_eq!(frame.arcs.len(), 1);
    }

    #[test]
    fn theta_command_builds_a_theta_graph() {
        let dir = tempdir().unwrap();
        let g = fixtures::circle_graph(256, 1.0);
        let f = write_fixture(dir.path(), "c.graph", &g);
        let out_file = dir.path().join("theta.graph");
        let (code, out) = run(&[
            "ftc-isotopy",
            "theta",
            f.to_str().unwrap(),
            "--from",
            "0",
            "--to",
            "0.5",
            "--out",
            out_file.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "output: {out}");
        let tg = read_graph(&out_file).unwrap();
        assert_eq!(tg.arcs.len(), 3);
        assert_eq!(tg.vertices.len(), 2);
        tg.validate().unwrap();
    }

    #[test]
    fn determinism_of_seeded_commands() {
        let dir = tempdir().unwrap();
        let tre = write_fixture(
            dir.path(),
            "t.graph",
            &EmbeddedGraph::from_loop(fixtures::trefoil(180)),
        );
        let a = run(&["ftc-isotopy", "det", tre.to_str().unwrap(), "--seed", "5"]);
        let b = run(&["ftc-isotopy", "det", tre.to_str().unwrap(), "--seed", "5"]);
        assert_eq!(a, b);
    }
}
