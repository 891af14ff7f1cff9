//! Small 3D geometry kernel: points, vectors, unit directions, and the
//! segment-level primitives the rest of the crate is built on.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const ANGLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Angle between two vectors in [0, pi]. Robust near 0 and pi
    /// (atan2 of cross/dot rather than acos of the dot product).
    pub fn angle_to(self, o: Vec3) -> f64 {
        self.cross(o).norm().atan2(self.dot(o))
    }

    /// Rodrigues rotation about a unit axis.
    pub fn rotated(self, axis: Vec3, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        self * c + axis.cross(self) * s + axis * (axis.dot(self) * (1.0 - c))
    }
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Point {
        Point { x, y, z }
    }

    pub fn to_vec(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn from_vec(v: Vec3) -> Point {
        Point::new(v.x, v.y, v.z)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        self + (o - self) * t
    }

    pub fn midpoint(self, o: Point) -> Point {
        self.lerp(o, 0.5)
    }
}

impl Add<Vec3> for Point {
    type Output = Point;
    fn add(self, v: Vec3) -> Point {
        Point::new(self.x + v.x, self.y + v.y, self.z + v.z)
    }
}

impl Sub<Vec3> for Point {
    type Output = Point;
    fn sub(self, v: Vec3) -> Point {
        Point::new(self.x - v.x, self.y - v.y, self.z - v.z)
    }
}

impl Sub for Point {
    type Output = Vec3;
    fn sub(self, o: Point) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit vector in space. Constructors enforce the unit-norm invariant
/// to within 1e-12.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction(Vec3);

impl Direction {
    pub const UNIT_TOL: f64 = 1e-12;

    /// Wrap a vector that is already unit length (within `UNIT_TOL`).
    pub fn from_unit(v: Vec3) -> Option<Direction> {
        if (v.norm() - 1.0).abs() <= Self::UNIT_TOL {
            Some(Direction(v))
        } else {
            None
        }
    }

    /// Normalize an arbitrary nonzero vector.
    pub fn from_vec(v: Vec3) -> Option<Direction> {
        v.normalized().map(Direction)
    }

    pub fn between(from: Point, to: Point) -> Option<Direction> {
        Direction::from_vec(to - from)
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }

    pub fn angle_to(self, o: Direction) -> f64 {
        self.0.angle_to(o.0)
    }

    pub fn reversed(self) -> Direction {
        Direction(-self.0)
    }

    /// Spherical interpolation from `self` toward `to`.
    pub fn slerp(self, to: Direction, t: f64) -> Direction {
        let a = self.0;
        let b = to.0;
        let omega = a.angle_to(b);
        if omega < 1e-14 {
            return self;
        }
        if (std::f64::consts::PI - omega) < 1e-12 {
            // Antipodal pair: pick a stable orthogonal axis to rotate about.
            let axis = orthonormal_to(a);
            return Direction(a.rotated(axis, omega * t));
        }
        let s = omega.sin();
        let v = a * ((1.0 - t) * omega).sin() / s + b * (t * omega).sin() / s;
        Direction(v.normalized().expect("slerp of unit vectors"))
    }
}

/// Some unit vector orthogonal to `v` (assumed nonzero).
pub fn orthonormal_to(v: Vec3) -> Vec3 {
    let trial = if v.x.abs() <= v.y.abs() && v.x.abs() <= v.z.abs() {
        Vec3::new(1.0, 0.0, 0.0)
    } else if v.y.abs() <= v.z.abs() {
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        Vec3::new(0.0, 0.0, 1.0)
    };
    v.cross(trial).normalized().expect("nonzero input")
}

/// Minimum distance between segments [p1,q1] and [p2,q2].
/// Clamped closest-point computation; exact up to roundoff.
pub fn segment_distance(p1: Point, q1: Point, p2: Point, q2: Point) -> f64 {
    let (s, t) = segment_closest_params(p1, q1, p2, q2);
    (p1.lerp(q1, s)).dist(p2.lerp(q2, t))
}

/// Parameters (s, t) of the closest points on [p1,q1] x [p2,q2].
pub fn segment_closest_params(p1: Point, q1: Point, p2: Point, q2: Point) -> (f64, f64) {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_sq();
    let e = d2.norm_sq();
    let f = d2.dot(r);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return (0.0, 0.0);
    }
    if a <= f64::EPSILON {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(r);
    if e <= f64::EPSILON {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = d1.dot(d2);
    let denom = a * e - b * b;
    let mut s = if denom > 0.0 {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}

/// Distance from a point to segment [a,b].
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq <= f64::EPSILON {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.dist(a.lerp(b, t))
}

/// Circumradius of the circle through three points; `f64::INFINITY`
/// when they are (numerically) collinear.
pub fn circumradius(a: Point, b: Point, c: Point) -> f64 {
    let ab = b - a;
    let bc = c - b;
    let ca = a - c;
    let area2 = ab.cross(bc).norm(); // twice the triangle area
    if area2 <= 1e-14 * ab.norm() * bc.norm() {
        return f64::INFINITY;
    }
    ab.norm() * bc.norm() * ca.norm() / (2.0 * area2)
}

/// Parameter t in [0,1] where segment [a,b] crosses the sphere
/// |x - center| = radius, moving from inside (|a| < r) to outside.
pub fn segment_sphere_exit(a: Point, b: Point, center: Point, radius: f64) -> Option<f64> {
    let d = b - a;
    let m = a - center;
    let qa = d.norm_sq();
    let qb = 2.0 * m.dot(d);
    let qc = m.norm_sq() - radius * radius;
    if qa <= f64::EPSILON {
        return None;
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Outward root (the larger one).
    let t = (-qb + sq) / (2.0 * qa);
    if (-1e-12..=1.0 + 1e-12).contains(&t) {
        Some(t.clamp(0.0, 1.0))
    } else {
        None
    }
}

/// A rigid motion (rotation + translation), used in tests and
/// equivariance checks.
#[derive(Debug, Clone, Copy)]
pub struct RigidMotion {
    pub axis: Vec3,
    pub angle: f64,
    pub translation: Vec3,
}

impl RigidMotion {
    pub fn identity() -> RigidMotion {
        RigidMotion { axis: Vec3::new(0.0, 0.0, 1.0), angle: 0.0, translation: Vec3::ZERO }
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::from_vec(p.to_vec().rotated(self.axis, self.angle)) + self.translation
    }

    pub fn apply_vec(&self, v: Vec3) -> Vec3 {
        v.rotated(self.axis, self.angle)
    }
}
