//! Rotations, poses, rotated rectangles and angular sectors.
//!
//! Angles cross this module's public surface in degrees. Positions are meters.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector2, Vector3};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Tolerance used for the orthonormality and determinant checks of [`Rotation3`].
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate point set: {0}")]
    Degenerate(String),
    #[error("point ({x:.4}, {y:.4}) lies inside the box; obstacle overlaps target")]
    PointInsideBox { x: f64, y: f64 },
    #[error("matrix is not a proper rotation (orthonormality error {ortho:.3e}, det {det:.6})")]
    NotARotation { ortho: f64, det: f64 },
    #[error("invalid rectangle: {0}")]
    InvalidRect(String),
}

/// Wraps an angle in degrees to `[0, 360)`.
pub fn wrap_deg_360(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Wraps an angle in degrees to `[0, 180)`. Values within 1e-9 of 180 snap to 0.
pub fn wrap_deg_180(deg: f64) -> f64 {
    let w = deg.rem_euclid(180.0);
    if w > 180.0 - 1e-9 {
        0.0
    } else {
        w
    }
}

/// A proper rotation matrix (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Rotation3(Matrix3::identity())
    }

    /// Validates `m` against [`ROTATION_TOLERANCE`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !(ortho <= ROTATION_TOLERANCE) || !((det - 1.0).abs() <= ROTATION_TOLERANCE) {
            return Err(GeometryError::NotARotation { ortho, det });
        }
        Ok(Rotation3(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation3(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let ortho = (self.0.transpose() * self.0 - Matrix3::identity())
            .abs()
            .max();
        ortho <= tol && (self.0.determinant() - 1.0).abs() <= tol
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;

    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation3 {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

pub fn rot_x(alpha_deg: f64) -> Rotation3 {
    let (s, c) = alpha_deg.to_radians().sin_cos();
    Rotation3(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
}

pub fn rot_y(beta_deg: f64) -> Rotation3 {
    let (s, c) = beta_deg.to_radians().sin_cos();
    Rotation3(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
}

pub fn rot_z(gamma_deg: f64) -> Rotation3 {
    let (s, c) = gamma_deg.to_radians().sin_cos();
    Rotation3(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
}

/// Gripper frame G expressed in the workspace frame W.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: Rotation3,
}

impl Pose {
    pub fn new(position: Vec3, rotation: Rotation3) -> Self {
        Pose { position, rotation }
    }

    /// Maps a point given in frame G into frame W.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.position + self.rotation.apply(p)
    }
}

/// Unit vector in the plane at `deg` degrees from the x-axis.
pub fn unit(deg: f64) -> Vec2 {
    let (s, c) = deg.to_radians().sin_cos();
    Vec2::new(c, s)
}

fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Oriented rectangle in the workspace plane, described by its long axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedRect {
    pub center: Vec2,
    pub half_long: f64,
    pub half_short: f64,
    /// Direction of the long side, degrees in `[0, 180)`.
    pub axis_angle: f64,
}

impl RotatedRect {
    /// Builds a rectangle from two half extents; the larger one becomes the long side
    /// and the angle is rotated accordingly.
    pub fn new(
        center: Vec2,
        half_a: f64,
        half_b: f64,
        angle_a_deg: f64,
    ) -> Result<Self, GeometryError> {
        if !(center.x.is_finite() && center.y.is_finite() && angle_a_deg.is_finite()) {
            return Err(GeometryError::InvalidRect(
                "non-finite center or angle".into(),
            ));
        }
        if !(half_a > 0.0 && half_b > 0.0) || !half_a.is_finite() || !half_b.is_finite() {
            return Err(GeometryError::InvalidRect(format!(
                "half extents must be positive, got {half_a} and {half_b}"
            )));
        }
        let (half_long, half_short, angle) = if half_a >= half_b {
            (half_a, half_b, angle_a_deg)
        } else {
            (half_b, half_a, angle_a_deg + 90.0)
        };
        Ok(RotatedRect {
            center,
            half_long,
            half_short,
            axis_angle: wrap_deg_180(angle),
        })
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_long * self.half_short
    }

    pub fn long_side(&self) -> f64 {
        2.0 * self.half_long
    }

    pub fn short_side(&self) -> f64 {
        2.0 * self.half_short
    }

    fn axes(&self) -> (Vec2, Vec2) {
        let u = unit(self.axis_angle);
        (u, Vec2::new(-u.y, u.x))
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let a = u * self.half_long;
        let b = v * self.half_short;
        [
            self.center - a - b,
            self.center + a - b,
            self.center + a + b,
            self.center - a + b,
        ]
    }

    /// Coordinates of `p` in the rectangle's (long, short) frame.
    fn local(&self, p: &Vec2) -> Vec2 {
        let (u, v) = self.axes();
        let d = p - self.center;
        Vec2::new(d.dot(&u), d.dot(&v))
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        let l = self.local(p);
        l.x.abs() <= self.half_long && l.y.abs() <= self.half_short
    }

    /// Euclidean distance from `p` to the rectangle; zero inside.
    pub fn distance_to_point(&self, p: &Vec2) -> f64 {
        let l = self.local(p);
        let dx = (l.x.abs() - self.half_long).max(0.0);
        let dy = (l.y.abs() - self.half_short).max(0.0);
        dx.hypot(dy)
    }

    /// Half extent of the projection onto the unit direction `dir`.
    pub fn support(&self, dir: &Vec2) -> f64 {
        let (u, v) = self.axes();
        self.half_long * dir.dot(&u).abs() + self.half_short * dir.dot(&v).abs()
    }

    /// Full extent measured across (perpendicular to) the direction `axis_deg`.
    pub fn width_across(&self, axis_deg: f64) -> f64 {
        let n = unit(axis_deg + 90.0);
        2.0 * self.support(&n)
    }

    /// Distance from the center to the boundary along `deg`.
    pub fn boundary_distance(&self, deg: f64) -> f64 {
        let (u, v) = self.axes();
        let d = unit(deg);
        let du = d.dot(&u).abs();
        let dv = d.dot(&v).abs();
        let tu = if du > 1e-15 {
            self.half_long / du
        } else {
            f64::INFINITY
        };
        let tv = if dv > 1e-15 {
            self.half_short / dv
        } else {
            f64::INFINITY
        };
        tu.min(tv)
    }

    /// Separating-axis overlap test; touching rectangles count as intersecting.
    pub fn intersects(&self, other: &RotatedRect) -> bool {
        let (u1, v1) = self.axes();
        let (u2, v2) = other.axes();
        let d = other.center - self.center;
        [u1, v1, u2, v2]
            .iter()
            .all(|axis| d.dot(axis).abs() <= self.support(axis) + other.support(axis))
    }

    /// Smallest distance between the two rectangles; zero when they intersect.
    pub fn separation(&self, other: &RotatedRect) -> f64 {
        if self.intersects(other) {
            return 0.0;
        }
        let a = self.corners();
        let b = other.corners();
        let mut best = f64::INFINITY;
        for p in &a {
            best = best.min(other.distance_to_point(p));
        }
        for p in &b {
            best = best.min(self.distance_to_point(p));
        }
        best
    }

    /// Whether the segment from `a` to `b` touches the rectangle.
    pub fn intersects_segment(&self, a: &Vec2, b: &Vec2) -> bool {
        // Slab clipping in the rectangle's local frame.
        let la = self.local(a);
        let lb = self.local(b);
        let d = lb - la;
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        for (p, dp, h) in [(la.x, d.x, self.half_long), (la.y, d.y, self.half_short)] {
            if dp.abs() < 1e-15 {
                if p.abs() > h {
                    return false;
                }
            } else {
                let mut ta = (-h - p) / dp;
                let mut tb = (h - p) / dp;
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }

    /// Area of the intersection of the two rectangles.
    pub fn overlap_area(&self, other: &RotatedRect) -> f64 {
        if !self.intersects(other) {
            return 0.0;
        }
        let clipped = clip_convex(&self.corners(), &other.corners());
        polygon_area(&clipped)
    }
}

impl fmt::Display for RotatedRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rect(c=({:.4}, {:.4}), {:.4}x{:.4}, {:.2} deg)",
            self.center.x,
            self.center.y,
            self.long_side(),
            self.short_side(),
            self.axis_angle
        )
    }
}

/// Sutherland-Hodgman clipping of convex `subject` by convex CCW `clip`.
fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut output: Vec<Vec2> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b - a;
        let inside = |p: &Vec2| cross(&edge, &(p - a)) >= 0.0;
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (cin, pin) = (inside(&cur), inside(&prev));
            if cin != pin {
                let dp = cur - prev;
                let denom = cross(&edge, &dp);
                if denom.abs() > 1e-18 {
                    let t = cross(&edge, &(a - prev)) / denom;
                    output.push(prev + dp * t);
                }
            }
            if cin {
                output.push(cur);
            }
        }
    }
    output
}

fn polygon_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        s += cross(&poly[i], &poly[(i + 1) % poly.len()]);
    }
    0.5 * s.abs()
}

/// Convex hull by monotone chain, counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if cross(&(b - a), &(p - a)) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

/// Minimum-area enclosing rectangle by rotating calipers over the convex hull.
pub fn min_area_rect(points: &[Vec2]) -> Result<RotatedRect, GeometryError> {
    if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(GeometryError::Degenerate("non-finite coordinate".into()));
    }
    let hull = convex_hull(points);
    let n = hull.len();
    if n < 3 {
        return Err(GeometryError::Degenerate(format!(
            "need at least 3 non-collinear points, hull has {n} vertices"
        )));
    }
    let edge_dir = |i: usize| (hull[(i + 1) % n] - hull[i]).normalize();
    let dot_at = |k: usize, d: &Vec2| hull[k % n].dot(d);

    // Caliper indices: farthest along the edge, opposite the edge, and behind the edge.
    let u0 = edge_dir(0);
    let nrm0 = Vec2::new(-u0.y, u0.x);
    let argmax = |d: &Vec2| {
        (0..n)
            .max_by(|&a, &b| dot_at(a, d).total_cmp(&dot_at(b, d)))
            .unwrap()
    };
    let mut i_max = argmax(&u0);
    let mut i_top = argmax(&nrm0);
    let mut i_min = argmax(&-u0);

    let mut best: Option<(f64, Vec2, f64, f64, Vec2)> = None;
    for i in 0..n {
        let u = edge_dir(i);
        let nrm = Vec2::new(-u.y, u.x);
        while dot_at(i_max + 1, &u) > dot_at(i_max, &u) + 1e-15 {
            i_max = (i_max + 1) % n;
        }
        while dot_at(i_top + 1, &nrm) > dot_at(i_top, &nrm) + 1e-15 {
            i_top = (i_top + 1) % n;
        }
        while dot_at(i_min + 1, &u) < dot_at(i_min, &u) - 1e-15 {
            i_min = (i_min + 1) % n;
        }
        let hi_u = dot_at(i_max, &u);
        let lo_u = dot_at(i_min, &u);
        let base = hull[i].dot(&nrm);
        let height = dot_at(i_top, &nrm) - base;
        let length = hi_u - lo_u;
        let area = length * height;
        let better = match &best {
            None => true,
            Some((a, ..)) => area < *a * (1.0 - 1e-12),
        };
        if better {
            let center = u * (0.5 * (hi_u + lo_u)) + nrm * (base + 0.5 * height);
            best = Some((area, u, length, height, center));
        }
    }
    let (_, u, length, height, center) = best.expect("hull has edges");
    let angle = u.y.atan2(u.x).to_degrees();
    RotatedRect::new(center, 0.5 * length, 0.5 * height, angle)
        .map_err(|e| GeometryError::Degenerate(e.to_string()))
}

/// Angular sector seen from a point. `Arc` runs counter-clockwise from `start` to
/// `end`; `start > end` means the arc wraps through 0 degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sector {
    Empty,
    Full,
    Arc { start: f64, end: f64 },
}

impl Sector {
    pub fn arc(start: f64, end: f64) -> Sector {
        let (s, e) = (wrap_deg_360(start), wrap_deg_360(end));
        if s == e {
            Sector::Empty
        } else {
            Sector::Arc { start: s, end: e }
        }
    }

    pub fn wraps(&self) -> bool {
        matches!(self, Sector::Arc { start, end } if start > end)
    }

    /// Closed membership test for an angle in degrees.
    pub fn contains(&self, deg: f64) -> bool {
        let t = wrap_deg_360(deg);
        match *self {
            Sector::Empty => false,
            Sector::Full => true,
            Sector::Arc { start, end } if start <= end => t >= start && t <= end,
            Sector::Arc { start, end } => t >= start || t <= end,
        }
    }

    pub fn extent(&self) -> f64 {
        match *self {
            Sector::Empty => 0.0,
            Sector::Full => 360.0,
            Sector::Arc { start, end } => wrap_deg_360(end - start),
        }
    }
}

/// Bearing of `to` as seen from `from`, degrees in `[0, 360)`.
pub fn bearing_deg(from: &Vec2, to: &Vec2) -> f64 {
    let d = to - from;
    wrap_deg_360(d.y.atan2(d.x) * 180.0 / PI)
}

/// The widest of the six sectors spanned from `target` by pairs of corners of `bbox`.
pub fn largest_sector_of_box(target: &Vec2, bbox: &RotatedRect) -> Result<Sector, GeometryError> {
    if bbox.contains(target) {
        return Err(GeometryError::PointInsideBox {
            x: target.x,
            y: target.y,
        });
    }
    let angles = bbox.corners().map(|c| bearing_deg(target, &c));
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..4 {
        for j in (i + 1)..4 {
            // Signed CCW difference in (-180, 180].
            let mut delta = wrap_deg_360(angles[j] - angles[i]);
            if delta > 180.0 {
                delta -= 360.0;
            }
            let (start, end, extent) = if delta >= 0.0 {
                (angles[i], angles[j], delta)
            } else {
                (angles[j], angles[i], -delta)
            };
            if best.is_none_or(|(_, _, e)| extent > e) {
                best = Some((start, end, extent));
            }
        }
    }
    let (start, end, _) = best.expect("four corners give six pairs");
    Ok(Sector::arc(start, end))
}
