//! Planar obstacle footprints, signed distances, and ray casting.

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

fn rotate(p: Point, theta: f64) -> Point {
    let (s, c) = theta.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Wrap an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = a % two_pi;
    if x <= -std::f64::consts::PI {
        x += two_pi;
    } else if x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}

/// Solid obstacle types; each is reduced to its ground footprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleKind {
    /// Ball of radius 0.5 m: circle.
    Sphere,
    /// 1 m cube: 1×1 m square rotated by the pose angle.
    Cube,
    /// Capsule with a 2 m core segment and 0.5 m radius: stadium.
    Capsule,
    /// Upright cylinder of radius 0.5 m: circle.
    Cylinder,
}

impl ObstacleKind {
    pub const ALL: [ObstacleKind; 4] = [
        ObstacleKind::Sphere,
        ObstacleKind::Cube,
        ObstacleKind::Capsule,
        ObstacleKind::Cylinder,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub kind: ObstacleKind,
    pub position: Point,
    /// Orientation in [0, π).
    #[serde(default)]
    pub theta: f64,
}

impl Obstacle {
    pub fn footprint(&self) -> Footprint {
        match self.kind {
            ObstacleKind::Sphere | ObstacleKind::Cylinder => Footprint::Circle {
                center: self.position,
                radius: 0.5,
            },
            ObstacleKind::Cube => Footprint::Rect {
                center: self.position,
                half: [0.5, 0.5],
                theta: self.theta,
            },
            ObstacleKind::Capsule => {
                let axis = rotate([1.0, 0.0], self.theta);
                Footprint::Stadium {
                    a: [self.position[0] - axis[0], self.position[1] - axis[1]],
                    b: [self.position[0] + axis[0], self.position[1] + axis[1]],
                    radius: 0.5,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Footprint {
    Circle {
        center: Point,
        radius: f64,
    },
    Rect {
        center: Point,
        half: Point,
        theta: f64,
    },
    /// Segment `a`–`b` inflated by `radius`.
    Stadium {
        a: Point,
        b: Point,
        radius: f64,
    },
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 == 0.0 {
        0.0
    } else {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(sub(q2, q1), sub(p1, q1));
    let d2 = cross(sub(q2, q1), sub(p2, q1));
    let d3 = cross(sub(p2, p1), sub(q1, p1));
    let d4 = cross(sub(p2, p1), sub(q2, p1));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn segment_segment_distance(p1: Point, p2: Point, q1: Point, q2: Point) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance(p1, q1, q2)
        .min(point_segment_distance(p2, q1, q2))
        .min(point_segment_distance(q1, p1, p2))
        .min(point_segment_distance(q2, p1, p2))
}

/// Slab test of a ray against an axis-aligned box centred at the origin.
/// Returns the entry distance, or 0 when the origin is inside.
fn ray_box(origin: Point, dir: Point, half: Point) -> Option<f64> {
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    for k in 0..2 {
        if dir[k].abs() < 1e-15 {
            if origin[k].abs() > half[k] {
                return None;
            }
        } else {
            let t1 = (-half[k] - origin[k]) / dir[k];
            let t2 = (half[k] - origin[k]) / dir[k];
            t_min = t_min.max(t1.min(t2));
            t_max = t_max.min(t1.max(t2));
        }
    }
    if t_max < t_min || t_max < 0.0 {
        None
    } else {
        Some(t_min.max(0.0))
    }
}

fn ray_circle(origin: Point, dir: Point, center: Point, radius: f64) -> Option<f64> {
    let oc = sub(origin, center);
    let b = dot(oc, dir);
    let c = dot(oc, oc) - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

impl Footprint {
    /// Signed distance from `p` to the footprint boundary (negative inside).
    pub fn signed_distance(&self, p: Point) -> f64 {
        match *self {
            Footprint::Circle { center, radius } => dist(p, center) - radius,
            Footprint::Rect { center, half, theta } => {
                let q = rotate(sub(p, center), -theta);
                let dx = q[0].abs() - half[0];
                let dy = q[1].abs() - half[1];
                let outside = norm([dx.max(0.0), dy.max(0.0)]);
                outside + dx.max(dy).min(0.0)
            }
            Footprint::Stadium { a, b, radius } => point_segment_distance(p, a, b) - radius,
        }
    }

    /// Distance along the unit direction `dir` to the first boundary
    /// crossing; 0 if `origin` lies inside.
    pub fn ray_hit(&self, origin: Point, dir: Point) -> Option<f64> {
        match *self {
            Footprint::Circle { center, radius } => ray_circle(origin, dir, center, radius),
            Footprint::Rect { center, half, theta } => {
                let o = rotate(sub(origin, center), -theta);
                let d = rotate(dir, -theta);
                ray_box(o, d, half)
            }
            Footprint::Stadium { a, b, radius } => {
                let ab = sub(b, a);
                let len = norm(ab);
                let theta = ab[1].atan2(ab[0]);
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                let o = rotate(sub(origin, mid), -theta);
                let d = rotate(dir, -theta);
                [
                    ray_box(o, d, [len / 2.0, radius]),
                    ray_circle(origin, dir, a, radius),
                    ray_circle(origin, dir, b, radius),
                ]
                .into_iter()
                .flatten()
                .reduce(f64::min)
            }
        }
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Point, Point) {
        match *self {
            Footprint::Circle { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Footprint::Rect { .. } => {
                let c = self.corners();
                let xs = c.iter().map(|p| p[0]);
                let ys = c.iter().map(|p| p[1]);
                (
                    [
                        xs.clone().fold(f64::INFINITY, f64::min),
                        ys.clone().fold(f64::INFINITY, f64::min),
                    ],
                    [
                        xs.fold(f64::NEG_INFINITY, f64::max),
                        ys.fold(f64::NEG_INFINITY, f64::max),
                    ],
                )
            }
            Footprint::Stadium { a, b, radius } => (
                [a[0].min(b[0]) - radius, a[1].min(b[1]) - radius],
                [a[0].max(b[0]) + radius, a[1].max(b[1]) + radius],
            ),
        }
    }

    /// Corner points of a rectangle footprint, counter-clockwise.
    pub fn corners(&self) -> Vec<Point> {
        match *self {
            Footprint::Rect { center, half, theta } => [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]
                .iter()
                .map(|s| {
                    let r = rotate([s[0] * half[0], s[1] * half[1]], theta);
                    [center[0] + r[0], center[1] + r[1]]
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Core polygon (point, segment, or rectangle) and inflation radius.
    fn core(&self) -> (Vec<Point>, f64) {
        match *self {
            Footprint::Circle { center, radius } => (vec![center], radius),
            Footprint::Rect { .. } => (self.corners(), 0.0),
            Footprint::Stadium { a, b, radius } => (vec![a, b], radius),
        }
    }

    /// Gap between two footprints (0 when they touch or overlap).
    pub fn distance_to(&self, other: &Footprint) -> f64 {
        let (pa, ra) = self.core();
        let (pb, rb) = other.core();
        let edges = |p: &[Point]| -> Vec<(Point, Point)> {
            match p.len() {
                1 => vec![(p[0], p[0])],
                2 => vec![(p[0], p[1])],
                n => (0..n).map(|i| (p[i], p[(i + 1) % n])).collect(),
            }
        };
        let inside = |q: Point, poly: &Footprint| poly.signed_distance(q) <= 0.0;
        // containment of one core inside a rectangle
        if matches!(other, Footprint::Rect { .. }) && pa.iter().any(|&q| inside(q, other)) {
            return 0.0;
        }
        if matches!(self, Footprint::Rect { .. }) && pb.iter().any(|&q| inside(q, self)) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for (a1, a2) in edges(&pa) {
            for &(b1, b2) in &edges(&pb) {
                best = best.min(segment_segment_distance(a1, a2, b1, b2));
            }
        }
        (best - ra - rb).max(0.0)
    }
}

/// Distance from `origin` along unit `dir` to the boundary of the arena
/// `[0, w] × [0, h]`, assuming the origin is inside it.
pub fn ray_walls(origin: Point, dir: Point, arena: Point) -> f64 {
    let mut t = f64::INFINITY;
    for k in 0..2 {
        if dir[k] > 1e-15 {
            t = t.min((arena[k] - origin[k]) / dir[k]);
        } else if dir[k] < -1e-15 {
            t = t.min(-origin[k] / dir[k]);
        }
    }
    t.max(0.0)
}

/// Distance from `p` to the nearest arena wall (negative outside).
pub fn wall_distance(p: Point, arena: Point) -> f64 {
    p[0].min(arena[0] - p[0]).min(p[1]).min(arena[1] - p[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn circle_ray_dead_ahead() {
        let c = Footprint::Circle {
            center: [2.0, 0.0],
            radius: 0.5,
        };
        assert!((c.ray_hit([0.0, 0.0], [1.0, 0.0]).unwrap() - 1.5).abs() < 1e-12);
        assert!(c.ray_hit([0.0, 0.0], [-1.0, 0.0]).is_none());
        assert_eq!(c.ray_hit([2.1, 0.0], [1.0, 0.0]), Some(0.0));
    }

    #[test]
    fn rotated_square() {
        let r = Footprint::Rect {
            center: [3.0, 0.0],
            half: [0.5, 0.5],
            theta: FRAC_PI_4,
        };
        // corner points toward the ray origin
        let hit = r.ray_hit([0.0, 0.0], [1.0, 0.0]).unwrap();
        assert!((hit - (3.0 - 0.5 * 2f64.sqrt())).abs() < 1e-12);
        assert!((r.signed_distance([3.0, 0.0]) + 0.5).abs() < 1e-12);
        assert!((r.signed_distance([5.0, 0.0]) - (2.0 - 0.5 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn stadium_hits() {
        let o = Obstacle {
            kind: ObstacleKind::Capsule,
            position: [0.0, 3.0],
            theta: 0.0,
        };
        let f = o.footprint();
        // broadside from below
        assert!((f.ray_hit([0.0, 0.0], [0.0, 1.0]).unwrap() - 2.5).abs() < 1e-12);
        // end cap along the axis
        assert!((f.ray_hit([-4.0, 3.0], [1.0, 0.0]).unwrap() - 2.5).abs() < 1e-12);
        assert!((f.signed_distance([2.0, 3.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn walls_from_center() {
        let t = ray_walls([4.0, 4.0], [1.0, 0.0], [8.0, 8.0]);
        assert!((t - 4.0).abs() < 1e-12);
        let d = [(PI / 4.0).cos(), (PI / 4.0).sin()];
        assert!((ray_walls([4.0, 4.0], d, [8.0, 8.0]) - 4.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn footprint_gaps() {
        let a = Footprint::Circle {
            center: [0.0, 0.0],
            radius: 0.5,
        };
        let b = Footprint::Rect {
            center: [2.0, 0.0],
            half: [0.5, 0.5],
            theta: 0.0,
        };
        assert!((a.distance_to(&b) - 1.0).abs() < 1e-12);
        assert!((b.distance_to(&a) - 1.0).abs() < 1e-12);
        let inner = Footprint::Circle {
            center: [2.0, 0.1],
            radius: 0.1,
        };
        assert_eq!(b.distance_to(&inner), 0.0);
        let s = Obstacle {
            kind: ObstacleKind::Capsule,
            position: [0.0, 2.0],
            theta: 0.0,
        }
        .footprint();
        assert!((a.distance_to(&s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angle_wrapping() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.25) - 0.25).abs() < 1e-15);
    }
}
