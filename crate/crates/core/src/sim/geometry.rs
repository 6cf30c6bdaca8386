//! Planar primitives: points, segments, axis-aligned rectangles and circles.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }

    pub fn distance_to_point(&self, p: Point) -> f64 {
        let dx = (self.x_min - p.x).max(0.0).max(p.x - self.x_max);
        let dy = (self.y_min - p.y).max(0.0).max(p.y - self.y_max);
        dx.hypot(dy)
    }

    fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.x_min, self.y_min),
            Point::new(self.x_max, self.y_min),
            Point::new(self.x_max, self.y_max),
            Point::new(self.x_min, self.y_max),
        ]
    }

    /// Whether the closed segment `a-b` touches the closed rectangle (slab clipping).
    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        let d = (b.x - a.x, b.y - a.y);
        for (p, q) in [
            (-d.0, a.x - self.x_min),
            (d.0, self.x_max - a.x),
            (-d.1, a.y - self.y_min),
            (d.1, self.y_max - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }

    pub fn distance_to_segment(&self, a: Point, b: Point) -> f64 {
        if self.intersects_segment(a, b) {
            return 0.0;
        }
        let from_ends = self.distance_to_point(a).min(self.distance_to_point(b));
        self.corners()
            .into_iter()
            .map(|c| point_segment_distance(c, a, b))
            .fold(from_ends, f64::min)
    }
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl Circle {
    pub fn center(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Static obstacle footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Obstacle {
    Rect(Rect),
    Circle(Circle),
}

impl Obstacle {
    pub fn rect(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Obstacle::Rect(Rect {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn circle(x: f64, y: f64, radius: f64) -> Self {
        Obstacle::Circle(Circle { x, y, radius })
    }

    /// Clearance between the footprint and a segment; zero when they touch.
    pub fn distance_to_segment(&self, a: Point, b: Point) -> f64 {
        match self {
            Obstacle::Rect(r) => r.distance_to_segment(a, b),
            Obstacle::Circle(c) => (point_segment_distance(c.center(), a, b) - c.radius).max(0.0),
        }
    }

    pub fn distance_to_point(&self, p: Point) -> f64 {
        self.distance_to_segment(p, p)
    }

    /// Whether a disc of `radius` swept from `a` to `b` overlaps the footprint.
    pub fn hits_capsule(&self, a: Point, b: Point, radius: f64) -> bool {
        self.distance_to_segment(a, b) < radius
    }

    /// Whether the segment passes through the footprint (line-of-sight test).
    pub fn blocks(&self, a: Point, b: Point) -> bool {
        match self {
            Obstacle::Rect(r) => r.intersects_segment(a, b),
            Obstacle::Circle(c) => point_segment_distance(c.center(), a, b) < c.radius,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        match self {
            Obstacle::Rect(r) => {
                [r.x_min, r.y_min, r.x_max, r.y_max].iter().all(|v| v.is_finite())
                    && r.x_min < r.x_max
                    && r.y_min < r.y_max
            }
            Obstacle::Circle(c) => c.x.is_finite() && c.y.is_finite() && c.radius.is_finite() && c.radius > 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_rect_intersection() {
        let r = Rect {
            x_min: 1.0,
            y_min: -1.0,
            x_max: 2.0,
            y_max: 1.0,
        };
        assert!(r.intersects_segment(Point::new(0.0, 0.0), Point::new(3.0, 0.0)));
        assert!(!r.intersects_segment(Point::new(0.0, 2.0), Point::new(3.0, 2.0)));
        assert!(r.intersects_segment(Point::new(1.5, 0.0), Point::new(1.5, 0.0)));
        assert!(!r.intersects_segment(Point::new(0.0, 0.0), Point::new(0.9, 0.0)));
        assert!((r.distance_to_segment(Point::new(0.0, 2.0), Point::new(3.0, 2.0)) - 1.0).abs() < 1e-12);
        let diag = r.distance_to_segment(Point::new(0.0, 2.0), Point::new(0.0, 3.0));
        assert!((diag - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn circle_clearance() {
        let c = Obstacle::circle(0.0, 0.0, 0.5);
        assert!((c.distance_to_segment(Point::new(-1.0, 1.0), Point::new(1.0, 1.0)) - 0.5).abs() < 1e-12);
        assert!(c.hits_capsule(Point::new(-1.0, 0.7), Point::new(1.0, 0.7), 0.3));
        assert!(!c.hits_capsule(Point::new(-1.0, 0.8), Point::new(1.0, 0.8), 0.3));
        assert!(c.blocks(Point::new(-1.0, 0.0), Point::new(1.0, 0.0)));
    }
}
