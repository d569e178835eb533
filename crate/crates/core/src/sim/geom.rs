//! 2D geometry helpers. World coordinates are meters, x east, y south
//! (screen convention), so a positive heading change turns the vehicle
//! rightward/clockwise when viewed from above with north up.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Vec2 {
        Vec2 { x, y }
    }

    pub fn from_angle(a: f64) -> Vec2 {
        Vec2 {
            x: a.cos(),
            y: a.sin(),
        }
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn len(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).len()
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product; positive when `o` lies clockwise
    /// (to the right) of `self` in this y-down frame.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2 {
            x: self.x * s,
            y: self.y * s,
        }
    }

    pub fn normalized(self) -> Vec2 {
        let l = self.len();
        if l == 0.0 {
            Vec2::ZERO
        } else {
            self.scale(1.0 / l)
        }
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

/// Normalize an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a <= -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    } else if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}

/// Distance from point `p` to segment `ab`, plus the arc parameter t in [0,1]
/// of the closest point.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (p.dist(a), 0.0);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    let closest = a + ab.scale(t);
    (p.dist(closest), t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_keeps_half_open_interval() {
        assert!((wrap_angle(std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!(wrap_angle(0.1).abs() - 0.1 < 1e-12);
    }

    #[test]
    fn segment_distance_basics() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(10.0, 0.0);
        let (d, t) = point_segment_distance(Vec2::new(5.0, 3.0), a, b);
        assert!((d - 3.0).abs() < 1e-12 && (t - 0.5).abs() < 1e-12);
        let (d, t) = point_segment_distance(Vec2::new(-4.0, 0.0), a, b);
        assert!((d - 4.0).abs() < 1e-12 && t == 0.0);
    }

    #[test]
    fn cross_sign_is_right_positive() {
        // heading east, target to the south (right in y-down coords)
        let fwd = Vec2::from_angle(0.0);
        let to_target = Vec2::new(1.0, 1.0);
        assert!(fwd.cross(to_target) > 0.0);
    }
}
