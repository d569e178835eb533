//! Vehicle state, the 2-component low-level action, and the kinematic
//! bicycle step.

use serde::{Deserialize, Serialize};

use crate::sim::geom::{wrap_angle, Vec2};

/// Low-level control: steer and accel, both clamped to [-1, 1]
/// (negative accel brakes). Positive steer turns rightward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    steer: f64,
    accel: f64,
}

impl Action {
    pub fn new(steer: f64, accel: f64) -> Action {
        Action {
            steer: steer.clamp(-1.0, 1.0),
            accel: accel.clamp(-1.0, 1.0),
        }
    }

    pub const ZERO: Action = Action { steer: 0.0, accel: 0.0 };

    pub fn steer(&self) -> f64 {
        self.steer
    }

    pub fn accel(&self) -> f64 {
        self.accel
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.steer, self.accel]
    }

    pub fn l1_distance(&self, other: &Action) -> f64 {
        (self.steer - other.steer).abs() + (self.accel - other.accel).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub pos: Vec2,
    /// Radians in (-pi, pi], 0 = +x, positive turns toward +y (rightward).
    pub heading: f64,
    /// m/s, never negative.
    pub speed: f64,
}

impl VehicleState {
    pub fn at(pos: Vec2, heading: f64) -> VehicleState {
        VehicleState {
            pos,
            heading: wrap_angle(heading),
            speed: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicycleParams {
    pub wheelbase: f64,
    /// Maximum steering angle in radians (steer command of +-1 maps here).
    pub max_steer: f64,
    /// Maximum acceleration magnitude, m/s^2.
    pub a_max: f64,
    pub v_max: f64,
}

impl Default for BicycleParams {
    fn default() -> Self {
        BicycleParams {
            wheelbase: 2.5,
            max_steer: 35.0f64.to_radians(),
            a_max: 3.0,
            v_max: 10.0,
        }
    }
}

/// Explicit-Euler kinematic bicycle update. Position advances along the old
/// heading with the old speed, so per-step displacement never exceeds
/// v_max * dt.
pub fn step(state: &VehicleState, action: &Action, dt: f64, p: &BicycleParams) -> VehicleState {
    assert!(dt > 0.0, "dt must be positive");
    let steer_angle = action.steer() * p.max_steer;
    let pos = state.pos + Vec2::from_angle(state.heading).scale(state.speed * dt);
    let heading = wrap_angle(state.heading + state.speed / p.wheelbase * steer_angle.tan() * dt);
    let speed = (state.speed + action.accel() * p.a_max * dt).clamp(0.0, p.v_max);
    VehicleState { pos, heading, speed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_state_is_fixed_point() {
        let s = VehicleState::at(Vec2::new(1.0, 2.0), 0.3);
        let s2 = step(&s, &Action::ZERO, 0.1, &BicycleParams::default());
        assert_eq!(s, s2);
    }

    #[test]
    fn action_components_clamped() {
        let a = Action::new(3.0, -7.0);
        assert_eq!(a.steer(), 1.0);
        assert_eq!(a.accel(), -1.0);
    }

    #[test]
    fn straight_constant_accel_matches_closed_form() {
        let p = BicycleParams::default();
        let dt = 0.1;
        let mut s = VehicleState::at(Vec2::ZERO, 0.0);
        let accel = 0.5; // 1.5 m/s^2 actual
        let steps = 40;
        for _ in 0..steps {
            s = step(&s, &Action::new(0.0, accel), dt, &p);
        }
        let t = steps as f64 * dt;
        let a = accel * p.a_max;
        // v stays below v_max for this horizon
        assert!((s.speed - a * t).abs() < 1e-9);
        // Euler sum lags the exact integral by at most a*dt*t/2 per kinematics
        let exact = 0.5 * a * t * t;
        let euler_gap = 0.5 * a * dt * t;
        assert!((s.pos.x - exact).abs() <= euler_gap + 1e-9, "{} vs {exact}", s.pos.x);
        assert!(s.pos.y.abs() < 1e-12);
    }

    #[test]
    fn speed_clamps_at_zero_and_vmax() {
        let p = BicycleParams::default();
        let mut s = VehicleState::at(Vec2::ZERO, 0.0);
        s = step(&s, &Action::new(0.0, -1.0), 0.1, &p);
        assert_eq!(s.speed, 0.0);
        for _ in 0..200 {
            s = step(&s, &Action::new(0.0, 1.0), 0.1, &p);
        }
        assert_eq!(s.speed, p.v_max);
    }

    #[test]
    fn symmetric_steer_mirrors_trajectory() {
        let p = BicycleParams::default();
        let run = |steer: f64| {
            let mut s = VehicleState {
                pos: Vec2::ZERO,
                heading: 0.0,
                speed: 5.0,
            };
            let mut pts = Vec::new();
            for _ in 0..50 {
                s = step(&s, &Action::new(steer, 0.0), 0.1, &p);
                pts.push(s.pos);
            }
            pts
        };
        let left = run(-0.4);
        let right = run(0.4);
        for (l, r) in left.iter().zip(&right) {
            assert!((l.x - r.x).abs() < 1e-12);
            assert!((l.y + r.y).abs() < 1e-12);
        }
    }
}
