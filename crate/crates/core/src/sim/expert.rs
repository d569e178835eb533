//! Privileged rule-based expert: pure-pursuit steering toward a lookahead
//! point on the route plus proportional speed control, braking near junctions
//! and obstacles. It reads full simulator state, never pixels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::geom::{wrap_angle, Vec2};
use crate::sim::route::Route;
use crate::sim::town::TrackMap;
use crate::sim::vehicle::{Action, BicycleParams, VehicleState};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExpertParams {
    pub cruise_speed: f64,
    pub junction_speed: f64,
    /// Base lookahead and its speed gain.
    pub lookahead_base: f64,
    pub lookahead_gain: f64,
    pub lookahead_max: f64,
    pub speed_kp: f64,
    /// Beyond this lateral distance from the route the expert reports
    /// route-lost instead of an action.
    pub recovery_distance: f64,
    /// Start slowing this far before a junction.
    pub junction_slow_distance: f64,
    /// React to obstacles within this distance ahead in the corridor.
    pub obstacle_slow_distance: f64,
}

impl Default for ExpertParams {
    fn default() -> Self {
        ExpertParams {
            cruise_speed: 6.0,
            junction_speed: 2.5,
            lookahead_base: 3.0,
            lookahead_gain: 0.6,
            lookahead_max: 9.0,
            speed_kp: 1.4,
            recovery_distance: 12.0,
            junction_slow_distance: 10.0,
            obstacle_slow_distance: 9.0,
        }
    }
}

/// Pure-pursuit + proportional speed control from privileged state.
pub fn expert_action(
    state: &VehicleState,
    map: &TrackMap,
    route: &Route,
    params: &ExpertParams,
    bike: &BicycleParams,
) -> Result<Action> {
    let (s, lateral, _) = route.project(state.pos);
    if lateral > params.recovery_distance {
        return Err(Error::RouteLost {
            distance: lateral,
            limit: params.recovery_distance,
        });
    }

    let lookahead = (params.lookahead_base + params.lookahead_gain * state.speed)
        .clamp(params.lookahead_base, params.lookahead_max);
    let target = route.point_at(s + lookahead);
    let to_target = target - state.pos;
    let alpha = wrap_angle(to_target.angle() - state.heading);
    let steer_angle = (2.0 * bike.wheelbase * alpha.sin()).atan2(lookahead);
    let steer = steer_angle / bike.max_steer;

    let mut target_speed = params.cruise_speed;
    if let Some((dist, _)) = route.next_junction(s, params.junction_slow_distance) {
        let ramp = (dist / params.junction_slow_distance).clamp(0.3, 1.0);
        target_speed = target_speed.min(params.junction_speed.max(ramp * params.cruise_speed * 0.5));
    }
    // slow for obstacles intruding into the corridor ahead
    let fwd = Vec2::from_angle(state.heading);
    let right = Vec2::new(-fwd.y, fwd.x);
    for o in &map.obstacles {
        let rel = o.center - state.pos;
        let ahead = rel.dot(fwd);
        let side = rel.dot(right).abs();
        if ahead > 0.0 && ahead < params.obstacle_slow_distance && side < map.lane_width * 0.55 {
            target_speed = target_speed.min((0.35 * ahead).max(1.2));
        }
    }

    let accel = params.speed_kp * (target_speed - state.speed) / bike.a_max;
    Ok(Action::new(steer, accel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::route::Route;
    use crate::sim::town::{generate_town, TownSizeParams};

    fn straight_route() -> Route {
        let points: Vec<Vec2> = (0..40).map(|i| Vec2::new(i as f64 * 3.0, 0.0)).collect();
        let junction = vec![false; 40];
        Route::from_points("straight".into(), points, junction).unwrap()
    }

    fn empty_map() -> TrackMap {
        let mut map = generate_town(1, &TownSizeParams::default()).unwrap();
        map.obstacles.clear();
        map
    }

    #[test]
    fn equilibrium_on_straight_at_cruise() {
        let params = ExpertParams::default();
        let bike = BicycleParams::default();
        let map = empty_map();
        let route = straight_route();
        let state = VehicleState {
            pos: Vec2::new(30.0, 0.0),
            heading: 0.0,
            speed: params.cruise_speed,
        };
        let a = expert_action(&state, &map, &route, &params, &bike).unwrap();
        assert!(a.steer().abs() < 0.05, "steer {}", a.steer());
        assert!(a.accel().abs() < 0.05, "accel {}", a.accel());
    }

    #[test]
    fn offset_left_steers_right() {
        let params = ExpertParams::default();
        let bike = BicycleParams::default();
        let map = empty_map();
        let route = straight_route();
        // heading +x; left of lane center is -y in this y-down frame
        let state = VehicleState {
            pos: Vec2::new(30.0, -1.2),
            heading: 0.0,
            speed: 4.0,
        };
        let a = expert_action(&state, &map, &route, &params, &bike).unwrap();
        assert!(a.steer() > 0.0, "expected rightward correction, got {}", a.steer());
    }

    #[test]
    fn far_from_route_reports_route_lost() {
        let params = ExpertParams::default();
        let bike = BicycleParams::default();
        let map = empty_map();
        let route = straight_route();
        let state = VehicleState {
            pos: Vec2::new(30.0, 40.0),
            heading: 0.0,
            speed: 0.0,
        };
        assert!(matches!(
            expert_action(&state, &map, &route, &params, &bike),
            Err(Error::RouteLost { .. })
        ));
    }

    #[test]
    fn brakes_for_corridor_obstacle() {
        let params = ExpertParams::default();
        let bike = BicycleParams::default();
        let mut map = empty_map();
        map.obstacles.push(crate::sim::town::Obstacle {
            center: Vec2::new(36.0, 0.3),
            half_len: 1.0,
            half_wid: 0.6,
            angle: 0.0,
        });
        let route = straight_route();
        let state = VehicleState {
            pos: Vec2::new(30.0, 0.0),
            heading: 0.0,
            speed: 6.0,
        };
        let a = expert_action(&state, &map, &route, &params, &bike).unwrap();
        assert!(a.accel() < -0.3, "expected braking, got {}", a.accel());
    }
}
