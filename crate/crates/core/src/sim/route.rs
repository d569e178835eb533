//! Routes over the waypoint graph, arc-length projection, and the high-level
//! navigation command derived from upcoming junction geometry.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sim::geom::{point_segment_distance, wrap_angle, Vec2};
use crate::sim::town::TrackMap;

pub const N_COMMANDS: usize = 4;
/// Junctions are announced when they come within this arc distance.
pub const COMMAND_LOOKAHEAD: f64 = 12.0;
/// Heading change at a junction beyond which the command is a turn.
const TURN_THRESHOLD: f64 = std::f64::consts::FRAC_PI_4;

/// High-level navigation command; exactly one is active per timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Command {
    FollowLane,
    TurnLeft,
    TurnRight,
    GoStraight,
}

impl Command {
    pub fn index(&self) -> usize {
        match self {
            Command::FollowLane => 0,
            Command::TurnLeft => 1,
            Command::TurnRight => 2,
            Command::GoStraight => 3,
        }
    }

    pub fn from_index(i: usize) -> Result<Command> {
        Ok(match i {
            0 => Command::FollowLane,
            1 => Command::TurnLeft,
            2 => Command::TurnRight,
            3 => Command::GoStraight,
            _ => return Err(Error::InvalidInput(format!("command index {i} out of range"))),
        })
    }

    pub fn one_hot(&self) -> [f64; N_COMMANDS] {
        let mut v = [0.0; N_COMMANDS];
        v[self.index()] = 1.0;
        v
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::FollowLane => "follow",
            Command::TurnLeft => "left",
            Command::TurnRight => "right",
            Command::GoStraight => "straight",
        }
    }
}

/// Ordered waypoint polyline from start to goal.
#[derive(Debug, Clone)]
pub struct Route {
    pub id: String,
    pub points: Vec<Vec2>,
    pub junction: Vec<bool>,
    /// Cumulative arc length at each point; last entry is the route length.
    pub cum_len: Vec<f64>,
}

impl Route {
    pub fn from_points(id: String, points: Vec<Vec2>, junction: Vec<bool>) -> Result<Route> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("route needs at least 2 waypoints".into()));
        }
        if junction.len() != points.len() {
            return Err(Error::InvalidInput("junction flags must match waypoints".into()));
        }
        let mut cum_len = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cum_len.push(0.0);
        for w in points.windows(2) {
            acc += w[0].dist(w[1]);
            cum_len.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::InvalidInput("route has zero length".into()));
        }
        Ok(Route {
            id,
            points,
            junction,
            cum_len,
        })
    }

    pub fn length(&self) -> f64 {
        *self.cum_len.last().unwrap()
    }

    pub fn start(&self) -> Vec2 {
        self.points[0]
    }

    pub fn goal(&self) -> Vec2 {
        *self.points.last().unwrap()
    }

    pub fn start_heading(&self) -> f64 {
        (self.points[1] - self.points[0]).angle()
    }

    /// Nearest-point projection over the whole polyline: returns
    /// (arc length, lateral distance, segment index).
    pub fn project(&self, p: Vec2) -> (f64, f64, usize) {
        let mut best = (0.0, f64::INFINITY, 0);
        for i in 0..self.points.len() - 1 {
            let (d, t) = point_segment_distance(p, self.points[i], self.points[i + 1]);
            if d < best.1 {
                let s = self.cum_len[i] + t * (self.cum_len[i + 1] - self.cum_len[i]);
                best = (s, d, i);
            }
        }
        best
    }

    /// Point at a given arc length, clamped to the route.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        let i = match self.cum_len.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i + 1 >= self.points.len() {
            return self.goal();
        }
        let seg = self.cum_len[i + 1] - self.cum_len[i];
        let t = if seg > 0.0 { (s - self.cum_len[i]) / seg } else { 0.0 };
        self.points[i] + (self.points[i + 1] - self.points[i]).scale(t)
    }

    /// The next junction at arc position > s within `within` meters:
    /// (arc distance to it, signed heading change through it).
    pub fn next_junction(&self, s: f64, within: f64) -> Option<(f64, f64)> {
        for (i, &flag) in self.junction.iter().enumerate() {
            if !flag {
                continue;
            }
            let sj = self.cum_len[i];
            if sj <= s + 1e-9 || sj > s + within {
                continue;
            }
            if i == 0 || i + 1 >= self.points.len() {
                continue;
            }
            let before = (self.points[i] - self.points[i - 1]).angle();
            let after = (self.points[i + 1] - self.points[i]).angle();
            return Some((sj - s, wrap_angle(after - before)));
        }
        None
    }
}

/// Turn commands are issued when a junction lies within the lookahead,
/// classified by the route's heading change through it (right-positive).
pub fn current_command(state_pos: Vec2, route: &Route, lookahead: f64) -> Command {
    let (s, _, _) = route.project(state_pos);
    match route.next_junction(s, lookahead) {
        None => Command::FollowLane,
        Some((_, turn)) => {
            if turn >= TURN_THRESHOLD {
                Command::TurnRight
            } else if turn <= -TURN_THRESHOLD {
                Command::TurnLeft
            } else {
                Command::GoStraight
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RouteConstraints {
    pub min_len: f64,
    pub max_len: f64,
    /// Require at least one junction strictly inside the route.
    pub require_junction: bool,
}

impl Default for RouteConstraints {
    fn default() -> Self {
        RouteConstraints {
            min_len: 60.0,
            max_len: 220.0,
            require_junction: true,
        }
    }
}

/// Shortest waypoint path by BFS over the directed graph.
fn shortest_path(map: &TrackMap, from: usize, to: usize) -> Option<Vec<usize>> {
    let n = map.waypoints.len();
    let mut prev = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(from);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        if u == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = prev[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &v in &map.wp_adj[u] {
            if !seen[v] {
                seen[v] = true;
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    None
}

fn path_to_route(map: &TrackMap, path: &[usize], id: String) -> Result<Route> {
    let points: Vec<Vec2> = path.iter().map(|&i| map.waypoints[i].pos).collect();
    let junction: Vec<bool> = path.iter().map(|&i| map.waypoints[i].junction).collect();
    Route::from_points(id, points, junction)
}

/// Sample geometric route candidates (no expert verification here).
pub fn sample_routes(
    map: &TrackMap,
    n: usize,
    constraints: &RouteConstraints,
    rng: &mut Rng,
) -> Vec<Route> {
    let mut out = Vec::with_capacity(n);
    let n_wp = map.waypoints.len();
    let mut attempts = 0;
    while out.len() < n && attempts < n * 200 {
        attempts += 1;
        let from = rng.gen_range(0..n_wp);
        let to = rng.gen_range(0..n_wp);
        if from == to || map.waypoints[from].junction || map.waypoints[to].junction {
            continue;
        }
        let Some(path) = shortest_path(map, from, to) else {
            continue;
        };
        let id = format!("t{}-r{}", map.town_seed, out.len());
        let Ok(route) = path_to_route(map, &path, id) else {
            continue;
        };
        if route.length() < constraints.min_len || route.length() > constraints.max_len {
            continue;
        }
        if constraints.require_junction
            && !route.junction[1..route.junction.len() - 1].iter().any(|&j| j)
        {
            continue;
        }
        out.push(route);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_route() -> Route {
        let points: Vec<Vec2> = (0..21).map(|i| Vec2::new(i as f64 * 5.0, 0.0)).collect();
        let junction = vec![false; 21];
        Route::from_points("straight".into(), points, junction).unwrap()
    }

    #[test]
    fn straight_route_is_follow_lane() {
        let r = straight_route();
        assert_eq!(current_command(Vec2::new(3.0, 0.5), &r, 12.0), Command::FollowLane);
    }

    #[test]
    fn left_turn_junction_detected() {
        // Route heads east then turns 90 degrees north (negative y): a left
        // turn in this y-down frame.
        let points = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(5.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, -5.0),
            Vec2::new(10.0, -10.0),
        ];
        let junction = vec![false, false, true, false, false];
        let r = Route::from_points("turn".into(), points, junction).unwrap();
        assert_eq!(current_command(Vec2::new(1.0, 0.0), &r, 12.0), Command::TurnLeft);
        // Right-turn mirror.
        let points = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(5.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, 5.0),
            Vec2::new(10.0, 10.0),
        ];
        let junction = vec![false, false, true, false, false];
        let r = Route::from_points("turn-r".into(), points, junction).unwrap();
        assert_eq!(current_command(Vec2::new(1.0, 0.0), &r, 12.0), Command::TurnRight);
    }

    #[test]
    fn straight_through_junction_is_go_straight() {
        let points = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(5.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(15.0, 0.0),
        ];
        let junction = vec![false, false, true, false];
        let r = Route::from_points("thru".into(), points, junction).unwrap();
        assert_eq!(current_command(Vec2::new(1.0, 0.0), &r, 12.0), Command::GoStraight);
    }

    #[test]
    fn junction_beyond_lookahead_ignored() {
        let points = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(20.0, 0.0),
            Vec2::new(40.0, 0.0),
            Vec2::new(40.0, 20.0),
        ];
        let junction = vec![false, false, true, false];
        let r = Route::from_points("far".into(), points, junction).unwrap();
        assert_eq!(current_command(Vec2::new(0.0, 0.0), &r, 12.0), Command::FollowLane);
    }

    #[test]
    fn projection_and_point_at_roundtrip() {
        let r = straight_route();
        let (s, d, _) = r.project(Vec2::new(33.0, 2.0));
        assert!((s - 33.0).abs() < 1e-9);
        assert!((d - 2.0).abs() < 1e-9);
        let p = r.point_at(42.0);
        assert!((p.x - 42.0).abs() < 1e-9);
    }
}
