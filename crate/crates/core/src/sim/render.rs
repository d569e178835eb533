//! Synthetic front-view rendering: a ground-plane raycast classifying each
//! pixel into sky/road/marking/shoulder/offroad, plus extruded obstacle
//! billboards, followed by the condition's brightness and noise.

use rand::Rng as _;

use crate::image::Frame;
use crate::rng::rng_from_seed;
use crate::sim::conditions::RenderCondition;
use crate::sim::geom::{point_segment_distance, Vec2};
use crate::sim::town::TrackMap;
use crate::sim::vehicle::VehicleState;

pub const FRAME_SIZE: usize = 64;

const CAM_HEIGHT: f64 = 1.4;
const CAM_PITCH: f64 = 0.22;
/// Half-tangents of the horizontal/vertical fields of view.
const TAN_HALF_FOV_X: f64 = 1.0;
const TAN_HALF_FOV_Y: f64 = 0.62;
const VIEW_DISTANCE: f64 = 60.0;
const OBSTACLE_HEIGHT: f64 = 2.0;
const MARKING_HALF_WIDTH: f64 = 0.18;
const SHOULDER_WIDTH: f64 = 0.5;
const DASH_PERIOD: f64 = 4.0;
const DASH_ON: f64 = 2.6;

struct CameraBasis {
    pos: Vec2,
    fwd: Vec2,
    right: Vec2,
    cos_p: f64,
    sin_p: f64,
}

impl CameraBasis {
    fn new(state: &VehicleState) -> CameraBasis {
        let fwd = Vec2::from_angle(state.heading);
        // y-down world: right of the heading is heading + 90 degrees
        let right = Vec2::new(-fwd.y, fwd.x);
        CameraBasis {
            pos: state.pos,
            fwd,
            right,
            cos_p: CAM_PITCH.cos(),
            sin_p: CAM_PITCH.sin(),
        }
    }

    /// World point (x, y, z up) -> camera coords (lateral, vertical, depth).
    fn to_camera(&self, p: Vec2, z: f64) -> (f64, f64, f64) {
        let rel = p - self.pos;
        let lateral = rel.dot(self.right);
        let ahead = rel.dot(self.fwd);
        let dz = z - CAM_HEIGHT;
        // pitch rotates the forward axis downward
        let depth = ahead * self.cos_p - dz * self.sin_p;
        let vert = ahead * self.sin_p + dz * self.cos_p;
        (lateral, vert, depth)
    }

    /// Camera point -> pixel (col, row) in an out_w x out_h frame.
    fn to_pixel(&self, lateral: f64, vert: f64, depth: f64, out_w: usize, out_h: usize) -> (f64, f64) {
        let u = lateral / (depth * TAN_HALF_FOV_X);
        let m = vert / (depth * TAN_HALF_FOV_Y);
        let col = (u + 1.0) / 2.0 * out_w as f64 - 0.5;
        let row = (1.0 - m) / 2.0 * out_h as f64 - 0.5;
        (col, row)
    }
}

fn classify_ground(map: &TrackMap, p: Vec2, cond: &RenderCondition) -> [f32; 3] {
    for o in &map.obstacles {
        if o.contains(p, 0.0) {
            return cond.palette.obstacle;
        }
    }
    let mut best = f64::INFINITY;
    let mut best_arc = 0.0;
    for seg in &map.segments {
        let a = map.nodes[seg.a].pos;
        let b = map.nodes[seg.b].pos;
        let (d, t) = point_segment_distance(p, a, b);
        if d < best {
            best = d;
            best_arc = t * a.dist(b);
        }
    }
    let half_lane = map.lane_width / 2.0;
    if best <= MARKING_HALF_WIDTH && best_arc.rem_euclid(DASH_PERIOD) < DASH_ON {
        cond.palette.marking
    } else if best <= half_lane {
        cond.palette.road
    } else if best <= half_lane + SHOULDER_WIDTH {
        cond.palette.shoulder
    } else {
        cond.palette.offroad
    }
}

/// Deterministic synthetic camera frame for (state, map, condition, seed).
pub fn render_front_view(
    state: &VehicleState,
    map: &TrackMap,
    cond: &RenderCondition,
    noise_seed: u64,
) -> Frame {
    render_front_view_sized(state, map, cond, noise_seed, FRAME_SIZE, FRAME_SIZE)
}

pub fn render_front_view_sized(
    state: &VehicleState,
    map: &TrackMap,
    cond: &RenderCondition,
    noise_seed: u64,
    out_h: usize,
    out_w: usize,
) -> Frame {
    let cam = CameraBasis::new(state);
    let mut frame = Frame::zeros(out_h, out_w);

    // Ground pass: intersect each pixel ray with the ground plane.
    for row in 0..out_h {
        let m = 1.0 - 2.0 * (row as f64 + 0.5) / out_h as f64;
        for col in 0..out_w {
            let u = 2.0 * (col as f64 + 0.5) / out_w as f64 - 1.0;
            // ray = pitched-forward + lat * right + vert * pitched-up, z up
            let lat = u * TAN_HALF_FOV_X;
            let vert = m * TAN_HALF_FOV_Y;
            let dz = vert * cam.cos_p - cam.sin_p;
            let ahead = cam.cos_p + vert * cam.sin_p;
            let rgb = if dz >= -1e-6 {
                cond.palette.sky
            } else {
                let t = CAM_HEIGHT / -dz;
                let ground = cam.pos + (cam.fwd.scale(ahead) + cam.right.scale(lat)).scale(t);
                if cam.pos.dist(ground) > VIEW_DISTANCE {
                    // fade distant ground into the sky color
                    cond.palette.sky
                } else {
                    classify_ground(map, ground, cond)
                }
            };
            frame.set(row, col, rgb);
        }
    }

    // Obstacle billboards, far to near.
    let mut order: Vec<usize> = (0..map.obstacles.len()).collect();
    order.sort_by(|&a, &b| {
        let da = map.obstacles[a].center.dist(cam.pos);
        let db = map.obstacles[b].center.dist(cam.pos);
        db.partial_cmp(&da).unwrap()
    });
    for oi in order {
        let o = &map.obstacles[oi];
        if o.center.dist(cam.pos) > VIEW_DISTANCE {
            continue;
        }
        let corners = o.corners();
        let dist = o.center.dist(cam.pos);
        let shade = (1.0 / (1.0 + 0.02 * dist)) as f32;
        let color = [
            cond.palette.obstacle[0] * shade,
            cond.palette.obstacle[1] * shade,
            cond.palette.obstacle[2] * shade,
        ];
        for e in 0..4 {
            let a = corners[e];
            let b = corners[(e + 1) % 4];
            let samples = 2 * out_w;
            for k in 0..=samples {
                let p = a + (b - a).scale(k as f64 / samples as f64);
                let (lat, v_bot, depth) = cam.to_camera(p, 0.0);
                if depth < 0.3 {
                    continue;
                }
                let (_, v_top, _) = cam.to_camera(p, OBSTACLE_HEIGHT);
                let (col, row_bot) = cam.to_pixel(lat, v_bot, depth, out_w, out_h);
                let (_, row_top) = cam.to_pixel(lat, v_top, depth, out_w, out_h);
                let c = col.round() as isize;
                if c < 0 || c >= out_w as isize {
                    continue;
                }
                let r0 = row_top.max(0.0).round() as usize;
                let r1 = (row_bot.min(out_h as f64 - 1.0)).round() as usize;
                for r in r0..=r1.min(out_h - 1) {
                    frame.set(r, c as usize, color);
                }
            }
        }
    }

    // Condition post-processing: brightness scale then additive noise.
    let mut rng = rng_from_seed(noise_seed);
    let sigma = cond.noise_sigma as f32;
    for v in frame.data.iter_mut() {
        let mut x = *v * cond.brightness as f32;
        if sigma > 0.0 {
            x += rng.gen_range(-sigma..sigma);
        }
        *v = x.clamp(0.0, 1.0);
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::conditions::train_conditions;
    use crate::sim::town::{generate_town, TownSizeParams};

    fn setup() -> (TrackMap, VehicleState, RenderCondition) {
        let map = generate_town(1, &TownSizeParams::default()).unwrap();
        let wp = map.waypoints.iter().position(|w| !w.junction).unwrap();
        let next = map.wp_adj[wp][0];
        let heading = (map.waypoints[next].pos - map.waypoints[wp].pos).angle();
        let state = VehicleState::at(map.waypoints[wp].pos, heading);
        (map, state, train_conditions()[0].clone())
    }

    #[test]
    fn identical_inputs_identical_pixels() {
        let (map, state, cond) = setup();
        let a = render_front_view(&state, &map, &cond, 42);
        let b = render_front_view(&state, &map, &cond, 42);
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn noise_shifts_mean_abs_difference_proportionally() {
        let (map, state, mut cond) = setup();
        cond.noise_sigma = 0.0;
        let clean = render_front_view(&state, &map, &cond, 7);
        cond.noise_sigma = 0.1;
        let noisy = render_front_view(&state, &map, &cond, 7);
        let d = clean.mean_abs_diff(&noisy);
        assert!(d > 0.0 && d <= 0.2, "mean abs diff {d}");
    }

    #[test]
    fn wall_of_obstacle_dominates_frame() {
        let (mut map, state, cond) = setup();
        // a wall directly ahead of the vehicle
        let fwd = Vec2::from_angle(state.heading);
        let center = state.pos + fwd.scale(6.0);
        map.obstacles = vec![crate::sim::town::Obstacle {
            center,
            half_len: 1.0,
            half_wid: 12.0,
            angle: state.heading,
        }];
        let frame = render_front_view(&state, &map, &cond, 0);
        // count pixels near the obstacle palette color (pre-noise palette)
        let target = cond.palette.obstacle;
        let mut hits = 0;
        for px in frame.data.chunks(3) {
            let close = (0..3).all(|c| (px[c] - target[c] * cond.brightness as f32).abs() < 0.25);
            if close {
                hits += 1;
            }
        }
        let frac = hits as f64 / (frame.h * frame.w) as f64;
        assert!(frac > 0.3, "obstacle pixels fraction {frac}");
    }

    #[test]
    fn road_and_offroad_distinguishable() {
        let (map, state, mut cond) = setup();
        cond.noise_sigma = 0.0;
        let frame = render_front_view(&state, &map, &cond, 0);
        // Just right of center at the bottom lands on road surface (dead
        // center can hit the dashed centerline marking); top row is sky.
        let bottom = frame.get(frame.h - 2, frame.w * 3 / 4);
        let top = frame.get(1, frame.w / 2);
        let road = cond.palette.road;
        let sky = cond.palette.sky;
        let b = cond.brightness as f32;
        for c in 0..3 {
            assert!((bottom[c] - (road[c] * b).clamp(0.0, 1.0)).abs() < 0.35);
            assert!((top[c] - (sky[c] * b).clamp(0.0, 1.0)).abs() < 0.3);
        }
    }
}
