//! Closed-loop rollouts: a driver (privileged expert or vision policy) steers
//! the bicycle model along a route until goal, off-road, collision, route
//! loss, or timeout. Traces record everything needed for dataset building
//! and metrics, and can be exported to disk.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Frame;
use crate::rng::derive_seed_indexed;
use crate::sim::conditions::RenderCondition;
use crate::sim::expert::{expert_action, ExpertParams};
use crate::sim::render::render_front_view_sized;
use crate::sim::route::{current_command, Command, Route, COMMAND_LOOKAHEAD};
use crate::sim::town::TrackMap;
use crate::sim::vehicle::{step, Action, BicycleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GoalReached,
    OffRoad,
    Collision,
    RouteLost,
    Timeout,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub dt: f64,
    pub max_steps: usize,
    pub goal_radius: f64,
    /// Collision margin around obstacle rectangles (vehicle half-width).
    pub vehicle_radius: f64,
    /// Consecutive steps beyond the off-road boundary before termination.
    pub offroad_patience: usize,
    pub record_frames: bool,
    pub frame_size: usize,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            dt: 0.1,
            max_steps: 800,
            goal_radius: 2.0,
            vehicle_radius: 0.5,
            offroad_patience: 10,
            record_frames: false,
            frame_size: crate::sim::render::FRAME_SIZE,
        }
    }
}

/// What a driver sees each step. The frame is rendered only when the driver
/// asks for frames or the trace records them.
pub struct StepContext<'a> {
    pub state: &'a VehicleState,
    pub map: &'a TrackMap,
    pub route: &'a Route,
    pub command: Command,
    pub speed: f64,
    pub frame: Option<&'a Frame>,
}

pub trait Driver {
    fn needs_frames(&self) -> bool {
        false
    }
    fn act(&mut self, ctx: &StepContext) -> Result<Action>;
}

/// The privileged expert as a driver.
pub struct ExpertDriver {
    pub params: ExpertParams,
    pub bike: BicycleParams,
}

impl Default for ExpertDriver {
    fn default() -> Self {
        ExpertDriver {
            params: ExpertParams::default(),
            bike: BicycleParams::default(),
        }
    }
}

impl Driver for ExpertDriver {
    fn act(&mut self, ctx: &StepContext) -> Result<Action> {
        expert_action(ctx.state, ctx.map, ctx.route, &self.params, &self.bike)
    }
}

/// A driver that always outputs the same action (test probe).
pub struct ConstantDriver(pub Action);

impl Driver for ConstantDriver {
    fn act(&mut self, _ctx: &StepContext) -> Result<Action> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub route_id: String,
    pub condition: String,
    pub noise_seed: u64,
    /// States per step, including the initial one (length = steps + 1).
    pub states: Vec<VehicleState>,
    pub actions: Vec<Action>,
    pub commands: Vec<Command>,
    pub frames: Option<Vec<Frame>>,
    pub termination: Termination,
}

impl Trace {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }
}

/// Distance beyond which the vehicle counts as off the road surface:
/// more than one lane width past the lane edge.
pub fn offroad_distance(lane_width: f64) -> f64 {
    lane_width / 2.0 + lane_width
}

pub fn initial_state(route: &Route) -> VehicleState {
    VehicleState::at(route.start(), route.start_heading())
}

/// Run one closed-loop episode.
pub fn rollout(
    driver: &mut dyn Driver,
    map: &TrackMap,
    route: &Route,
    condition: &RenderCondition,
    cfg: &RolloutConfig,
    bike: &BicycleParams,
    noise_seed: u64,
) -> Result<Trace> {
    let mut state = initial_state(route);
    let mut states = vec![state];
    let mut actions = Vec::new();
    let mut commands = Vec::new();
    let want_frames = cfg.record_frames || driver.needs_frames();
    let mut frames: Vec<Frame> = Vec::new();
    let mut offroad_streak = 0usize;
    let offroad_limit = offroad_distance(map.lane_width);
    let mut termination = Termination::Timeout;

    for step_idx in 0..cfg.max_steps {
        let command = current_command(state.pos, route, COMMAND_LOOKAHEAD);
        let frame = if want_frames {
            Some(render_front_view_sized(
                &state,
                map,
                condition,
                derive_seed_indexed(noise_seed, "frame", step_idx as u64),
                cfg.frame_size,
                cfg.frame_size,
            ))
        } else {
            None
        };
        let ctx = StepContext {
            state: &state,
            map,
            route,
            command,
            speed: state.speed,
            frame: frame.as_ref(),
        };
        let action = match driver.act(&ctx) {
            Ok(a) => a,
            Err(Error::RouteLost { .. }) => {
                termination = Termination::RouteLost;
                break;
            }
            Err(e) => return Err(e),
        };

        state = step(&state, &action, cfg.dt, bike);
        states.push(state);
        actions.push(action);
        commands.push(command);
        if let Some(f) = frame {
            if cfg.record_frames {
                frames.push(f);
            }
        }

        if state.pos.dist(route.goal()) <= cfg.goal_radius {
            termination = Termination::GoalReached;
            break;
        }
        if map.collides(state.pos, cfg.vehicle_radius) {
            termination = Termination::Collision;
            break;
        }
        if map.distance_to_road(state.pos) > offroad_limit {
            offroad_streak += 1;
            if offroad_streak > cfg.offroad_patience {
                termination = Termination::OffRoad;
                break;
            }
        } else {
            offroad_streak = 0;
        }
    }

    Ok(Trace {
        route_id: route.id.clone(),
        condition: condition.name.clone(),
        noise_seed,
        states,
        actions,
        commands,
        frames: if cfg.record_frames { Some(frames) } else { None },
        termination,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceMeta {
    route_id: String,
    condition: String,
    noise_seed: u64,
    termination: Termination,
    steps: usize,
}

/// Export a trace as a directory: meta.json, per-step scalars as steps.csv,
/// and frames.bin (count-prefixed raw little-endian frame tensors).
pub fn export_trace(trace: &Trace, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta = TraceMeta {
        route_id: trace.route_id.clone(),
        condition: trace.condition.clone(),
        noise_seed: trace.noise_seed,
        termination: trace.termination,
        steps: trace.steps(),
    };
    let meta_json = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::msg(format!("trace meta encode: {e}")))?;
    std::fs::write(dir.join("meta.json"), meta_json)?;

    let mut csv = String::from("step,x,y,heading,speed,steer,accel,command\n");
    for i in 0..trace.steps() {
        let s = &trace.states[i];
        let a = &trace.actions[i];
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            i,
            s.pos.x,
            s.pos.y,
            s.heading,
            s.speed,
            a.steer(),
            a.accel(),
            trace.commands[i].index()
        ));
    }
    std::fs::write(dir.join("steps.csv"), csv)?;

    let mut w = BufWriter::new(std::fs::File::create(dir.join("frames.bin"))?);
    let frames = trace.frames.as_deref().unwrap_or(&[]);
    w.write_all(&(frames.len() as u32).to_le_bytes())?;
    if let Some(first) = frames.first() {
        w.write_all(&(first.h as u32).to_le_bytes())?;
        w.write_all(&(first.w as u32).to_le_bytes())?;
        for f in frames {
            for &v in &f.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    } else {
        w.write_all(&0u32.to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Load frames.bin back into memory.
pub fn import_frames(path: &Path) -> Result<Vec<Frame>> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let count = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let h = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let w = u32::from_le_bytes(b4) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut raw = vec![0u8; h * w * 3 * 4];
        r.read_exact(&mut raw).map_err(|_| Error::Corrupt {
            what: "frames.bin".into(),
            detail: "truncated frame data".into(),
        })?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(Frame { h, w, data });
    }
    Ok(out)
}

/// Parse the per-step scalar log written by `export_trace`.
pub fn import_steps_csv(path: &Path) -> Result<Vec<(VehicleState, Action, Command)>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(Error::Corrupt {
                what: "steps.csv".into(),
                detail: format!("line {i} has {} columns", cols.len()),
            });
        }
        let f = |j: usize| -> Result<f64> {
            cols[j]
                .parse()
                .map_err(|_| Error::Corrupt {
                    what: "steps.csv".into(),
                    detail: format!("bad number {:?} on line {i}", cols[j]),
                })
        };
        let state = VehicleState {
            pos: crate::sim::geom::Vec2::new(f(1)?, f(2)?),
            heading: f(3)?,
            speed: f(4)?,
        };
        let action = Action::new(f(5)?, f(6)?);
        let cmd = Command::from_index(cols[7].parse().map_err(|_| Error::Corrupt {
            what: "steps.csv".into(),
            detail: format!("bad command on line {i}"),
        })?)?;
        out.push((state, action, cmd));
    }
    Ok(out)
}
