//! Procedural 2D driving world: track generation, vehicle kinematics,
//! synthetic front-view rendering, a privileged rule-based expert, and
//! route/command logic.

pub mod conditions;
pub mod expert;
pub mod geom;
pub mod render;
pub mod rollout;
pub mod route;
pub mod town;
pub mod vehicle;

pub use conditions::{condition_by_name, test_conditions, train_conditions, RenderCondition};
pub use expert::{expert_action, ExpertParams};
pub use geom::Vec2;
pub use render::{render_front_view, FRAME_SIZE};
pub use rollout::{
    export_trace, initial_state, rollout, Driver, ExpertDriver, RolloutConfig, StepContext,
    Termination, Trace,
};
pub use route::{current_command, sample_routes, Command, Route, RouteConstraints, N_COMMANDS};
pub use town::{
    generate_town, Obstacle, TownSizeParams, TrackMap, TEST_TOWN_SEEDS, TRAIN_TOWN_SEEDS,
};
pub use vehicle::{step, Action, BicycleParams, VehicleState};

use crate::error::Result;
use crate::rng::stream_indexed;

/// Routes shipped for a map: geometric candidates that the expert provably
/// completes. Candidates the expert cannot finish are dropped here, which is
/// what makes the expert the benchmark's 100% ceiling.
pub fn generate_verified_routes(
    map: &TrackMap,
    n: usize,
    constraints: &RouteConstraints,
    route_seed: u64,
    cfg: &RolloutConfig,
) -> Result<Vec<Route>> {
    let mut rng = stream_indexed(map.town_seed, "routes", route_seed);
    let mut verified = Vec::with_capacity(n);
    let mut batch = 0u64;
    while verified.len() < n && batch < 20 {
        let candidates = sample_routes(map, n * 2, constraints, &mut rng);
        if candidates.is_empty() {
            break;
        }
        for route in candidates {
            if verified.len() >= n {
                break;
            }
            let mut expert = ExpertDriver::default();
            let cond = train_conditions()[0].clone();
            let mut cfg = *cfg;
            cfg.record_frames = false;
            let trace = rollout(&mut expert, map, &route, &cond, &cfg, &BicycleParams::default(), 0)?;
            if trace.termination == Termination::GoalReached {
                verified.push(route);
            }
        }
        batch += 1;
    }
    Ok(verified)
}
