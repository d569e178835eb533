//! Procedural towns: a jittered grid road network reduced to a connected,
//! dead-end-free graph, densified into a directed waypoint graph, plus
//! roadside obstacles standing in for parked traffic.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{stream_indexed, Rng};
use crate::sim::geom::{point_segment_distance, Vec2};

pub const LANE_WIDTH: f64 = 4.0;
/// Waypoints are sampled at most this far apart.
pub const WAYPOINT_SPACING: f64 = 3.0;
/// Junction clearance: no obstacles within this distance of a junction node.
const JUNCTION_CLEARANCE: f64 = 8.0;

/// Town seeds used to train agents; mirrors the benchmark's 4-town split.
pub const TRAIN_TOWN_SEEDS: [u64; 4] = [1, 3, 4, 6];
/// Held-out town seeds for the new-town evaluation split.
pub const TEST_TOWN_SEEDS: [u64; 2] = [2, 5];

#[derive(Debug, Clone, Copy)]
pub struct TownSizeParams {
    pub cols: usize,
    pub rows: usize,
    pub cell_m: f64,
    /// Probability of keeping a non-tree grid edge (controls junction count).
    pub extra_edge_prob: f64,
    pub n_obstacles: usize,
}

impl Default for TownSizeParams {
    fn default() -> Self {
        TownSizeParams {
            cols: 4,
            rows: 4,
            cell_m: 30.0,
            extra_edge_prob: 0.45,
            n_obstacles: 10,
        }
    }
}

impl TownSizeParams {
    pub fn validate(&self) -> Result<()> {
        if self.cols < 2 || self.rows < 2 {
            return Err(Error::InvalidConfig(format!(
                "town grid must be at least 2x2, got {}x{}",
                self.cols, self.rows
            )));
        }
        if self.cell_m < 12.0 {
            return Err(Error::InvalidConfig(format!(
                "town cell size {} m too small for the lane geometry",
                self.cell_m
            )));
        }
        if !(0.0..=1.0).contains(&self.extra_edge_prob) {
            return Err(Error::InvalidConfig("extra_edge_prob must be in [0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub pos: Vec2,
    pub degree: usize,
}

/// Undirected straight road between two nodes.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Waypoint {
    pub pos: Vec2,
    pub junction: bool,
}

/// Oriented rectangular obstacle (a parked-vehicle analog).
#[derive(Debug, Clone, Copy)]
pub struct Obstacle {
    pub center: Vec2,
    /// Half extent along its axis.
    pub half_len: f64,
    pub half_wid: f64,
    pub angle: f64,
}

impl Obstacle {
    /// True if `p` lies inside the rectangle inflated by `margin`.
    pub fn contains(&self, p: Vec2, margin: f64) -> bool {
        let rel = p - self.center;
        let c = self.angle.cos();
        let s = self.angle.sin();
        let lx = rel.x * c + rel.y * s;
        let ly = -rel.x * s + rel.y * c;
        lx.abs() <= self.half_len + margin && ly.abs() <= self.half_wid + margin
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let c = self.angle.cos();
        let s = self.angle.sin();
        let axis = Vec2::new(c, s).scale(self.half_len);
        let side = Vec2::new(-s, c).scale(self.half_wid);
        [
            self.center + axis + side,
            self.center + axis - side,
            self.center - axis - side,
            self.center - axis + side,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct TrackMap {
    pub town_seed: u64,
    pub lane_width: f64,
    pub nodes: Vec<Node>,
    pub segments: Vec<Segment>,
    pub waypoints: Vec<Waypoint>,
    /// Directed adjacency over waypoints (both directions of every road).
    pub wp_adj: Vec<Vec<usize>>,
    pub obstacles: Vec<Obstacle>,
}

impl TrackMap {
    pub fn node_pos(&self, i: usize) -> Vec2 {
        self.nodes[i].pos
    }

    /// Distance from `p` to the nearest road centerline.
    pub fn distance_to_road(&self, p: Vec2) -> f64 {
        let mut best = f64::INFINITY;
        for seg in &self.segments {
            let (d, _) = point_segment_distance(p, self.nodes[seg.a].pos, self.nodes[seg.b].pos);
            best = best.min(d);
        }
        best
    }

    pub fn collides(&self, p: Vec2, margin: f64) -> bool {
        self.obstacles.iter().any(|o| o.contains(p, margin))
    }

    /// Re-place obstacles deterministically from an extra seed, keeping the
    /// road network identical. Evaluation seeds use this to vary the scene.
    pub fn with_obstacle_seed(&self, obstacle_seed: u64) -> TrackMap {
        let mut out = self.clone();
        let mut rng = stream_indexed(self.town_seed, "obstacles", obstacle_seed);
        out.obstacles = place_obstacles(&out.nodes, &out.segments, out.obstacles.len(), out.lane_width, &mut rng);
        out
    }

    /// Strong connectivity of the directed waypoint graph (forward and
    /// reverse reachability from waypoint 0).
    pub fn strongly_connected(&self) -> bool {
        let n = self.waypoints.len();
        if n == 0 {
            return false;
        }
        // forward
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut cnt = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.wp_adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    cnt += 1;
                    stack.push(v);
                }
            }
        }
        if cnt != n {
            return false;
        }
        // reverse
        let mut radj = vec![Vec::new(); n];
        for (u, outs) in self.wp_adj.iter().enumerate() {
            for &v in outs {
                radj[v].push(u);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut cnt = 1;
        while let Some(u) = stack.pop() {
            for &v in &radj[u] {
                if !seen[v] {
                    seen[v] = true;
                    cnt += 1;
                    stack.push(v);
                }
            }
        }
        cnt == n
    }
}

fn place_obstacles(
    nodes: &[Node],
    segments: &[Segment],
    count: usize,
    lane_width: f64,
    rng: &mut Rng,
) -> Vec<Obstacle> {
    let mut out = Vec::with_capacity(count);
    if segments.is_empty() {
        return out;
    }
    let half_len = 1.3;
    let half_wid = 0.6;
    let mut attempts = 0;
    while out.len() < count && attempts < count * 30 {
        attempts += 1;
        let seg = segments[rng.gen_range(0..segments.len())];
        let a = nodes[seg.a].pos;
        let b = nodes[seg.b].pos;
        let len = a.dist(b);
        if len < 2.0 * JUNCTION_CLEARANCE + 4.0 {
            continue;
        }
        let t = rng.gen_range(JUNCTION_CLEARANCE / len..1.0 - JUNCTION_CLEARANCE / len);
        let along = (b - a).normalized();
        let normal = Vec2::new(-along.y, along.x);
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        // Keep the driving corridor clear: the inner face stays at least
        // 0.3 m outside the lane edge.
        let offset = lane_width / 2.0 + 0.3 + half_wid + rng.gen_range(0.0..0.6);
        let center = a + (b - a).scale(t) + normal.scale(side * offset);
        out.push(Obstacle {
            center,
            half_len,
            half_wid,
            angle: along.angle(),
        });
    }
    out
}

/// Deterministic procedural town for a seed. Train seeds {1,3,4,6} and test
/// seeds {2,5} mirror the benchmark's town split by index.
pub fn generate_town(seed: u64, size: &TownSizeParams) -> Result<TrackMap> {
    size.validate()?;
    for attempt in 0..20u64 {
        let mut rng = stream_indexed(seed, "town", attempt);
        if let Some(map) = try_generate(seed, size, &mut rng) {
            return Ok(map);
        }
    }
    Err(Error::msg(format!(
        "town generation failed to produce a usable network for seed {seed}"
    )))
}

fn try_generate(seed: u64, size: &TownSizeParams, rng: &mut Rng) -> Option<TrackMap> {
    let (cols, rows) = (size.cols, size.rows);
    let idx = |c: usize, r: usize| r * cols + c;
    let n_grid = cols * rows;

    let mut positions = Vec::with_capacity(n_grid);
    for r in 0..rows {
        for c in 0..cols {
            let jitter = 0.12 * size.cell_m;
            positions.push(Vec2::new(
                c as f64 * size.cell_m + rng.gen_range(-jitter..jitter),
                r as f64 * size.cell_m + rng.gen_range(-jitter..jitter),
            ));
        }
    }

    // Grid adjacency.
    let mut grid_edges: Vec<(usize, usize)> = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                grid_edges.push((idx(c, r), idx(c + 1, r)));
            }
            if r + 1 < rows {
                grid_edges.push((idx(c, r), idx(c, r + 1)));
            }
        }
    }

    // Randomized spanning tree (DFS order), then extra edges for junctions.
    let mut neighbors = vec![Vec::new(); n_grid];
    for &(a, b) in &grid_edges {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    let mut in_tree = vec![false; n_grid];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut stack = vec![rng.gen_range(0..n_grid)];
    in_tree[stack[0]] = true;
    while let Some(&top) = stack.last() {
        let mut nb = neighbors[top].clone();
        nb.shuffle(rng);
        let next = nb.into_iter().find(|&v| !in_tree[v]);
        match next {
            Some(v) => {
                in_tree[v] = true;
                edges.push((top.min(v), top.max(v)));
                stack.push(v);
            }
            None => {
                stack.pop();
            }
        }
    }
    for &(a, b) in &grid_edges {
        let key = (a.min(b), a.max(b));
        if !edges.contains(&key) && rng.gen_bool(size.extra_edge_prob) {
            edges.push(key);
        }
    }

    // Prune dead ends iteratively.
    loop {
        let mut degree = vec![0usize; n_grid];
        for &(a, b) in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let before = edges.len();
        edges.retain(|&(a, b)| degree[a] > 1 && degree[b] > 1);
        if edges.len() == before {
            break;
        }
    }
    if edges.len() < 6 {
        return None;
    }

    // Compact node indices to used nodes only.
    let mut used: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    used.sort_unstable();
    used.dedup();
    if used.len() < 6 {
        return None;
    }
    let remap: std::collections::HashMap<usize, usize> =
        used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let mut nodes: Vec<Node> = used
        .iter()
        .map(|&old| Node {
            pos: positions[old],
            degree: 0,
        })
        .collect();
    let segments: Vec<Segment> = edges
        .iter()
        .map(|&(a, b)| Segment {
            a: remap[&a],
            b: remap[&b],
        })
        .collect();
    for seg in &segments {
        nodes[seg.a].degree += 1;
        nodes[seg.b].degree += 1;
    }
    if !nodes.iter().any(|n| n.degree >= 3) {
        return None;
    }

    // Densify into a waypoint graph: nodes first, then interior points per
    // segment, linked in both directions.
    let mut waypoints: Vec<Waypoint> = nodes
        .iter()
        .map(|n| Waypoint {
            pos: n.pos,
            junction: n.degree >= 3,
        })
        .collect();
    let mut wp_adj: Vec<Vec<usize>> = vec![Vec::new(); waypoints.len()];
    for seg in &segments {
        let a = nodes[seg.a].pos;
        let b = nodes[seg.b].pos;
        let len = a.dist(b);
        let n_interior = (len / WAYPOINT_SPACING).ceil() as usize - 1;
        let mut chain = vec![seg.a];
        for i in 1..=n_interior {
            let t = i as f64 / (n_interior + 1) as f64;
            waypoints.push(Waypoint {
                pos: a + (b - a).scale(t),
                junction: false,
            });
            wp_adj.push(Vec::new());
            chain.push(waypoints.len() - 1);
        }
        chain.push(seg.b);
        for w in chain.windows(2) {
            wp_adj[w[0]].push(w[1]);
            wp_adj[w[1]].push(w[0]);
        }
    }

    let obstacles = place_obstacles(&nodes, &segments, size.n_obstacles, LANE_WIDTH, rng);

    let map = TrackMap {
        town_seed: seed,
        lane_width: LANE_WIDTH,
        nodes,
        segments,
        waypoints,
        wp_adj,
        obstacles,
    };
    if !map.strongly_connected() {
        return None;
    }
    Some(map)
}
