//! Camera-calibrated frame graphs and shortest-path trajectory search.
//!
//! Every frame becomes a node located at its camera centre. Two nodes are
//! joined when their centres are closer than the distance threshold and no
//! occupancy point lies inside the cylinder of `corridor_radius` around the
//! segment between them. Trajectories are A* shortest paths with the
//! Euclidean distance between camera centres as heuristic.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CalibratedFrame, Vec3};
use crate::par::{self, Parallelism};

pub const DEFAULT_DISTANCE_THRESHOLD: f64 = 0.5;
pub const DEFAULT_CORRIDOR_RADIUS: f64 = 0.2;
pub const DEFAULT_MIN_HOPS: usize = 3;
/// Upper bound on start-node draws in [`sample_endpoints`].
pub const MAX_SAMPLING_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("a camera graph needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("distance threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("corridor radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("frame index {0} appears more than once")]
    DuplicateFrame(u32),
    #[error("obstruction check needs two distinct endpoints")]
    CoincidentEndpoints,
    #[error("frame {0} is not a node of the graph")]
    UnknownNode(u32),
    #[error("no path from frame {start} to frame {goal}")]
    NoPath { start: u32, goal: u32 },
    #[error("no endpoint pair at least {min_hops} hops apart found after {attempts} attempts")]
    NoQualifyingPair { min_hops: usize, attempts: usize },
    #[error("the graph has no nodes")]
    EmptyGraph,
    #[error("occupancy point {0} has non-finite coordinates")]
    NonFinitePoint(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// World-frame points that may block the straight path between cameras.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OccupancyCloud {
    points: Vec<Vec3>,
    tags: Option<Vec<String>>,
}

impl OccupancyCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(GraphError::NonFinitePoint(i));
        }
        Ok(Self { points, tags: None })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn tags(&self) -> Option<&[String]> {
        self.tags.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reads `x y z [tag]` lines; blank lines and `#` comments are skipped.
    /// Tags are kept only when every point carries one.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut points = Vec::new();
        let mut tags = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| GraphError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut fields = body.split_whitespace();
            let mut coords = [0.0; 3];
            for c in coords.iter_mut() {
                let tok = fields.next().ok_or_else(|| GraphError::Parse {
                    line: line_no,
                    message: "expected three coordinates".into(),
                })?;
                *c = tok.parse().map_err(|_| GraphError::Parse {
                    line: line_no,
                    message: format!("invalid coordinate {tok:?}"),
                })?;
            }
            let tag: Vec<&str> = fields.collect();
            if !tag.is_empty() {
                tags.push(tag.join(" "));
            }
            points.push(Vec3::new(coords[0], coords[1], coords[2]));
        }
        let mut cloud = Self::new(points)?;
        if !tags.is_empty() && tags.len() == cloud.points.len() {
            cloud.tags = Some(tags);
        }
        Ok(cloud)
    }
}

fn point_blocks(p: &Vec3, a: &Vec3, ab: &Vec3, len_sq: f64, radius_sq: f64) -> bool {
    let ap = p - a;
    let s = ap.dot(ab) / len_sq;
    if !(0.0..=1.0).contains(&s) {
        return false;
    }
    (ap - ab * s).norm_squared() <= radius_sq
}

/// `true` when no cloud point lies inside the finite cylinder of `radius`
/// around segment `a`–`b` (no end caps beyond the segment).
pub fn obstruction_check(a: &Vec3, b: &Vec3, cloud: &OccupancyCloud, radius: f64) -> Result<bool> {
    obstruction_check_with(a, b, cloud, radius, Parallelism::Sequential)
}

pub fn obstruction_check_with(
    a: &Vec3,
    b: &Vec3,
    cloud: &OccupancyCloud,
    radius: f64,
    mode: Parallelism,
) -> Result<bool> {
    if a == b {
        return Err(GraphError::CoincidentEndpoints);
    }
    if !(radius > 0.0) {
        return Err(GraphError::BadRadius(radius));
    }
    let ab = b - a;
    let len_sq = ab.norm_squared();
    let radius_sq = radius * radius;
    let lo = a.inf(b).add_scalar(-radius);
    let hi = a.sup(b).add_scalar(radius);
    let blocked = par::any(&cloud.points, mode, |p| {
        (0..3).all(|k| p[k] >= lo[k] && p[k] <= hi[k]) && point_blocks(p, a, &ab, len_sq, radius_sq)
    });
    Ok(!blocked)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphNode {
    pub frame_index: u32,
    pub center: Vec3,
}

/// Undirected frame graph, immutable once built.
#[derive(Debug, Clone)]
pub struct CameraGraph {
    nodes: Vec<GraphNode>,
    position: HashMap<u32, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
    edges: Vec<Edge>,
    distance_threshold: f64,
    corridor_radius: f64,
}

impl CameraGraph {
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    /// Edges with `a < b`, sorted by `(a, b)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn distance_threshold(&self) -> f64 {
        self.distance_threshold
    }

    pub fn corridor_radius(&self) -> f64 {
        self.corridor_radius
    }

    pub fn contains(&self, frame_index: u32) -> bool {
        self.position.contains_key(&frame_index)
    }

    pub fn center(&self, frame_index: u32) -> Option<Vec3> {
        self.position.get(&frame_index).map(|&i| self.nodes[i].center)
    }

    /// Neighbours of a node as `(frame_index, weight)` pairs.
    pub fn neighbors(&self, frame_index: u32) -> Vec<(u32, f64)> {
        self.position
            .get(&frame_index)
            .map(|&i| {
                self.adjacency[i]
                    .iter()
                    .map(|&(j, w)| (self.nodes[j].frame_index, w))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn edge_weight(&self, a: u32, b: u32) -> Option<f64> {
        let i = *self.position.get(&a)?;
        let j = *self.position.get(&b)?;
        self.adjacency[i].iter().find(|(n, _)| *n == j).map(|&(_, w)| w)
    }

    fn locate(&self, frame_index: u32) -> Result<usize> {
        self.position
            .get(&frame_index)
            .copied()
            .ok_or(GraphError::UnknownNode(frame_index))
    }

    /// Hop counts from `start` (by position); `None` for unreachable nodes.
    fn hop_counts(&self, start: usize) -> Vec<Option<usize>> {
        let mut hops = vec![None; self.nodes.len()];
        hops[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let h = hops[u].unwrap_or(0);
            for &(v, _) in &self.adjacency[u] {
                if hops[v].is_none() {
                    hops[v] = Some(h + 1);
                    queue.push_back(v);
                }
            }
        }
        hops
    }

    /// Writes `nodes <count>` followed by one `a b weight` line per edge,
    /// weights in 17 significant digits.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "nodes {}", self.nodes.len())?;
        for e in &self.edges {
            writeln!(w, "{} {} {:.16e}", e.a, e.b, e.weight)?;
        }
        Ok(())
    }
}

/// Parses the edge-list export back into `(node_count, edges)`.
pub fn read_edge_list<R: BufRead>(reader: R) -> Result<(usize, Vec<Edge>)> {
    let mut lines = reader.lines().enumerate();
    let parse_err = |line: usize, message: &str| GraphError::Parse {
        line,
        message: message.to_string(),
    };
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let header = header.map_err(|e| parse_err(1, &e.to_string()))?;
    let count = header
        .strip_prefix("nodes ")
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| parse_err(1, "expected `nodes <count>`"))?;
    let mut edges = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| parse_err(i + 1, &e.to_string()))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(i + 1, "expected `a b weight`"));
        }
        let bad = || parse_err(i + 1, "malformed edge");
        edges.push(Edge {
            a: f[0].parse().map_err(|_| bad())?,
            b: f[1].parse().map_err(|_| bad())?,
            weight: f[2].parse().map_err(|_| bad())?,
        });
    }
    Ok((count, edges))
}

pub fn build_graph(
    frames: &[CalibratedFrame],
    cloud: &OccupancyCloud,
    distance_threshold: f64,
    corridor_radius: f64,
) -> Result<CameraGraph> {
    build_graph_with(frames, cloud, distance_threshold, corridor_radius, Parallelism::default())
}

/// Candidate pairs are evaluated concurrently per source node; edges are
/// assembled in frame-index order so the graph never depends on scheduling.
/// Frames whose centres coincide are joined by a zero-weight edge, since
/// there is no segment for anything to obstruct.
pub fn build_graph_with(
    frames: &[CalibratedFrame],
    cloud: &OccupancyCloud,
    distance_threshold: f64,
    corridor_radius: f64,
    mode: Parallelism,
) -> Result<CameraGraph> {
    if frames.len() < 2 {
        return Err(GraphError::TooFewFrames(frames.len()));
    }
    if !(distance_threshold > 0.0 && distance_threshold.is_finite()) {
        return Err(GraphError::BadThreshold(distance_threshold));
    }
    if !(corridor_radius > 0.0 && corridor_radius.is_finite()) {
        return Err(GraphError::BadRadius(corridor_radius));
    }
    let mut position = HashMap::with_capacity(frames.len());
    let nodes: Vec<GraphNode> = frames
        .iter()
        .map(|f| GraphNode {
            frame_index: f.frame_index,
            center: f.camera_center(),
        })
        .collect();
    for (i, n) in nodes.iter().enumerate() {
        if position.insert(n.frame_index, i).is_some() {
            return Err(GraphError::DuplicateFrame(n.frame_index));
        }
    }

    let rows = par::try_map_range(nodes.len(), mode, |i| {
        let a = &nodes[i].center;
        let mut row = Vec::new();
        for (j, other) in nodes.iter().enumerate().skip(i + 1) {
            let b = &other.center;
            let d = (b - a).norm();
            if d >= distance_threshold {
                continue;
            }
            if d == 0.0 || obstruction_check(a, b, cloud, corridor_radius)? {
                row.push((j, d));
            }
        }
        Ok::<_, GraphError>(row)
    })?;

    let mut adjacency = vec![Vec::new(); nodes.len()];
    let mut edges = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        for (j, w) in row {
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
            let (fa, fb) = (nodes[i].frame_index, nodes[j].frame_index);
            edges.push(Edge {
                a: fa.min(fb),
                b: fa.max(fb),
                weight: w,
            });
        }
    }
    edges.sort_by_key(|e| (e.a, e.b));
    for list in &mut adjacency {
        list.sort_by_key(|&(j, _)| nodes[j].frame_index);
    }
    Ok(CameraGraph {
        nodes,
        position,
        adjacency,
        edges,
        distance_threshold,
        corridor_radius,
    })
}

/// Frame-index path and its total length in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub nodes: Vec<u32>,
    pub cost: f64,
}

impl Trajectory {
    /// Checks adjacency of consecutive nodes and the stored cost.
    pub fn is_consistent_with(&self, graph: &CameraGraph) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut total = 0.0;
        for pair in self.nodes.windows(2) {
            match graph.edge_weight(pair[0], pair[1]) {
                Some(w) => total += w,
                None => return false,
            }
        }
        self.nodes.iter().all(|&n| graph.contains(n)) && (total - self.cost).abs() <= 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OpenEntry {
    f: f64,
    g: f64,
    frame_index: u32,
    node: usize,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // BinaryHeap pops the maximum: lowest f first, then lowest frame index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.frame_index.cmp(&self.frame_index))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-length path from `start` to `goal`.
///
/// Nodes may be re-expanded when a cheaper route is found later, so the
/// result stays optimal even if rounding makes the heuristic marginally
/// inconsistent.
pub fn astar(graph: &CameraGraph, start: u32, goal: u32) -> Result<Trajectory> {
    let s = graph.locate(start)?;
    let t = graph.locate(goal)?;
    let target = graph.nodes[t].center;
    let h = |i: usize| (graph.nodes[i].center - target).norm();

    let n = graph.nodes.len();
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut open = BinaryHeap::new();
    best[s] = 0.0;
    open.push(OpenEntry {
        f: h(s),
        g: 0.0,
        frame_index: start,
        node: s,
    });

    while let Some(OpenEntry { g, node, .. }) = open.pop() {
        if g > best[node] {
            continue;
        }
        if node == t {
            let mut nodes = vec![graph.nodes[t].frame_index];
            let mut cur = t;
            while cur != s {
                cur = parent[cur];
                nodes.push(graph.nodes[cur].frame_index);
            }
            nodes.reverse();
            return Ok(Trajectory { nodes, cost: g });
        }
        for &(next, w) in &graph.adjacency[node] {
            let candidate = g + w;
            if candidate < best[next] {
                best[next] = candidate;
                parent[next] = node;
                open.push(OpenEntry {
                    f: candidate + h(next),
                    g: candidate,
                    frame_index: graph.nodes[next].frame_index,
                    node: next,
                });
            }
        }
    }
    Err(GraphError::NoPath { start, goal })
}

/// Seeded choice of a `(start, goal)` pair at least `min_hops` edges apart.
///
/// Each attempt draws a start node, runs a BFS and picks the goal uniformly
/// among qualifying nodes; attempts are capped at
/// [`MAX_SAMPLING_ATTEMPTS`]. The pair is returned in ascending frame
/// order, and with `min_hops == 0` may be a single node twice.
pub fn sample_endpoints(graph: &CameraGraph, seed: u64, min_hops: usize) -> Result<(u32, u32)> {
    if graph.nodes.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: HashMap<usize, Vec<usize>> = HashMap::new();
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        let start = rng.random_range(0..graph.nodes.len());
        let candidates = cache.entry(start).or_insert_with(|| {
            graph
                .hop_counts(start)
                .iter()
                .enumerate()
                .filter_map(|(i, h)| h.filter(|&h| h >= min_hops).map(|_| i))
                .collect()
        });
        if candidates.is_empty() {
            continue;
        }
        let goal = candidates[rng.random_range(0..candidates.len())];
        let (a, b) = (graph.nodes[start].frame_index, graph.nodes[goal].frame_index);
        return Ok((a.min(b), a.max(b)));
    }
    Err(GraphError::NoQualifyingPair {
        min_hops,
        attempts: MAX_SAMPLING_ATTEMPTS,
    })
}
