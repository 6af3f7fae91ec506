//! Point-mass maze with zero-thickness axis-aligned walls.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Source, Trajectory, TrajectoryDataset, DEFAULT_VALIDATION_FRACTION};
use crate::error::{Error, Result};
use crate::tensor::Vector;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect {
            min: [x0.min(x1), y0.min(y1)],
            max: [x0.max(x1), y0.max(y1)],
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    /// Strict interior test.
    pub fn contains_strict(&self, p: &[f64]) -> bool {
        p[0] > self.min[0] && p[0] < self.max[0] && p[1] > self.min[1] && p[1] < self.max[1]
    }

    pub fn inside(&self, other: &Rect) -> bool {
        other.contains(&self.min) && other.contains(&self.max)
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.min[0] + self.max[0]), 0.5 * (self.min[1] + self.max[1])]
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        [
            self.min[0] + (self.max[0] - self.min[0]) * rng.gen::<f64>(),
            self.min[1] + (self.max[1] - self.min[1]) * rng.gen::<f64>(),
        ]
    }

    fn shrink(&self, margin: f64) -> Rect {
        Rect::new(
            self.min[0] + margin,
            self.min[1] + margin,
            self.max[0] - margin,
            self.max[1] - margin,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

fn orient(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
}

fn on_segment(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> bool {
    r[0] >= p[0].min(q[0]) - EPS
        && r[0] <= p[0].max(q[0]) + EPS
        && r[1] >= p[1].min(q[1]) - EPS
        && r[1] <= p[1].max(q[1]) + EPS
}

impl Segment {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Self {
        Segment { a, b }
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.a[0] == self.b[0] || self.a[1] == self.b[1]
    }

    /// Closed-segment intersection; touching counts.
    pub fn intersects(&self, other: &Segment) -> bool {
        let (p1, q1, p2, q2) = (self.a, self.b, other.a, other.b);
        let d1 = orient(p2, q2, p1);
        let d2 = orient(p2, q2, q1);
        let d3 = orient(p1, q1, p2);
        let d4 = orient(p1, q1, q2);
        if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS)) && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS)) {
            return true;
        }
        (d1.abs() <= EPS && on_segment(p2, q2, p1))
            || (d2.abs() <= EPS && on_segment(p2, q2, q1))
            || (d3.abs() <= EPS && on_segment(p1, q1, p2))
            || (d4.abs() <= EPS && on_segment(p1, q1, q2))
    }

    pub fn distance_to_point(&self, p: &[f64]) -> f64 {
        let (dx, dy) = (self.b[0] - self.a[0], self.b[1] - self.a[1]);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p[0] - self.a[0]) * dx + (p[1] - self.a[1]) * dy) / len2).clamp(0.0, 1.0)
        };
        let (cx, cy) = (self.a[0] + t * dx, self.a[1] + t * dy);
        ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
    }

    /// Minimum distance between two segments.
    pub fn distance(&self, other: &Segment) -> f64 {
        if self.intersects(other) {
            return 0.0;
        }
        self.distance_to_point(&other.a)
            .min(self.distance_to_point(&other.b))
            .min(other.distance_to_point(&self.a))
            .min(other.distance_to_point(&self.b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyTier {
    Near,
    Medium,
    Far,
}

impl DifficultyTier {
    pub const ALL: [DifficultyTier; 3] = [DifficultyTier::Near, DifficultyTier::Medium, DifficultyTier::Far];
}

impl fmt::Display for DifficultyTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DifficultyTier::Near => "near",
            DifficultyTier::Medium => "medium",
            DifficultyTier::Far => "far",
        })
    }
}

impl FromStr for DifficultyTier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "near" => Ok(DifficultyTier::Near),
            "medium" => Ok(DifficultyTier::Medium),
            "far" => Ok(DifficultyTier::Far),
            other => Err(Error::InvalidArgument(format!("unknown difficulty tier `{other}`"))),
        }
    }
}

/// Maze layout. Walls lie on the grid lines of a square cell partition of
/// `bounds`; the bounds themselves are impassable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeSpec {
    pub walls: Vec<Segment>,
    pub bounds: Rect,
    pub cell_size: f64,
    pub start_region: Rect,
    pub goal_regions: Vec<Rect>,
    /// Pocket enclosed on three sides; used to label the hardest goals.
    pub trap: Option<Rect>,
}

/// Generator knobs for [`gen_maze`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MazeGenParams {
    pub num_traj: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub step: f64,
    pub noise_std: f64,
    pub validation_fraction: f64,
}

impl Default for MazeGenParams {
    fn default() -> Self {
        MazeGenParams {
            num_traj: 300,
            min_len: 50,
            max_len: 300,
            step: 0.1,
            noise_std: 0.03,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
        }
    }
}

/// Clearance kept from walls when pulling the path string taut.
const SIGHT_CLEARANCE: f64 = 0.2;
const TARGET_TOLERANCE: f64 = 0.15;
const MAX_GOAL_RETRIES: usize = 64;

impl MazeSpec {
    /// 5x5 unit cells over `[0, 5]^2` with a U-shaped wall open at the top.
    /// Trajectories start inside the U and first head for a cell below it.
    pub fn default_u_maze() -> Self {
        MazeSpec {
            walls: vec![
                Segment::new([1.0, 1.0], [1.0, 4.0]),
                Segment::new([4.0, 1.0], [4.0, 4.0]),
                Segment::new([1.0, 1.0], [4.0, 1.0]),
            ],
            bounds: Rect::new(0.0, 0.0, 5.0, 5.0),
            cell_size: 1.0,
            start_region: Rect::new(2.0, 2.0, 3.0, 3.0),
            goal_regions: vec![
                Rect::new(0.0, 0.0, 1.0, 1.0),
                Rect::new(2.0, 0.0, 3.0, 1.0),
                Rect::new(4.0, 0.0, 5.0, 1.0),
            ],
            trap: Some(Rect::new(1.0, 1.0, 4.0, 4.0)),
        }
    }

    /// Same geometry with no walls.
    pub fn open(size: f64) -> Self {
        MazeSpec {
            walls: Vec::new(),
            bounds: Rect::new(0.0, 0.0, size, size),
            cell_size: 1.0,
            start_region: Rect::new(0.0, 0.0, 1.0, 1.0),
            goal_regions: vec![Rect::new(size - 1.0, size - 1.0, size, size)],
            trap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.bounds.max[0] - self.bounds.min[0], self.bounds.max[1] - self.bounds.min[1]);
        if !(self.cell_size > 0.0) || w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidArgument("maze bounds and cell size must be positive".into()));
        }
        let (nx, ny) = (w / self.cell_size, h / self.cell_size);
        if (nx - nx.round()).abs() > 1e-9 || (ny - ny.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument("maze bounds must be a whole number of cells".into()));
        }
        for wall in &self.walls {
            if !wall.is_axis_aligned() {
                return Err(Error::InvalidArgument(format!("wall {wall:?} is not axis-aligned")));
            }
        }
        for r in std::iter::once(&self.start_region).chain(&self.goal_regions) {
            if !r.inside(&self.bounds) {
                return Err(Error::InvalidArgument(format!("region {r:?} leaves the maze bounds")));
            }
            let cut = self.walls.iter().any(|wall| {
                let mid = [(wall.a[0] + wall.b[0]) / 2.0, (wall.a[1] + wall.b[1]) / 2.0];
                r.contains_strict(&wall.a) || r.contains_strict(&wall.b) || r.contains_strict(&mid) || {
                    let edges = rect_edges(&r.shrink(1e-9));
                    edges.iter().any(|e| e.intersects(wall))
                }
            });
            if cut {
                return Err(Error::InvalidArgument(format!("region {r:?} overlaps a wall")));
            }
        }
        if self.goal_regions.is_empty() {
            return Err(Error::InvalidArgument("maze needs at least one goal region".into()));
        }
        Ok(())
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        let nx = ((self.bounds.max[0] - self.bounds.min[0]) / self.cell_size).round() as usize;
        let ny = ((self.bounds.max[1] - self.bounds.min[1]) / self.cell_size).round() as usize;
        (nx, ny)
    }

    fn cell_of(&self, p: &[f64]) -> (usize, usize) {
        let (nx, ny) = self.grid_shape();
        let i = ((p[0] - self.bounds.min[0]) / self.cell_size).floor().clamp(0.0, (nx - 1) as f64) as usize;
        let j = ((p[1] - self.bounds.min[1]) / self.cell_size).floor().clamp(0.0, (ny - 1) as f64) as usize;
        (i, j)
    }

    fn cell_center(&self, (i, j): (usize, usize)) -> [f64; 2] {
        [
            self.bounds.min[0] + (i as f64 + 0.5) * self.cell_size,
            self.bounds.min[1] + (j as f64 + 0.5) * self.cell_size,
        ]
    }

    fn edge_blocked(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        // shared edge between two 4-adjacent cells, shrunk so that walls
        // merely touching a corner do not block
        let (ca, cb) = (self.cell_center(a), self.cell_center(b));
        let mid = [(ca[0] + cb[0]) / 2.0, (ca[1] + cb[1]) / 2.0];
        let h = 0.5 * self.cell_size - 1e-6;
        let edge = if a.0 != b.0 {
            Segment::new([mid[0], mid[1] - h], [mid[0], mid[1] + h])
        } else {
            Segment::new([mid[0] - h, mid[1]], [mid[0] + h, mid[1]])
        };
        self.walls.iter().any(|w| {
            // collinear overlap with positive length
            w.intersects(&edge) && (w.a[0] == w.b[0]) == (edge.a[0] == edge.b[0])
        })
    }

    fn neighbors(&self, c: (usize, usize)) -> Vec<(usize, usize)> {
        let (nx, ny) = self.grid_shape();
        let mut out = Vec::with_capacity(4);
        if c.0 > 0 {
            out.push((c.0 - 1, c.1));
        }
        if c.0 + 1 < nx {
            out.push((c.0 + 1, c.1));
        }
        if c.1 > 0 {
            out.push((c.0, c.1 - 1));
        }
        if c.1 + 1 < ny {
            out.push((c.0, c.1 + 1));
        }
        out.retain(|&n| !self.edge_blocked(c, n));
        out
    }

    /// Shortest cell path (inclusive of both ends), or `None` if unreachable.
    fn cell_path(&self, from: (usize, usize), to: (usize, usize)) -> Option<Vec<(usize, usize)>> {
        let (nx, ny) = self.grid_shape();
        let idx = |c: (usize, usize)| c.1 * nx + c.0;
        let mut prev = vec![usize::MAX; nx * ny];
        let mut seen = vec![false; nx * ny];
        let mut queue = VecDeque::from([from]);
        seen[idx(from)] = true;
        while let Some(c) = queue.pop_front() {
            if c == to {
                let mut path = vec![c];
                let mut cur = idx(c);
                while cur != idx(from) {
                    cur = prev[cur];
                    path.push((cur % nx, cur / nx));
                }
                path.reverse();
                return Some(path);
            }
            for n in self.neighbors(c) {
                if !seen[idx(n)] {
                    seen[idx(n)] = true;
                    prev[idx(n)] = idx(c);
                    queue.push_back(n);
                }
            }
        }
        None
    }

    /// True when the straight move `p -> q` touches a wall or leaves the bounds.
    pub fn move_blocked(&self, p: &[f64], q: &[f64]) -> bool {
        if !self.bounds.contains(q) {
            return true;
        }
        let m = Segment::new([p[0], p[1]], [q[0], q[1]]);
        self.walls.iter().any(|w| w.intersects(&m))
    }

    /// Number of walls the segment `p -> q` touches.
    pub fn crossings(&self, p: &[f64], q: &[f64]) -> usize {
        let m = Segment::new([p[0], p[1]], [q[0], q[1]]);
        self.walls.iter().filter(|w| w.intersects(&m)).count()
    }

    fn clear_sight(&self, p: &[f64], q: &[f64], clearance: f64) -> bool {
        let m = Segment::new([p[0], p[1]], [q[0], q[1]]);
        self.walls.iter().all(|w| w.distance(&m) > clearance)
    }

    pub fn in_trap(&self, p: &[f64]) -> bool {
        self.trap.map_or(false, |t| t.contains_strict(p))
    }

    /// near: the straight segment is wall-free; far: it is blocked and one
    /// endpoint sits in the trap; medium: any other blocked pair.
    pub fn tier(&self, start: &[f64], goal: &[f64]) -> DifficultyTier {
        if self.crossings(start, goal) == 0 {
            DifficultyTier::Near
        } else if self.in_trap(start) || self.in_trap(goal) {
            DifficultyTier::Far
        } else {
            DifficultyTier::Medium
        }
    }

    /// Uniform point at least `margin` away from every wall and the bounds.
    pub fn sample_free<R: Rng>(&self, margin: f64, rng: &mut R) -> [f64; 2] {
        let inner = self.bounds.shrink(margin);
        loop {
            let p = inner.sample(rng);
            if self.walls.iter().all(|w| w.distance_to_point(&p) >= margin) {
                return p;
            }
        }
    }
}

fn rect_edges(r: &Rect) -> [Segment; 4] {
    let (a, b, c, d) = (r.min, [r.max[0], r.min[1]], r.max, [r.min[0], r.max[1]]);
    [Segment::new(a, b), Segment::new(b, c), Segment::new(c, d), Segment::new(d, a)]
}

struct Walker<'a> {
    spec: &'a MazeSpec,
    step: f64,
    noise: Option<Normal<f64>>,
}

impl Walker<'_> {
    /// Appends observations while walking along `cells` until the path ends
    /// or `out` reaches `len`.
    fn follow<R: Rng>(&self, pos: &mut [f64; 2], cells: &[(usize, usize)], len: usize, out: &mut Vec<Vector>, rng: &mut R) {
        let centers: Vec<[f64; 2]> = cells.iter().map(|&c| self.spec.cell_center(c)).collect();
        let mut k = 0;
        while out.len() < len {
            // advance past reached centers, then pull the string taut
            while k < centers.len() && dist(pos, &centers[k]) < TARGET_TOLERANCE {
                k += 1;
            }
            if k >= centers.len() {
                return;
            }
            let mut target = k;
            for j in (k + 1..centers.len()).rev() {
                if self.spec.clear_sight(pos, &centers[j], SIGHT_CLEARANCE) {
                    target = j;
                    break;
                }
            }
            let goal = centers[target];
            let d = dist(pos, &goal);
            let s = self.step.min(d);
            let dir = [(goal[0] - pos[0]) / d, (goal[1] - pos[1]) / d];
            let mut next = [pos[0] + s * dir[0], pos[1] + s * dir[1]];
            if let Some(noise) = &self.noise {
                for _ in 0..16 {
                    let cand = [next[0] + noise.sample(rng), next[1] + noise.sample(rng)];
                    if !self.spec.move_blocked(pos, &cand) {
                        next = cand;
                        break;
                    }
                }
            }
            if !self.spec.move_blocked(pos, &next) {
                *pos = next;
            }
            out.push(Vector::new(pos.to_vec()));
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Waypoint-directed random walks. Each trajectory starts in the start
/// region, heads for a random goal region, then keeps walking to random
/// cells until it reaches its sampled length.
pub fn gen_maze(spec: &MazeSpec, params: &MazeGenParams, seed: u64) -> Result<TrajectoryDataset> {
    spec.validate()?;
    if params.num_traj < 1 || params.min_len < 2 || params.max_len < params.min_len {
        return Err(Error::InvalidArgument(format!(
            "maze generation needs num_traj >= 1 and 2 <= min_len <= max_len, got {}, {}, {}",
            params.num_traj, params.min_len, params.max_len
        )));
    }
    if !(params.step > 0.0 && params.noise_std >= 0.0) {
        return Err(Error::InvalidArgument("maze step must be positive and noise nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let walker = Walker {
        spec,
        step: params.step,
        noise: (params.noise_std > 0.0)
            .then(|| Normal::new(0.0, params.noise_std))
            .transpose()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?,
    };
    let (nx, ny) = spec.grid_shape();
    let margin = 0.05 * spec.cell_size;
    let mut trajectories = Vec::with_capacity(params.num_traj);
    for id in 0..params.num_traj {
        let len = rng.gen_range(params.min_len..=params.max_len);
        let mut pos = spec.start_region.shrink(margin).sample(&mut rng);
        let start_cell = spec.cell_of(&pos);
        let mut first = None;
        for _ in 0..MAX_GOAL_RETRIES {
            let region = &spec.goal_regions[rng.gen_range(0..spec.goal_regions.len())];
            let goal = region.shrink(margin).sample(&mut rng);
            if let Some(path) = spec.cell_path(start_cell, spec.cell_of(&goal)) {
                first = Some(path);
                break;
            }
        }
        let first = first.ok_or_else(|| Error::Generation(format!("no reachable goal region from {pos:?}")))?;
        let mut obs = vec![Vector::new(pos.to_vec())];
        walker.follow(&mut pos, &first, len, &mut obs, &mut rng);
        let mut stalls = 0;
        while obs.len() < len {
            let target = (rng.gen_range(0..nx), rng.gen_range(0..ny));
            let before = obs.len();
            if let Some(path) = spec.cell_path(spec.cell_of(&pos), target) {
                walker.follow(&mut pos, &path, len, &mut obs, &mut rng);
            }
            if obs.len() == before {
                stalls += 1;
                if stalls > MAX_GOAL_RETRIES {
                    return Err(Error::Generation(format!("walker stuck at {pos:?}")));
                }
            }
        }
        trajectories.push(Trajectory {
            id: id as u64,
            observations: obs,
        });
    }
    TrajectoryDataset::new(trajectories, Source::Maze, params.validation_fraction, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(num_traj: usize) -> MazeGenParams {
        MazeGenParams {
            num_traj,
            ..MazeGenParams::default()
        }
    }

    #[test]
    fn segment_intersection_cases() {
        let w = Segment::new([1.0, 0.0], [1.0, 2.0]);
        assert!(w.intersects(&Segment::new([0.0, 1.0], [2.0, 1.0])));
        assert!(!w.intersects(&Segment::new([0.0, 1.0], [0.9, 1.0])));
        // touching an endpoint counts
        assert!(w.intersects(&Segment::new([0.0, 2.0], [2.0, 2.0])));
        assert!(!w.intersects(&Segment::new([0.0, 2.1], [2.0, 2.1])));
        // collinear overlap
        assert!(w.intersects(&Segment::new([1.0, 1.5], [1.0, 3.0])));
        assert!(!w.intersects(&Segment::new([1.0, 2.5], [1.0, 3.0])));
    }

    #[test]
    fn default_spec_is_valid() {
        let s = MazeSpec::default_u_maze();
        s.validate().unwrap();
        assert_eq!(s.grid_shape(), (5, 5));
        // walls separate the trap from the left column and the row below
        assert!(s.edge_blocked((0, 2), (1, 2)));
        assert!(s.edge_blocked((2, 0), (2, 1)));
        assert!(!s.edge_blocked((2, 3), (2, 4)));
        assert!(!s.edge_blocked((0, 0), (1, 0)));
    }

    #[test]
    fn region_on_a_wall_is_rejected() {
        let mut s = MazeSpec::default_u_maze();
        s.start_region = Rect::new(0.5, 2.0, 1.5, 3.0);
        assert!(s.validate().is_err());
        let mut s = MazeSpec::default_u_maze();
        s.goal_regions.push(Rect::new(4.5, 4.5, 5.5, 5.5));
        assert!(s.validate().is_err());
    }

    #[test]
    fn bfs_goes_around_the_u() {
        let s = MazeSpec::default_u_maze();
        let path = s.cell_path((2, 2), (2, 0)).unwrap();
        // up through the opening, around a side, down and back in
        assert_eq!(path.len(), 11);
        assert!(path.iter().any(|c| c.1 == 4));
    }

    #[test]
    fn unreachable_goal_is_an_error() {
        let mut s = MazeSpec::default_u_maze();
        s.walls.push(Segment::new([1.0, 4.0], [4.0, 4.0]));
        assert!(matches!(gen_maze(&s, &small(2), 0), Err(Error::Generation(_))));
    }

    #[test]
    fn never_crosses_walls_exhaustive() {
        let s = MazeSpec::default_u_maze();
        let ds = gen_maze(&s, &small(60), 3).unwrap();
        for t in &ds.trajectories {
            assert!(t.len() >= 50 && t.len() <= 300);
            assert!(s.in_trap(&t.observations[0]));
            for w in t.observations.windows(2) {
                assert!(!s.move_blocked(&w[0], &w[1]), "{:?} -> {:?}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn trajectories_escape_the_trap() {
        let s = MazeSpec::default_u_maze();
        let ds = gen_maze(&s, &small(40), 4).unwrap();
        let escaped = ds.trajectories.iter().filter(|t| t.observations.iter().any(|o| !s.in_trap(o))).count();
        assert!(escaped >= 30, "{escaped}");
    }

    #[test]
    fn path_longer_than_displacement_around_u() {
        let s = MazeSpec::default_u_maze();
        let ds = gen_maze(&s, &small(30), 5).unwrap();
        for t in &ds.trajectories {
            let path: f64 = t.observations.windows(2).map(|w| dist(&w[0], &w[1])).sum();
            let straight = dist(&t.observations[0], t.observations.last().unwrap());
            assert!(path > straight);
        }
    }

    #[test]
    fn open_maze_stays_in_bounds() {
        let s = MazeSpec::open(5.0);
        let ds = gen_maze(&s, &small(20), 6).unwrap();
        for t in &ds.trajectories {
            for o in &t.observations {
                assert!(s.bounds.contains(o));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let s = MazeSpec::default_u_maze();
        assert_eq!(gen_maze(&s, &small(5), 9).unwrap(), gen_maze(&s, &small(5), 9).unwrap());
    }

    #[test]
    fn tiers() {
        let s = MazeSpec::default_u_maze();
        assert_eq!(s.tier(&[0.5, 0.5], &[4.5, 0.5]), DifficultyTier::Near);
        assert_eq!(s.tier(&[2.5, 2.5], &[2.5, 4.5]), DifficultyTier::Near);
        assert_eq!(s.tier(&[2.5, 2.5], &[2.5, 0.5]), DifficultyTier::Far);
        assert_eq!(s.tier(&[0.5, 2.5], &[4.5, 2.5]), DifficultyTier::Medium);
    }
}
