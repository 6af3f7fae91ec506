//! Waypoint-tracking proportional control in the maze and the success-rate
//! harness comparing planned waypoints against the baselines.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DifficultyTier, MazeSpec, Split, TrajectoryDataset};
use crate::encoder::EncoderPair;
use crate::error::{Error, Result};
use crate::eval::{contrastive_waypoints, fit_baseline_pca, obs_waypoints, pca_waypoints, Banks, Planner};
use crate::tensor::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub gain: f64,
    pub max_step: f64,
    pub waypoint_tolerance: f64,
    pub max_steps: usize,
    pub success_radius: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            gain: 0.5,
            max_step: 0.1,
            waypoint_tolerance: 0.15,
            max_steps: 600,
            success_radius: 0.1,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.gain, self.max_step, self.waypoint_tolerance, self.success_radius];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.max_steps == 0 {
            return Err(Error::InvalidArgument(format!("controller constants must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutRecord {
    pub start: Vector,
    pub goal: Vector,
    /// Every position occupied, starting with `start`.
    pub visited: Vec<Vector>,
    pub waypoints_used: Vec<Vector>,
    pub success: bool,
    pub steps_taken: usize,
    pub difficulty_tier: DifficultyTier,
}

/// Plans `n` waypoints with the exact chain posterior and snaps each mean to
/// the nearest encoded bank observation.
pub fn plan_observation_waypoints(
    enc: &EncoderPair,
    start: &Vector,
    goal: &Vector,
    n: usize,
    bank: &Banks,
) -> Result<Vec<Vector>> {
    contrastive_waypoints(enc, bank, start, goal, n, Planner::Chain)
}

/// Tracks `waypoints` then `goal`. A waypoint is passed once the agent is
/// within the tolerance. Blocked moves slide along the free axis: the full
/// move, then the x part, then the y part, otherwise the agent stays put.
pub fn rollout(env: &MazeSpec, ctrl: &ControllerConfig, waypoints: &[Vector], start: &Vector, goal: &Vector) -> RolloutRecord {
    let mut pos = [start[0], start[1]];
    let targets: Vec<[f64; 2]> = waypoints
        .iter()
        .chain(std::iter::once(goal))
        .map(|v| [v[0], v[1]])
        .collect();
    let g = [goal[0], goal[1]];
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let mut visited = vec![start.clone()];
    let mut current = 0;
    let mut steps = 0;
    let mut success = dist(pos, g) <= ctrl.success_radius;
    while !success && steps < ctrl.max_steps {
        while current + 1 < targets.len() && dist(pos, targets[current]) <= ctrl.waypoint_tolerance {
            current += 1;
        }
        let t = targets[current];
        let mut a = [ctrl.gain * (t[0] - pos[0]), ctrl.gain * (t[1] - pos[1])];
        let norm = a[0].hypot(a[1]);
        if norm > ctrl.max_step {
            a = [a[0] * ctrl.max_step / norm, a[1] * ctrl.max_step / norm];
        }
        let candidates = [[pos[0] + a[0], pos[1] + a[1]], [pos[0] + a[0], pos[1]], [pos[0], pos[1] + a[1]]];
        if let Some(next) = candidates.into_iter().find(|q| !env.move_blocked(&pos, q)) {
            pos = next;
        }
        steps += 1;
        visited.push(Vector::new(pos.to_vec()));
        success = dist(pos, g) <= ctrl.success_radius;
    }
    RolloutRecord {
        start: start.clone(),
        goal: goal.clone(),
        visited,
        waypoints_used: waypoints.to_vec(),
        success,
        steps_taken: steps,
        difficulty_tier: env.tier(start.as_slice(), goal.as_slice()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Planned,
    Direct,
    PcaInterp,
    ObsInterp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Planned, Method::Direct, Method::PcaInterp, Method::ObsInterp];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Planned => "planned",
            Method::Direct => "direct",
            Method::PcaInterp => "pca-interp",
            Method::ObsInterp => "obs-interp",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessCell {
    pub tier: DifficultyTier,
    pub method: Method,
    pub episodes: usize,
    pub successes: usize,
    pub mean_steps: f64,
}

impl SuccessCell {
    pub fn rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessTable {
    pub cells: Vec<SuccessCell>,
    pub records: Vec<(Method, RolloutRecord)>,
}

impl SuccessTable {
    pub fn cell(&self, tier: DifficultyTier, method: Method) -> Option<&SuccessCell> {
        self.cells.iter().find(|c| c.tier == tier && c.method == method)
    }

    pub fn rate(&self, tier: DifficultyTier, method: Method) -> f64 {
        self.cell(tier, method).map_or(0.0, SuccessCell::rate)
    }
}

impl fmt::Display for SuccessTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.cells.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(
                f,
                "tier: {} method: {} episodes: {} successes: {} rate: {:.4} mean_steps: {:.2}",
                c.tier,
                c.method,
                c.episodes,
                c.successes,
                c.rate(),
                c.mean_steps
            )?;
        }
        Ok(())
    }
}

/// Free-space start/goal pairs whose straight segment falls in `tier`.
pub fn sample_tier_pairs(env: &MazeSpec, tier: DifficultyTier, count: usize, margin: f64, seed: u64) -> Result<Vec<(Vector, Vector)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while pairs.len() < count {
        attempts += 1;
        if attempts > 10_000 * count.max(1) {
            return Err(Error::Generation(format!("could not sample {count} {tier} pairs")));
        }
        let (s, g) = (env.sample_free(margin, &mut rng), env.sample_free(margin, &mut rng));
        if (s[0] - g[0]).hypot(s[1] - g[1]) > 2.0 * margin && env.tier(&s, &g) == tier {
            pairs.push((Vector::new(s.to_vec()), Vector::new(g.to_vec())));
        }
    }
    Ok(pairs)
}

/// Clearance kept between sampled start/goal points and the walls.
pub const PAIR_MARGIN: f64 = 0.15;

/// Runs every method on the same `num_episodes` pairs per tier. Waypoints
/// for the interpolating methods are retrieved from the validation split.
pub fn evaluate_success(
    enc: &EncoderPair,
    env: &MazeSpec,
    dataset: &TrajectoryDataset,
    ctrl: &ControllerConfig,
    n_waypoints: usize,
    num_episodes: usize,
    seed: u64,
) -> Result<SuccessTable> {
    ctrl.validate()?;
    if dataset.obs_dim != 2 || enc.input_dim() != 2 {
        return Err(Error::dims("evaluate_success", "2-D maze observations", dataset.obs_dim));
    }
    let banks = Banks::new(enc, dataset, Split::Validation)?;
    let pca = fit_baseline_pca(dataset, enc.repr_dim())?;
    let mut cells = Vec::new();
    let mut records = Vec::new();
    for (ti, tier) in DifficultyTier::ALL.into_iter().enumerate() {
        let pairs = sample_tier_pairs(env, tier, num_episodes, PAIR_MARGIN, seed.wrapping_add(ti as u64))?;
        for method in Method::ALL {
            let (mut successes, mut steps) = (0, 0usize);
            for (s, g) in &pairs {
                let waypoints = match method {
                    Method::Planned => plan_observation_waypoints(enc, s, g, n_waypoints, &banks)?,
                    Method::Direct => Vec::new(),
                    Method::PcaInterp => pca_waypoints(&pca, &banks, s, g, n_waypoints)?,
                    Method::ObsInterp => obs_waypoints(&banks, s, g, n_waypoints)?,
                };
                let rec = rollout(env, ctrl, &waypoints, s, g);
                successes += rec.success as usize;
                steps += rec.steps_taken;
                records.push((method, rec));
            }
            cells.push(SuccessCell {
                tier,
                method,
                episodes: pairs.len(),
                successes,
                mean_steps: if pairs.is_empty() { 0.0 } else { steps as f64 / pairs.len() as f64 },
            });
        }
    }
    Ok(SuccessTable { cells, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Segment, Source, Trajectory};
    use crate::encoder::Activation;
    use crate::tensor::Matrix;

    fn v(x: f64, y: f64) -> Vector {
        Vector::new(vec![x, y])
    }

    fn assert_never_in_wall(env: &MazeSpec, rec: &RolloutRecord) {
        for w in rec.visited.windows(2) {
            assert!(env.crossings(w[0].as_slice(), w[1].as_slice()) == 0);
        }
        for p in &rec.visited {
            assert!(env.walls.iter().all(|s| s.distance_to_point(p.as_slice()) > 0.0));
            assert!(env.bounds.contains(p.as_slice()));
        }
    }

    #[test]
    fn free_space_reaches_adjacent_goal() {
        let env = MazeSpec::open(5.0);
        let ctrl = ControllerConfig::default();
        let (s, g) = (v(1.0, 1.0), v(1.6, 1.8));
        let rec = rollout(&env, &ctrl, &[], &s, &g);
        assert!(rec.success);
        let bound = (s.dist_sq(&g).sqrt() / ctrl.max_step).ceil() as usize + 1;
        assert!(rec.steps_taken <= bound, "{} > {bound}", rec.steps_taken);
        assert!(rec.visited.last().unwrap().dist_sq(&g).sqrt() <= ctrl.success_radius);
    }

    #[test]
    fn start_at_goal_takes_no_steps() {
        let rec = rollout(&MazeSpec::open(2.0), &ControllerConfig::default(), &[], &v(1.0, 1.0), &v(1.0, 1.05));
        assert!(rec.success);
        assert_eq!(rec.steps_taken, 0);
        assert_eq!(rec.visited.len(), 1);
    }

    // inside the U, goal straight below the bottom wall
    fn wedge_pair() -> (Vector, Vector) {
        (v(2.5, 2.5), v(2.5, 0.5))
    }

    #[test]
    fn direct_control_wedges_behind_the_wall() {
        let env = MazeSpec::default_u_maze();
        let (s, g) = wedge_pair();
        assert_eq!(env.tier(s.as_slice(), g.as_slice()), DifficultyTier::Far);
        let rec = rollout(&env, &ControllerConfig::default(), &[], &s, &g);
        assert!(!rec.success);
        assert_eq!(rec.steps_taken, 600);
        assert_never_in_wall(&env, &rec);
        let last = rec.visited.last().unwrap();
        assert!(last[1] > 1.0 && (last[0] - 2.5).abs() < 1e-9);
    }

    #[test]
    fn hand_waypoints_escape_the_trap() {
        let env = MazeSpec::default_u_maze();
        let (s, g) = wedge_pair();
        let route = [v(2.5, 4.5), v(4.5, 4.5), v(4.5, 0.5)];
        let rec = rollout(&env, &ControllerConfig::default(), &route, &s, &g);
        assert!(rec.success, "{:?}", rec.visited.last());
        assert_never_in_wall(&env, &rec);
    }

    #[test]
    fn goal_as_only_waypoint_matches_direct() {
        let env = MazeSpec::default_u_maze();
        let ctrl = ControllerConfig::default();
        for (s, g) in [wedge_pair(), (v(0.5, 0.5), v(4.5, 4.5)), (v(0.5, 4.5), v(0.5, 0.5))] {
            let a = rollout(&env, &ctrl, &[], &s, &g);
            let b = rollout(&env, &ctrl, std::slice::from_ref(&g), &s, &g);
            assert_eq!(a.visited, b.visited);
            assert_eq!(a.success, b.success);
        }
    }

    #[test]
    fn slides_along_a_wall() {
        let mut env = MazeSpec::open(4.0);
        env.walls.push(Segment::new([0.0, 2.0], [3.0, 2.0]));
        env.validate().unwrap();
        // heading for the goal through the wall slides left along it
        let rec = rollout(&env, &ControllerConfig::default(), &[v(3.5, 1.5)], &v(1.0, 1.5), &v(1.0, 3.0));
        assert!(!rec.success);
        let last = rec.visited.last().unwrap();
        assert!(last[1] < 2.0 && (last[0] - 1.0).abs() < 1e-3);
        assert_never_in_wall(&env, &rec);
        // one more waypoint past the end of the wall gets around it
        let rec = rollout(&env, &ControllerConfig::default(), &[v(3.5, 1.5), v(3.5, 2.5)], &v(1.0, 1.5), &v(1.0, 3.0));
        assert!(rec.success);
        assert_never_in_wall(&env, &rec);
    }

    #[test]
    fn rollouts_are_deterministic() {
        let env = MazeSpec::default_u_maze();
        let (s, g) = wedge_pair();
        let wps = [v(1.5, 4.5), v(0.5, 2.0)];
        let ctrl = ControllerConfig::default();
        assert_eq!(rollout(&env, &ctrl, &wps, &s, &g), rollout(&env, &ctrl, &wps, &s, &g));
    }

    #[test]
    fn tier_pairs_match_their_tier() {
        let env = MazeSpec::default_u_maze();
        for tier in DifficultyTier::ALL {
            for (s, g) in sample_tier_pairs(&env, tier, 50, PAIR_MARGIN, 4).unwrap() {
                assert_eq!(env.tier(s.as_slice(), g.as_slice()), tier);
            }
        }
        assert!(sample_tier_pairs(&MazeSpec::open(3.0), DifficultyTier::Far, 1, 0.1, 0).is_err());
    }

    #[test]
    fn bad_controller_rejected() {
        let ctrl = ControllerConfig {
            gain: 0.0,
            ..ControllerConfig::default()
        };
        assert!(ctrl.validate().is_err());
        assert!(ControllerConfig {
            max_steps: 0,
            ..ControllerConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("teleport".parse::<Method>().is_err());
    }

    fn identity_encoder() -> EncoderPair {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut enc = EncoderPair::init(2, &[], 2, Activation::Tanh, 1e6, 0.1, &mut rng).unwrap();
        enc.psi.weights[0] = Matrix::identity(2);
        enc
    }

    fn grid_dataset() -> TrajectoryDataset {
        let observations: Vec<Vector> = (0..50)
            .map(|i| v(0.3 + 0.45 * (i % 10) as f64, 0.3 + 0.9 * (i / 10) as f64))
            .collect();
        let trajectories = observations
            .chunks(10)
            .enumerate()
            .map(|(id, c)| Trajectory {
                id: id as u64,
                observations: c.to_vec(),
            })
            .collect();
        let mut ds = TrajectoryDataset::new(trajectories, Source::Maze, 0.0, 0).unwrap();
        ds.split.fill(Split::Validation);
        ds.split[0] = Split::Train;
        ds
    }

    #[test]
    fn empty_plan_is_empty() {
        let ds = grid_dataset();
        let enc = identity_encoder();
        let banks = Banks::new(&enc, &ds, Split::Validation).unwrap();
        assert!(plan_observation_waypoints(&enc, &v(1.0, 1.0), &v(2.0, 2.0), 0, &banks).unwrap().is_empty());
    }

    #[test]
    fn start_equals_goal_plans_stay_local() {
        let ds = grid_dataset();
        let enc = identity_encoder();
        let banks = Banks::new(&enc, &ds, Split::Validation).unwrap();
        let s = banks.observations[12].clone();
        for w in plan_observation_waypoints(&enc, &s, &s, 4, &banks).unwrap() {
            // bank spacing is 0.45 in x and 0.9 in y
            assert!(w.dist_sq(&s).sqrt() <= 1.0, "{w:?}");
        }
    }

    #[test]
    fn success_table_is_complete_and_repeatable() {
        let ds = grid_dataset();
        let enc = identity_encoder();
        let env = MazeSpec::default_u_maze();
        let ctrl = ControllerConfig::default();
        let a = evaluate_success(&enc, &env, &ds, &ctrl, 3, 6, 5).unwrap();
        assert_eq!(a.cells.len(), 12);
        for c in &a.cells {
            assert_eq!(c.episodes, 6);
            let failures = a
                .records
                .iter()
                .filter(|(m, r)| *m == c.method && r.difficulty_tier == c.tier && !r.success)
                .count();
            assert_eq!(c.successes + failures, c.episodes);
        }
        assert!(a.rate(DifficultyTier::Near, Method::Direct) == 1.0);
        let b = evaluate_success(&enc, &env, &ds, &ctrl, 3, 6, 5).unwrap();
        assert_eq!(a, b);
    }
}
