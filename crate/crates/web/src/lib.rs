//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; the `*_view` functions hold the logic
//! so they can be tested natively.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use gmc_core::control::{rollout, ControllerConfig};
use gmc_core::data::MazeSpec;
use gmc_core::inference::{interpolate_special, plan_chain};
use gmc_core::oracle::{discounted_occupancy, fit_tabular_critic, log_ratio, verify_assumption2, TabularChain};
use gmc_core::tensor::{Matrix, Vector};
use gmc_core::{Error, Result};

#[derive(Debug, Serialize)]
pub struct PlanView {
    /// Waypoint means from the full chain posterior.
    pub chain: Vec<[f64; 2]>,
    /// Per waypoint, the larger eigenvalue's square root of the chain covariance.
    pub chain_spread: Vec<f64>,
    pub interpolation: Vec<[f64; 2]>,
}

fn rotation(theta: f64, scale: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    Matrix::from_rows(&[vec![scale * c, -scale * s], vec![scale * s, scale * c]]).expect("2x2")
}

fn top_spread(cov: &Matrix) -> f64 {
    let (a, b, d) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let mid = 0.5 * (a + d);
    (mid + (0.25 * (a - d).powi(2) + b * b).sqrt()).sqrt()
}

/// Plans `n` waypoints between two 2-D representations under
/// `A = scale * R(theta)`.
pub fn plan_view(theta: f64, scale: f64, c: f64, n: usize, start: [f64; 2], goal: [f64; 2]) -> Result<PlanView> {
    if !(1..=64).contains(&n) {
        return Err(Error::InvalidArgument(format!("waypoint count must be in 1..=64, got {n}")));
    }
    let a = rotation(theta, scale);
    let (p0, pt) = (Vector::new(start.to_vec()), Vector::new(goal.to_vec()));
    let chain = plan_chain(&p0, &pt, n, &a, c)?;
    let xy = |v: Vector| [v[0], v[1]];
    let interpolation = interpolate_special(&p0, &pt, n, &a).map(|p| p.means().into_iter().map(xy).collect())?;
    Ok(PlanView {
        chain: chain.waypoints.iter().map(|w| xy(w.mean())).collect(),
        chain_spread: chain.waypoints.iter().map(|w| top_spread(&w.covariance())).collect(),
        interpolation,
    })
}

#[derive(Debug, Serialize)]
pub struct RolloutView {
    pub maze: MazeSpec,
    pub path: Vec<[f64; 2]>,
    pub success: bool,
    pub steps: usize,
}

/// Drives the point agent through the default maze, visiting `waypoints`
/// (flattened x, y pairs) before the goal.
pub fn rollout_view(start: [f64; 2], goal: [f64; 2], waypoints: &[f64]) -> Result<RolloutView> {
    if !waypoints.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument("waypoints must be x, y pairs".into()));
    }
    let maze = MazeSpec::default_u_maze();
    let wps: Vec<Vector> = waypoints.chunks(2).map(|p| Vector::new(p.to_vec())).collect();
    let rec = rollout(
        &maze,
        &ControllerConfig::default(),
        &wps,
        &Vector::new(start.to_vec()),
        &Vector::new(goal.to_vec()),
    );
    Ok(RolloutView {
        path: rec.visited.iter().map(|v| [v[0], v[1]]).collect(),
        success: rec.success,
        steps: rec.steps_taken,
        maze,
    })
}

#[derive(Debug, Serialize)]
pub struct OccupancyView {
    pub transition: Vec<Vec<f64>>,
    pub occupancy: Vec<Vec<f64>>,
    /// `None` where the pair never co-occurs.
    pub log_ratio: Vec<Vec<Option<f64>>>,
    /// Fitted critic with the best constant offset removed.
    pub critic: Vec<Vec<f64>>,
    pub max_abs_dev: f64,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Random chain, its discounted occupancy and a contrastive critic fitted to it.
pub fn occupancy_view(states: usize, gamma: f64, seed: u64, steps: usize) -> Result<OccupancyView> {
    if !(2..=12).contains(&states) {
        return Err(Error::InvalidArgument(format!("state count must be in 2..=12, got {states}")));
    }
    let chain = TabularChain::random(states, gamma, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let occ = discounted_occupancy(&chain)?;
    let critic = fit_tabular_critic(&chain, 256, steps, seed)?;
    let report = verify_assumption2(&critic, &chain)?;
    let mut shifted = rows(&critic.f);
    for v in shifted.iter_mut().flatten() {
        *v -= report.offset;
    }
    Ok(OccupancyView {
        transition: rows(chain.transition()),
        log_ratio: log_ratio(&chain, &occ),
        occupancy: rows(&occ),
        critic: shifted,
        max_abs_dev: report.max_abs_dev,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn plan_waypoints(
    theta: f64,
    scale: f64,
    c: f64,
    n: usize,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
) -> std::result::Result<String, JsError> {
    to_js(plan_view(theta, scale, c, n, [x0, y0], [x1, y1]))
}

#[wasm_bindgen]
pub fn maze_rollout(x0: f64, y0: f64, x1: f64, y1: f64, waypoints: &[f64]) -> std::result::Result<String, JsError> {
    to_js(rollout_view([x0, y0], [x1, y1], waypoints))
}

#[wasm_bindgen]
pub fn occupancy(states: usize, gamma: f64, seed: u32, steps: usize) -> std::result::Result<String, JsError> {
    to_js(occupancy_view(states, gamma, seed as u64, steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_plan_is_a_straight_line() {
        let v = plan_view(0.0, 1.0, 1e6, 3, [0.0, 0.0], [4.0, 8.0]).unwrap();
        for (i, p) in v.interpolation.iter().enumerate() {
            let t = (i + 1) as f64 / 4.0;
            assert!((p[0] - 4.0 * t).abs() < 1e-9 && (p[1] - 8.0 * t).abs() < 1e-9);
        }
        assert_eq!(v.chain.len(), 3);
        assert!(v.chain_spread.iter().all(|s| s.is_finite() && *s > 0.0));
    }

    #[test]
    fn small_c_pulls_the_chain_to_the_origin() {
        let v = plan_view(0.4, 1.0, 1e-3, 4, [3.0, 0.0], [0.0, 3.0]).unwrap();
        assert!(v.chain.iter().all(|p| p[0].hypot(p[1]) < 0.05));
    }

    #[test]
    fn plan_rejects_bad_counts() {
        assert!(plan_view(0.0, 1.0, 1.0, 0, [0.0, 0.0], [1.0, 1.0]).is_err());
        assert!(plan_view(0.0, 1.0, -1.0, 2, [0.0, 0.0], [1.0, 1.0]).is_err());
    }

    #[test]
    fn waypoints_get_the_agent_out_of_the_u() {
        let (start, goal) = ([2.5, 2.5], [2.5, 0.5]);
        let direct = rollout_view(start, goal, &[]).unwrap();
        assert!(!direct.success);
        let planned = rollout_view(start, goal, &[2.5, 4.5, 4.5, 4.5, 4.5, 0.5]).unwrap();
        assert!(planned.success, "{:?}", planned.path.last());
        assert_eq!(planned.path.first(), Some(&start));
        assert!(rollout_view(start, goal, &[1.0]).is_err());
    }

    #[test]
    fn occupancy_rows_sum_to_one_and_critic_tracks_ratio() {
        let v = occupancy_view(4, 0.8, 3, 4000).unwrap();
        for row in &v.occupancy {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(v.max_abs_dev < 0.1, "{}", v.max_abs_dev);
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.contains("\"log_ratio\""));
        assert!(occupancy_view(1, 0.8, 3, 10).is_err());
    }
}
