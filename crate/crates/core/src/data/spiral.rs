use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Source, Trajectory, TrajectoryDataset, DEFAULT_VALIDATION_FRACTION};
use crate::error::{Error, Result};
use crate::tensor::Vector;

/// Outward spiral `r(t) = radial_rate * t`, `theta(t) = theta0 + angular_rate * t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralParams {
    pub num_traj: usize,
    pub len: usize,
    pub noise_std: f64,
    pub radial_rate: f64,
    pub angular_rate: f64,
    pub validation_fraction: f64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        SpiralParams {
            num_traj: 500,
            len: 60,
            noise_std: 0.01,
            radial_rate: 0.05,
            angular_rate: 0.35,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
        }
    }
}

pub fn gen_spiral(params: &SpiralParams, seed: u64) -> Result<TrajectoryDataset> {
    if params.num_traj < 1 || params.len < 2 {
        return Err(Error::InvalidArgument(format!(
            "spiral needs num_traj >= 1 and len >= 2, got {} and {}",
            params.num_traj, params.len
        )));
    }
    if !(params.noise_std >= 0.0) {
        return Err(Error::InvalidArgument("noise_std must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let trajectories = (0..params.num_traj)
        .map(|j| {
            let theta0 = rng.gen_range(0.0..TAU);
            let observations = (0..params.len)
                .map(|t| {
                    let r = params.radial_rate * t as f64;
                    let th = theta0 + params.angular_rate * t as f64;
                    let (mut x, mut y) = (r * th.cos(), r * th.sin());
                    if params.noise_std > 0.0 {
                        x += noise.sample(&mut rng);
                        y += noise.sample(&mut rng);
                    }
                    Vector::new(vec![x, y])
                })
                .collect();
            Trajectory {
                id: j as u64,
                observations,
            }
        })
        .collect();
    TrajectoryDataset::new(trajectories, Source::Spiral, params.validation_fraction, seed)
}

/// Recovers `(t, theta0)` of the noiseless spiral passing through `p`.
/// `t` is continuous; `theta0` is wrapped to `[0, 2 pi)`.
pub fn spiral_phase(params: &SpiralParams, p: &[f64]) -> (f64, f64) {
    let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
    let t = r / params.radial_rate;
    let theta = p[1].atan2(p[0]);
    let theta0 = (theta - params.angular_rate * t).rem_euclid(TAU);
    (t, theta0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(num_traj: usize) -> SpiralParams {
        SpiralParams {
            num_traj,
            noise_std: 0.0,
            ..SpiralParams::default()
        }
    }

    fn radius(v: &Vector) -> f64 {
        v.norm()
    }

    #[test]
    fn starts_at_origin_without_noise() {
        let ds = gen_spiral(&noiseless(20), 1).unwrap();
        for t in &ds.trajectories {
            assert_eq!(t.observations[0].norm(), 0.0);
        }
    }

    #[test]
    fn radius_strictly_increasing_without_noise() {
        let ds = gen_spiral(&noiseless(10), 2).unwrap();
        for t in &ds.trajectories {
            for w in t.observations.windows(2) {
                assert!(radius(&w[1]) > radius(&w[0]));
            }
        }
    }

    #[test]
    fn seeds_change_angles_not_radii() {
        let a = gen_spiral(&noiseless(8), 3).unwrap();
        let b = gen_spiral(&noiseless(8), 4).unwrap();
        let angles = |d: &TrajectoryDataset| -> Vec<f64> {
            d.trajectories
                .iter()
                .map(|t| t.observations[1][1].atan2(t.observations[1][0]))
                .collect()
        };
        assert_ne!(angles(&a), angles(&b));
        for (ta, tb) in a.trajectories.iter().zip(&b.trajectories) {
            for (oa, ob) in ta.observations.iter().zip(&tb.observations) {
                assert!((radius(oa) - radius(ob)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_recovery_on_clean_points() {
        let p = noiseless(5);
        let ds = gen_spiral(&p, 9).unwrap();
        for tr in &ds.trajectories {
            let (_, th0) = spiral_phase(&p, &tr.observations[10]);
            for (t, o) in tr.observations.iter().enumerate().skip(1) {
                let (tt, th) = spiral_phase(&p, o);
                assert!((tt - t as f64).abs() < 1e-9);
                let d = (th - th0).rem_euclid(TAU);
                assert!(d.min(TAU - d) < 1e-9);
            }
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(gen_spiral(&SpiralParams { len: 1, ..SpiralParams::default() }, 0).is_err());
        assert!(gen_spiral(&SpiralParams { num_traj: 0, ..SpiralParams::default() }, 0).is_err());
    }
}
