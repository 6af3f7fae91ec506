use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::data::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Vector};

/// Samples positive pairs `(x_t, x_{t+delta})` from the discounted state
/// occupancy. `delta ~ Geometric(1 - gamma)` on `{0, 1, 2, ...}`, so the
/// current state itself carries weight `1 - gamma`. Offsets that run past
/// the end of a trajectory are rejected and redrawn.
#[derive(Debug, Clone)]
pub struct PairSampler<'a> {
    dataset: &'a TrajectoryDataset,
    trajectories: Vec<usize>,
    /// Cumulative observation counts over `trajectories`.
    cumulative: Vec<usize>,
    offsets: Geometric,
}

impl<'a> PairSampler<'a> {
    pub fn new(dataset: &'a TrajectoryDataset, trajectories: Vec<usize>, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if trajectories.is_empty() {
            return Err(Error::Empty("pair sampler has no trajectories"));
        }
        let mut total = 0;
        let mut cumulative = Vec::with_capacity(trajectories.len());
        for &i in &trajectories {
            let t = dataset
                .trajectories
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("trajectory index {i} out of range")))?;
            total += t.len();
            cumulative.push(total);
        }
        let offsets = Geometric::new(1.0 - gamma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(PairSampler {
            dataset,
            trajectories,
            cumulative,
            offsets,
        })
    }

    /// Sampler over the training split.
    pub fn train(dataset: &'a TrajectoryDataset, gamma: f64) -> Result<Self> {
        Self::new(dataset, dataset.train_indices(), gamma)
    }

    /// `(trajectory index, t, t + delta)`.
    pub fn sample_indices<R: Rng>(&self, rng: &mut R) -> (usize, usize, usize) {
        let total = *self.cumulative.last().expect("nonempty");
        let flat = rng.gen_range(0..total);
        let slot = self.cumulative.partition_point(|&c| c <= flat);
        let start = if slot == 0 { 0 } else { self.cumulative[slot - 1] };
        let traj = self.trajectories[slot];
        let t = flat - start;
        let len = self.dataset.trajectories[traj].len();
        loop {
            let delta = self.offsets.sample(rng) as usize;
            if t + delta < len {
                return (traj, t, t + delta);
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> (Vector, Vector) {
        let (traj, t, tp) = self.sample_indices(rng);
        let obs = &self.dataset.trajectories[traj].observations;
        (obs[t].clone(), obs[tp].clone())
    }

    /// `B x d` anchor and positive matrices.
    pub fn sample_batch<R: Rng>(&self, batch_size: usize, rng: &mut R) -> (Matrix, Matrix) {
        let d = self.dataset.obs_dim;
        let mut xs = Vec::with_capacity(batch_size * d);
        let mut ps = Vec::with_capacity(batch_size * d);
        for _ in 0..batch_size {
            let (traj, t, tp) = self.sample_indices(rng);
            let obs = &self.dataset.trajectories[traj].observations;
            xs.extend_from_slice(&obs[t]);
            ps.extend_from_slice(&obs[tp]);
        }
        (
            Matrix::from_vec(batch_size, d, xs).expect("finite observations"),
            Matrix::from_vec(batch_size, d, ps).expect("finite observations"),
        )
    }
}

/// One positive pair from the whole dataset.
pub fn pair_sampler<R: Rng>(dataset: &TrajectoryDataset, gamma: f64, rng: &mut R) -> Result<(Vector, Vector)> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    Ok(PairSampler::new(dataset, all, gamma)?.sample(rng))
}

/// A single untruncated geometric offset, `P(delta = j) = (1 - gamma) gamma^j`.
pub fn geometric_offset<R: Rng>(gamma: f64, rng: &mut R) -> Result<usize> {
    let g = Geometric::new(1.0 - gamma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(g.sample(rng) as usize)
}
