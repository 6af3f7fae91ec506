//! Trajectory datasets: synthetic generators, positive-pair sampling from
//! the discounted state occupancy, CSV ingestion and persistence.

mod csv_series;
mod io;
pub mod maze;
mod sampler;
mod spiral;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Vector;

pub use csv_series::{load_csv_series, parse_csv_series, CsvReport};
pub use io::{dataset_from_bytes, dataset_to_string, load_dataset, save_dataset, DATASET_FORMAT, DATASET_VERSION};
pub use maze::{gen_maze, DifficultyTier, MazeGenParams, MazeSpec, Rect, Segment};
pub use sampler::{geometric_offset, pair_sampler, PairSampler};
pub use spiral::{gen_spiral, spiral_phase, SpiralParams};

/// Fraction of trajectories held out for validation by the generators.
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: u64,
    pub observations: Vec<Vector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Spiral,
    Maze,
    Csv,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Spiral => "spiral",
            Source::Maze => "maze",
            Source::Csv => "csv",
        })
    }
}

impl FromStr for Source {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spiral" => Ok(Source::Spiral),
            "maze" => Ok(Source::Maze),
            "csv" => Ok(Source::Csv),
            other => Err(Error::InvalidArgument(format!("unknown dataset source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub trajectories: Vec<Trajectory>,
    pub obs_dim: usize,
    pub source: Source,
    /// One entry per trajectory.
    pub split: Vec<Split>,
}

impl TrajectoryDataset {
    /// Builds a dataset and assigns a seeded train/validation split.
    pub fn new(
        trajectories: Vec<Trajectory>,
        source: Source,
        validation_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        let obs_dim = trajectories
            .first()
            .and_then(|t| t.observations.first())
            .map(Vector::dim)
            .ok_or(Error::Empty("dataset has no trajectories"))?;
        let split = assign_split(trajectories.len(), validation_fraction, seed);
        let ds = TrajectoryDataset {
            trajectories,
            obs_dim,
            source,
            split,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories.is_empty() {
            return Err(Error::Empty("dataset has no trajectories"));
        }
        if self.split.len() != self.trajectories.len() {
            return Err(Error::dims("dataset split", self.trajectories.len(), self.split.len()));
        }
        for t in &self.trajectories {
            if t.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "trajectory {} has {} observations; at least 2 are required",
                    t.id,
                    t.len()
                )));
            }
            if let Some(o) = t.observations.iter().find(|o| o.dim() != self.obs_dim) {
                return Err(Error::dims("trajectory observation", self.obs_dim, o.dim()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == which).collect()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.indices(Split::Train)
    }

    pub fn validation_indices(&self) -> Vec<usize> {
        self.indices(Split::Validation)
    }

    /// Every observation of the given split, in trajectory order, with its
    /// `(trajectory index, time index)`.
    pub fn observations(&self, which: Split) -> Vec<(Vector, (usize, usize))> {
        self.indices(which)
            .into_iter()
            .flat_map(|i| {
                self.trajectories[i]
                    .observations
                    .iter()
                    .enumerate()
                    .map(move |(t, o)| (o.clone(), (i, t)))
            })
            .collect()
    }

    pub fn num_observations(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

fn assign_split(n: usize, validation_fraction: f64, seed: u64) -> Vec<Split> {
    let mut split = vec![Split::Train; n];
    let frac = validation_fraction.clamp(0.0, 1.0);
    let mut n_val = (frac * n as f64).round() as usize;
    if n >= 2 && frac > 0.0 {
        n_val = n_val.clamp(1, n - 1);
    } else if n < 2 {
        n_val = 0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5911_7000_0001);
    order.shuffle(&mut rng);
    for &i in &order[..n_val] {
        split[i] = Split::Validation;
    }
    split
}
