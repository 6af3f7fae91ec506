//! Evaluation protocols: representation moments, waypoint recovery with
//! retrieval, and the spiral prediction probe.

use std::f64::consts::{FRAC_PI_4, TAU};

use crate::data::{spiral_phase, Split, SpiralParams, TrajectoryDataset};
use crate::encoder::EncoderPair;
use crate::error::{Error, Result};
use crate::inference::{interpolate_special, log_density_many, plan_chain, predict_future};
use crate::tensor::{pca_fit, KeyBank, Pca, Vector};

/// First and second moments of a set of representations.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub count: usize,
    pub k: usize,
    /// `(1/k) mean ||psi||^2`
    pub mean_sq_norm: f64,
    /// `|| mean psi ||`
    pub mean_norm: f64,
    pub variances: Vec<f64>,
    pub max_offdiag_corr: f64,
}

impl MomentReport {
    pub fn norm_ok(&self, c: f64) -> bool {
        self.mean_sq_norm >= 0.8 * c && self.mean_sq_norm <= 1.2 * c
    }

    pub fn mean_ok(&self, c: f64) -> bool {
        self.mean_norm <= 0.2 * (c * self.k as f64).sqrt()
    }

    pub fn corr_ok(&self) -> bool {
        self.max_offdiag_corr <= 0.25
    }

    pub fn all_ok(&self, c: f64) -> bool {
        self.norm_ok(c) && self.mean_ok(c) && self.corr_ok()
    }
}

pub fn representation_moments(psis: &[Vector]) -> Result<MomentReport> {
    let n = psis.len();
    if n < 2 {
        return Err(Error::Empty("moment check needs at least two representations"));
    }
    let k = psis[0].dim();
    let nf = n as f64;
    let mut mean = vec![0.0; k];
    let mut sq = 0.0;
    for p in psis {
        if p.dim() != k {
            return Err(Error::dims("representation_moments", k, p.dim()));
        }
        sq += p.norm_sq();
        for (m, v) in mean.iter_mut().zip(p.iter()) {
            *m += v / nf;
        }
    }
    let mut cov = vec![0.0; k * k];
    for p in psis {
        for i in 0..k {
            let di = p[i] - mean[i];
            for j in 0..k {
                cov[i * k + j] += di * (p[j] - mean[j]) / nf;
            }
        }
    }
    let variances: Vec<f64> = (0..k).map(|i| cov[i * k + i]).collect();
    let mut max_corr: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let denom = (variances[i] * variances[j]).sqrt();
                let r = if denom > 0.0 { cov[i * k + j] / denom } else { 1.0 };
                max_corr = max_corr.max(r.abs());
            }
        }
    }
    Ok(MomentReport {
        count: n,
        k,
        mean_sq_norm: sq / (nf * k as f64),
        mean_norm: mean.iter().map(|m| m * m).sum::<f64>().sqrt(),
        variances,
        max_offdiag_corr: max_corr,
    })
}

/// Which planner produces contrastive waypoint representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planner {
    /// Convex combinations of the forward and backward predictions.
    Interpolate,
    /// Exact chain posterior at the encoder's `c`.
    Chain,
}

pub const WAYPOINT_METHODS: [&str; 3] = ["contrastive", "pca-interp", "obs-interp"];

#[derive(Debug, Clone, PartialEq)]
pub struct WaypointEvalResult {
    /// Mean squared error per coordinate, in the order of [`WAYPOINT_METHODS`].
    pub mse: [f64; 3],
    /// `per_index[m][i]` is the error of method `m` at waypoint `i`.
    pub per_index: [Vec<f64>; 3],
    pub num_pairs: usize,
    /// Validation trajectories too short to hold `n` distinct waypoints.
    pub skipped: usize,
}

/// Retrieval banks built from the validation split.
pub struct Banks {
    pub observations: Vec<Vector>,
    /// `(trajectory, time)` of each observation.
    pub origin: Vec<(usize, usize)>,
    pub obs_keys: KeyBank,
    pub repr_keys: KeyBank,
}

impl Banks {
    pub fn new(enc: &EncoderPair, dataset: &TrajectoryDataset, split: Split) -> Result<Self> {
        let (observations, origin): (Vec<Vector>, Vec<(usize, usize)>) = dataset.observations(split).into_iter().unzip();
        if observations.is_empty() {
            return Err(Error::Empty("retrieval bank is empty"));
        }
        let reprs = enc.psi_many(&observations)?;
        Ok(Banks {
            obs_keys: KeyBank::new(&observations)?,
            repr_keys: KeyBank::new(&reprs)?,
            observations,
            origin,
        })
    }

    pub fn retrieve_by_repr(&self, repr: &[f64]) -> Result<&Vector> {
        Ok(&self.observations[self.repr_keys.nearest(repr)?])
    }

    pub fn retrieve_by_obs(&self, obs: &[f64]) -> Result<&Vector> {
        Ok(&self.observations[self.obs_keys.nearest(obs)?])
    }
}

/// Waypoints in observation space by interpolating start and goal in the
/// PCA coordinates, then retrieving the nearest bank observation.
pub fn pca_waypoints(pca: &Pca, banks: &Banks, start: &[f64], goal: &[f64], n: usize) -> Result<Vec<Vector>> {
    let (a, b) = (pca.project(start)?, pca.project(goal)?);
    (1..=n)
        .map(|i| {
            let l = i as f64 / (n + 1) as f64;
            let x = pca.reconstruct(&a.lerp(&b, l))?;
            banks.retrieve_by_obs(&x).cloned()
        })
        .collect()
}

/// Straight-line waypoints in observation space, snapped to the bank.
pub fn obs_waypoints(banks: &Banks, start: &Vector, goal: &Vector, n: usize) -> Result<Vec<Vector>> {
    (1..=n)
        .map(|i| {
            let l = i as f64 / (n + 1) as f64;
            banks.retrieve_by_obs(&start.lerp(goal, l)).cloned()
        })
        .collect()
}

/// Representation-space plan between two observations, snapped to the bank.
pub fn contrastive_waypoints(
    enc: &EncoderPair,
    banks: &Banks,
    start: &Vector,
    goal: &Vector,
    n: usize,
    planner: Planner,
) -> Result<Vec<Vector>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let (p0, pt) = (enc.psi(start)?, enc.psi(goal)?);
    let plan = match planner {
        Planner::Interpolate => interpolate_special(&p0, &pt, n, &enc.a_matrix)?,
        Planner::Chain => plan_chain(&p0, &pt, n, &enc.a_matrix, enc.c)?,
    };
    plan.means().iter().map(|m| banks.retrieve_by_repr(m).cloned()).collect()
}

/// Number of PCA components used by the PCA baseline.
pub fn pca_components(obs_dim: usize, repr_dim: usize) -> usize {
    obs_dim.min(repr_dim)
}

pub fn fit_baseline_pca(dataset: &TrajectoryDataset, repr_dim: usize) -> Result<Pca> {
    let train: Vec<Vector> = dataset.observations(Split::Train).into_iter().map(|(o, _)| o).collect();
    pca_fit(&train, pca_components(dataset.obs_dim, repr_dim))
}

/// For each validation trajectory: plan `n` waypoints between its first and
/// last observation and compare with the true observations at indices
/// `round(i (T-1) / (n+1))`.
pub fn eval_waypoints(enc: &EncoderPair, dataset: &TrajectoryDataset, n: usize, planner: Planner) -> Result<WaypointEvalResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("waypoint evaluation needs n >= 1".into()));
    }
    let val = dataset.validation_indices();
    if val.is_empty() {
        return Err(Error::Empty("validation split is empty"));
    }
    let banks = Banks::new(enc, dataset, Split::Validation)?;
    let pca = fit_baseline_pca(dataset, enc.repr_dim())?;
    let d = dataset.obs_dim as f64;
    let mut sums = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let (mut pairs, mut skipped) = (0, 0);
    for ti in val {
        let obs = &dataset.trajectories[ti].observations;
        let t = obs.len();
        if t < n + 2 {
            skipped += 1;
            continue;
        }
        let (start, goal) = (&obs[0], &obs[t - 1]);
        let truth: Vec<&Vector> = (1..=n)
            .map(|i| &obs[((i * (t - 1)) as f64 / (n + 1) as f64).round() as usize])
            .collect();
        let preds = [
            contrastive_waypoints(enc, &banks, start, goal, n, planner)?,
            pca_waypoints(&pca, &banks, start, goal, n)?,
            obs_waypoints(&banks, start, goal, n)?,
        ];
        for (m, p) in preds.iter().enumerate() {
            for (i, (x, y)) in p.iter().zip(&truth).enumerate() {
                sums[m][i] += x.dist_sq(y) / d;
            }
        }
        pairs += 1;
    }
    if pairs == 0 {
        return Err(Error::Empty("no validation trajectory is long enough"));
    }
    let per_index = sums.map(|s| s.into_iter().map(|v| v / pairs as f64).collect::<Vec<f64>>());
    let mse = [0, 1, 2].map(|m| per_index[m].iter().sum::<f64>() / n as f64);
    Ok(WaypointEvalResult {
        mse,
        per_index,
        num_pairs: pairs,
        skipped,
    })
}

/// One inpainted step of a validation window.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintPoint {
    pub window: usize,
    /// Row index inside the window.
    pub step: usize,
    pub truth: Vector,
    pub contrastive: Vector,
    pub obs_interp: Vector,
}

/// Fills `n` intermediate rows of every validation window from its first
/// and last rows, comparing against the true rows at the same fractional
/// indices as [`eval_waypoints`].
pub fn inpaint_windows(enc: &EncoderPair, dataset: &TrajectoryDataset, n: usize, planner: Planner) -> Result<Vec<InpaintPoint>> {
    if n == 0 {
        return Err(Error::InvalidArgument("inpainting needs n >= 1".into()));
    }
    let banks = Banks::new(enc, dataset, Split::Validation)?;
    let mut out = Vec::new();
    for ti in dataset.validation_indices() {
        let obs = &dataset.trajectories[ti].observations;
        let t = obs.len();
        if t < n + 2 {
            continue;
        }
        let (start, goal) = (&obs[0], &obs[t - 1]);
        let ours = contrastive_waypoints(enc, &banks, start, goal, n, planner)?;
        let lines = obs_waypoints(&banks, start, goal, n)?;
        for (i, (c, l)) in ours.into_iter().zip(lines).enumerate() {
            let step = (((i + 1) * (t - 1)) as f64 / (n + 1) as f64).round() as usize;
            out.push(InpaintPoint {
                window: ti,
                step,
                truth: obs[step].clone(),
                contrastive: c,
                obs_interp: l,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("no validation window is long enough to inpaint"));
    }
    Ok(out)
}

/// Outcome of the spiral prediction probe.
#[derive(Debug, Clone, PartialEq)]
pub struct SpiralProbeReport {
    pub num_probes: usize,
    /// Fraction of probes whose top-`top_k` density points are mostly ahead.
    pub model_fraction: f64,
    /// Same with Euclidean nearest neighbours.
    pub euclid_fraction: f64,
    pub top_k: usize,
    pub min_ahead: usize,
}

/// Arm phase of every trajectory, the circular mean of per-point estimates.
fn trajectory_phases(params: &SpiralParams, dataset: &TrajectoryDataset) -> Vec<f64> {
    dataset
        .trajectories
        .iter()
        .map(|t| {
            let (mut s, mut c) = (0.0, 0.0);
            for o in t.observations.iter().skip(5) {
                let (_, th) = spiral_phase(params, o);
                s += th.sin();
                c += th.cos();
            }
            s.atan2(c).rem_euclid(TAU)
        })
        .collect()
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Probes validation states with `t` in `t_range`. A bank point is ahead
/// when it comes later in time and lies on the same arm (initial angle
/// within pi/4). A probe passes when at least `min_ahead` of its `top_k`
/// highest-density bank points are ahead.
pub fn spiral_probe(
    enc: &EncoderPair,
    dataset: &TrajectoryDataset,
    params: &SpiralParams,
    t_range: (usize, usize),
    top_k: usize,
    min_ahead: usize,
) -> Result<SpiralProbeReport> {
    let banks = Banks::new(enc, dataset, Split::Validation)?;
    let phases = trajectory_phases(params, dataset);
    let reprs: Vec<Vector> = (0..banks.repr_keys.len())
        .map(|i| Vector::new(banks.repr_keys.key(i).to_vec()))
        .collect();
    let ahead = |p: usize, b: usize| {
        let ((tp, sp), (tb, sb)) = (banks.origin[p], banks.origin[b]);
        sb > sp && angle_gap(phases[tp], phases[tb]) <= FRAC_PI_4
    };
    let top = |scores: &[f64], p: usize| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| i != p).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        idx.truncate(top_k);
        idx
    };
    let (mut probes, mut model_hits, mut euclid_hits) = (0, 0, 0);
    for p in 0..banks.observations.len() {
        let t = banks.origin[p].1;
        if t < t_range.0 || t > t_range.1 {
            continue;
        }
        probes += 1;
        let belief = predict_future(&reprs[p], &enc.a_matrix, enc.c)?;
        let dens = log_density_many(&belief, &reprs)?;
        if top(&dens, p).iter().filter(|&&b| ahead(p, b)).count() >= min_ahead {
            model_hits += 1;
        }
        let neg_dist: Vec<f64> = banks
            .observations
            .iter()
            .map(|o| -o.dist_sq(&banks.observations[p]))
            .collect();
        if top(&neg_dist, p).iter().filter(|&&b| ahead(p, b)).count() >= min_ahead {
            euclid_hits += 1;
        }
    }
    if probes == 0 {
        return Err(Error::Empty("no probe states in the requested time range"));
    }
    Ok(SpiralProbeReport {
        num_probes: probes,
        model_fraction: model_hits as f64 / probes as f64,
        euclid_fraction: euclid_hits as f64 / probes as f64,
        top_k,
        min_ahead,
    })
}
