//! Symmetrized infoNCE with squared-distance logits, the norm constraint
//! and its dual multiplier, and the training loop.
//!
//! Logits are `l_ij = -0.5 ||phi_i - psi_j+||^2`. The loss returned by
//! [`infonce_symmetrized`] is the negated objective
//!
//! ```text
//! -sum_i [ (l_ii - logsumexp_{j != i} l_ij) + (l_ii - logsumexp_{j != i} l_ji) ]
//! ```
//!
//! so it is minimized. The positive pair never appears in a denominator.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{PairSampler, TrajectoryDataset};
use crate::encoder::{Activation, EncoderPair, GradientBundle, UpstreamGrads};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Vector};

/// Initial dual multiplier for a fresh encoder.
pub const INITIAL_LAMBDA: f64 = 0.1;

/// `B x k` representations of a batch: `phi(x_i)` and `psi(x_i+)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchReps {
    pub phis: Matrix,
    pub psis_pos: Matrix,
}

impl BatchReps {
    pub fn new(phis: Matrix, psis_pos: Matrix) -> Result<Self> {
        if phis.rows() != psis_pos.rows() || phis.cols() != psis_pos.cols() {
            return Err(Error::dims(
                "BatchReps",
                format!("{}x{}", phis.rows(), phis.cols()),
                format!("{}x{}", psis_pos.rows(), psis_pos.cols()),
            ));
        }
        if phis.rows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "infoNCE needs a batch of at least 2, got {}",
                phis.rows()
            )));
        }
        Ok(BatchReps { phis, psis_pos })
    }

    pub fn from_vectors(phis: &[Vector], psis_pos: &[Vector]) -> Result<Self> {
        let k = phis.first().map_or(0, Vector::dim);
        let stack = |vs: &[Vector]| -> Result<Matrix> {
            if let Some(v) = vs.iter().find(|v| v.dim() != k) {
                return Err(Error::dims("BatchReps", k, v.dim()));
            }
            Matrix::from_vec(vs.len(), k, vs.iter().flat_map(|v| v.iter().copied()).collect())
        };
        Self::new(stack(phis)?, stack(psis_pos)?)
    }

    pub fn batch_size(&self) -> usize {
        self.phis.rows()
    }

    fn logits(&self) -> Matrix {
        let b = self.batch_size();
        let cross = self.phis.matmul_t(&self.psis_pos).expect("shapes checked");
        let pn: Vec<f64> = (0..b).map(|i| sq(self.phis.row(i))).collect();
        let qn: Vec<f64> = (0..b).map(|j| sq(self.psis_pos.row(j))).collect();
        let mut l = cross;
        for i in 0..b {
            for (j, v) in l.row_mut(i).iter_mut().enumerate() {
                *v = -0.5 * (pn[i] + qn[j] - 2.0 * *v);
            }
        }
        l
    }
}

fn sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn infonce_symmetrized(reps: &BatchReps) -> f64 {
    infonce_with_grad(reps).0
}

/// Loss and its gradients w.r.t. `phis` and `psis_pos`.
pub fn infonce_with_grad(reps: &BatchReps) -> (f64, Matrix, Matrix) {
    let b = reps.batch_size();
    let l = reps.logits();
    // Logits are nonpositive, so plain exponentials cannot overflow. Shift
    // by row and column maxima only when a denominator underflows.
    let mut e = Matrix::zeros(b, b);
    let mut row_shift = vec![0.0; b];
    let mut col_shift = vec![0.0; b];
    let mut row_sum = vec![0.0; b];
    let mut col_sum = vec![0.0; b];
    for i in 0..b {
        let (lr, er) = (l.row(i), e.row_mut(i));
        for j in 0..b {
            if i != j {
                er[j] = lr[j].exp();
                row_sum[i] += er[j];
                col_sum[j] += er[j];
            }
        }
    }
    let tiny = f64::MIN_POSITIVE * 1e20;
    let underflow = row_sum.iter().chain(&col_sum).any(|&s| s < tiny);
    let mut ec = e.clone();
    if underflow {
        row_shift.fill(f64::NEG_INFINITY);
        col_shift.fill(f64::NEG_INFINITY);
        for i in 0..b {
            for (j, &v) in l.row(i).iter().enumerate() {
                if i != j {
                    row_shift[i] = row_shift[i].max(v);
                    col_shift[j] = col_shift[j].max(v);
                }
            }
        }
        row_sum.fill(0.0);
        col_sum.fill(0.0);
        for i in 0..b {
            let lr = l.row(i);
            let er = e.row_mut(i);
            for j in 0..b {
                if i != j {
                    er[j] = (lr[j] - row_shift[i]).exp();
                    row_sum[i] += er[j];
                }
            }
            let cr = ec.row_mut(i);
            for j in 0..b {
                if i != j {
                    cr[j] = (lr[j] - col_shift[j]).exp();
                    col_sum[j] += cr[j];
                }
            }
        }
    }
    let er = e;
    let mut loss = 0.0;
    for i in 0..b {
        let row_lse = row_shift[i] + row_sum[i].ln();
        let col_lse = col_shift[i] + col_sum[i].ln();
        loss -= 2.0 * l[(i, i)] - row_lse - col_lse;
    }
    // dL/dl_ij: -2 on the diagonal, row softmax + column softmax elsewhere
    let mut g = Matrix::zeros(b, b);
    for i in 0..b {
        let (rr, cr, gr) = (er.row(i), ec.row(i), g.row_mut(i));
        for j in 0..b {
            gr[j] = if i == j { -2.0 } else { rr[j] / row_sum[i] + cr[j] / col_sum[j] };
        }
    }
    let k = reps.phis.cols();
    // dl_ij/dphi_i = psi_j - phi_i, dl_ij/dpsi_j = phi_i - psi_j
    let mut d_phi = g.matmul(&reps.psis_pos).expect("shapes checked");
    let mut d_psi = g.t_matmul(&reps.phis).expect("shapes checked");
    for i in 0..b {
        let rs: f64 = g.row(i).iter().sum();
        let cs: f64 = (0..b).map(|r| g[(r, i)]).sum();
        let (phi, psi) = (reps.phis.row(i), reps.psis_pos.row(i));
        let dp = d_phi.row_mut(i);
        for c in 0..k {
            dp[c] -= rs * phi[c];
        }
        let dq = d_psi.row_mut(i);
        for c in 0..k {
            dq[c] -= cs * psi[c];
        }
    }
    (loss, d_phi, d_psi)
}

/// `mean_i ||psi_i||^2 / k`, the batch estimate of the norm constraint.
pub fn norm_penalty(psis: &[Vector], k: usize) -> Result<f64> {
    if psis.is_empty() {
        return Err(Error::Empty("norm penalty over an empty batch"));
    }
    Ok(psis.iter().map(Vector::norm_sq).sum::<f64>() / (psis.len() * k) as f64)
}

fn penalty_rows(ms: &[&Matrix]) -> f64 {
    let n: usize = ms.iter().map(|m| m.rows()).sum();
    let k = ms[0].cols();
    ms.iter().map(|m| sq(m.data())).sum::<f64>() / (n * k) as f64
}

/// Projected dual ascent: `max(0, lambda + dual_step * (value - c))`.
pub fn dual_update(lambda: f64, constraint_value: f64, c: f64, dual_step: f64) -> f64 {
    (lambda + dual_step * (constraint_value - c)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::InvalidArgument(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub steps: u64,
    pub c: f64,
    pub dual_step: f64,
    pub gamma: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub hidden_sizes: Vec<usize>,
    pub repr_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            learning_rate: 3e-4,
            steps: 20_000,
            c: 1.0,
            dual_step: 1e-3,
            gamma: 0.9,
            seed: 0,
            optimizer: Optimizer::Adam,
            hidden_sizes: vec![64, 64],
            repr_dim: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.c > 0.0) {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if !(self.learning_rate > 0.0) || !(self.dual_step >= 0.0) {
            return bad("learning_rate must be positive and dual_step nonnegative".into());
        }
        if self.repr_dim == 0 || self.hidden_sizes.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(s).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |sp| s[..sp.start].lines().count().max(1)),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// One optimizer step's bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    /// `infonce / B + lambda * penalty`
    pub loss: f64,
    pub infonce: f64,
    pub constraint: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub encoder: EncoderPair,
    pub curve: Vec<CurvePoint>,
}

/// Regularized batch loss `infonce / B + lambda * penalty` with the penalty
/// averaged over anchors and positives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub infonce: f64,
    pub constraint: f64,
}

pub fn regularized_loss_and_grad(
    enc: &EncoderPair,
    anchors: &Matrix,
    positives: &Matrix,
    lambda: f64,
) -> Result<(LossParts, GradientBundle)> {
    let fwd = enc.forward_pairs(anchors, positives)?;
    let b = fwd.batch_size();
    let k = enc.repr_dim();
    let reps = BatchReps::new(fwd.phi.clone(), fwd.psi_pos.clone())?;
    let (nce, d_phi, d_pos) = infonce_with_grad(&reps);
    let constraint = penalty_rows(&[&fwd.psi_anchor, &fwd.psi_pos]);
    let inv_b = 1.0 / b as f64;
    let pen_scale = lambda * 2.0 / (2 * b * k) as f64;
    let up = UpstreamGrads {
        d_phi: d_phi.scale(inv_b),
        d_psi_anchor: fwd.psi_anchor.scale(pen_scale),
        d_psi_pos: d_pos.scale(inv_b).add(&fwd.psi_pos.scale(pen_scale))?,
    };
    let grads = fwd.backward(enc, &up)?;
    let parts = LossParts {
        total: nce * inv_b + lambda * constraint,
        infonce: nce,
        constraint,
    };
    Ok((parts, grads))
}

/// Largest relative gap between the analytic gradient and central finite
/// differences with step `h`, over every parameter. Relative errors use
/// `max(|analytic|, |numeric|, floor)` as the denominator.
pub fn gradient_check(enc: &EncoderPair, anchors: &Matrix, positives: &Matrix, lambda: f64, h: f64, floor: f64) -> Result<f64> {
    let (_, grads) = regularized_loss_and_grad(enc, anchors, positives, lambda)?;
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut probe = enc.clone();
    let mut worst: f64 = 0.0;
    for (ti, g) in analytic.iter().enumerate() {
        for (i, &ga) in g.iter().enumerate() {
            let orig = probe.tensors_mut()[ti][i];
            probe.tensors_mut()[ti][i] = orig + h;
            let up = regularized_loss_and_grad(&probe, anchors, positives, lambda)?.0.total;
            probe.tensors_mut()[ti][i] = orig - h;
            let down = regularized_loss_and_grad(&probe, anchors, positives, lambda)?.0.total;
            probe.tensors_mut()[ti][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = ga.abs().max(numeric.abs()).max(floor);
            worst = worst.max((ga - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

enum OptState {
    Sgd,
    Adam { m: Vec<Vec<f64>>, v: Vec<Vec<f64>>, t: i32 },
}

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptState {
    fn new(kind: Optimizer, enc: &EncoderPair) -> Self {
        match kind {
            Optimizer::Sgd => OptState::Sgd,
            Optimizer::Adam => {
                let zeros: Vec<Vec<f64>> = enc.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
                OptState::Adam {
                    m: zeros.clone(),
                    v: zeros,
                    t: 0,
                }
            }
        }
    }

    fn step(&mut self, enc: &mut EncoderPair, grads: &GradientBundle, lr: f64) {
        let gs = grads.tensors();
        match self {
            OptState::Sgd => {
                for (p, g) in enc.tensors_mut().into_iter().zip(gs) {
                    for (p, g) in p.iter_mut().zip(g) {
                        *p -= lr * g;
                    }
                }
            }
            OptState::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_B1.powi(*t);
                let c2 = 1.0 - ADAM_B2.powi(*t);
                for (((p, g), m), v) in enc.tensors_mut().into_iter().zip(gs).zip(m.iter_mut()).zip(v.iter_mut()) {
                    for i in 0..p.len() {
                        m[i] = ADAM_B1 * m[i] + (1.0 - ADAM_B1) * g[i];
                        v[i] = ADAM_B2 * v[i] + (1.0 - ADAM_B2) * g[i] * g[i];
                        p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

/// Fresh encoder sized for `dataset` and trained for `cfg.steps`.
pub fn train(dataset: &TrajectoryDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let enc = EncoderPair::init(
        dataset.obs_dim,
        &cfg.hidden_sizes,
        cfg.repr_dim,
        Activation::Tanh,
        cfg.c,
        INITIAL_LAMBDA,
        &mut rng,
    )?;
    train_from(enc, dataset, cfg)
}

/// Continues training `enc` for `cfg.steps` more steps. Batches are drawn
/// from a stream keyed on `(seed, enc.steps)`, so resuming is deterministic;
/// optimizer moments start from zero.
pub fn train_from(mut enc: EncoderPair, dataset: &TrajectoryDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if dataset.obs_dim != enc.input_dim() {
        return Err(Error::dims("train", enc.input_dim(), dataset.obs_dim));
    }
    let sampler = PairSampler::train(dataset, cfg.gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(enc.steps.wrapping_add(1));
    let mut opt = OptState::new(cfg.optimizer, &enc);
    let mut curve = Vec::with_capacity(cfg.steps as usize);
    for _ in 0..cfg.steps {
        let step = enc.steps;
        let (xs, ps) = sampler.sample_batch(cfg.batch_size, &mut rng);
        let (parts, grads) = regularized_loss_and_grad(&enc, &xs, &ps, enc.dual_lambda)?;
        if !parts.total.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        opt.step(&mut enc, &grads, cfg.learning_rate);
        curve.push(CurvePoint {
            step,
            loss: parts.total,
            infonce: parts.infonce,
            constraint: parts.constraint,
            lambda: enc.dual_lambda,
        });
        enc.dual_lambda = dual_update(enc.dual_lambda, parts.constraint, enc.c, cfg.dual_step);
        enc.steps += 1;
    }
    Ok(TrainOutcome { encoder: enc, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Source, Trajectory};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn rand_matrix<R: Rng>(r: usize, c: usize, rng: &mut R) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
    }

    fn double_loop(phis: &Matrix, psis: &Matrix) -> f64 {
        let b = phis.rows();
        let logit = |i: usize, j: usize| -> f64 {
            -0.5 * phis.row(i).iter().zip(psis.row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        };
        let mut total = 0.0;
        for i in 0..b {
            let mut row = 0.0;
            let mut col = 0.0;
            for j in 0..b {
                if j != i {
                    row += logit(i, j).exp();
                    col += logit(j, i).exp();
                }
            }
            total += (logit(i, i).exp() / row).ln() + (logit(i, i).exp() / col).ln();
        }
        -total
    }

    #[test]
    fn identical_reps_give_zero() {
        let m = Matrix::from_rows(&[vec![0.3, -1.0], vec![0.3, -1.0]]).unwrap();
        let r = BatchReps::new(m.clone(), m).unwrap();
        assert_abs_diff_eq!(infonce_symmetrized(&r), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn separated_pairs_give_minus_200() {
        let m = Matrix::from_rows(&[vec![0.0], vec![10.0]]).unwrap();
        let r = BatchReps::new(m.clone(), m).unwrap();
        assert_abs_diff_eq!(infonce_symmetrized(&r), -200.0, epsilon = 1e-10);
    }

    #[test]
    fn far_apart_pairs_do_not_underflow() {
        let m = Matrix::from_rows(&[vec![0.0], vec![100.0]]).unwrap();
        let (loss, dp, dq) = infonce_with_grad(&BatchReps::new(m.clone(), m).unwrap());
        assert_abs_diff_eq!(loss, -20000.0, epsilon = 1e-8);
        assert!(dp.data().iter().chain(dq.data()).all(|v| v.is_finite()));
    }

    #[test]
    fn matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let (p, q) = (rand_matrix(8, 4, &mut rng), rand_matrix(8, 4, &mut rng));
            let r = BatchReps::new(p.clone(), q.clone()).unwrap();
            assert_abs_diff_eq!(infonce_symmetrized(&r), double_loop(&p, &q), epsilon = 1e-10);
        }
    }

    #[test]
    fn batch_of_one_is_an_error() {
        let m = Matrix::zeros(1, 3);
        assert!(BatchReps::new(m.clone(), m).is_err());
        assert!(BatchReps::new(Matrix::zeros(2, 3), Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn analytic_grad_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (p, q) = (rand_matrix(5, 3, &mut rng), rand_matrix(5, 3, &mut rng));
        let (_, dp, dq) = infonce_with_grad(&BatchReps::new(p.clone(), q.clone()).unwrap());
        let h = 1e-5;
        for which in 0..2 {
            for idx in 0..15 {
                let bump = |s: f64| {
                    let (mut a, mut b) = (p.clone(), q.clone());
                    let m = if which == 0 { &mut a } else { &mut b };
                    m.data_mut()[idx] += s;
                    double_loop(&a, &b)
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let an = if which == 0 { dp.data()[idx] } else { dq.data()[idx] };
                assert_abs_diff_eq!(fd, an, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn full_gradient_matches_finite_difference() {
        for act in [Activation::Tanh, Activation::Relu] {
            for seed in 0..20u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut enc = EncoderPair::init(3, &[6, 5], 4, act, 1.0, 0.1, &mut rng).unwrap();
                enc.a_matrix = rand_matrix(4, 4, &mut rng);
                // nonzero biases keep relu pre-activations off the kink
                for b in enc.psi.biases.iter_mut() {
                    *b = (0..b.dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
                }
                let (x, p) = (rand_matrix(8, 3, &mut rng), rand_matrix(8, 3, &mut rng));
                let lambda = rng.gen_range(0.0..2.0);
                let err = gradient_check(&enc, &x, &p, lambda, 1e-5, 1e-6).unwrap();
                assert!(err <= 1e-4, "{act:?} seed {seed}: {err}");
            }
        }
    }

    #[test]
    fn closer_positive_lowers_loss() {
        let p = Matrix::from_rows(&[vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let mut q = Matrix::from_rows(&[vec![1.0, 1.0], vec![4.5, 0.0], vec![0.0, 3.5]]).unwrap();
        let mut last = infonce_symmetrized(&BatchReps::new(p.clone(), q.clone()).unwrap());
        for _ in 0..5 {
            for c in 0..2 {
                q.row_mut(0)[c] *= 0.7;
            }
            let now = infonce_symmetrized(&BatchReps::new(p.clone(), q.clone()).unwrap());
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn norm_penalty_cases() {
        assert_eq!(norm_penalty(&[Vector::zeros(4), Vector::zeros(4)], 4).unwrap(), 0.0);
        assert_eq!(norm_penalty(&[Vector::new(vec![2.0, 0.0, 0.0, 0.0])], 4).unwrap(), 1.0);
        assert!(norm_penalty(&[], 4).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psis: Vec<Vector> = (0..20_000)
            .map(|_| (0..8).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        // chi-square(8)/8 has variance 1/4; the mean of 20k has sd 0.0035
        assert_abs_diff_eq!(norm_penalty(&psis, 8).unwrap(), 1.0, epsilon = 0.015);
    }

    #[test]
    fn dual_update_cases() {
        assert_eq!(dual_update(0.3, 1.0, 1.0, 0.1), 0.3);
        assert_abs_diff_eq!(dual_update(0.3, 2.0, 1.0, 0.1), 0.4, epsilon = 1e-15);
        assert_eq!(dual_update(0.05, -9.0, 1.0, 0.1), 0.0);
    }

    fn toy_dataset() -> TrajectoryDataset {
        let trajectories = (0..6)
            .map(|i| Trajectory {
                id: i,
                observations: (0..20).map(|t| Vector::new(vec![t as f64 / 10.0, i as f64 / 6.0])).collect(),
            })
            .collect();
        TrajectoryDataset::new(trajectories, Source::Csv, 0.2, 0).unwrap()
    }

    fn small_cfg(steps: u64) -> TrainConfig {
        TrainConfig {
            batch_size: 16,
            steps,
            hidden_sizes: vec![8],
            repr_dim: 3,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_steps_returns_initialization() {
        let ds = toy_dataset();
        let cfg = small_cfg(0);
        let out = train(&ds, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = EncoderPair::init(2, &[8], 3, Activation::Tanh, 1.0, INITIAL_LAMBDA, &mut rng).unwrap();
        assert_eq!(out.encoder, init);
        assert!(out.curve.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_resumable() {
        let ds = toy_dataset();
        let a = train(&ds, &small_cfg(30)).unwrap();
        let b = train(&ds, &small_cfg(30)).unwrap();
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.curve, b.curve);
        let more = train_from(a.encoder.clone(), &ds, &small_cfg(10)).unwrap();
        assert_eq!(more.encoder.steps, 40);
        assert_eq!(more.curve.first().unwrap().step, 30);
        let steps: Vec<u64> = a.curve.iter().chain(&more.curve).map(|c| c.step).collect();
        assert!(steps.windows(2).all(|w| w[1] == w[0] + 1));
    }

    #[test]
    fn training_lowers_the_loss() {
        let ds = toy_dataset();
        let out = train(&ds, &small_cfg(400)).unwrap();
        let head: f64 = out.curve[..50].iter().map(|c| c.infonce).sum::<f64>() / 50.0;
        let tail: f64 = out.curve[350..].iter().map(|c| c.infonce).sum::<f64>() / 50.0;
        assert!(tail < head, "{head} -> {tail}");
    }

    #[test]
    fn config_parsing() {
        let cfg = TrainConfig::from_toml_str("batch_size = 32\noptimizer = \"sgd\"\nhidden_sizes = [16]\n").unwrap();
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.optimizer, Optimizer::Sgd);
        assert_eq!(cfg.repr_dim, 8);
        assert!(TrainConfig::from_toml_str("batch = 3\n").is_err());
        assert!(TrainConfig::from_toml_str("gamma = 1.5\n").is_err());
        let back = TrainConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn batch(b: usize, k: usize) -> impl Strategy<Value = (Matrix, Matrix)> {
            (
                proptest::collection::vec(-3.0f64..3.0, b * k),
                proptest::collection::vec(-3.0f64..3.0, b * k),
            )
                .prop_map(move |(p, q)| (Matrix::from_vec(b, k, p).unwrap(), Matrix::from_vec(b, k, q).unwrap()))
        }

        fn loss(p: &Matrix, q: &Matrix) -> f64 {
            infonce_symmetrized(&BatchReps::new(p.clone(), q.clone()).unwrap())
        }

        proptest! {
            #[test]
            fn permutation_invariant((p, q) in batch(5, 3), seed in 0u64..1000) {
                use rand::seq::SliceRandom;
                let mut order: Vec<usize> = (0..5).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let perm = |m: &Matrix| Matrix::from_rows(&order.iter().map(|&i| m.row(i).to_vec()).collect::<Vec<_>>()).unwrap();
                prop_assert!((loss(&p, &q) - loss(&perm(&p), &perm(&q))).abs() < 1e-9);
            }

            #[test]
            fn translation_invariant((p, q) in batch(4, 3), shift in proptest::collection::vec(-5.0f64..5.0, 3)) {
                let mv = |m: &Matrix| {
                    let mut m = m.clone();
                    for i in 0..m.rows() {
                        for (v, s) in m.row_mut(i).iter_mut().zip(&shift) {
                            *v += s;
                        }
                    }
                    m
                };
                prop_assert!((loss(&p, &q) - loss(&mv(&p), &mv(&q))).abs() < 1e-9);
            }
        }
    }
}
