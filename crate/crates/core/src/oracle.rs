//! Finite-state testbed: exact discounted occupancies, a directly
//! parameterized critic trained with the symmetrized objective, and the
//! checks that the trained critic is a log probability ratio.

use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::tensor::{Lu, Matrix, Vector};

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularChain {
    transition: Matrix,
    gamma: f64,
    initial_dist: Vec<f64>,
}

impl TabularChain {
    pub fn new(transition: Matrix, gamma: f64, initial_dist: Vec<f64>) -> Result<Self> {
        let s = transition.rows();
        if !transition.is_square() || s == 0 {
            return Err(Error::dims("TabularChain", "nonempty square transition", format!("{}x{}", s, transition.cols())));
        }
        if initial_dist.len() != s {
            return Err(Error::dims("TabularChain initial_dist", s, initial_dist.len()));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        for i in 0..s {
            let row = transition.row(i);
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!("transition row {i} is not a distribution")));
            }
        }
        if initial_dist.iter().any(|&p| !(p >= 0.0)) || (initial_dist.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidArgument("initial_dist is not a distribution".into()));
        }
        Ok(TabularChain {
            transition,
            gamma,
            initial_dist,
        })
    }

    /// Rows drawn from a flat Dirichlet, uniform initial distribution.
    pub fn random<R: Rng>(num_states: usize, gamma: f64, rng: &mut R) -> Result<Self> {
        let mut data = Vec::with_capacity(num_states * num_states);
        for _ in 0..num_states {
            let row: Vec<f64> = (0..num_states).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = row.iter().sum();
            data.extend(row.into_iter().map(|v| v / total));
        }
        let transition = Matrix::from_vec(num_states, num_states, data)?;
        Self::new(transition, gamma, vec![1.0 / num_states as f64; num_states])
    }

    pub fn num_states(&self) -> usize {
        self.transition.rows()
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }
}

/// `(1 - gamma) (I - gamma P)^{-1}`. The `t = 0` term is included, so the
/// current state carries weight `1 - gamma`.
pub fn discounted_occupancy(chain: &TabularChain) -> Result<Matrix> {
    let s = chain.num_states();
    let m = Matrix::identity(s).sub(&chain.transition.scale(chain.gamma))?;
    let lu = Lu::factor(&m)?;
    let mut occ = Matrix::zeros(s, s);
    for j in 0..s {
        let mut e = vec![0.0; s];
        e[j] = 1.0;
        let col = lu.solve(&e);
        for i in 0..s {
            occ.row_mut(i)[j] = (1.0 - chain.gamma) * col[i];
        }
    }
    Ok(occ)
}

/// Marginal of the future state: `sum_x p0(x) occ(x, .)`.
pub fn future_marginal(chain: &TabularChain, occ: &Matrix) -> Vec<f64> {
    let s = chain.num_states();
    (0..s)
        .map(|j| (0..s).map(|i| chain.initial_dist[i] * occ[(i, j)]).sum())
        .collect()
}

/// `log(occ(x+ | x) / p(x+))`, `None` where the pair has zero probability.
pub fn log_ratio(chain: &TabularChain, occ: &Matrix) -> Vec<Vec<Option<f64>>> {
    let marginal = future_marginal(chain, occ);
    let s = chain.num_states();
    (0..s)
        .map(|i| {
            (0..s)
                .map(|j| {
                    let joint = chain.initial_dist[i] * occ[(i, j)];
                    (joint > 0.0).then(|| (occ[(i, j)] / marginal[j]).ln())
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularCritic {
    pub f: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticFitConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub learning_rate: f64,
}

impl Default for CriticFitConfig {
    fn default() -> Self {
        CriticFitConfig {
            batch_size: 256,
            steps: 10_000,
            seed: 0,
            learning_rate: 0.5,
        }
    }
}

pub fn fit_tabular_critic(chain: &TabularChain, batch_size: usize, steps: usize, seed: u64) -> Result<TabularCritic> {
    let cfg = CriticFitConfig {
        batch_size,
        steps,
        seed,
        ..CriticFitConfig::default()
    };
    let s = chain.num_states();
    fit_tabular_critic_from(chain, Matrix::zeros(s, s), &cfg)
}

/// Stochastic ascent on the symmetrized objective over a directly
/// parameterized table. Anchors come from the initial distribution,
/// positives from the occupancy row. Each entry's gradient is divided by the
/// product of its anchor and positive marginals, which evens out the
/// curvature across entries. The step size decays as `t^-0.6` and the
/// returned table is the average of the second half of the iterates.
pub fn fit_tabular_critic_from(chain: &TabularChain, init: Matrix, cfg: &CriticFitConfig) -> Result<TabularCritic> {
    let s = chain.num_states();
    if s < 2 {
        return Err(Error::InvalidArgument("the tabular critic needs at least two states".into()));
    }
    if init.rows() != s || init.cols() != s {
        return Err(Error::dims("fit_tabular_critic init", format!("{s}x{s}"), format!("{}x{}", init.rows(), init.cols())));
    }
    let b = cfg.batch_size;
    if b < 2 || cfg.steps == 0 {
        return Err(Error::InvalidArgument("critic fitting needs batch_size >= 2 and steps >= 1".into()));
    }
    let occ = discounted_occupancy(chain)?;
    let start = WeightedIndex::new(&chain.initial_dist).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let futures = (0..s)
        .map(|i| WeightedIndex::new(occ.row(i)).map_err(|e| Error::InvalidArgument(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut f = init.data().to_vec();
    let mut grad = vec![0.0; s * s];
    let marginal = future_marginal(chain, &occ);
    let precond: Vec<f64> = (0..s * s)
        .map(|idx| {
            let w = chain.initial_dist[idx / s] * marginal[idx % s];
            if w > 0.0 {
                1.0 / w
            } else {
                0.0
            }
        })
        .collect();
    let mut avg = vec![0.0; s * s];
    let avg_from = cfg.steps / 2;
    let mut logits = vec![0.0; b * b];
    let mut col_lse = vec![0.0; b];

    for step in 0..cfg.steps {
        let xs: Vec<usize> = (0..b).map(|_| start.sample(&mut rng)).collect();
        let ys: Vec<usize> = xs.iter().map(|&x| futures[x].sample(&mut rng)).collect();
        for i in 0..b {
            for j in 0..b {
                logits[i * b + j] = f[xs[i] * s + ys[j]];
            }
        }
        for (j, out) in col_lse.iter_mut().enumerate() {
            *out = log_sum_exp((0..b).map(|i| logits[i * b + j]));
        }
        grad.fill(0.0);
        let inv_b = 1.0 / b as f64;
        for i in 0..b {
            let row = &logits[i * b..(i + 1) * b];
            let row_lse = log_sum_exp(row.iter().copied());
            for j in 0..b {
                let mut g = -(row[j] - row_lse).exp() - (row[j] - col_lse[j]).exp();
                if i == j {
                    g += 2.0;
                }
                grad[xs[i] * s + ys[j]] += g * inv_b;
            }
        }
        let lr = cfg.learning_rate / (1.0 + step as f64 / 100.0).powf(0.6);
        for ((v, g), p) in f.iter_mut().zip(&grad).zip(&precond) {
            *v += lr * g * p;
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(format!("critic table became non-finite at step {step}")));
        }
        if step >= avg_from {
            let w = 1.0 / (step - avg_from + 1) as f64;
            for (a, v) in avg.iter_mut().zip(&f) {
                *a += (v - *a) * w;
            }
        }
    }
    Ok(TabularCritic {
        f: Matrix::from_vec(s, s, avg)?,
    })
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption2Report {
    /// Mean of `f - log ratio` over the compared pairs.
    pub offset: f64,
    /// Largest `|f - log ratio - offset|`.
    pub max_abs_dev: f64,
    pub compared_pairs: usize,
    /// Pairs with zero probability, left out of the comparison.
    pub excluded_pairs: usize,
    /// Variance across rows of the per-row mean offset.
    pub row_offset_variance: f64,
}

impl fmt::Display for Assumption2Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "offset: {:.6}", self.offset)?;
        writeln!(f, "max_abs_dev: {:.6}", self.max_abs_dev)?;
        writeln!(f, "compared_pairs: {}", self.compared_pairs)?;
        writeln!(f, "excluded_pairs: {}", self.excluded_pairs)?;
        write!(f, "row_offset_variance: {:.6e}", self.row_offset_variance)
    }
}

pub fn verify_assumption2(critic: &TabularCritic, chain: &TabularChain) -> Result<Assumption2Report> {
    let s = chain.num_states();
    if critic.f.rows() != s || critic.f.cols() != s {
        return Err(Error::dims(
            "verify_assumption2",
            format!("{s}x{s}"),
            format!("{}x{}", critic.f.rows(), critic.f.cols()),
        ));
    }
    let ratio = log_ratio(chain, &discounted_occupancy(chain)?);
    let mut gaps = Vec::new();
    let mut row_means = Vec::new();
    let mut excluded = 0;
    for (i, row) in ratio.iter().enumerate() {
        let start = gaps.len();
        for (j, r) in row.iter().enumerate() {
            match r {
                Some(r) => gaps.push(critic.f[(i, j)] - r),
                None => excluded += 1,
            }
        }
        let row_gaps = &gaps[start..];
        if !row_gaps.is_empty() {
            row_means.push(row_gaps.iter().sum::<f64>() / row_gaps.len() as f64);
        }
    }
    if gaps.is_empty() {
        return Err(Error::Empty("no pair has positive probability"));
    }
    let offset = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let max_abs_dev = gaps.iter().map(|g| (g - offset).abs()).fold(0.0, f64::max);
    let rm = row_means.iter().sum::<f64>() / row_means.len() as f64;
    let row_offset_variance = row_means.iter().map(|m| (m - rm).powi(2)).sum::<f64>() / row_means.len() as f64;
    Ok(Assumption2Report {
        offset,
        max_abs_dev,
        compared_pairs: gaps.len(),
        excluded_pairs: excluded,
        row_offset_variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformityEntropy {
    /// Mean over `i` of `log mean_{j != i} exp(-|psi_i - psi_j|^2 / 2)`.
    pub uniformity: f64,
    /// Leave-one-out estimate with a unit-covariance Gaussian kernel.
    pub entropy: f64,
    /// `uniformity + entropy - (k/2) log(2 pi)`.
    pub identity_residual: f64,
}

impl fmt::Display for UniformityEntropy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "uniformity: {:.12}", self.uniformity)?;
        writeln!(f, "entropy_estimate: {:.12}", self.entropy)?;
        write!(f, "identity_residual: {:.3e}", self.identity_residual)
    }
}

/// Computes both sides independently and fails if they disagree by more
/// than `1e-10`.
pub fn uniformity_entropy_check(psis: &[Vector]) -> Result<UniformityEntropy> {
    let n = psis.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples, got {n}")));
    }
    let k = psis[0].dim();
    if let Some(bad) = psis.iter().find(|p| p.dim() != k) {
        return Err(Error::dims("uniformity_entropy_check", k, bad.dim()));
    }
    let half_log_2pi = 0.5 * k as f64 * std::f64::consts::TAU.ln();
    let log_others = ((n - 1) as f64).ln();
    let (mut uniformity, mut entropy) = (0.0, 0.0);
    for (i, p) in psis.iter().enumerate() {
        let sq: Vec<f64> = psis
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| p.dist_sq(q))
            .collect();
        uniformity += log_sum_exp(sq.iter().map(|d| -0.5 * d)) - log_others;
        // log N(psi_i; psi_j, I)
        let log_kernel = sq.iter().map(|d| -0.5 * d - half_log_2pi);
        entropy -= log_sum_exp(log_kernel) - log_others;
    }
    uniformity /= n as f64;
    entropy /= n as f64;
    let identity_residual = uniformity + entropy - half_log_2pi;
    if identity_residual.abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "uniformity and entropy estimate disagree by {identity_residual:e}"
        )));
    }
    Ok(UniformityEntropy {
        uniformity,
        entropy,
        identity_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_distr::StandardNormal;

    fn chain(rows: &[Vec<f64>], gamma: f64) -> TabularChain {
        let s = rows.len();
        TabularChain::new(Matrix::from_rows(rows).unwrap(), gamma, vec![1.0 / s as f64; s]).unwrap()
    }

    /// Truncated power series, summed by repeated multiplication.
    fn occupancy_by_series(c: &TabularChain) -> Matrix {
        let s = c.num_states();
        let mut total = Matrix::zeros(s, s);
        let mut power = Matrix::identity(s);
        let mut w = 1.0 - c.gamma();
        for _ in 0..2000 {
            total = total.add(&power.scale(w)).unwrap();
            power = power.matmul(c.transition()).unwrap();
            w *= c.gamma();
        }
        total
    }

    #[test]
    fn flip_chain_occupancy() {
        let occ = discounted_occupancy(&chain(&[vec![0.0, 1.0], vec![1.0, 0.0]], 0.5)).unwrap();
        assert_abs_diff_eq!(occ[(0, 0)], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(occ[(0, 1)], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_chain_is_absorbing() {
        let c = chain(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], 0.9);
        let occ = discounted_occupancy(&c).unwrap();
        assert!(occ.max_abs_diff(&Matrix::identity(3)) < 1e-12);
    }

    #[test]
    fn tiny_gamma_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = TabularChain::random(6, 1e-9, &mut rng).unwrap();
        assert!(discounted_occupancy(&c).unwrap().max_abs_diff(&Matrix::identity(6)) < 1e-8);
    }

    #[test]
    fn matches_power_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = TabularChain::random(5, 0.9, &mut rng).unwrap();
        let occ = discounted_occupancy(&c).unwrap();
        assert!(occ.max_abs_diff(&occupancy_by_series(&c)) < 1e-12);
    }

    #[test]
    fn bad_chains_rejected() {
        let p = Matrix::from_rows(&[vec![0.5, 0.4], vec![0.0, 1.0]]).unwrap();
        assert!(TabularChain::new(p, 0.5, vec![0.5, 0.5]).is_err());
        let p = Matrix::identity(2);
        assert!(TabularChain::new(p.clone(), 1.0, vec![0.5, 0.5]).is_err());
        assert!(TabularChain::new(p.clone(), 0.5, vec![0.5, 0.6]).is_err());
        assert!(TabularChain::new(p, 0.5, vec![1.0]).is_err());
    }

    fn exact_critic(c: &TabularChain) -> TabularCritic {
        let ratio = log_ratio(c, &discounted_occupancy(c).unwrap());
        let s = c.num_states();
        let f = Matrix::from_fn(s, s, |i, j| ratio[i][j].unwrap_or(-50.0));
        TabularCritic { f }
    }

    #[test]
    fn analytic_critic_has_zero_deviation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = TabularChain::random(5, 0.9, &mut rng).unwrap();
        let mut critic = exact_critic(&c);
        let r = verify_assumption2(&critic, &c).unwrap();
        assert!(r.max_abs_dev < 1e-12 && r.offset.abs() < 1e-12);
        critic.f = Matrix::from_fn(5, 5, |i, j| critic.f[(i, j)] + 3.7);
        let shifted = verify_assumption2(&critic, &c).unwrap();
        assert!(shifted.max_abs_dev < 1e-12);
        assert_abs_diff_eq!(shifted.offset, 3.7, epsilon = 1e-12);
    }

    #[test]
    fn zero_probability_pairs_excluded() {
        // state 2 is never reached from state 0 or 1, and never starts
        let p = Matrix::from_rows(&[vec![0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let c = TabularChain::new(p, 0.8, vec![0.5, 0.5, 0.0]).unwrap();
        let r = verify_assumption2(&exact_critic(&c), &c).unwrap();
        assert_eq!(r.excluded_pairs, 5);
        assert_eq!(r.compared_pairs, 4);
    }

    #[test]
    fn dimension_mismatch() {
        let c = chain(&[vec![0.0, 1.0], vec![1.0, 0.0]], 0.5);
        let critic = TabularCritic { f: Matrix::zeros(3, 3) };
        assert!(verify_assumption2(&critic, &c).is_err());
    }

    #[test]
    fn symmetric_two_state_critic() {
        let c = chain(&[vec![0.7, 0.3], vec![0.3, 0.7]], 0.9);
        let r = verify_assumption2(&fit_tabular_critic(&c, 128, 4000, 1).unwrap(), &c).unwrap();
        assert!(r.max_abs_dev <= 0.05, "{r}");
    }

    #[test]
    fn uniform_rows_critic() {
        // The t = 0 term keeps the current state in the occupancy, so even
        // with uniform rows the ratio is (1 - g + g/4) / (1/4) on the
        // diagonal and g off it: the critic is not flat.
        let g: f64 = 0.9;
        let c = chain(&vec![vec![0.25; 4]; 4], g);
        let critic = fit_tabular_critic(&c, 128, 4000, 2).unwrap();
        let r = verify_assumption2(&critic, &c).unwrap();
        assert!(r.max_abs_dev <= 0.05, "{r}");
        let gap = critic.f[(1, 1)] - critic.f[(1, 2)];
        let expected = ((1.0 - g + g / 4.0) / (g / 4.0)).ln();
        assert!((gap - expected).abs() < 0.05, "{gap} vs {expected}");
    }

    #[test]
    fn five_state_critic_matches_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = TabularChain::random(5, 0.9, &mut rng).unwrap();
        let r = verify_assumption2(&fit_tabular_critic(&c, 256, 10_000, 3).unwrap(), &c).unwrap();
        assert!(r.max_abs_dev <= 0.05, "{r}");
        assert!(r.row_offset_variance < 1e-3, "{r}");
    }

    #[test]
    fn constant_init_only_shifts_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = TabularChain::random(4, 0.8, &mut rng).unwrap();
        let cfg = CriticFitConfig {
            steps: 300,
            ..CriticFitConfig::default()
        };
        let a = fit_tabular_critic_from(&c, Matrix::zeros(4, 4), &cfg).unwrap();
        let b = fit_tabular_critic_from(&c, Matrix::from_fn(4, 4, |_, _| 2.5), &cfg).unwrap();
        for (x, y) in a.f.data().iter().zip(b.f.data()) {
            assert_abs_diff_eq!(y - x, 2.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn deviation_shrinks_with_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = TabularChain::random(5, 0.9, &mut rng).unwrap();
        let dev = |steps: usize| -> f64 {
            (0..3)
                .map(|seed| verify_assumption2(&fit_tabular_critic(&c, 128, steps, seed).unwrap(), &c).unwrap().max_abs_dev)
                .sum::<f64>()
                / 3.0
        };
        let (short, mid, long) = (dev(1000), dev(5000), dev(20_000));
        assert!(short > mid && mid > long, "{short} {mid} {long}");
    }

    #[test]
    fn critic_rejects_tiny_inputs() {
        let c = chain(&[vec![1.0]], 0.5);
        assert!(fit_tabular_critic(&c, 16, 10, 0).is_err());
        let c = chain(&[vec![0.0, 1.0], vec![1.0, 0.0]], 0.5);
        assert!(fit_tabular_critic(&c, 1, 10, 0).is_err());
    }

    fn normal_cloud(n: usize, k: usize, seed: u64) -> Vec<Vector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..k).map(|_| rand::Rng::sample::<f64, _>(&mut rng, StandardNormal)).collect())
            .collect()
    }

    #[test]
    fn identical_points_entropy() {
        let psis = vec![Vector::new(vec![0.3, -1.0, 2.0]); 10];
        let r = uniformity_entropy_check(&psis).unwrap();
        assert_abs_diff_eq!(r.entropy, 1.5 * std::f64::consts::TAU.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.uniformity, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tight_cluster_has_lower_entropy() {
        let tight: Vec<Vector> = normal_cloud(200, 2, 1).into_iter().map(|v| v.scale(0.01)).collect();
        let spread: Vec<Vector> = normal_cloud(200, 2, 2)
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.add(&Vector::new(vec![if i % 2 == 0 { 50.0 } else { -50.0 }, 0.0])))
            .collect();
        let (a, b) = (uniformity_entropy_check(&tight).unwrap(), uniformity_entropy_check(&spread).unwrap());
        assert!(a.entropy < b.entropy);
    }

    #[test]
    fn standard_normal_entropy() {
        let psis = normal_cloud(5000, 2, 11);
        let r = uniformity_entropy_check(&psis).unwrap();
        // With a unit kernel the estimate converges to -E_x log N(x; 0, 2I),
        // the cross entropy of N(0, I) under N(0, 2I): log(4 pi) + 1/2,
        // not the entropy of N(0, I) itself.
        let target = (2.0 * std::f64::consts::TAU).ln() + 0.5;
        assert!((r.entropy - target).abs() < 0.15, "{} vs {target}", r.entropy);
    }

    #[test]
    fn needs_three_samples() {
        assert!(uniformity_entropy_check(&normal_cloud(2, 2, 0)).is_err());
    }

    proptest! {
        #[test]
        fn identity_holds_on_any_sample(seed in 0u64..500, n in 3usize..40, k in 1usize..6, scale in 0.01f64..20.0) {
            let psis: Vec<Vector> = normal_cloud(n, k, seed).into_iter().map(|v| v.scale(scale)).collect();
            let r = uniformity_entropy_check(&psis).unwrap();
            let half = 0.5 * k as f64 * std::f64::consts::TAU.ln();
            prop_assert!((r.uniformity + r.entropy - half).abs() <= 1e-10);
        }

        #[test]
        fn occupancy_rows_are_distributions(seed in 0u64..500, s in 2usize..8, gamma in 0.01f64..0.99) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = TabularChain::random(s, gamma, &mut rng).unwrap();
            let occ = discounted_occupancy(&c).unwrap();
            for i in 0..s {
                prop_assert!((occ.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-10);
                prop_assert!(occ.row(i).iter().all(|&p| p >= 0.0));
            }
        }
    }
}
