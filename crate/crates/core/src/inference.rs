//! Closed-form Gaussian inference over representations.
//!
//! With the norm budget `c` the learned critic implies the transition
//! `psi' | psi ~ N((c/(c+1)) A psi, (c/(c+1)) I)`. Prediction, single
//! waypoint posteriors and chains of waypoints all follow from Gaussian
//! conditioning on that model.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{block_tridiag_marginal_covs, block_tridiag_solve, BlockTridiagonal, Matrix, Vector};

/// Symmetry tolerance accepted for covariance and precision matrices.
const SYM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefForm {
    /// `(mean, covariance)`
    Moment,
    /// `(eta, precision)` with `mean = precision^-1 eta`
    Canonical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    form: BeliefForm,
    vector: Vector,
    matrix: Matrix,
}

impl GaussianBelief {
    pub fn moment(mean: Vector, cov: Matrix) -> Result<Self> {
        Self::build(BeliefForm::Moment, mean, cov)
    }

    pub fn canonical(eta: Vector, precision: Matrix) -> Result<Self> {
        Self::build(BeliefForm::Canonical, eta, precision)
    }

    fn build(form: BeliefForm, vector: Vector, matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != vector.dim() {
            return Err(Error::dims(
                "GaussianBelief",
                format!("{0}x{0} matrix", vector.dim()),
                format!("{}x{}", matrix.rows(), matrix.cols()),
            ));
        }
        let scale = matrix.max_abs().max(1.0);
        if matrix.asymmetry() > SYM_TOL * scale {
            return Err(Error::InvalidArgument(format!(
                "belief matrix is not symmetric (asymmetry {:.3e})",
                matrix.asymmetry()
            )));
        }
        matrix.cholesky()?;
        Ok(GaussianBelief { form, vector, matrix })
    }

    pub fn form(&self) -> BeliefForm {
        self.form
    }

    pub fn dim(&self) -> usize {
        self.vector.dim()
    }

    pub fn mean(&self) -> Vector {
        match self.form {
            BeliefForm::Moment => self.vector.clone(),
            BeliefForm::Canonical => self.matrix.cholesky().expect("checked SPD").solve(&self.vector),
        }
    }

    pub fn covariance(&self) -> Matrix {
        match self.form {
            BeliefForm::Moment => self.matrix.clone(),
            BeliefForm::Canonical => self.matrix.cholesky().expect("checked SPD").inverse(),
        }
    }

    pub fn precision(&self) -> Matrix {
        match self.form {
            BeliefForm::Moment => self.matrix.cholesky().expect("checked SPD").inverse(),
            BeliefForm::Canonical => self.matrix.clone(),
        }
    }

    pub fn to_moment(&self) -> GaussianBelief {
        GaussianBelief {
            form: BeliefForm::Moment,
            vector: self.mean(),
            matrix: self.covariance(),
        }
    }

    pub fn to_canonical(&self) -> GaussianBelief {
        match self.form {
            BeliefForm::Canonical => self.clone(),
            BeliefForm::Moment => {
                let chol = self.matrix.cholesky().expect("checked SPD");
                GaussianBelief {
                    form: BeliefForm::Canonical,
                    vector: chol.solve(&self.vector),
                    matrix: chol.inverse(),
                }
            }
        }
    }
}

/// Exact multivariate normal log density.
pub fn log_density(belief: &GaussianBelief, x: &[f64]) -> Result<f64> {
    if x.len() != belief.dim() {
        return Err(Error::dims("log_density", belief.dim(), x.len()));
    }
    let k = belief.dim() as f64;
    let (mean, cov) = (belief.mean(), belief.covariance());
    let chol = cov.cholesky()?;
    let diff: Vec<f64> = x.iter().zip(mean.iter()).map(|(a, b)| a - b).collect();
    let sol = chol.solve(&diff);
    let maha: f64 = diff.iter().zip(sol.iter()).map(|(a, b)| a * b).sum();
    Ok(-0.5 * (maha + chol.log_det() + k * (2.0 * PI).ln()))
}

/// Log densities of many points under one belief, sharing one factorization.
pub fn log_density_many(belief: &GaussianBelief, xs: &[Vector]) -> Result<Vec<f64>> {
    let k = belief.dim();
    let (mean, cov) = (belief.mean(), belief.covariance());
    let chol = cov.cholesky()?;
    let base = chol.log_det() + k as f64 * (2.0 * PI).ln();
    xs.iter()
        .map(|x| {
            if x.dim() != k {
                return Err(Error::dims("log_density", k, x.dim()));
            }
            let diff = x.sub(&mean);
            let maha = diff.dot(&chol.solve(&diff));
            Ok(-0.5 * (maha + base))
        })
        .collect()
}

fn check_inputs(op: &'static str, psis: &[&Vector], a: &Matrix, c: f64) -> Result<usize> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("{op}: c must be positive and finite, got {c}")));
    }
    if !a.is_square() {
        return Err(Error::dims(op, "square A", format!("{}x{}", a.rows(), a.cols())));
    }
    let k = a.rows();
    for p in psis {
        if p.dim() != k {
            return Err(Error::dims(op, k, p.dim()));
        }
    }
    Ok(k)
}

fn shrink(c: f64) -> f64 {
    c / (c + 1.0)
}

/// `N((c/(c+1)) A psi0, (c/(c+1)) I)`
pub fn predict_future(psi0: &Vector, a: &Matrix, c: f64) -> Result<GaussianBelief> {
    let k = check_inputs("predict_future", &[psi0], a, c)?;
    let s = shrink(c);
    GaussianBelief::moment(a.matvec(psi0)?.scale(s), Matrix::identity(k).scale(s))
}

/// `N((c/(c+1)) A^T psiT, (c/(c+1)) I)`
pub fn predict_past(psi_t: &Vector, a: &Matrix, c: f64) -> Result<GaussianBelief> {
    predict_future(psi_t, &a.transpose(), c)
}

/// Diagonal block of the waypoint precision: `(c/(c+1)) A^T A + ((c+1)/c) I`.
fn waypoint_precision_block(a: &Matrix, c: f64) -> Matrix {
    let k = a.rows();
    a.t_matmul(a)
        .expect("square")
        .scale(shrink(c))
        .add(&Matrix::identity(k).scale((c + 1.0) / c))
        .expect("same shape")
        .symmetrized()
}

/// Posterior over one waypoint between `psi0` and `psiT`.
pub fn plan_single(psi0: &Vector, psi_t: &Vector, a: &Matrix, c: f64) -> Result<GaussianBelief> {
    check_inputs("plan_single", &[psi0, psi_t], a, c)?;
    let prec = waypoint_precision_block(a, c);
    let eta = a.t_matvec(psi_t)?.add(&a.matvec(psi0)?);
    let chol = prec.cholesky().map_err(|_| Error::NotPositiveDefinite { block: 0, pivot: 0 })?;
    GaussianBelief::moment(chol.solve(&eta), chol.inverse())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    /// Moment-form marginals, one per waypoint.
    pub waypoints: Vec<GaussianBelief>,
    /// `i / (n + 1)` for the interpolation planner, empty otherwise.
    pub interpolation_weights: Vec<f64>,
    /// Set when the covariances come from a limiting approximation.
    pub approximate: bool,
}

impl PlanResult {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn means(&self) -> Vec<Vector> {
        self.waypoints.iter().map(GaussianBelief::mean).collect()
    }
}

/// Joint precision of `n` chained waypoints: diagonal blocks
/// `(c/(c+1)) A^T A + ((c+1)/c) I`, block `(i+1, i)` equal to `-A` and
/// block `(i, i+1)` equal to `-A^T`.
pub fn chain_precision(a: &Matrix, c: f64, n: usize) -> Result<BlockTridiagonal> {
    if n == 0 {
        return Err(Error::InvalidArgument("a chain needs at least one waypoint".into()));
    }
    let d = waypoint_precision_block(a, c);
    let neg_a = a.scale(-1.0);
    BlockTridiagonal::symmetric(vec![d; n], vec![neg_a; n - 1])
}

/// Shift vector `(A psi0, 0, ..., 0, A^T psiT)`; the two ends add when `n = 1`.
pub fn chain_eta(psi0: &Vector, psi_t: &Vector, a: &Matrix, n: usize) -> Result<Vector> {
    let k = a.rows();
    let mut eta = vec![0.0; n * k];
    let head = a.matvec(psi0)?;
    let tail = a.t_matvec(psi_t)?;
    for (e, h) in eta[..k].iter_mut().zip(head.iter()) {
        *e += h;
    }
    for (e, t) in eta[(n - 1) * k..].iter_mut().zip(tail.iter()) {
        *e += t;
    }
    Ok(Vector::new(eta))
}

/// Posterior marginals over `n` waypoints between `psi0` and `psiT`.
pub fn plan_chain(psi0: &Vector, psi_t: &Vector, n: usize, a: &Matrix, c: f64) -> Result<PlanResult> {
    let k = check_inputs("plan_chain", &[psi0, psi_t], a, c)?;
    let prec = chain_precision(a, c, n)?;
    let eta = chain_eta(psi0, psi_t, a, n)?;
    let means = block_tridiag_solve(&prec, &eta)?;
    let covs = block_tridiag_marginal_covs(&prec)?;
    let waypoints = covs
        .into_iter()
        .enumerate()
        .map(|(i, cov)| GaussianBelief::moment(Vector::new(means[i * k..(i + 1) * k].to_vec()), cov))
        .collect::<Result<Vec<_>>>()?;
    Ok(PlanResult {
        waypoints,
        interpolation_weights: Vec::new(),
        approximate: false,
    })
}

/// Convex combinations `(1 - l_i) A psi0 + l_i A^T psiT` with `l_i = i/(n+1)`.
/// Covariances are the large-`c` limit `i (n+1-i) / (n+1) I`, flagged as
/// approximate.
pub fn interpolate_special(psi0: &Vector, psi_t: &Vector, n: usize, a: &Matrix) -> Result<PlanResult> {
    let k = check_inputs("interpolate_special", &[psi0, psi_t], a, 1.0)?;
    if n == 0 {
        return Err(Error::InvalidArgument("a chain needs at least one waypoint".into()));
    }
    let fwd = a.matvec(psi0)?;
    let bwd = a.t_matvec(psi_t)?;
    let m = (n + 1) as f64;
    let weights: Vec<f64> = (1..=n).map(|i| i as f64 / m).collect();
    let waypoints = weights
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let i = (j + 1) as f64;
            GaussianBelief::moment(fwd.lerp(&bwd, l), Matrix::identity(k).scale(i * (m - i) / m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PlanResult {
        waypoints,
        interpolation_weights: weights,
        approximate: true,
    })
}
