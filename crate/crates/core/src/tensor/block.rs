//! Symmetric positive definite block-tridiagonal systems.
//!
//! Both the solve and the marginal-covariance routine run a forward block-LU
//! sweep without cross-block pivoting. Every Schur complement of an SPD
//! matrix is itself SPD, so a failed Cholesky factorization of a Schur
//! complement is reported as [`Error::NotPositiveDefinite`] with the block
//! index where elimination broke down.

use crate::error::{Error, Result};
use crate::tensor::{Cholesky, Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    block_dim: usize,
    diag: Vec<Matrix>,
    /// `lower[i]` is block `(i + 1, i)`.
    lower: Vec<Matrix>,
    /// `upper[i]` is block `(i, i + 1)`.
    upper: Vec<Matrix>,
}

impl BlockTridiagonal {
    pub fn new(diag: Vec<Matrix>, lower: Vec<Matrix>, upper: Vec<Matrix>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::Empty("block-tridiagonal matrix needs at least one block"));
        }
        let k = diag[0].rows();
        if lower.len() != n - 1 || upper.len() != n - 1 {
            return Err(Error::dims(
                "BlockTridiagonal::new",
                format!("{} off-diagonal blocks", n - 1),
                format!("{} lower / {} upper", lower.len(), upper.len()),
            ));
        }
        for (i, b) in diag.iter().chain(&lower).chain(&upper).enumerate() {
            if b.rows() != k || b.cols() != k {
                return Err(Error::dims(
                    "BlockTridiagonal::new",
                    format!("{k}x{k}"),
                    format!("{}x{} (block {i})", b.rows(), b.cols()),
                ));
            }
        }
        Ok(BlockTridiagonal {
            block_dim: k,
            diag,
            lower,
            upper,
        })
    }

    /// Symmetric variant: `upper[i] = lower[i]^T`.
    pub fn symmetric(diag: Vec<Matrix>, lower: Vec<Matrix>) -> Result<Self> {
        let upper = lower.iter().map(Matrix::transpose).collect();
        Self::new(diag, lower, upper)
    }

    pub fn num_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn diag(&self) -> &[Matrix] {
        &self.diag
    }

    pub fn lower(&self) -> &[Matrix] {
        &self.lower
    }

    pub fn upper(&self) -> &[Matrix] {
        &self.upper
    }

    /// Dense `nk x nk` matrix.
    pub fn assemble(&self) -> Matrix {
        let k = self.block_dim;
        let n = self.num_blocks();
        let mut m = Matrix::zeros(n * k, n * k);
        let mut put = |bi: usize, bj: usize, b: &Matrix| {
            for i in 0..k {
                for j in 0..k {
                    m[(bi * k + i, bj * k + j)] = b[(i, j)];
                }
            }
        };
        for (i, d) in self.diag.iter().enumerate() {
            put(i, i, d);
        }
        for (i, l) in self.lower.iter().enumerate() {
            put(i + 1, i, l);
        }
        for (i, u) in self.upper.iter().enumerate() {
            put(i, i + 1, u);
        }
        m
    }

    /// Forward Schur complements `S_0 = D_0`, `S_i = D_i - L_{i-1} S_{i-1}^{-1} U_{i-1}`
    /// together with their Cholesky factors.
    fn forward_sweep(&self) -> Result<(Vec<Matrix>, Vec<Cholesky>)> {
        let n = self.num_blocks();
        let mut schur = Vec::with_capacity(n);
        let mut factors: Vec<Cholesky> = Vec::with_capacity(n);
        for i in 0..n {
            let s = if i == 0 {
                self.diag[0].clone()
            } else {
                let prev: &Cholesky = &factors[i - 1];
                let x = prev.solve_matrix(&self.upper[i - 1]);
                self.diag[i].sub(&self.lower[i - 1].matmul(&x)?)?
            };
            let ch = s.cholesky().map_err(|e| with_block(e, i))?;
            schur.push(s);
            factors.push(ch);
        }
        Ok((schur, factors))
    }

    /// Backward Schur complements `T_{n-1} = D_{n-1}`,
    /// `T_i = D_i - U_i T_{i+1}^{-1} L_i`.
    fn backward_sweep(&self) -> Result<Vec<Matrix>> {
        let n = self.num_blocks();
        let mut out = vec![Matrix::zeros(0, 0); n];
        let mut next: Option<Cholesky> = None;
        for i in (0..n).rev() {
            let t = match &next {
                None => self.diag[i].clone(),
                Some(ch) => {
                    let x = ch.solve_matrix(&self.lower[i]);
                    self.diag[i].sub(&self.upper[i].matmul(&x)?)?
                }
            };
            next = Some(t.cholesky().map_err(|e| with_block(e, i))?);
            out[i] = t;
        }
        Ok(out)
    }
}

fn with_block(e: Error, block: usize) -> Error {
    match e {
        Error::NotPositiveDefinite { pivot, .. } => Error::NotPositiveDefinite { block, pivot },
        other => other,
    }
}

/// Solves `m x = rhs` in `O(n k^3)` for an SPD block-tridiagonal `m`;
/// `rhs` is the stacked vector of length `n * k`.
pub fn block_tridiag_solve(m: &BlockTridiagonal, rhs: &[f64]) -> Result<Vector> {
    let n = m.num_blocks();
    let k = m.block_dim();
    if rhs.len() != n * k {
        return Err(Error::dims("block_tridiag_solve", n * k, rhs.len()));
    }
    let (_, factors) = m.forward_sweep()?;
    let mut y: Vec<Vector> = Vec::with_capacity(n);
    for i in 0..n {
        let r = Vector::new(rhs[i * k..(i + 1) * k].to_vec());
        let yi = if i == 0 {
            r
        } else {
            let z = factors[i - 1].solve(&y[i - 1]);
            r.sub(&m.lower[i - 1].matvec(&z)?)
        };
        y.push(yi);
    }
    let mut x = vec![Vector::zeros(k); n];
    for i in (0..n).rev() {
        let r = if i + 1 == n {
            y[i].clone()
        } else {
            y[i].sub(&m.upper[i].matvec(&x[i + 1])?)
        };
        x[i] = factors[i].solve(&r);
    }
    Ok(x.into_iter().flat_map(Vector::into_inner).collect())
}

/// Diagonal `k x k` blocks of `m^{-1}`.
///
/// Uses `(m^{-1})_{ii} = (S_i + T_i - D_i)^{-1}` with the forward and
/// backward Schur complements.
pub fn block_tridiag_marginal_covs(m: &BlockTridiagonal) -> Result<Vec<Matrix>> {
    let (schur, _) = m.forward_sweep()?;
    let back = m.backward_sweep()?;
    schur
        .iter()
        .zip(&back)
        .zip(&m.diag)
        .enumerate()
        .map(|(i, ((s, t), d))| {
            let p = s.add(t)?.sub(d)?.symmetrized();
            let ch = p.cholesky().map_err(|e| with_block(e, i))?;
            Ok(ch.inverse())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::dense_solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn second_difference(n: usize, k: usize) -> BlockTridiagonal {
        let i = Matrix::identity(k);
        BlockTridiagonal::symmetric(vec![i.scale(2.0); n], vec![i.scale(-1.0); n - 1]).unwrap()
    }

    /// Random SPD block-tridiagonal built as `B^T B + eps I` restricted to the
    /// band: block-diagonally-dominant blocks make it SPD for sure.
    pub(crate) fn random_spd(rng: &mut ChaCha8Rng, n: usize, k: usize) -> BlockTridiagonal {
        let rand_block = |rng: &mut ChaCha8Rng| Matrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
        let lower: Vec<Matrix> = (0..n.saturating_sub(1)).map(|_| rand_block(rng)).collect();
        let diag = (0..n)
            .map(|_| {
                let g = rand_block(rng);
                // 2 * (max row sum of off blocks) + 1 dominance margin
                let bump = 2.0 * k as f64 + 1.0;
                g.t_matmul(&g).unwrap().add(&Matrix::identity(k).scale(bump)).unwrap()
            })
            .collect();
        BlockTridiagonal::symmetric(diag, lower).unwrap()
    }

    #[test]
    fn single_block_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_spd(&mut rng, 1, 4);
        let rhs = [1.0, -2.0, 0.5, 3.0];
        let x = block_tridiag_solve(&m, &rhs).unwrap();
        let y = dense_solve(&m.diag()[0], &rhs).unwrap();
        assert!(x.sub(&y).max_abs() < 1e-12);
    }

    #[test]
    fn second_difference_endpoints_give_linear_profile() {
        // rhs (a, 0, ..., 0, b) with the second-difference operator gives
        // x_i = (1 - i/(n+1)) a + i/(n+1) b, i = 1..n
        for n in 1..8 {
            let k = 2;
            let m = second_difference(n, k);
            let a = [1.0, -2.0];
            let b = [4.0, 3.0];
            let mut rhs = vec![0.0; n * k];
            rhs[..k].copy_from_slice(&a);
            for j in 0..k {
                rhs[(n - 1) * k + j] += b[j];
            }
            let x = block_tridiag_solve(&m, &rhs).unwrap();
            for i in 1..=n {
                let lam = i as f64 / (n + 1) as f64;
                for j in 0..k {
                    let expect = (1.0 - lam) * a[j] + lam * b[j];
                    assert!((x[(i - 1) * k + j] - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn random_matches_dense_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = random_spd(&mut rng, 6, 4);
        let rhs: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = block_tridiag_solve(&m, &rhs).unwrap();
        let y = dense_solve(&m.assemble(), &rhs).unwrap();
        assert!(x.sub(&y).max_abs() <= 1e-8 * y.max_abs());
    }

    #[test]
    fn marginal_of_single_block() {
        let m = BlockTridiagonal::symmetric(vec![Matrix::identity(3).scale(2.0)], vec![]).unwrap();
        let covs = block_tridiag_marginal_covs(&m).unwrap();
        assert!(covs[0].max_abs_diff(&Matrix::identity(3).scale(0.5)) < 1e-15);
    }

    #[test]
    fn marginal_second_difference_scalar() {
        let covs = block_tridiag_marginal_covs(&second_difference(3, 1)).unwrap();
        let got: Vec<f64> = covs.iter().map(|c| c[(0, 0)]).collect();
        // dense inverse oracle
        let dense = second_difference(3, 1).assemble().inverse().unwrap();
        for i in 0..3 {
            assert!((got[i] - dense[(i, i)]).abs() < 1e-12);
        }
        let expect = [0.75, 1.0, 0.75];
        for (g, e) in got.iter().zip(expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_random_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, k) = (5, 3);
        let m = random_spd(&mut rng, n, k);
        let inv = m.assemble().inverse().unwrap();
        let covs = block_tridiag_marginal_covs(&m).unwrap();
        for (b, c) in covs.iter().enumerate() {
            for i in 0..k {
                for j in 0..k {
                    assert!((c[(i, j)] - inv[(b * k + i, b * k + j)]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn indefinite_reports_block() {
        let i = Matrix::identity(2);
        // [[1, -2], [-2, 1]] pattern is indefinite at the second block
        let m = BlockTridiagonal::symmetric(vec![i.clone(), i.clone()], vec![i.scale(-2.0)]).unwrap();
        match block_tridiag_solve(&m, &[1.0, 0.0, 0.0, 1.0]) {
            Err(Error::NotPositiveDefinite { block, .. }) => assert_eq!(block, 1),
            other => panic!("expected non-SPD error, got {other:?}"),
        }
        assert!(block_tridiag_marginal_covs(&m).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        let i = Matrix::identity(2);
        assert!(BlockTridiagonal::symmetric(vec![i.clone(), i.clone()], vec![]).is_err());
        assert!(BlockTridiagonal::symmetric(vec![i.clone(), Matrix::identity(3)], vec![i.clone()]).is_err());
        assert!(BlockTridiagonal::symmetric(vec![], vec![]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn solve_matches_dense(seed in any::<u64>(), n in 1usize..=16, k in 1usize..=8) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = random_spd(&mut rng, n, k);
                let rhs: Vec<f64> = (0..n * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let x = block_tridiag_solve(&m, &rhs).unwrap();
                let y = dense_solve(&m.assemble(), &rhs).unwrap();
                prop_assert!(x.sub(&y).max_abs() <= 1e-8 * y.max_abs().max(1e-300));
            }

            #[test]
            fn marginals_symmetric_pd(seed in any::<u64>(), n in 1usize..=8, k in 1usize..=6) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = random_spd(&mut rng, n, k);
                for c in block_tridiag_marginal_covs(&m).unwrap() {
                    prop_assert!(c.asymmetry() <= 1e-10);
                    prop_assert!(c.cholesky().is_ok());
                }
            }
        }
    }
}
