use crate::error::{Error, Result};
use crate::tensor::{Matrix, Vector};

/// Principal component model: `components` holds orthonormal rows sorted by
/// descending explained variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vector,
    pub components: Matrix,
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn num_components(&self) -> usize {
        self.components.rows()
    }

    /// Coordinates of `x` in the component basis.
    pub fn project(&self, x: &[f64]) -> Result<Vector> {
        let centered: Vec<f64> = x.iter().zip(self.mean.iter()).map(|(a, m)| a - m).collect();
        self.components.matvec(&centered)
    }

    pub fn reconstruct(&self, coords: &[f64]) -> Result<Vector> {
        Ok(self.components.t_matvec(coords)?.add(&self.mean))
    }
}

/// Fits PCA through a Jacobi eigendecomposition of the sample covariance.
pub fn pca_fit(data: &[Vector], num_components: usize) -> Result<Pca> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pca_fit needs at least 2 samples, got {}",
            data.len()
        )));
    }
    let d = data[0].dim();
    if num_components == 0 || num_components > d {
        return Err(Error::InvalidArgument(format!(
            "num_components must be in 1..={d}, got {num_components}"
        )));
    }
    if let Some(bad) = data.iter().find(|v| v.dim() != d) {
        return Err(Error::dims("pca_fit", d, bad.dim()));
    }
    let n = data.len() as f64;
    let mut mean = vec![0.0; d];
    for v in data {
        for (m, x) in mean.iter_mut().zip(v.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = Matrix::zeros(d, d);
    for v in data {
        for i in 0..d {
            let ci = v[i] - mean[i];
            for j in i..d {
                cov[(i, j)] += ci * (v[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let c = cov[(i, j)] / (n - 1.0);
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    let (values, vectors) = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let order = &order[..num_components];
    let components = Matrix::from_fn(num_components, d, |r, c| vectors[(c, order[r])]);
    Ok(Pca {
        mean: Vector::new(mean),
        components,
        variances: order.iter().map(|&i| values[i]).collect(),
    })
}

/// Cyclic Jacobi rotations for a symmetric matrix. Returns eigenvalues and
/// a matrix whose columns are the matching unit eigenvectors.
pub fn jacobi_eigen(sym: &Matrix) -> (Vec<f64>, Matrix) {
    let n = sym.rows();
    let mut a = sym.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}
