//! Standardized PCA via symmetric eigendecomposition of the covariance matrix.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::Dataset;

const MODEL_FORMAT_VERSION: u32 = 1;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Largest power of two not above `n_features`, and at least 2.
pub fn choose_components(n_features: usize) -> Result<usize> {
    if n_features == 0 {
        return Err(Error::InvalidArgument(
            "cannot choose components for zero features".to_string(),
        ));
    }
    let p = 1usize << (usize::BITS - 1 - n_features.leading_zeros());
    Ok(p.max(2))
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// the columns of the second matrix.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("matrix is {:?}, not square", a.dim())));
    }
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off < JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    Ok((values, vectors))
}

/// Fitted standardization and principal axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// k × d, rows are unit-norm principal axes.
    pub components: Vec<Vec<f64>>,
    /// Top-k eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// All d eigenvalues, descending; the tail past k is what truncation drops.
    pub spectrum: Vec<f64>,
    pub k: usize,
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn components_matrix(&self) -> Array2<f64> {
        let d = self.n_features();
        Array2::from_shape_fn((self.k, d), |(i, j)| self.components[i][j])
    }

    fn standardized(&self, d: &Dataset) -> Result<Array2<f64>> {
        let cols: Vec<usize> = self
            .feature_names
            .iter()
            .map(|n| d.column_index(n))
            .collect::<Result<_>>()?;
        Ok(Array2::from_shape_fn((d.n_rows(), cols.len()), |(r, j)| {
            (d.get(r, cols[j]) - self.mu[j]) / self.sigma[j]
        }))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let model: PcaModel = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported PCA model version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

/// Fits PCA on z-scored feature columns.
pub fn fit(d: &Dataset, feature_columns: &[String], k: usize) -> Result<PcaModel> {
    let n = d.n_rows();
    let dim = feature_columns.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 rows, got {n}"
        )));
    }
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!("k = {k} not in 1..={dim}")));
    }
    let cols: Vec<usize> = feature_columns
        .iter()
        .map(|name| d.column_index(name))
        .collect::<Result<_>>()?;
    let x = Array2::from_shape_fn((n, dim), |(r, j)| d.get(r, cols[j]));

    let mu = x.mean_axis(Axis(0)).expect("n >= 2");
    let mut sigma = Vec::with_capacity(dim);
    for (j, name) in feature_columns.iter().enumerate() {
        let var = x.column(j).iter().map(|v| (v - mu[j]).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if !sd.is_finite() || sd < 1e-12 * mu[j].abs().max(1.0) {
            return Err(Error::ZeroVariance(name.clone()));
        }
        sigma.push(sd);
    }

    let mut z = x;
    for (j, mut col) in z.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| (v - mu[j]) / sigma[j]);
    }
    let cov = z.t().dot(&z) / (n - 1) as f64;
    let (values, vectors) = symmetric_eigen(&cov)?;

    let spectrum: Vec<f64> = values.iter().map(|&l| l.max(0.0)).collect();
    let mut components = Vec::with_capacity(k);
    for i in 0..k {
        let mut axis = vectors.column(i).to_vec();
        let pivot =
            axis.iter().enumerate().fold(
                0,
                |best, (j, v)| if v.abs() > axis[best].abs() { j } else { best },
            );
        if axis[pivot] < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(axis);
    }

    Ok(PcaModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_names: feature_columns.to_vec(),
        mu: mu.to_vec(),
        sigma,
        components,
        eigenvalues: spectrum[..k].to_vec(),
        spectrum,
        k,
    })
}

/// Component scores `((X - mu) / sigma) · componentsᵀ`, n × k.
pub fn project(m: &PcaModel, d: &Dataset) -> Result<Array2<f64>> {
    Ok(m.standardized(d)?.dot(&m.components_matrix().t()))
}

/// Feature values `(Z · components) * sigma + mu`, n × d, in model feature order.
pub fn reconstruct_values(m: &PcaModel, z: &Array2<f64>) -> Result<Array2<f64>> {
    if z.ncols() != m.k {
        return Err(Error::Shape(format!(
            "component table has width {}, model has k = {}",
            z.ncols(),
            m.k
        )));
    }
    let mut x = z.dot(&m.components_matrix());
    for (j, mut col) in x.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| v * m.sigma[j] + m.mu[j]);
    }
    Ok(x)
}

pub fn reconstruct(m: &PcaModel, z: &Array2<f64>) -> Result<Dataset> {
    Dataset::new(m.feature_names.clone(), reconstruct_values(m, z)?, None)
}
