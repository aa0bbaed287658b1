use nalgebra::{DMatrix, DVector};

use crate::density::{GaussianComponent, MixtureModel};
use crate::error::{check_dim, Error, Result};

/// Smallest weight represented by a finite logit.
const MIN_WEIGHT: f64 = 1e-300;

/// Mixture parameters in unconstrained coordinates: weight logits, means and
/// lower Cholesky factors whose diagonals are stored as logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalParams {
    pub logits: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub log_chols: Vec<DMatrix<f64>>,
}

impl VariationalParams {
    pub fn n_components(&self) -> usize {
        self.logits.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    pub fn from_mixture(m: &MixtureModel) -> Self {
        let logits = m.weights().iter().map(|w| w.max(MIN_WEIGHT).ln()).collect();
        let means = m.components().iter().map(|c| c.mean().clone()).collect();
        let log_chols = m
            .components()
            .iter()
            .map(|c| {
                let mut l = c.chol().clone();
                for i in 0..l.nrows() {
                    l[(i, i)] = l[(i, i)].ln();
                }
                l
            })
            .collect();
        Self { logits, means, log_chols }
    }

    pub fn weights(&self) -> Vec<f64> {
        let hi = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.logits.iter().map(|l| (l - hi).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    pub fn chol(&self, k: usize) -> DMatrix<f64> {
        let mut l = self.log_chols[k].lower_triangle();
        for i in 0..l.nrows() {
            l[(i, i)] = l[(i, i)].exp();
        }
        l
    }

    pub fn to_mixture(&self) -> Result<MixtureModel> {
        let comps = (0..self.n_components())
            .map(|k| GaussianComponent::new(self.means[k].clone(), self.chol(k)))
            .collect::<Result<Vec<_>>>()?;
        MixtureModel::new(comps, self.weights())
    }

    /// Number of scalars in the flat layout.
    pub fn n_params(&self) -> usize {
        let (k, d) = (self.n_components(), self.dim());
        k * (1 + d + d * (d + 1) / 2)
    }

    /// Logits, then all means, then each factor's lower triangle row by row.
    pub fn to_flat(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.logits);
        for m in &self.means {
            out.extend(m.iter());
        }
        for l in &self.log_chols {
            for i in 0..l.nrows() {
                for j in 0..=i {
                    out.push(l[(i, j)]);
                }
            }
        }
        DVector::from_vec(out)
    }

    pub fn from_flat(n_components: usize, dim: usize, flat: &DVector<f64>) -> Result<Self> {
        let (k, d) = (n_components, dim);
        if k == 0 || d == 0 {
            return Err(Error::InvalidArgument("need at least one component and dimension".into()));
        }
        check_dim(k * (1 + d + d * (d + 1) / 2), flat.len())?;
        let logits = flat.rows(0, k).iter().copied().collect();
        let means = (0..k).map(|c| flat.rows(k + c * d, d).into_owned()).collect();
        let mut pos = k + k * d;
        let log_chols = (0..k)
            .map(|_| {
                let mut l = DMatrix::zeros(d, d);
                for i in 0..d {
                    for j in 0..=i {
                        l[(i, j)] = flat[pos];
                        pos += 1;
                    }
                }
                l
            })
            .collect();
        Ok(Self { logits, means, log_chols })
    }

    /// Offset of component `k`'s mean block in the flat layout.
    pub(crate) fn mean_offset(&self, k: usize) -> usize {
        self.n_components() + k * self.dim()
    }

    /// Offset of component `k`'s factor block in the flat layout.
    pub(crate) fn chol_offset(&self, k: usize) -> usize {
        let d = self.dim();
        self.n_components() * (1 + d) + k * d * (d + 1) / 2
    }
}
