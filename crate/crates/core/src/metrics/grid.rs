use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rayon::prelude::*;

use crate::density::{SampleableDensity, UnnormalizedTarget};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A 2-D density normalized by the trapezoid rule on a tensor grid over the
/// search box and represented as piecewise constant on grid cells, each cell
/// carrying the mean of its four corner values. The trapezoid rule and the
/// cell representation integrate identically, so the result is exactly
/// normalized and its sampler and `log_pdf` agree.
#[derive(Debug, Clone)]
pub struct GridDensity2d {
    lower: [f64; 2],
    step: [f64; 2],
    cells: usize,
    /// Normalized density per cell, row-major in (x, y).
    density: Vec<f64>,
    log_norm: f64,
    picker: WeightedIndex<f64>,
}

impl GridDensity2d {
    /// Evaluate `φ` at `nodes × nodes` grid points spanning the target's box.
    pub fn from_target(target: &UnnormalizedTarget, nodes: usize) -> Result<Self> {
        if target.dim() != 2 {
            return Err(Error::Unsupported("grid normalization is only implemented in 2-D".into()));
        }
        if nodes < 2 {
            return Err(Error::InvalidArgument("grid needs at least 2 nodes per axis".into()));
        }
        let b = target.search_box();
        let lower = [b.lower()[0], b.lower()[1]];
        let step = [
            (b.upper()[0] - lower[0]) / (nodes - 1) as f64,
            (b.upper()[1] - lower[1]) / (nodes - 1) as f64,
        ];
        let log_phi: Vec<f64> = (0..nodes * nodes)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / nodes, idx % nodes);
                let z = [lower[0] + i as f64 * step[0], lower[1] + j as f64 * step[1]];
                let v = target.density().log_density(&z);
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            })
            .collect();
        let offset = log_phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !offset.is_finite() {
            return Err(Error::Scaling);
        }
        let node = |i: usize, j: usize| (log_phi[i * nodes + j] - offset).exp();
        let cells = nodes - 1;
        let mut density = Vec::with_capacity(cells * cells);
        for i in 0..cells {
            for j in 0..cells {
                density.push(0.25 * (node(i, j) + node(i + 1, j) + node(i, j + 1) + node(i + 1, j + 1)));
            }
        }
        let area = step[0] * step[1];
        let mass: f64 = density.iter().sum::<f64>() * area;
        for v in density.iter_mut() {
            *v /= mass;
        }
        let picker = WeightedIndex::new(&density).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(Self { lower, step, cells, density, log_norm: offset + mass.ln(), picker })
    }

    /// `log ∫φ` over the box.
    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    fn cell_of(&self, z: &[f64]) -> Option<usize> {
        let mut idx = [0usize; 2];
        for a in 0..2 {
            let u = (z[a] - self.lower[a]) / self.step[a];
            if !(u >= 0.0 && u <= self.cells as f64) {
                return None;
            }
            idx[a] = (u.floor() as usize).min(self.cells - 1);
        }
        Some(idx[0] * self.cells + idx[1])
    }
}

impl SampleableDensity for GridDensity2d {
    fn dim(&self) -> usize {
        2
    }

    fn log_pdf(&self, z: &[f64]) -> f64 {
        match self.cell_of(z) {
            Some(c) => self.density[c].ln(),
            None => f64::NEG_INFINITY,
        }
    }

    fn sample(&self, n: usize, rng: &mut Rng) -> Vec<DVector<f64>> {
        (0..n)
            .map(|_| {
                let c = self.picker.sample(rng);
                let (i, j) = (c / self.cells, c % self.cells);
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                DVector::from_vec(vec![
                    self.lower[0] + (i as f64 + u) * self.step[0],
                    self.lower[1] + (j as f64 + v) * self.step[1],
                ])
            })
            .collect()
    }
}
