//! Unscrambled Sobol sequence in Gray-code order with Joe–Kuo direction
//! numbers.

use nalgebra::DMatrix;

use super::sobol_table::DIRECTIONS;
use crate::error::{Error, Result};

pub const MAX_SOBOL_DIM: usize = 64;
const BITS: usize = 32;

/// Stateful generator producing successive Sobol points.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    dim: usize,
    /// `directions[j][k]` is the k-th direction integer of coordinate `j`.
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_SOBOL_DIM {
            return Err(Error::InvalidArgument(format!(
                "Sobol dimension must be in 1..={MAX_SOBOL_DIM}, got {dim}"
            )));
        }
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (BITS - 1 - k);
        }
        directions.push(first);
        for entry in DIRECTIONS.iter().take(dim - 1) {
            let s = entry.degree as usize;
            let mut v = [0u32; BITS];
            for k in 0..s.min(BITS) {
                v[k] = entry.init[k] << (BITS - 1 - k);
            }
            for k in s..BITS {
                let mut x = v[k - s] ^ (v[k - s] >> s);
                for i in 1..s {
                    if (entry.coeffs >> (s - 1 - i)) & 1 == 1 {
                        x ^= v[k - i];
                    }
                }
                v[k] = x;
            }
            directions.push(v);
        }
        Ok(Self {
            dim,
            directions,
            state: vec![0; dim],
            index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Position of the point that the next call to [`Self::next_point`] returns.
    pub fn index(&self) -> u64 {
        self.index
    }

    /// Jump so the next point returned is the one at `index` (0 is the origin).
    pub fn seek(&mut self, index: u64) {
        let gray = index ^ (index >> 1);
        for (j, dirs) in self.directions.iter().enumerate() {
            let mut x = 0u32;
            for (k, &v) in dirs.iter().enumerate() {
                if (gray >> k) & 1 == 1 {
                    x ^= v;
                }
            }
            self.state[j] = x;
        }
        self.index = index;
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let out = self
            .state
            .iter()
            .map(|&x| x as f64 / (1u64 << BITS) as f64)
            .collect();
        let c = self.index.trailing_ones() as usize;
        if c < BITS {
            for (x, dirs) in self.state.iter_mut().zip(&self.directions) {
                *x ^= dirs[c];
            }
        }
        self.index += 1;
        out
    }
}

/// First `n` Sobol points in `[0, 1)^dim` as rows of an `n × dim` matrix.
/// With `skip_initial` the all-zero first point is dropped.
pub fn sobol_points(dim: usize, n: usize, skip_initial: bool) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one Sobol point".into()));
    }
    let mut seq = SobolSequence::new(dim)?;
    if skip_initial {
        seq.seek(1);
    }
    let mut out = DMatrix::zeros(n, dim);
    for i in 0..n {
        let p = seq.next_point();
        for (j, v) in p.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}
