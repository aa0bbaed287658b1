use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathkit::SobolSequence;
use crate::rng::{mix_seed, seeded};

use super::FactorSpec;

/// Sampling matrices and model outputs of a pick-freeze design.
#[derive(Debug, Clone)]
pub struct SobolDesign {
    pub factors: Vec<String>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// `ab[i]` is `a` with column `i` taken from `b`.
    pub ab: Vec<DMatrix<f64>>,
    pub f_a: DVector<f64>,
    pub f_b: DVector<f64>,
    pub f_ab: Vec<DVector<f64>>,
    /// Rows redrawn after a model failure.
    pub resampled_rows: Vec<usize>,
}

impl SobolDesign {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn k(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_evaluations(&self) -> usize {
        self.f_a.len() + self.f_b.len() + self.f_ab.iter().map(|v| v.len()).sum::<usize>()
    }
}

fn row_inputs(a: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    let k = a.len();
    let mut rows = vec![a.to_vec(), b.to_vec()];
    for i in 0..k {
        let mut r = a.to_vec();
        r[i] = b[i];
        rows.push(r);
    }
    rows
}

fn eval_row<F>(model: &F, a: &[f64], b: &[f64]) -> std::result::Result<Vec<f64>, String>
where
    F: Fn(&[f64]) -> std::result::Result<f64, String> + Sync,
{
    row_inputs(a, b)
        .iter()
        .map(|x| model(x).and_then(|v| if v.is_finite() { Ok(v) } else { Err(format!("non-finite output {v}")) }))
        .collect()
}

/// Draw `A` and `B` from a `2k`-dimensional Sobol sequence started at a
/// seed-dependent index, then evaluate `model` on `A`, `B` and every `AB_i`.
///
/// A row whose evaluations fail is redrawn once from a pseudo-random
/// generator; a second failure aborts.
pub fn sobol_design<F>(spec: &FactorSpec, n: usize, seed: u64, model: F) -> Result<SobolDesign>
where
    F: Fn(&[f64]) -> std::result::Result<f64, String> + Sync,
{
    spec.validate()?;
    if n < 2 {
        return Err(Error::InvalidArgument("a Sobol design needs N >= 2".into()));
    }
    let k = spec.len();
    let mut seq = SobolSequence::new(2 * k)?;
    seq.seek(1 + (mix_seed(seed, 0x534f_424c) >> 44));
    let mut a = DMatrix::zeros(n, k);
    let mut b = DMatrix::zeros(n, k);
    for r in 0..n {
        let u = seq.next_point();
        for i in 0..k {
            a[(r, i)] = spec.factors[i].dist.from_unit(u[i]);
            b[(r, i)] = spec.factors[i].dist.from_unit(u[k + i]);
        }
    }

    let rows: Vec<(usize, std::result::Result<Vec<f64>, String>, Option<(Vec<f64>, Vec<f64>)>)> = (0..n)
        .into_par_iter()
        .map(|r| {
            let ar: Vec<f64> = a.row(r).iter().copied().collect();
            let br: Vec<f64> = b.row(r).iter().copied().collect();
            match eval_row(&model, &ar, &br) {
                Ok(v) => (r, Ok(v), None),
                Err(e) => {
                    log::warn!("design row {r} failed ({e}); redrawing");
                    let mut rng = seeded(seed, 1 + r as u64);
                    let ar: Vec<f64> = spec.factors.iter().map(|f| f.dist.from_unit(rng.random())).collect();
                    let br: Vec<f64> = spec.factors.iter().map(|f| f.dist.from_unit(rng.random())).collect();
                    (r, eval_row(&model, &ar, &br), Some((ar, br)))
                }
            }
        })
        .collect();

    let mut f_a = DVector::zeros(n);
    let mut f_b = DVector::zeros(n);
    let mut f_ab = vec![DVector::zeros(n); k];
    let mut resampled_rows = Vec::new();
    for (r, out, redrawn) in rows {
        let vals = out.map_err(|message| Error::ModelFailure { row: r, message })?;
        if let Some((ar, br)) = redrawn {
            a.set_row(r, &nalgebra::RowDVector::from_vec(ar));
            b.set_row(r, &nalgebra::RowDVector::from_vec(br));
            resampled_rows.push(r);
        }
        f_a[r] = vals[0];
        f_b[r] = vals[1];
        for i in 0..k {
            f_ab[i][r] = vals[2 + i];
        }
    }
    let ab = (0..k)
        .map(|i| {
            let mut m = a.clone();
            m.set_column(i, &b.column(i));
            m
        })
        .collect();
    Ok(SobolDesign { factors: spec.names(), a, b, ab, f_a, f_b, f_ab, resampled_rows })
}

/// Sensitivity indices per factor, with optional bootstrap intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub factors: Vec<String>,
    pub first_order: Vec<f64>,
    pub total_order: Vec<f64>,
    pub first_order_ci: Option<Vec<(f64, f64)>>,
    pub total_order_ci: Option<Vec<(f64, f64)>>,
    pub n: usize,
    pub replicates: usize,
    /// Bootstrap resamples discarded for zero output variance.
    pub skipped_replicates: usize,
}

impl SensitivityResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("factor,S,S_lo,S_hi,ST,ST_lo,ST_hi\n");
        let ci = |v: &Option<Vec<(f64, f64)>>, i: usize| match v {
            Some(c) => (c[i].0.to_string(), c[i].1.to_string()),
            None => (String::new(), String::new()),
        };
        for i in 0..self.factors.len() {
            let (slo, shi) = ci(&self.first_order_ci, i);
            let (tlo, thi) = ci(&self.total_order_ci, i);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                self.factors[i], self.first_order[i], slo, shi, self.total_order[i], tlo, thi
            );
        }
        s
    }
}

/// `(S, S_T)` over the given row indices, or `None` when `V(Y) = 0`.
fn indices_on(design: &SobolDesign, rows: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = rows.len() as f64;
    let f0 = rows.iter().map(|&r| design.f_a[r]).sum::<f64>() / n;
    let var = rows.iter().map(|&r| (design.f_a[r] - f0).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return None;
    }
    let mut s = Vec::with_capacity(design.k());
    let mut st = Vec::with_capacity(design.k());
    for fab in &design.f_ab {
        let mut first = 0.0;
        let mut total = 0.0;
        for &r in rows {
            let delta = fab[r] - design.f_a[r];
            first += design.f_b[r] * delta;
            total += delta * delta;
        }
        s.push(first / n / var);
        st.push(total / (2.0 * n) / var);
    }
    Some((s, st))
}

/// First-order and total-order point estimates.
pub fn estimate_indices(design: &SobolDesign) -> Result<SensitivityResult> {
    let rows: Vec<usize> = (0..design.n()).collect();
    let (s, st) = indices_on(design, &rows)
        .ok_or_else(|| Error::DegenerateOutput("model output has zero variance".into()))?;
    Ok(SensitivityResult {
        factors: design.factors.clone(),
        first_order: s,
        total_order: st,
        first_order_ci: None,
        total_order_ci: None,
        n: design.n(),
        replicates: 0,
        skipped_replicates: 0,
    })
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Point estimates plus percentile bootstrap intervals at `level`.
pub fn bootstrap_ci(design: &SobolDesign, replicates: usize, level: f64, seed: u64) -> Result<SensitivityResult> {
    if replicates < 100 {
        return Err(Error::InvalidArgument("use at least 100 bootstrap replicates".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument("confidence level must lie in (0, 1)".into()));
    }
    let mut result = estimate_indices(design)?;
    let n = design.n();
    let reps: Vec<Option<(Vec<f64>, Vec<f64>)>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeded(seed, b as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            indices_on(design, &rows)
        })
        .collect();
    let skipped = reps.iter().filter(|r| r.is_none()).count();
    if skipped > 0 {
        log::info!("{skipped} bootstrap replicates skipped for zero variance");
    }
    let kept: Vec<(Vec<f64>, Vec<f64>)> = reps.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::DegenerateOutput("every bootstrap replicate had zero variance".into()));
    }
    let alpha = 0.5 * (1.0 - level);
    let interval = |pick: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> f64| {
        let mut v: Vec<f64> = kept.iter().map(pick).collect();
        v.sort_by(f64::total_cmp);
        (percentile(&v, alpha), percentile(&v, 1.0 - alpha))
    };
    let k = design.k();
    result.first_order_ci = Some((0..k).map(|i| interval(&|r| r.0[i])).collect());
    result.total_order_ci = Some((0..k).map(|i| interval(&|r| r.1[i])).collect());
    result.replicates = kept.len();
    result.skipped_replicates = skipped;
    Ok(result)
}
