//! Synthetic mixture posteriors, variance-based sensitivity indices and the
//! robustness driver that scores pipeline fits against known truth.

mod gmm;
mod indices;
mod robustness;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub use gmm::{generate_test_gmm, GmmFactors};
pub use indices::{bootstrap_ci, estimate_indices, sobol_design, SensitivityResult, SobolDesign};
pub use robustness::{robustness_study, score_case, truth_target, RobustnessCase, RobustnessStudy, FIT_THRESHOLD};

/// Distribution of a single factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorDist {
    /// Integers `lo..=hi`, equally likely.
    Discrete { lo: i64, hi: i64 },
    Uniform { lo: f64, hi: f64 },
}

impl FactorDist {
    /// Image of `u ∈ [0, 1)`; discrete factors floor the scaled uniform.
    pub fn from_unit(&self, u: f64) -> f64 {
        match *self {
            FactorDist::Discrete { lo, hi } => {
                let span = (hi - lo + 1) as f64;
                (lo + ((u * span).floor() as i64).min(hi - lo)) as f64
            }
            FactorDist::Uniform { lo, hi } => lo + u * (hi - lo),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            FactorDist::Discrete { lo, hi } => lo <= hi,
            FactorDist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("empty factor range {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factor {
    pub name: String,
    pub dist: FactorDist,
}

/// Independent factor distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub factors: Vec<Factor>,
}

/// Factor names of the mixture generator, in order.
pub const GMM_FACTORS: [&str; 5] = ["d", "M", "omega", "c", "lambda"];

impl FactorSpec {
    fn gmm(d: (i64, i64), m: (i64, i64), omega: (f64, f64), c: (f64, f64), lambda: (f64, f64)) -> Self {
        let f = |name: &str, dist| Factor { name: name.into(), dist };
        Self {
            factors: vec![
                f("d", FactorDist::Discrete { lo: d.0, hi: d.1 }),
                f("M", FactorDist::Discrete { lo: m.0, hi: m.1 }),
                f("omega", FactorDist::Uniform { lo: omega.0, hi: omega.1 }),
                f("c", FactorDist::Uniform { lo: c.0, hi: c.1 }),
                f("lambda", FactorDist::Uniform { lo: lambda.0, hi: lambda.1 }),
            ],
        }
    }

    /// Broad robustness distributions.
    pub fn table1() -> Self {
        Self::gmm((2, 10), (2, 4), (1.0, 2.0), (0.0, 0.7), (1e-4, 1e-2))
    }

    /// Refined distributions favouring harder posteriors.
    pub fn table2() -> Self {
        Self::gmm((8, 10), (3, 4), (1.3, 2.0), (0.1, 0.7), (1e-4, 1e-2))
    }

    /// `k` independent `U[0, 1]` factors named `x1..xk`.
    pub fn unit_uniform(k: usize) -> Self {
        Self {
            factors: (1..=k)
                .map(|i| Factor { name: format!("x{i}"), dist: FactorDist::Uniform { lo: 0.0, hi: 1.0 } })
                .collect(),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "table1" => Ok(Self::table1()),
            "table2" => Ok(Self::table2()),
            other => Err(Error::InvalidArgument(format!(
                "unknown factor table '{other}' (expected table1 or table2)"
            ))),
        }
    }

    /// Replace the distribution of the named factor.
    pub fn with_factor(mut self, name: &str, dist: FactorDist) -> Result<Self> {
        let f = self
            .factors
            .iter_mut()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no factor named '{name}'")))?;
        f.dist = dist;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.factors.iter().map(|f| f.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() {
            return Err(Error::InvalidArgument("factor spec is empty".into()));
        }
        for f in &self.factors {
            f.dist.validate()?;
        }
        Ok(())
    }

    /// Check that this spec describes the mixture generator's factors.
    pub fn validate_gmm(&self) -> Result<()> {
        self.validate()?;
        let names = self.names();
        if names.iter().map(String::as_str).ne(GMM_FACTORS) {
            return Err(Error::InvalidArgument(format!(
                "mixture factors must be {GMM_FACTORS:?}, got {names:?}"
            )));
        }
        let range = |i: usize| match self.factors[i].dist {
            FactorDist::Discrete { lo, hi } => (lo as f64, hi as f64),
            FactorDist::Uniform { lo, hi } => (lo, hi),
        };
        let checks = [
            (range(0).0 >= 1.0, "d must be at least 1"),
            (range(1).0 >= 1.0, "M must be at least 1"),
            (range(2).0 >= 1.0, "omega must be at least 1"),
            (range(3).0 >= 0.0 && range(3).1 < 1.0, "c must lie in [0, 1)"),
            (range(4).0 > 0.0 && range(4).1 < 1.0, "lambda must lie in (0, 1)"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidArgument(msg.into()));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        self.factors.iter().map(|f| f.dist.from_unit(rng.random::<f64>())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn discrete_flooring_covers_every_value() {
        let dist = FactorDist::Discrete { lo: 2, hi: 4 };
        assert_eq!(dist.from_unit(0.0), 2.0);
        assert_eq!(dist.from_unit(0.34), 3.0);
        assert_eq!(dist.from_unit(0.999_999), 4.0);
        assert_eq!(dist.from_unit(1.0), 4.0);
    }

    #[test]
    fn tables_are_valid_and_sample_in_range() {
        for spec in [FactorSpec::table1(), FactorSpec::table2()] {
            spec.validate_gmm().unwrap();
            let mut rng = seeded(1, 0);
            for _ in 0..200 {
                let x = spec.sample(&mut rng);
                let g = GmmFactors::from_slice(&x).unwrap();
                assert!((2..=10).contains(&g.d) && (2..=4).contains(&g.m));
                assert!(g.lambda >= 1e-4 && g.lambda <= 1e-2);
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = FactorSpec::table1()
            .with_factor("lambda", FactorDist::Uniform { lo: 0.0, hi: 0.5 })
            .unwrap();
        assert!(bad.validate_gmm().is_err());
        assert!(FactorSpec::unit_uniform(2).validate_gmm().is_err());
        assert!(FactorSpec::by_name("table3").is_err());
    }
}
