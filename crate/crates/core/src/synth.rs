//! Synthetic datasets with known feature relevance, bounded targets in
//! `(0, 1)` and an optional five-level sector factor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cv::{mean, sample_sd};
use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// Target is a monotone function of a linear index.
    #[default]
    Linear,
    /// Linear index plus a quadratic and an interaction term.
    Nonlinear,
    /// Target independent of the features.
    Null,
}

impl std::str::FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Link::Linear),
            "nonlinear" => Ok(Link::Nonlinear),
            "null" | "noise" => Ok(Link::Null),
            other => Err(Error::InvalidParameter(format!("unknown link '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n: usize,
    /// Number of continuous features `x1..xk`.
    pub features: usize,
    /// How many of the trailing features have no effect on any target.
    pub irrelevant: usize,
    /// Common pairwise correlation of the features.
    pub correlation: f64,
    pub link: Link,
    /// Standard deviation of the noise added to the standardised index.
    pub noise_sd: f64,
    pub targets: usize,
    /// Levels of the `sector` factor; 0 omits it.
    pub sector_levels: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 500,
            features: 5,
            irrelevant: 0,
            correlation: 0.3,
            link: Link::Linear,
            noise_sd: 0.0,
            targets: 1,
            sector_levels: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n < 10 {
            return bad(format!("n must be at least 10, got {}", self.n));
        }
        if self.features == 0 {
            return bad("at least one feature is required".into());
        }
        if self.irrelevant > self.features {
            return bad("more irrelevant features than features".into());
        }
        if self.irrelevant == self.features && self.link != Link::Null {
            return bad("a non-null link needs at least one relevant feature".into());
        }
        if !(0.0..1.0).contains(&self.correlation) {
            return bad(format!("correlation must lie in [0, 1), got {}", self.correlation));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise sd must be non-negative, got {}", self.noise_sd));
        }
        if self.targets == 0 {
            return bad("at least one target is required".into());
        }
        if self.sector_levels == 1 {
            return bad("a sector factor needs at least two levels".into());
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.features).map(|j| format!("x{j}")).collect();
        if self.sector_levels > 0 {
            names.push("sector".into());
        }
        names
    }

    pub fn relevant_features(&self) -> Vec<String> {
        let mut names: Vec<String> = if self.link == Link::Null {
            Vec::new()
        } else {
            (1..=self.features - self.irrelevant).map(|j| format!("x{j}")).collect()
        };
        if self.sector_levels > 0 && self.link != Link::Null {
            names.push("sector".into());
        }
        names
    }

    pub fn irrelevant_features(&self) -> Vec<String> {
        let relevant = self.relevant_features();
        self.feature_names()
            .into_iter()
            .filter(|f| !relevant.contains(f))
            .collect()
    }

    pub fn target_names(&self) -> Vec<String> {
        (1..=self.targets).map(|t| format!("y{t}")).collect()
    }

    /// Coefficient of relevant feature `j` (0-based) for target `t`.
    fn beta(&self, t: usize, j: usize) -> f64 {
        let r = (self.features - self.irrelevant) as f64;
        let base = 1.0 - 0.5 * j as f64 / r;
        base * (1.0 + 0.4 * (1.3 * (t + 1) as f64 + 0.7 * (j + 1) as f64).sin())
    }
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n;
    let k = spec.features;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let common = spec.correlation.sqrt();
    let own = (1.0 - spec.correlation).sqrt();
    let mut x = vec![vec![0.0; n]; k];
    let mut sector = vec![0usize; n];
    for i in 0..n {
        let u: f64 = rng.sample(StandardNormal);
        for col in x.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            col[i] = common * u + own * e;
        }
        if spec.sector_levels > 0 {
            sector[i] = rng.random_range(0..spec.sector_levels);
        }
    }
    let relevant = k - spec.irrelevant;
    let mut columns: Vec<Column> = x
        .iter()
        .enumerate()
        .map(|(j, v)| Column::continuous(format!("x{}", j + 1), v.clone()))
        .collect();
    if spec.sector_levels > 0 {
        let labels: Vec<String> = sector.iter().map(|s| format!("S{}", s + 1)).collect();
        columns.push(Column::categorical("sector", &labels));
    }
    for t in 0..spec.targets {
        let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = if spec.link == Link::Null {
            noise.iter().map(|&e| logistic(e)).collect()
        } else {
            let mut s: Vec<f64> = (0..n)
                .map(|i| {
                    let mut v: f64 = (0..relevant).map(|j| spec.beta(t, j) * x[j][i]).sum();
                    if spec.link == Link::Nonlinear {
                        v += 0.8 * (x[0][i] * x[0][i] - 1.0);
                        if relevant > 1 {
                            v += 0.8 * x[0][i] * x[1][i];
                        }
                    }
                    if spec.sector_levels > 0 {
                        v += 0.5 * (1.1 * sector[i] as f64 + 0.9 * t as f64).cos();
                    }
                    v
                })
                .collect();
            let (m, sd) = (mean(&s), sample_sd(&s));
            for (v, e) in s.iter_mut().zip(&noise) {
                *v = logistic(1.5 * (*v - m) / sd + spec.noise_sd * e);
            }
            s
        };
        columns.push(Column::continuous(format!("y{}", t + 1), y));
    }
    Dataset::new(columns, format!("synthetic (seed {seed}, {:?} link)", spec.link).to_lowercase())
}
