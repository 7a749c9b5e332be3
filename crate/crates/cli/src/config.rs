//! Run configuration read from a TOML file. Every field is optional; values
//! given on the command line take precedence.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub targets: Option<Vec<String>>,
    pub features: Option<Vec<String>>,
    pub categorical: Option<Vec<String>>,
    pub models: Option<Vec<String>>,
    pub multivariate: Option<bool>,
    pub p: Option<f64>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub perturb_scale: Option<f64>,
    pub scheme: Option<String>,
    pub whitening_scope: Option<String>,
    pub shift: Option<bool>,
    pub permutations: Option<usize>,
    pub hidden_univariate: Option<usize>,
    pub hidden_multivariate: Option<usize>,
    pub max_iter: Option<usize>,
    pub learning_rate: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub formats: Option<Vec<String>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
