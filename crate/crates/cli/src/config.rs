//! Flat TOML run configuration.
//!
//! Every key is optional. A `preset` supplies the base values and the other
//! keys override them:
//!
//! ```toml
//! preset = "desk"              # "full" (default) or "desk"
//! p_values = [0.08, 0.4]
//! L_values = [16, 32, 64]
//! n_realizations = 200
//! coarse_b = 2                 # depth coarse-graining
//! b_values = [2, 3, 4, 6, 8]   # box sizes for boxcount-scan
//! steps_per_qubit = 4          # steps = steps_per_qubit * L
//! master_seed = 7
//! threads = 0                  # 0 = all cores
//! boundary = "open"            # or "periodic"
//! search_budget = 20000
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;
use stabfrac::{Boundary, EnsembleSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full-scale layout: standard p grid, L up to 240, 500 realizations.
    #[default]
    Full,
    /// Minutes on a workstation.
    Desk,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<Preset>,
    pub p_values: Option<Vec<f64>>,
    #[serde(rename = "L_values")]
    pub l_values: Option<Vec<usize>>,
    pub n_realizations: Option<usize>,
    pub coarse_b: Option<usize>,
    pub b_values: Option<Vec<usize>>,
    pub steps_per_qubit: Option<usize>,
    pub master_seed: Option<u64>,
    pub threads: Option<usize>,
    pub boundary: Option<Boundary>,
    pub search_budget: Option<usize>,
}

/// A resolved scan: the ensemble plus the box sizes used by box counting.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanConfig {
    pub spec: EnsembleSpec,
    pub b_values: Vec<usize>,
}

impl Preset {
    pub fn base(self) -> ScanConfig {
        match self {
            Preset::Full => ScanConfig {
                spec: EnsembleSpec { l_values: vec![16, 32, 64, 128, 240], ..EnsembleSpec::default() },
                b_values: (2..=20).collect(),
            },
            Preset::Desk => ScanConfig {
                spec: EnsembleSpec {
                    p_values: vec![0.08, 0.24, 0.4, 0.72, 0.9],
                    l_values: vec![16, 24, 32, 48, 64],
                    n_realizations: 50,
                    ..EnsembleSpec::default()
                },
                b_values: (2..=12).collect(),
            },
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn resolve(self) -> Result<ScanConfig> {
        let mut c = self.preset.unwrap_or_default().base();
        let s = &mut c.spec;
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { s.$field = v; })* };
        }
        take!(p_values, l_values, n_realizations, coarse_b, steps_per_qubit, master_seed, threads, boundary, search_budget);
        if let Some(b) = self.b_values {
            c.b_values = b;
        }
        c.validate()?;
        Ok(c)
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        anyhow::ensure!(!self.b_values.is_empty(), "b_values must be nonempty");
        for &b in &self.b_values {
            anyhow::ensure!(b >= 1, "box size 0 in b_values");
        }
        Ok(())
    }
}

impl Default for ScanConfig {
    fn default() -> Self {
        Preset::Full.base()
    }
}
