//! Run configuration, read from TOML or JSON. Every field has a default.

use crate::error::{Error, Result};
use crate::form_factor::{make_gaussian, FormFactor, TabulatedProfile};
use crate::fractional::TimeGrid;
use crate::limit::{make_domain_data, PhysParams, Shape};
use crate::radial::{GridSpec, KGrid};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub gamma: f64,
    pub mu: f64,
    /// [re, im]
    pub q0: C64,
    pub t_end: f64,
    /// time steps of a single run
    pub n: usize,
    /// single runs report states at every `output_stride`-th node
    pub output_stride: usize,
    pub initial: InitialConfig,
    pub form_factor: FormFactorConfig,
    pub grid: GridConfig,
    pub study: StudyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    /// phi0 ~ a exp(-alpha k^2)
    pub alpha: f64,
    /// width of the Coulomb screen in k^2 units; 0 turns it off
    pub screen: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FormFactorConfig {
    Gaussian { sigma: f64 },
    /// two-column CSV of r, rho(r)
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// smallest eps the k-grid must resolve; defaults to the smallest eps of the sweep
    pub eps_min: Option<f64>,
    pub k_osc: f64,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub epsilons: Vec<f64>,
    /// time steps at the largest eps; each halving of eps doubles it
    pub n_base: usize,
    /// number of sample times in [0, T]
    pub samples: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            gamma: 1.0,
            mu: 0.5,
            q0: C64::new(1.0, 0.0),
            t_end: 1.0,
            n: 4096,
            output_stride: 64,
            initial: InitialConfig::default(),
            form_factor: FormFactorConfig::default(),
            grid: GridConfig::default(),
            study: StudyConfig::default(),
        }
    }
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig { alpha: 0.5, screen: 1.0 }
    }
}

impl Default for FormFactorConfig {
    fn default() -> Self {
        FormFactorConfig::Gaussian { sigma: 1.0 }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { eps_min: None, k_osc: 40.0, order: 16 }
    }
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig { epsilons: vec![0.4, 0.2, 0.1, 0.05, 0.025], n_base: 4096, samples: 17 }
    }
}

impl Config {
    /// Format chosen by extension: `.json` is JSON, anything else TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.extension().and_then(|e| e.to_str()) == Some("json"))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self> {
        let cfg: Config = if json { serde_json::from_str(text)? } else { toml::from_str(text)? };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        crate::limit::check_guard(self.gamma, self.mu)?;
        if !(self.t_end > 0.0) || self.n < 2 {
            return Err(Error::Config("t_end must be positive and n at least 2".into()));
        }
        if self.output_stride == 0 {
            return Err(Error::Config("output_stride must be positive".into()));
        }
        if self.study.epsilons.is_empty() || self.study.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("epsilons must be positive".into()));
        }
        if self.study.samples < 2 {
            return Err(Error::Config("need at least two sample times".into()));
        }
        Ok(())
    }

    pub fn form_factor(&self) -> Result<FormFactor> {
        match &self.form_factor {
            FormFactorConfig::Gaussian { sigma } => make_gaussian(*sigma),
            FormFactorConfig::Table { path } => Ok(FormFactor::from_table(TabulatedProfile::load_csv(path)?)),
        }
    }

    pub fn eps_min(&self) -> f64 {
        self.grid.eps_min.unwrap_or_else(|| self.study.epsilons.iter().copied().fold(f64::INFINITY, f64::min))
    }

    pub fn k_grid(&self, ff: &FormFactor) -> Result<Arc<KGrid>> {
        let spec = GridSpec {
            eps_min: self.eps_min(),
            sigma: ff.width(),
            t_max: self.t_end,
            k_osc: self.grid.k_osc,
            order: self.grid.order,
        };
        Ok(Arc::new(KGrid::for_problem(&spec)?))
    }

    pub fn shape(&self) -> Shape {
        let screen = if self.initial.screen > 0.0 { Some(self.initial.screen) } else { None };
        Shape::Gaussian { alpha: self.initial.alpha, screen }
    }

    pub fn params(&self, grid: Arc<KGrid>) -> Result<PhysParams> {
        make_domain_data(self.shape(), self.gamma, self.mu, self.q0, grid)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_end, self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let t = r#"
            gamma = -1.0
            mu = 0.5
            q0 = [0.5, 0.25]
            [form_factor]
            kind = "gaussian"
            sigma = 2.0
            [study]
            epsilons = [0.2, 0.1]
        "#;
        let a: Config = toml::from_str(t).unwrap();
        let j = serde_json::to_string(&a).unwrap();
        let b: Config = serde_json::from_str(&j).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.q0, C64::new(0.5, 0.25));
        assert_eq!(a.study.n_base, 4096);
        assert_eq!(a.eps_min(), 0.1);
    }

    #[test]
    fn guard_is_checked() {
        let c = Config { gamma: -1.0, mu: 1.5, ..Default::default() };
        assert!(c.validate().is_err());
        assert!(toml::from_str::<Config>("bogus = 1").is_err());
    }
}
