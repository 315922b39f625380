//! Experiment configuration. Every section has defaults; unknown keys are
//! rejected everywhere.

use anyhow::{bail, Context, Result};
use ata_core::resources::RevScenario;
use ata_core::{AtaConfig, GridSpec, SourceCoupling};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must equal [`SCHEMA_VERSION`].
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub ata: AtaConfig,
    #[serde(default)]
    pub sources: SourcesSection,
    #[serde(default)]
    pub step: StepSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default)]
    pub resources: ResourcesSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            seed: 0,
            grid: GridSection::default(),
            ata: AtaConfig::default(),
            sources: SourcesSection::default(),
            step: StepSection::default(),
            evolve: EvolveSection::default(),
            cluster: ClusterSection::default(),
            resources: ResourcesSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    /// `a² = δt = 1`.
    Dimensionless,
    /// `z, t ∈ [0, 1]` with `n_t` steps.
    UnitInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: u32,
    pub c: f64,
    pub units: Units,
    pub n_t: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 8, c: 0.1, units: Units::UnitInterval, n_t: 200 }
    }
}

impl GridSection {
    pub fn spec(&self) -> Result<GridSpec> {
        self.spec_with(self.n, self.c)
    }

    pub fn spec_with(&self, n: u32, c: f64) -> Result<GridSpec> {
        Ok(match self.units {
            Units::Dimensionless => GridSpec::dimensionless(n, c)?,
            Units::UnitInterval => GridSpec::unit_interval(n, c, self.n_t)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    /// Chebyshev random fields for both `χ` and `f`.
    Smooth,
    /// Smooth `χ`, no source.
    Decay,
    /// A few random masks with Chebyshev time envelopes.
    Pauli,
    /// Zero initial temperature, antipodal unit heater and cooler.
    HeaterCooler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourcesSection {
    pub kind: SourceKind,
    /// Spatial smoothness `G`.
    pub g: usize,
    /// Temporal degree; defaults to `g`.
    pub g_t: Option<usize>,
    /// Mask count for `pauli`.
    pub terms: usize,
    pub heater: usize,
    /// Defaults to the antipode of `heater`.
    pub cooler: Option<usize>,
    pub width: usize,
}

impl Default for SourcesSection {
    fn default() -> Self {
        Self { kind: SourceKind::Smooth, g: 20, g_t: None, terms: 8, heater: 0, cooler: None, width: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Exact operator `A`.
    Exact,
    /// The approximated operator `A′` the tree is fitted to.
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepSection {
    /// Stop growing once the fidelity reaches this; `null` grows to the cap.
    pub target_fidelity: Option<f64>,
    pub reference: Reference,
}

impl Default for StepSection {
    fn default() -> Self {
        Self { target_fidelity: Some(0.99), reference: Reference::Exact }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    /// Defaults to `grid.n_t`.
    pub steps: Option<usize>,
    pub d_cut: Option<usize>,
    /// Extra dropout runs, one curve per value.
    pub d_cut_sweep: Vec<usize>,
    /// Seeds per sweep point.
    pub sweep_seeds: usize,
    pub coupling: SourceCoupling,
    pub lowpass_k: Option<usize>,
    pub term_cap: Option<usize>,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            steps: None,
            d_cut: None,
            d_cut_sweep: Vec::new(),
            sweep_seeds: 4,
            coupling: SourceCoupling::Implicit,
            lowpass_k: None,
            term_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSection {
    pub threshold: f64,
    /// Smoothness values for the stationary-cluster sweep.
    pub g_values: Vec<usize>,
    pub steps: usize,
    pub haar_n: Vec<u32>,
    pub haar_samples: usize,
    /// Per-tree node cap; also capped at `2^n`.
    pub haar_depth: usize,
    pub haar_c: f64,
}

impl Default for ClusterSection {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            g_values: vec![5, 10, 20, 40],
            steps: 40,
            haar_n: vec![5, 6, 7],
            haar_samples: 50,
            haar_depth: 50,
            haar_c: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResourcesSection {
    pub n: Vec<u32>,
    pub n_steps: Vec<u64>,
    pub depth: Vec<usize>,
    /// HHL per-step probability in `(1-p)^{N_τ}`.
    pub p: Vec<f64>,
    pub rev: RevScenario,
}

impl Default for ResourcesSection {
    fn default() -> Self {
        Self {
            n: (4..=20).collect(),
            n_steps: vec![200, 20000],
            depth: vec![35],
            p: vec![0.01, 0.1],
            rev: RevScenario::Polylog,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).context("config is not valid JSON")?;
        match raw.get("schema").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => bail!("unsupported config schema {v}, expected {SCHEMA_VERSION}"),
            None => bail!("config lacks the integer field \"schema\""),
        }
        let cfg: Self = serde_json::from_value(raw).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.spec().context("grid section")?;
        self.ata.validate().context("ata section")?;
        if self.sources.width == 0 {
            bail!("sources.width must be positive");
        }
        if let Some(t) = self.step.target_fidelity {
            if !(0.0..=1.0).contains(&t) {
                bail!("step.target_fidelity must lie in [0, 1]");
            }
        }
        if self.evolve.d_cut == Some(0) || self.evolve.d_cut_sweep.contains(&0) {
            bail!("dropout widths must be positive");
        }
        if self.evolve.steps == Some(0) {
            bail!("evolve.steps must be positive");
        }
        if !(self.cluster.threshold > 0.0 && self.cluster.threshold <= 1.0) {
            bail!("cluster.threshold must lie in (0, 1]");
        }
        if self.cluster.haar_samples < 2 || self.cluster.steps < 2 {
            bail!("cluster studies need at least two trees");
        }
        if self.resources.p.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            bail!("resources.p values must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn evolve_steps(&self) -> usize {
        self.evolve.steps.unwrap_or(self.grid.n_t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_json(r#"{"schema": 1}"#).unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"schema": 1, "bogus": 3}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schema": 1, "grid": {"n": 4, "q": 1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schema": 1, "ata": {"depth": 4}}"#).is_err());
    }

    #[test]
    fn schema_is_checked() {
        assert!(ExperimentConfig::from_json(r#"{}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schema": 2}"#).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"schema": 1, "grid": {"c": -1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schema": 1, "cluster": {"threshold": 0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"schema": 1, "resources": {"p": [1.0]}}"#).is_err());
    }

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }
}
