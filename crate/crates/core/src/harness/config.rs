use serde::{Deserialize, Serialize};

use crate::confidence::CollapsePolicy;
use crate::error::{Error, Result};
use crate::kernel::{Domain, Kernel};
use crate::noise::{NoiseModel, NoiseScale};
use crate::safebo::BetaMode;

pub const CONFIG_SPEC_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub bounds: Vec<(f64, f64)>,
    pub resolution: Vec<usize>,
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        Domain::grid(&self.bounds, &self.resolution)
    }
}

/// How the synthetic outputs are laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemLayout {
    /// `|I| = 1`: the reward must also stay above its own quantile threshold.
    RewardAsConstraint,
    /// `|I| = 2`: an independent random constraint with its own threshold.
    IndependentConstraint,
}

impl ProblemLayout {
    pub fn n_outputs(self) -> usize {
        match self {
            ProblemLayout::RewardAsConstraint => 1,
            ProblemLayout::IndependentConstraint => 2,
        }
    }
}

/// Either explicit grid indices or `"auto"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SafeSeedSpec {
    Indices(Vec<usize>),
    Keyword(String),
}

impl Default for SafeSeedSpec {
    fn default() -> Self {
        SafeSeedSpec::Keyword("auto".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Schema version, must be 1.
    pub spec: u32,
    pub name: String,
    pub domain: DomainSpec,
    pub kernel: Kernel,
    pub noise: NoiseModel,
    pub beta_modes: Vec<BetaMode>,
    pub nu: f64,
    pub kappa: f64,
    pub eta: f64,
    pub delta: f64,
    #[serde(default = "unit")]
    pub norm_bound: f64,
    pub layout: ProblemLayout,
    pub safety_quantile: f64,
    /// Defaults to 40 centers in 1-D and 200 otherwise.
    #[serde(default)]
    pub n_centers: Option<usize>,
    pub seeds: Vec<u64>,
    pub max_iterations: usize,
    #[serde(default)]
    pub safe_seed: SafeSeedSpec,
    #[serde(default = "reset")]
    pub collapse: CollapsePolicy,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn unit() -> f64 {
    1.0
}

fn reset() -> CollapsePolicy {
    CollapsePolicy::Reset
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn n_centers(&self) -> usize {
        self.n_centers
            .unwrap_or(if self.domain.bounds.len() == 1 { 40 } else { 200 })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.spec != CONFIG_SPEC_VERSION {
            return fail(format!(
                "unsupported spec version {} (expected {CONFIG_SPEC_VERSION})",
                self.spec
            ));
        }
        let domain = self.domain.build().map_err(|e| Error::Config(e.to_string()))?;
        self.noise.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.beta_modes.is_empty() {
            return fail("beta_modes must list at least one mode".into());
        }
        for mode in &self.beta_modes {
            if let BetaMode::ClassicSubgaussian { r } = mode {
                if !(*r >= 0.0 && r.is_finite()) {
                    return fail(format!("classic mode needs r >= 0, got {r}"));
                }
            }
        }
        for (name, v) in [
            ("nu", self.nu),
            ("kappa", self.kappa),
            ("safety_quantile", self.safety_quantile),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return fail(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return fail(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if !(self.delta > 0.0) {
            return fail(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.norm_bound > 0.0 && self.norm_bound.is_finite()) {
            return fail(format!("norm_bound must be positive, got {}", self.norm_bound));
        }
        if self.n_centers() == 0 {
            return fail("n_centers must be positive".into());
        }
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return fail("seeds must be distinct".into());
        }
        match &self.safe_seed {
            SafeSeedSpec::Keyword(k) if k != "auto" => {
                return fail(format!("safe_seed must be \"auto\" or a list of indices, got {k:?}"))
            }
            SafeSeedSpec::Indices(ix) => {
                if ix.is_empty() {
                    return fail("safe_seed must not be empty".into());
                }
                if let Some(i) = ix.iter().find(|i| **i >= domain.len()) {
                    return fail(format!("safe_seed index {i} outside the {}-point grid", domain.len()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

pub const PRESET_NAMES: [&str; 2] = ["paper-synthetic-1", "paper-synthetic-2"];

fn synthetic_base(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        spec: CONFIG_SPEC_VERSION,
        name: name.into(),
        domain: DomainSpec {
            bounds: vec![(0.0, 1.0)],
            resolution: vec![201],
        },
        kernel: Kernel::matern32(0.1).expect("valid lengthscale"),
        noise: NoiseModel::Uniform { lo: -1e-3, hi: 1e-3 },
        beta_modes: vec![BetaMode::Scenario],
        nu: 0.1,
        kappa: 1e-3,
        eta: 1e-2,
        delta: 1e-1,
        norm_bound: 1.0,
        layout: ProblemLayout::RewardAsConstraint,
        safety_quantile: 0.4,
        n_centers: None,
        seeds: (0..20).collect(),
        max_iterations: 200,
        safe_seed: SafeSeedSpec::default(),
        collapse: CollapsePolicy::Reset,
        output_dir: None,
    }
}

/// Named presets reproducing the synthetic experiments.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    match name {
        "paper-synthetic-1" => {
            let mut c = synthetic_base(name);
            c.beta_modes = vec![BetaMode::Scenario, BetaMode::ClassicSubgaussian { r: 1e-3 }];
            Some(c)
        }
        "paper-synthetic-2" => {
            let mut c = synthetic_base(name);
            c.noise = NoiseModel::StudentTScaled {
                dof: 10.0,
                scale: NoiseScale::Norm { divisor: 5.0 },
            };
            c.eta = 1e-3;
            c.beta_modes = vec![BetaMode::ClassicSubgaussian { r: 1e-5 }, BetaMode::Scenario];
            Some(c)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_roundtrip() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            p.validate().unwrap();
            let back = ExperimentConfig::from_json(&p.to_json().unwrap()).unwrap();
            assert_eq!(back, p);
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn preset_parameters() {
        let p = preset("paper-synthetic-1").unwrap();
        assert_eq!((p.nu, p.kappa, p.eta, p.delta), (0.1, 1e-3, 1e-2, 1e-1));
        assert_eq!(p.kernel.lengthscale(), 0.1);
        assert_eq!(p.noise, NoiseModel::Uniform { lo: -1e-3, hi: 1e-3 });
        let p = preset("paper-synthetic-2").unwrap();
        assert_eq!(p.eta, 1e-3);
        assert!(p.beta_modes.contains(&BetaMode::ClassicSubgaussian { r: 1e-5 }));
    }

    #[test]
    fn rejects_schema_violations() {
        let good = preset("paper-synthetic-1").unwrap().to_json().unwrap();
        let bad_version = good.replace("\"spec\": 1", "\"spec\": 2");
        assert!(matches!(
            ExperimentConfig::from_json(&bad_version),
            Err(Error::Config(_))
        ));
        let unknown = good.replacen('{', "{\"bogus\": 3,", 1);
        assert!(ExperimentConfig::from_json(&unknown).is_err());
        let mut c = preset("paper-synthetic-1").unwrap();
        c.nu = 1.5;
        assert!(c.validate().is_err());
        let mut c = preset("paper-synthetic-1").unwrap();
        c.safe_seed = SafeSeedSpec::Keyword("center".into());
        assert!(c.validate().is_err());
        let mut c = preset("paper-synthetic-1").unwrap();
        c.safe_seed = SafeSeedSpec::Indices(vec![5000]);
        assert!(c.validate().is_err());
        let mut c = preset("paper-synthetic-1").unwrap();
        c.seeds = vec![1, 1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn parses_minimal_document() {
        let text = r#"{
            "spec": 1, "name": "tiny",
            "domain": {"bounds": [[0, 1]], "resolution": [11]},
            "kernel": {"family": "matern32", "lengthscale": 0.2},
            "noise": {"family": "gaussian", "variance": 1e-4},
            "beta_modes": [{"mode": "scenario"}, {"mode": "classic_subgaussian", "r": 0.01}],
            "nu": 0.1, "kappa": 0.001, "eta": 0.01, "delta": 0.1,
            "layout": "independent_constraint", "safety_quantile": 0.4,
            "seeds": [3], "max_iterations": 5, "safe_seed": [5]
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.safe_seed, SafeSeedSpec::Indices(vec![5]));
        assert_eq!(c.collapse, CollapsePolicy::Reset);
        assert_eq!(c.n_centers(), 40);
    }
}
