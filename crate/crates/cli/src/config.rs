//! Experiment configuration: JSON schema, strict parsing, parameter sweeps,
//! and command-line overrides.
//!
//! A config file describes one experiment: a scenario template, an algorithm
//! with its knobs, an optional sweep over one or more parameters (the
//! cartesian product of the axes), and the seed set. Unknown keys anywhere in
//! the file are rejected so typos cannot silently fall back to defaults.

use std::fmt;
use std::path::Path;

use jbas_core::algorithms::BackendPath;
use jbas_core::bounds::SmoothingKind;
use jbas_core::model::{Placement, ScenarioConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Configuration rejection with a human-readable reason.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Top-level experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub algorithm: AlgorithmConfig,
    /// One sweep axis or a list of axes (cartesian product, first axis
    /// slowest). Absent means a single design point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepField>,
    pub seeds: SeedSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::default(),
            algorithm: AlgorithmConfig::default(),
            sweep: None,
            seeds: SeedSpec::default(),
        }
    }
}

/// Algorithm selector plus every tunable the drivers accept.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    /// One of: alg1, alg1-simple, alg2-f1, alg2-f2, alg2-f3, alg3, pwee, no-as.
    pub name: String,
    pub chi: f64,
    pub rho: f64,
    pub varsigma: f64,
    /// Rate weight of the power-weighted objective (pwee only).
    pub kappa: f64,
    /// Efficiency weight of the trade-off scalarization (alg3 only).
    pub varrho: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub backend: BackendPath,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig {
            name: "alg1".to_string(),
            chi: 2.0,
            rho: 0.0,
            varsigma: 2.0,
            kappa: 1.0,
            varrho: 0.0,
            epsilon: 1e-3,
            max_iter: 50,
            rel_tol: 1e-4,
            backend: BackendPath::Socp,
        }
    }
}

/// Parsed algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoName {
    Alg1,
    Alg1Simple,
    Alg2(SmoothingKind),
    Alg3,
    Pwee,
    NoAs,
}

impl AlgoName {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlgoName::Alg1 => "alg1",
            AlgoName::Alg1Simple => "alg1-simple",
            AlgoName::Alg2(SmoothingKind::F1) => "alg2-f1",
            AlgoName::Alg2(SmoothingKind::F2) => "alg2-f2",
            AlgoName::Alg2(SmoothingKind::F3) => "alg2-f3",
            AlgoName::Alg3 => "alg3",
            AlgoName::Pwee => "pwee",
            AlgoName::NoAs => "no-as",
        }
    }
}

pub fn parse_algo(name: &str) -> Result<AlgoName, ConfigError> {
    match name {
        "alg1" => Ok(AlgoName::Alg1),
        "alg1-simple" => Ok(AlgoName::Alg1Simple),
        "alg2-f1" => Ok(AlgoName::Alg2(SmoothingKind::F1)),
        "alg2-f2" => Ok(AlgoName::Alg2(SmoothingKind::F2)),
        "alg2-f3" => Ok(AlgoName::Alg2(SmoothingKind::F3)),
        "alg3" => Ok(AlgoName::Alg3),
        "pwee" => Ok(AlgoName::Pwee),
        "no-as" => Ok(AlgoName::NoAs),
        other => err(format!(
            "unknown algorithm '{other}' (expected alg1, alg1-simple, alg2-f1, alg2-f2, alg2-f3, alg3, pwee, or no-as)"
        )),
    }
}

/// `sweep` accepts a single axis object or a list of them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepField {
    One(SweepSpec),
    Many(Vec<SweepSpec>),
}

impl SweepField {
    pub fn axes(&self) -> Vec<SweepSpec> {
        match self {
            SweepField::One(a) => vec![a.clone()],
            SweepField::Many(v) => v.clone(),
        }
    }
}

/// One sweep axis: a parameter name and the values it takes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<Value>,
}

/// Seed set: either `{"base": b, "count": n}` or `{"list": [s0, s1, ...]}`.
/// Unknown keys are rejected on the inner structs because untagged enums
/// would otherwise skip a misspelled variant silently.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Range(SeedRange),
    List(SeedList),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub base: u64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedList {
    pub list: Vec<u64>,
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Range(SeedRange { base: 1, count: 20 })
    }
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::Range(r) => (0..r.count).map(|i| r.base + i as u64).collect(),
            SeedSpec::List(l) => l.list.clone(),
        }
    }
}

const SWEEPABLE: &[&str] = &[
    "algorithm",
    "antennas_per_bs",
    "groups_per_bs",
    "users_per_group",
    "rate_target_mbps",
    "rate_target_bps",
    "cell_radius_m",
    "distance_m",
    "p_rf",
    "p_max",
    "chi",
    "rho",
    "varsigma",
    "kappa",
    "varrho",
    "epsilon",
];

fn value_f64(param: &str, v: &Value) -> Result<f64, ConfigError> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => err(format!("sweep axis '{param}': value {v} is not a finite number")),
    }
}

fn value_usize(param: &str, v: &Value) -> Result<usize, ConfigError> {
    match v.as_u64() {
        Some(x) => Ok(x as usize),
        None => err(format!("sweep axis '{param}': value {v} is not a non-negative integer")),
    }
}

/// Apply one swept value to a scenario/algorithm pair. Scalar antenna counts
/// expand to a uniform array across base stations.
pub fn apply_axis(
    scn: &mut ScenarioConfig,
    alg: &mut AlgorithmConfig,
    param: &str,
    v: &Value,
) -> Result<(), ConfigError> {
    match param {
        "algorithm" => match v.as_str() {
            Some(s) => {
                parse_algo(s)?;
                alg.name = s.to_string();
            }
            None => return err(format!("sweep axis 'algorithm': value {v} is not a string")),
        },
        "antennas_per_bs" => {
            let n = value_usize(param, v)?;
            scn.antennas_per_bs = vec![n; scn.num_bs];
        }
        "groups_per_bs" => scn.groups_per_bs = value_usize(param, v)?,
        "users_per_group" => scn.users_per_group = value_usize(param, v)?,
        "rate_target_mbps" => scn.rate_target_bps = value_f64(param, v)? * 1e6,
        "rate_target_bps" => scn.rate_target_bps = value_f64(param, v)?,
        "cell_radius_m" => {
            scn.placement = Placement::UniformLine { cell_radius_m: value_f64(param, v)? }
        }
        "distance_m" => scn.placement = Placement::FixedDistance { meters: value_f64(param, v)? },
        "p_rf" => scn.power.p_rf = value_f64(param, v)?,
        "p_max" => scn.power.p_max = value_f64(param, v)?,
        "chi" => alg.chi = value_f64(param, v)?,
        "rho" => alg.rho = value_f64(param, v)?,
        "varsigma" => alg.varsigma = value_f64(param, v)?,
        "kappa" => alg.kappa = value_f64(param, v)?,
        "varrho" => alg.varrho = value_f64(param, v)?,
        "epsilon" => alg.epsilon = value_f64(param, v)?,
        other => {
            return err(format!(
                "sweep axis '{other}' is not a sweepable parameter (known: {})",
                SWEEPABLE.join(", ")
            ))
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.seeds()
    }

    /// Reject impossible experiments before any output is produced. Sweep
    /// values are type-checked by applying each one to scratch copies.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario
            .validate()
            .map_err(|e| ConfigError(format!("scenario: {e}")))?;
        parse_algo(&self.algorithm.name)?;
        self.algorithm
            .to_solve_options()
            .validate()
            .map_err(|e| ConfigError(format!("algorithm: {e}")))?;
        if self.algorithm.kappa < 0.0 || self.algorithm.kappa > 1.0 {
            return err(format!("algorithm: kappa {} outside [0, 1]", self.algorithm.kappa));
        }
        if self.algorithm.varrho < 0.0 {
            return err(format!("algorithm: varrho {} is negative", self.algorithm.varrho));
        }
        if self.seeds().is_empty() {
            return err("seed set is empty");
        }
        if let Some(sweep) = &self.sweep {
            let axes = sweep.axes();
            if axes.is_empty() {
                return err("sweep is an empty list");
            }
            let mut seen = Vec::new();
            for axis in &axes {
                if !SWEEPABLE.contains(&axis.parameter.as_str()) {
                    return err(format!(
                        "sweep axis '{}' is not a sweepable parameter (known: {})",
                        axis.parameter,
                        SWEEPABLE.join(", ")
                    ));
                }
                if seen.contains(&axis.parameter) {
                    return err(format!("sweep axis '{}' appears twice", axis.parameter));
                }
                seen.push(axis.parameter.clone());
                if axis.values.is_empty() {
                    return err(format!("sweep axis '{}' has no values", axis.parameter));
                }
                for v in &axis.values {
                    let mut scn = self.scenario.clone();
                    let mut alg = self.algorithm.clone();
                    apply_axis(&mut scn, &mut alg, &axis.parameter, v)?;
                    scn.validate()
                        .map_err(|e| ConfigError(format!("sweep axis '{}' value {v}: {e}", axis.parameter)))?;
                }
            }
        }
        Ok(())
    }
}

impl AlgorithmConfig {
    /// Driver options implied by this config. Method weights (`kappa`,
    /// `varrho`) stay separate because the drivers take them as arguments.
    pub fn to_solve_options(&self) -> jbas_core::algorithms::SolveOptions {
        jbas_core::algorithms::SolveOptions {
            chi: self.chi,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            backend_path: self.backend,
            rho: self.rho,
            varsigma: self.varsigma,
            ..jbas_core::algorithms::SolveOptions::default()
        }
    }
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub algorithm: Option<String>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub chi: Option<f64>,
    pub rho: Option<f64>,
    pub varsigma: Option<f64>,
    pub kappa: Option<f64>,
    pub varrho: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub backend: Option<String>,
}

pub fn apply_overrides(cfg: &mut ExperimentConfig, ov: &Overrides) -> Result<(), ConfigError> {
    if let Some(name) = &ov.algorithm {
        parse_algo(name)?;
        cfg.algorithm.name = name.clone();
    }
    if ov.seed.is_some() && ov.seeds.is_some() {
        return err("--seed and --seeds are mutually exclusive");
    }
    if let Some(s) = ov.seed {
        cfg.seeds = SeedSpec::List(SeedList { list: vec![s] });
    }
    if let Some(list) = &ov.seeds {
        cfg.seeds = SeedSpec::List(SeedList { list: list.clone() });
    }
    if let Some(x) = ov.chi {
        cfg.algorithm.chi = x;
    }
    if let Some(x) = ov.rho {
        cfg.algorithm.rho = x;
    }
    if let Some(x) = ov.varsigma {
        cfg.algorithm.varsigma = x;
    }
    if let Some(x) = ov.kappa {
        cfg.algorithm.kappa = x;
    }
    if let Some(x) = ov.varrho {
        cfg.algorithm.varrho = x;
    }
    if let Some(x) = ov.epsilon {
        cfg.algorithm.epsilon = x;
    }
    if let Some(x) = ov.max_iter {
        cfg.algorithm.max_iter = x;
    }
    if let Some(x) = ov.tol {
        cfg.algorithm.rel_tol = x;
    }
    if let Some(b) = &ov.backend {
        cfg.algorithm.backend = match b.as_str() {
            "socp" => BackendPath::Socp,
            "generic" => BackendPath::Generic,
            other => return err(format!("unknown backend '{other}' (expected socp or generic)")),
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let cfg = ExperimentConfig::from_json_str("{}").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seeds().len(), 20);
        assert_eq!(cfg.seeds()[0], 1);
        assert_eq!(cfg.algorithm.name, "alg1");
    }

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        for text in [
            r#"{"bogus": 1}"#,
            r#"{"scenario": {"bogus": 1}}"#,
            r#"{"algorithm": {"bogus": 1}}"#,
            r#"{"scenario": {"power": {"bogus": 1}}}"#,
            r#"{"sweep": {"parameter": "chi", "values": [1], "bogus": 2}}"#,
            r#"{"seeds": {"base": 1, "count": 2, "bogus": 3}}"#,
            r#"{"seeds": {"list": [1], "bogus": 3}}"#,
        ] {
            assert!(ExperimentConfig::from_json_str(text).is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn seed_specs_enumerate() {
        let cfg =
            ExperimentConfig::from_json_str(r#"{"seeds": {"base": 7, "count": 3}}"#).unwrap();
        assert_eq!(cfg.seeds(), vec![7, 8, 9]);
        let cfg = ExperimentConfig::from_json_str(r#"{"seeds": {"list": [4, 1, 4]}}"#).unwrap();
        assert_eq!(cfg.seeds(), vec![4, 1, 4]);
        let cfg = ExperimentConfig::from_json_str(r#"{"seeds": {"list": []}}"#).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_validation_catches_bad_axes() {
        let bad = [
            r#"{"sweep": {"parameter": "nonsense", "values": [1]}}"#,
            r#"{"sweep": {"parameter": "chi", "values": []}}"#,
            r#"{"sweep": [{"parameter": "chi", "values": [1]}, {"parameter": "chi", "values": [2]}]}"#,
            r#"{"sweep": {"parameter": "algorithm", "values": ["alg9"]}}"#,
            r#"{"sweep": {"parameter": "antennas_per_bs", "values": [2.5]}}"#,
            r#"{"sweep": []}"#,
        ];
        for text in bad {
            let cfg = ExperimentConfig::from_json_str(text).unwrap();
            assert!(cfg.validate().is_err(), "validated: {text}");
        }
        let ok = r#"{"sweep": [{"parameter": "algorithm", "values": ["alg1", "no-as"]},
                               {"parameter": "antennas_per_bs", "values": [2, 3]}]}"#;
        ExperimentConfig::from_json_str(ok).unwrap().validate().unwrap();
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = ExperimentConfig::default();
        let ov = Overrides {
            algorithm: Some("pwee".into()),
            seed: Some(9),
            kappa: Some(0.25),
            backend: Some("generic".into()),
            ..Overrides::default()
        };
        apply_overrides(&mut cfg, &ov).unwrap();
        assert_eq!(cfg.algorithm.name, "pwee");
        assert_eq!(cfg.seeds(), vec![9]);
        assert_eq!(cfg.algorithm.kappa, 0.25);
        assert_eq!(cfg.algorithm.backend, BackendPath::Generic);

        let conflicting = Overrides {
            seed: Some(1),
            seeds: Some(vec![2, 3]),
            ..Overrides::default()
        };
        assert!(apply_overrides(&mut cfg, &conflicting).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for name in ["alg1", "alg1-simple", "alg2-f1", "alg2-f2", "alg2-f3", "alg3", "pwee", "no-as"]
        {
            assert_eq!(parse_algo(name).unwrap().as_str(), name);
        }
        assert!(parse_algo("alg2").is_err());
    }
}
