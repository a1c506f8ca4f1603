//! Scenario configuration, version 1.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelConfig,
    pub initial_state: InitialState,
    pub time: TimeConfig,
    #[serde(default = "default_gauges")]
    pub gauges: Vec<GaugeConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub analyses: AnalysesConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_gauges() -> Vec<GaugeConfig> {
    vec![GaugeConfig::Identity { label: None }]
}

/// A real number or an expression in `t`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    pub fn source(&self) -> String {
        match self {
            Scalar::Number(x) => format!("{x:?}"),
            Scalar::Expr(s) => s.clone(),
        }
    }
}

/// A complex number given as `x` or `[re, im]`.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(self) -> Complex64 {
        match self {
            ComplexValue::Real(x) => Complex64::new(x, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl Default for ComplexValue {
    fn default() -> Self {
        ComplexValue::Real(0.0)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Pdm {
        omega: f64,
        gamma: Scalar,
        p: f64,
        #[serde(default)]
        rho01: ComplexValue,
    },
    Maser {
        levels: [f64; 3],
        epsilon: f64,
        gamma: f64,
        #[serde(default)]
        nbar_h: Option<f64>,
        #[serde(default)]
        nbar_c: Option<f64>,
        #[serde(default)]
        beta_h: Option<f64>,
        #[serde(default)]
        beta_c: Option<f64>,
    },
    ResonanceFluorescence {
        omega0: f64,
        omega: f64,
        drive: f64,
        gamma: f64,
        nbar: f64,
        #[serde(default)]
        presentation: Presentation,
    },
    QdbcDecay {
        omega0: f64,
        beta: f64,
        gamma: f64,
    },
    Inline(InlineModel),
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::Pdm { .. } => "pdm",
            ModelConfig::Maser { .. } => "maser",
            ModelConfig::ResonanceFluorescence { .. } => "resonance_fluorescence",
            ModelConfig::QdbcDecay { .. } => "qdbc_decay",
            ModelConfig::Inline(_) => "inline",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Presentation {
    #[default]
    Driven,
    Displaced,
}

/// Matrix of expressions in `t`, row-major.
pub type ExprMatrix = Vec<Vec<Scalar>>;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InlineModel {
    pub dim: usize,
    pub hamiltonian: ExprMatrix,
    #[serde(default)]
    pub channels: Vec<ChannelConfig>,
    /// One entry per channel: `±1` or an expression whose sign is taken.
    #[serde(default)]
    pub signature: Option<Vec<Scalar>>,
    #[serde(default)]
    pub reservoirs: BTreeMap<String, Option<f64>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub operator: ExprMatrix,
    #[serde(default)]
    pub reservoir: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeConfig {
    Identity {
        #[serde(default)]
        label: Option<String>,
    },
    Preset {
        #[serde(default)]
        label: Option<String>,
        preset: String,
        #[serde(default)]
        seed: Option<Vec<ComplexValue>>,
    },
    Maser {
        #[serde(default)]
        label: Option<String>,
        family: String,
        #[serde(default = "unit")]
        c: ComplexValue,
    },
    Witness {
        #[serde(default)]
        label: Option<String>,
    },
    Inline {
        #[serde(default)]
        label: Option<String>,
        gamma: Vec<Scalar>,
        #[serde(default)]
        umatrix: Option<ExprMatrix>,
        #[serde(default)]
        phi: Option<Scalar>,
    },
}

fn unit() -> ComplexValue {
    ComplexValue::Real(1.0)
}

impl GaugeConfig {
    pub fn label(&self, index: usize) -> String {
        let (given, default) = match self {
            GaugeConfig::Identity { label } => (label, "identity".to_string()),
            GaugeConfig::Preset { label, preset, .. } => (label, preset.clone()),
            GaugeConfig::Maser { label, family, .. } => (label, format!("maser_{family}")),
            GaugeConfig::Witness { label } => (label, "witness".to_string()),
            GaugeConfig::Inline { label, .. } => (label, format!("inline{index}")),
        };
        given.clone().unwrap_or(default)
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// May contain `{gauge}`; otherwise the gauge label is appended to the
    /// file stem when several gauges are listed.
    #[serde(default)]
    pub csv_path: Option<String>,
    #[serde(default)]
    pub summary_path: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysesConfig {
    #[serde(default = "yes")]
    pub thermo: bool,
    #[serde(default)]
    pub entropy: bool,
    #[serde(default)]
    pub invariance: bool,
    #[serde(default)]
    pub qdbc: bool,
    #[serde(default)]
    pub machine: Option<MachineConfig>,
}

fn yes() -> bool {
    true
}

impl Default for AnalysesConfig {
    fn default() -> Self {
        Self {
            thermo: true,
            entropy: false,
            invariance: false,
            qdbc: false,
            machine: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    #[serde(default = "hot")]
    pub hot: String,
    #[serde(default = "cold")]
    pub cold: String,
    #[serde(default)]
    pub beta_h: Option<f64>,
    #[serde(default)]
    pub beta_c: Option<f64>,
    /// Must equal `t1 − t0` when given.
    #[serde(default)]
    pub period: Option<f64>,
    /// Evolution time before `t0`, starting from the initial state.
    #[serde(default)]
    pub burn_in: f64,
}

fn hot() -> String {
    "hot".into()
}

fn cold() -> String {
    "cold".into()
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Dotted path into this config, e.g. `model.epsilon` or `gauges.1.c`.
    pub parameter: String,
    pub values: Vec<serde_json::Value>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagged_variants_and_defaults() {
        let cfg: ScenarioConfig = serde_json::from_str(
            r#"{"schema": 1,
                "model": {"kind": "pdm", "omega": 1, "gamma": "exp(-t)", "p": 0.5, "rho01": [0.1, 0.2]},
                "initial_state": "pdm_initial",
                "time": {"t0": 0, "t1": 1, "steps": 10},
                "gauges": [{"kind": "maser", "family": "neutral"}, {"kind": "inline", "gamma": [0.5]}]}"#,
        )
        .unwrap();
        assert_eq!(cfg.model.kind(), "pdm");
        assert!(cfg.analyses.thermo && !cfg.analyses.entropy);
        assert_eq!(cfg.gauges[0].label(0), "maser_neutral");
        assert_eq!(cfg.gauges[1].label(1), "inline1");
        let GaugeConfig::Maser { c, .. } = &cfg.gauges[0] else { panic!() };
        assert_eq!(c.value(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn unknown_fields_are_rejected_inside_tagged_enums() {
        let inline = r#"{"schema": 1,
            "model": {"kind": "inline", "dim": 1, "hamiltonian": [[0]], "extra": 1},
            "initial_state": "maximally_mixed",
            "time": {"t0": 0, "t1": 1, "steps": 2}}"#;
        assert!(serde_json::from_str::<ScenarioConfig>(inline).is_err());
        let gauge = r#"{"schema": 1,
            "model": {"kind": "qdbc_decay", "omega0": 1, "beta": 1, "gamma": 1},
            "initial_state": "gibbs",
            "time": {"t0": 0, "t1": 1, "steps": 2},
            "gauges": [{"kind": "identity", "seed": 3}]}"#;
        assert!(serde_json::from_str::<ScenarioConfig>(gauge).is_err());
    }
}
