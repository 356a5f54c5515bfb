//! Scenario files (TOML): stakeholders, phase script, budgets, model and
//! search parameters. The layout is documented in `docs/scenario-schema.md`.

use crate::agents::{ExternalModelConfig, Persona};
use crate::judicial::JudicialConfig;
use crate::kpi::{KpiModelParams, SliceClass};
use crate::optimizer::{GlobalBudget, NsgaParams};
use crate::protocol::Intent;
use crate::trust::NgdMode;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

pub const BUNDLED_SCENARIO: &str = include_str!("../data/scenarios/pa_pd.toml");

#[derive(Debug, Error)]
pub enum ScenarioError {
    /// The file does not match the schema; `path` locates the first error.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    /// Seeds persona randomness, keys and traffic.
    pub seed: u64,
    pub budget: GlobalBudget,
    #[serde(default)]
    pub kpi: KpiModelParams,
    #[serde(default)]
    pub optimizer: NsgaParams,
    #[serde(default)]
    pub negotiation: NegotiationSection,
    #[serde(default)]
    pub judicial: JudicialSection,
    #[serde(default)]
    pub trust: TrustSection,
    #[serde(default)]
    pub netsim: NetsimSection,
    pub stakeholders: Vec<StakeholderSpec>,
    pub phases: Vec<PhaseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NegotiationSection {
    pub max_rounds: u32,
    pub mediator_lambda: f64,
    pub arbitration: bool,
}

impl Default for NegotiationSection {
    fn default() -> Self {
        Self { max_rounds: crate::protocol::DEFAULT_MAX_ROUNDS, mediator_lambda: 0.1, arbitration: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct JudicialSection {
    #[serde(flatten)]
    pub config: JudicialConfig,
    /// Lexicon JSON; the bundled lexicon when absent.
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustSection {
    /// Flat `key = value` weights file; defaults when absent.
    pub weights: Option<PathBuf>,
    pub ngd_mode: NgdMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetsimSection {
    pub prbs_per_tti: u32,
    /// Offered load as a fraction of the agreed throughput.
    pub load_factor: f64,
    /// `tti,mcs` CSV; a trace is synthesized from the phase MCS when absent.
    pub trace: Option<PathBuf>,
    /// Keep one sample in `downsample` in report.json series.
    pub downsample: usize,
    pub arrivals: crate::netsim::Arrivals,
}

impl Default for NetsimSection {
    fn default() -> Self {
        Self { prbs_per_tti: crate::netsim::DEFAULT_PRBS_PER_TTI, load_factor: 0.9, trace: None, downsample: 10, arrivals: Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StakeholderSpec {
    pub id: String,
    #[serde(default)]
    pub persona: Option<Persona>,
    #[serde(default)]
    pub external: Option<ExternalModelConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub id: String,
    pub ttis: u64,
    pub mcs: u8,
    pub intents: BTreeMap<String, IntentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentSpec {
    pub use_case: SliceClass,
    #[serde(default, with = "crate::float::option")]
    pub min_throughput_mbps: Option<f64>,
    #[serde(default, with = "crate::float::option")]
    pub max_latency_ms: Option<f64>,
    #[serde(default, with = "crate::float::option")]
    pub max_cost_eur: Option<f64>,
    #[serde(default, with = "crate::float::option")]
    pub max_energy_w: Option<f64>,
    #[serde(default)]
    pub text: String,
}

impl PhaseSpec {
    pub fn intent(&self, agent: &str) -> Option<Intent> {
        self.intents.get(agent).map(|s| Intent {
            agent_id: agent.to_string(),
            use_case: s.use_case,
            min_throughput_mbps: s.min_throughput_mbps,
            max_latency_ms: s.max_latency_ms,
            max_cost_eur: s.max_cost_eur,
            max_energy_w: s.max_energy_w,
            freeform_text: s.text.clone(),
            phase: self.id.clone(),
        })
    }
}

/// A validated scenario with paths resolved against its directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub base_dir: PathBuf,
}

/// Parses TOML text, reporting the path of the first schema error.
pub fn parse(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Schema { path, message: e.into_inner().message().trim().to_string() }
    })
}

impl Scenario {
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        let s = Self { file: parse(text)?, base_dir: base_dir.to_path_buf() };
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ScenarioError::MissingFile(path.to_path_buf()),
            _ => ScenarioError::Io(e),
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, &dir)
    }

    /// The PA–PD use case shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_str(BUNDLED_SCENARIO, Path::new(".")).expect("bundled scenario is valid")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn agent_ids(&self) -> Vec<String> {
        self.file.stakeholders.iter().map(|s| s.id.clone()).collect()
    }

    pub fn total_ttis(&self) -> u64 {
        self.file.phases.iter().map(|p| p.ttis).sum()
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let f = &self.file;
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if f.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Schema {
                path: "schema_version".into(),
                message: format!("unsupported version {}, expected {SCHEMA_VERSION}", f.schema_version),
            });
        }
        f.budget.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        f.kpi.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        f.optimizer.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if f.stakeholders.is_empty() {
            return bad("no stakeholders".into());
        }
        for (i, s) in f.stakeholders.iter().enumerate() {
            if f.stakeholders[..i].iter().any(|o| o.id == s.id) {
                return bad(format!("stakeholder `{}` listed twice", s.id));
            }
            if s.persona.is_none() && s.external.is_none() {
                return bad(format!("stakeholder `{}` needs a persona or an external adapter", s.id));
            }
        }
        if f.phases.is_empty() {
            return bad("no phases".into());
        }
        if f.negotiation.max_rounds == 0 {
            return bad("negotiation.max_rounds must be at least 1".into());
        }
        if !(f.netsim.load_factor >= 0.0) || f.netsim.prbs_per_tti == 0 {
            return bad("netsim.load_factor must be non-negative and prbs_per_tti positive".into());
        }
        for p in &f.phases {
            if p.ttis == 0 {
                return bad(format!("phase `{}` has no TTIs", p.id));
            }
            if p.mcs > 28 {
                return bad(format!("phase `{}` mcs {} outside 0..=28", p.id, p.mcs));
            }
            for s in &f.stakeholders {
                let intent = p.intent(&s.id).ok_or_else(|| {
                    ScenarioError::Invalid(format!("phase `{}` lacks an intent for `{}`", p.id, s.id))
                })?;
                intent.validate().map_err(|e| ScenarioError::Invalid(format!("phase `{}`: {e}", p.id)))?;
            }
            for agent in p.intents.keys() {
                if !f.stakeholders.iter().any(|s| &s.id == agent) {
                    return bad(format!("phase `{}` has an intent for unknown `{agent}`", p.id));
                }
            }
            let mut classes: Vec<SliceClass> = p.intents.values().map(|i| i.use_case).collect();
            classes.sort();
            classes.dedup();
            if classes.len() != p.intents.len() {
                return bad(format!("phase `{}` assigns one slice class to two stakeholders", p.id));
            }
        }
        let files = [f.netsim.trace.as_ref(), f.judicial.lexicon.as_ref(), f.trust.weights.as_ref()];
        for p in files.into_iter().flatten() {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(ScenarioError::MissingFile(full));
            }
        }
        Ok(())
    }
}
