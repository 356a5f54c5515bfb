//! Negotiation protocol: structured intents, signed wire envelopes, the
//! session state machine, the mediator and consensus decomposition.

mod enforce;
mod mediator;
mod session;
pub mod wire;

pub use enforce::{decompose_offer, EnforcementDirective, SliceDirective};
pub use mediator::{mediate, utility, Recommendation};
pub use session::{RoundOutcome, Selection, SessionPhase, SessionState, DEFAULT_MAX_ROUNDS};
pub use wire::{canonical_json, parse_transcript, render_transcript, Envelope, KeyRing, MessageKind};

use crate::kpi::SliceClass;
use crate::optimizer::{Offer, SlaClause};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sender name used by the broker side of a session.
pub const MEDIATOR: &str = "mediator";

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("invalid transition from {from:?} to {to:?}")]
    InvalidTransition { from: SessionPhase, to: SessionPhase },
    #[error("operation `{op}` not allowed in phase {phase:?}")]
    WrongPhase { op: &'static str, phase: SessionPhase },
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("invalid intent: {0}")]
    InvalidIntent(String),
    #[error("bad signature from `{0}`")]
    BadSignature(String),
    #[error("no key registered for `{0}`")]
    MissingKey(String),
    #[error("round regression: message round {got} < session round {current}")]
    RoundRegression { got: u32, current: u32 },
    #[error("message for session `{got}` applied to `{expected}`")]
    SessionMismatch { expected: String, got: String },
    #[error("malformed payload: {0}")]
    Payload(String),
    #[error("no offers published")]
    NoOffers,
}

/// A stakeholder's structured constraints plus its free-form text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub agent_id: String,
    pub use_case: SliceClass,
    #[serde(default, with = "crate::float::option", skip_serializing_if = "Option::is_none")]
    pub min_throughput_mbps: Option<f64>,
    #[serde(default, with = "crate::float::option", skip_serializing_if = "Option::is_none")]
    pub max_latency_ms: Option<f64>,
    #[serde(default, with = "crate::float::option", skip_serializing_if = "Option::is_none")]
    pub max_cost_eur: Option<f64>,
    #[serde(default, with = "crate::float::option", skip_serializing_if = "Option::is_none")]
    pub max_energy_w: Option<f64>,
    #[serde(default)]
    pub freeform_text: String,
    #[serde(default)]
    pub phase: String,
}

impl Intent {
    pub fn has_bounds(&self) -> bool {
        self.clause().has_bounds()
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.agent_id.trim().is_empty() {
            return Err(ProtocolError::InvalidIntent("empty agent id".into()));
        }
        if !self.has_bounds() && self.freeform_text.trim().is_empty() {
            return Err(ProtocolError::InvalidIntent(format!(
                "intent from `{}` has no bounds and no text",
                self.agent_id
            )));
        }
        for (name, v) in [
            ("min_throughput_mbps", self.min_throughput_mbps),
            ("max_latency_ms", self.max_latency_ms),
            ("max_cost_eur", self.max_cost_eur),
            ("max_energy_w", self.max_energy_w),
        ] {
            if let Some(v) = v {
                if v.is_nan() || v < 0.0 {
                    return Err(ProtocolError::InvalidIntent(format!("{name} must be non-negative")));
                }
            }
        }
        Ok(())
    }

    pub fn clause(&self) -> SlaClause {
        SlaClause {
            slice: self.use_case,
            min_throughput_mbps: self.min_throughput_mbps,
            max_latency_ms: self.max_latency_ms,
            max_cost_eur: self.max_cost_eur,
            max_energy_w: self.max_energy_w,
        }
    }

    /// A request to switch the RAN off: unbounded latency, zero energy and
    /// no throughput floor.
    pub fn is_shutdown(&self) -> bool {
        self.max_latency_ms.map_or(false, f64::is_infinite)
            && self.max_energy_w == Some(0.0)
            && self.min_throughput_mbps.map_or(true, |t| t == 0.0)
    }
}

/// Body of an `offers` message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffersPayload {
    pub offers: Vec<Offer>,
    #[serde(default)]
    pub short_front: bool,
    #[serde(default)]
    pub shutdown: bool,
    #[serde(default)]
    pub front_size: usize,
}

/// Body of a `selection` message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPayload {
    pub offer_id: u32,
    pub rationale: String,
    #[serde(default)]
    pub abstained: bool,
}

/// Body of a `consensus` message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusPayload {
    pub offer_id: u32,
    pub forced: bool,
    /// Rounds after offer publication.
    pub rounds: u32,
    /// Rounds including the initial intent round.
    pub raw_rounds: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directive: Option<EnforcementDirective>,
}

/// Body of a `verdict` message: one judicial decision about one message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictPayload {
    pub target: String,
    /// Round of the classified message.
    pub message_round: u32,
    pub label: String,
    pub score: f64,
    pub matched: Vec<String>,
    pub incentive: String,
    pub multiplier: f64,
    pub influence_after: f64,
    #[serde(default)]
    pub reason: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intent() -> Intent {
        Intent {
            agent_id: "media-flex".into(),
            use_case: SliceClass::Embb,
            min_throughput_mbps: Some(60.0),
            max_latency_ms: Some(10.0),
            max_cost_eur: Some(200.0),
            max_energy_w: Some(100.0),
            freeform_text: String::new(),
            phase: "PA".into(),
        }
    }

    #[test]
    fn empty_intent_rejected() {
        let i = Intent {
            min_throughput_mbps: None,
            max_latency_ms: None,
            max_cost_eur: None,
            max_energy_w: None,
            ..intent()
        };
        assert!(i.validate().is_err());
        assert!(intent().validate().is_ok());
    }

    #[test]
    fn shutdown_detection() {
        let off = Intent {
            min_throughput_mbps: None,
            max_latency_ms: Some(f64::INFINITY),
            max_cost_eur: None,
            max_energy_w: Some(0.0),
            ..intent()
        };
        assert!(off.is_shutdown());
        assert!(!intent().is_shutdown());
    }

    #[test]
    fn intent_round_trips_infinity() {
        let off = Intent { max_latency_ms: Some(f64::INFINITY), ..intent() };
        let s = serde_json::to_string(&off).unwrap();
        assert!(s.contains(r#""max_latency_ms":"inf""#));
        assert_eq!(serde_json::from_str::<Intent>(&s).unwrap(), off);
    }
}
