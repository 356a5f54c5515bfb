use super::mediator::Recommendation;
use super::wire::{Envelope, KeyRing, MessageKind};
use super::{
    decompose_offer, ConsensusPayload, EnforcementDirective, Intent, OffersPayload, ProtocolError, SelectionPayload,
    VerdictPayload,
};
use crate::kpi::SliceClass;
use crate::optimizer::Offer;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_MAX_ROUNDS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    CollectingIntents,
    OffersPublished,
    Negotiating,
    Consensus,
    Enforced,
    Aborted,
}

impl SessionPhase {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionPhase::Enforced | SessionPhase::Aborted)
    }

    pub fn can_move_to(self, to: SessionPhase) -> bool {
        use SessionPhase::*;
        match (self, to) {
            (CollectingIntents, OffersPublished)
            | (OffersPublished, Negotiating)
            | (Negotiating, Consensus)
            | (Consensus, Enforced) => true,
            (from, Aborted) => !from.is_terminal(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub offer_id: u32,
    pub rationale: String,
    pub round: u32,
    /// The id names a published offer.
    pub valid: bool,
    pub abstained: bool,
}

/// Decision taken at the end of a negotiation round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RoundOutcome {
    Consensus { offer_id: u32, forced: bool },
    NextRound(u32),
    Aborted,
}

/// Full state of one negotiation session. Every mutation that matters for
/// audit is reachable through [`SessionState::apply`], so folding a
/// transcript over a fresh state reproduces the live one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub phase: SessionPhase,
    /// Registered stakeholders in registration order.
    pub agents: Vec<String>,
    pub intents: BTreeMap<String, Intent>,
    pub offers: Vec<Offer>,
    pub short_front: bool,
    pub shutdown: bool,
    pub selections: BTreeMap<String, Selection>,
    pub recommendation: Option<Recommendation>,
    pub consensus_offer: Option<u32>,
    pub forced: bool,
    pub round: u32,
    pub influence: BTreeMap<String, f64>,
    pub max_rounds: u32,
    pub abort_cause: Option<String>,
    pub directive: Option<EnforcementDirective>,
    pub warnings: Vec<String>,
}

impl SessionState {
    pub fn new(session_id: &str, agents: Vec<String>, max_rounds: u32) -> Self {
        let influence = agents.iter().map(|a| (a.clone(), 1.0)).collect();
        Self {
            session_id: session_id.to_string(),
            phase: SessionPhase::CollectingIntents,
            agents,
            intents: BTreeMap::new(),
            offers: Vec::new(),
            short_front: false,
            shutdown: false,
            selections: BTreeMap::new(),
            recommendation: None,
            consensus_offer: None,
            forced: false,
            round: 0,
            influence,
            max_rounds,
            abort_cause: None,
            directive: None,
            warnings: Vec::new(),
        }
    }

    fn transition(&mut self, to: SessionPhase) -> Result<(), ProtocolError> {
        if !self.phase.can_move_to(to) {
            return Err(ProtocolError::InvalidTransition { from: self.phase, to });
        }
        self.phase = to;
        Ok(())
    }

    fn require(&self, op: &'static str, phase: SessionPhase) -> Result<(), ProtocolError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(ProtocolError::WrongPhase { op, phase: self.phase })
        }
    }

    pub fn is_registered(&self, agent: &str) -> bool {
        self.agents.iter().any(|a| a == agent)
    }

    pub fn influence_of(&self, agent: &str) -> f64 {
        self.influence.get(agent).copied().unwrap_or(1.0)
    }

    /// Stores an intent. Returns `true` when it replaced an earlier one.
    pub fn submit_intent(&mut self, intent: Intent) -> Result<bool, ProtocolError> {
        self.require("submit_intent", SessionPhase::CollectingIntents)?;
        if !self.is_registered(&intent.agent_id) {
            return Err(ProtocolError::UnknownAgent(intent.agent_id));
        }
        intent.validate()?;
        let replaced = self.intents.insert(intent.agent_id.clone(), intent.clone()).is_some();
        if replaced {
            let msg = format!("intent from `{}` replaced", intent.agent_id);
            tracing::warn!("{msg}");
            self.warnings.push(msg);
        }
        Ok(replaced)
    }

    pub fn all_intents_in(&self) -> bool {
        !self.agents.is_empty() && self.agents.iter().all(|a| self.intents.contains_key(a))
    }

    /// Stakeholder owning each slice class, from the submitted intents.
    pub fn owners(&self) -> BTreeMap<SliceClass, String> {
        self.agents
            .iter()
            .filter_map(|a| self.intents.get(a).map(|i| (i.use_case, a.clone())))
            .collect()
    }

    /// Publishes offers and opens round 1. An empty offer list aborts.
    pub fn publish_offers(&mut self, payload: OffersPayload) -> Result<(), ProtocolError> {
        self.require("publish_offers", SessionPhase::CollectingIntents)?;
        if !self.all_intents_in() {
            return Err(ProtocolError::WrongPhase { op: "publish_offers", phase: self.phase });
        }
        if payload.offers.is_empty() {
            self.abort("optimizer returned no offers");
            return Err(ProtocolError::NoOffers);
        }
        self.offers = payload.offers;
        self.short_front = payload.short_front;
        self.shutdown = payload.shutdown;
        self.transition(SessionPhase::OffersPublished)?;
        self.transition(SessionPhase::Negotiating)?;
        self.round = 1;
        Ok(())
    }

    pub fn abort(&mut self, cause: &str) {
        if self.phase.can_move_to(SessionPhase::Aborted) {
            self.phase = SessionPhase::Aborted;
            self.abort_cause = Some(cause.to_string());
        }
    }

    pub fn is_published(&self, offer_id: u32) -> bool {
        self.offers.iter().any(|o| o.id == offer_id)
    }

    pub fn offer(&self, offer_id: u32) -> Option<&Offer> {
        self.offers.iter().find(|o| o.id == offer_id)
    }

    /// Records one agent's selection for `round`. Off-menu ids are kept but
    /// flagged invalid; abstentions adopt the current recommendation.
    pub fn record_selection(
        &mut self,
        agent: &str,
        payload: SelectionPayload,
        round: u32,
    ) -> Result<(), ProtocolError> {
        self.require("record_selection", SessionPhase::Negotiating)?;
        if !self.is_registered(agent) {
            return Err(ProtocolError::UnknownAgent(agent.to_string()));
        }
        self.advance_to(round)?;
        let mut offer_id = payload.offer_id;
        if payload.abstained {
            if let Some(rec) = &self.recommendation {
                offer_id = rec.offer_id;
            }
        }
        let valid = self.is_published(offer_id);
        self.selections.insert(
            agent.to_string(),
            Selection { offer_id, rationale: payload.rationale, round, valid, abstained: payload.abstained },
        );
        Ok(())
    }

    fn advance_to(&mut self, round: u32) -> Result<(), ProtocolError> {
        if round < self.round {
            return Err(ProtocolError::RoundRegression { got: round, current: self.round });
        }
        self.round = round;
        Ok(())
    }

    /// Offer id every registered agent selected in the current round, if
    /// they all agree on a published offer.
    pub fn unanimous_selection(&self) -> Option<u32> {
        let mut id = None;
        for a in &self.agents {
            let s = self.selections.get(a)?;
            if s.round != self.round || !s.valid {
                return None;
            }
            match id {
                None => id = Some(s.offer_id),
                Some(prev) if prev != s.offer_id => return None,
                _ => {}
            }
        }
        id
    }

    pub fn set_recommendation(&mut self, rec: Recommendation) -> Result<(), ProtocolError> {
        self.require("set_recommendation", SessionPhase::Negotiating)?;
        if !self.is_published(rec.offer_id) {
            return Err(ProtocolError::Payload(format!("recommended offer {} not published", rec.offer_id)));
        }
        self.recommendation = Some(rec);
        Ok(())
    }

    /// What the end of the current round implies, without changing state.
    pub fn decide_round(&self) -> RoundOutcome {
        if self.agents.is_empty() || self.phase != SessionPhase::Negotiating {
            return RoundOutcome::Aborted;
        }
        if let Some(id) = self.unanimous_selection() {
            return RoundOutcome::Consensus { offer_id: id, forced: false };
        }
        if self.round >= self.max_rounds {
            let id = self
                .recommendation
                .as_ref()
                .map(|r| r.offer_id)
                .unwrap_or_else(|| self.offers.iter().map(|o| o.id).min().unwrap_or(0));
            return RoundOutcome::Consensus { offer_id: id, forced: true };
        }
        RoundOutcome::NextRound(self.round + 1)
    }

    /// Applies [`SessionState::decide_round`].
    pub fn step_round(&mut self) -> RoundOutcome {
        let outcome = self.decide_round();
        match outcome {
            RoundOutcome::Aborted => self.abort("no agents or session not negotiating"),
            RoundOutcome::Consensus { offer_id, forced } => {
                let _ = self.conclude(offer_id, forced, None);
            }
            RoundOutcome::NextRound(r) => self.round = r,
        }
        outcome
    }

    fn conclude(
        &mut self,
        offer_id: u32,
        forced: bool,
        directive: Option<EnforcementDirective>,
    ) -> Result<(), ProtocolError> {
        if !self.is_published(offer_id) {
            return Err(ProtocolError::Payload(format!("consensus offer {offer_id} not published")));
        }
        self.transition(SessionPhase::Consensus)?;
        self.consensus_offer = Some(offer_id);
        self.forced = forced;
        if let Some(d) = directive {
            self.directive = Some(d);
            self.transition(SessionPhase::Enforced)?;
        }
        Ok(())
    }

    /// Per-slice resource policy for the agreed offer.
    pub fn decompose_consensus(&self) -> Result<EnforcementDirective, ProtocolError> {
        if !matches!(self.phase, SessionPhase::Consensus | SessionPhase::Enforced) {
            return Err(ProtocolError::WrongPhase { op: "decompose_consensus", phase: self.phase });
        }
        let id = self.consensus_offer.expect("consensus phase carries an offer");
        let offer = self.offer(id).expect("consensus offer is published");
        Ok(decompose_offer(offer, &self.owners()))
    }

    pub fn mark_enforced(&mut self, directive: EnforcementDirective) -> Result<(), ProtocolError> {
        self.transition(SessionPhase::Enforced)?;
        self.directive = Some(directive);
        Ok(())
    }

    pub fn set_influence(&mut self, agent: &str, value: f64) -> Result<(), ProtocolError> {
        if !self.is_registered(agent) {
            return Err(ProtocolError::UnknownAgent(agent.to_string()));
        }
        self.influence.insert(agent.to_string(), value.clamp(f64::MIN_POSITIVE, 2.0));
        Ok(())
    }

    /// Applies one transcript message.
    pub fn apply(&mut self, env: &Envelope) -> Result<(), ProtocolError> {
        if env.session_id != self.session_id {
            return Err(ProtocolError::SessionMismatch { expected: self.session_id.clone(), got: env.session_id.clone() });
        }
        if env.round < self.round {
            return Err(ProtocolError::RoundRegression { got: env.round, current: self.round });
        }
        match env.kind {
            MessageKind::Intent => {
                let intent: Intent = env.payload_as()?;
                if intent.agent_id != env.sender {
                    return Err(ProtocolError::Payload("intent sender and agent_id differ".into()));
                }
                self.submit_intent(intent)?;
            }
            MessageKind::Offers => {
                self.publish_offers(env.payload_as::<OffersPayload>()?)?;
            }
            MessageKind::Selection => {
                self.record_selection(&env.sender, env.payload_as::<SelectionPayload>()?, env.round)?;
            }
            MessageKind::Recommendation => {
                self.advance_to(env.round)?;
                self.set_recommendation(env.payload_as::<Recommendation>()?)?;
            }
            MessageKind::Verdict => {
                let v: VerdictPayload = env.payload_as()?;
                self.advance_to(env.round)?;
                self.set_influence(&v.target, v.influence_after)?;
            }
            MessageKind::Consensus => {
                let c: ConsensusPayload = env.payload_as()?;
                self.advance_to(env.round)?;
                self.conclude(c.offer_id, c.forced, c.directive)?;
            }
            MessageKind::Telemetry => {}
        }
        Ok(())
    }

    /// Verifies the signature before applying.
    pub fn apply_verified(&mut self, env: &Envelope, keys: &KeyRing) -> Result<(), ProtocolError> {
        keys.verify(env)?;
        self.apply(env)
    }

    /// Rebuilds a session from its transcript.
    pub fn replay(
        session_id: &str,
        agents: Vec<String>,
        max_rounds: u32,
        transcript: &[Envelope],
        keys: Option<&KeyRing>,
    ) -> Result<Self, ProtocolError> {
        let mut s = Self::new(session_id, agents, max_rounds);
        for env in transcript {
            match keys {
                Some(k) => s.apply_verified(env, k)?,
                None => s.apply(env)?,
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpi::{KpiVector, ResourceVector};

    fn offers() -> Vec<Offer> {
        (1..=3)
            .map(|id| {
                let mut o = Offer::shutdown(id, SliceClass::ALL);
                for c in SliceClass::ALL {
                    o.per_slice.insert(
                        c,
                        KpiVector { throughput_mbps: 10.0 * id as f64, latency_ms: 2.0, cost_eur: 1.0, energy_w: 1.0 },
                    );
                    o.per_slice_resources.insert(c, ResourceVector::new(id as f64, 0.0, 1.0, 0.0));
                }
                o
            })
            .collect()
    }

    fn intent(agent: &str, class: SliceClass) -> Intent {
        Intent {
            agent_id: agent.into(),
            use_case: class,
            min_throughput_mbps: Some(1.0),
            max_latency_ms: None,
            max_cost_eur: None,
            max_energy_w: None,
            freeform_text: String::new(),
            phase: "PA".into(),
        }
    }

    fn session() -> SessionState {
        let mut s = SessionState::new("s", vec!["a".into(), "b".into(), "c".into()], DEFAULT_MAX_ROUNDS);
        s.submit_intent(intent("a", SliceClass::Embb)).unwrap();
        s.submit_intent(intent("b", SliceClass::Urllc)).unwrap();
        assert!(!s.all_intents_in());
        s.submit_intent(intent("c", SliceClass::Mmtc)).unwrap();
        assert!(s.all_intents_in());
        s
    }

    fn select(s: &mut SessionState, agent: &str, id: u32) {
        let round = s.round;
        s.record_selection(agent, SelectionPayload { offer_id: id, rationale: "r".into(), abstained: false }, round)
            .unwrap();
    }

    #[test]
    fn transition_table() {
        use SessionPhase::*;
        assert!(CollectingIntents.can_move_to(OffersPublished));
        assert!(!CollectingIntents.can_move_to(Negotiating));
        assert!(!Negotiating.can_move_to(Enforced));
        assert!(Negotiating.can_move_to(Aborted));
        assert!(!Enforced.can_move_to(Aborted));
        assert!(!Aborted.can_move_to(Consensus));
    }

    #[test]
    fn unknown_agent_and_duplicate_intent() {
        let mut s = session();
        assert_eq!(s.clone().submit_intent(intent("zed", SliceClass::Embb)), Err(ProtocolError::UnknownAgent("zed".into())));
        assert_eq!(s.submit_intent(intent("a", SliceClass::Embb)), Ok(true));
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn unanimous_round_reaches_consensus() {
        let mut s = session();
        s.publish_offers(OffersPayload { offers: offers(), short_front: false, shutdown: false, front_size: 3 }).unwrap();
        assert_eq!(s.phase, SessionPhase::Negotiating);
        for a in ["a", "b", "c"] {
            select(&mut s, a, 2);
        }
        assert_eq!(s.step_round(), RoundOutcome::Consensus { offer_id: 2, forced: false });
        assert_eq!(s.phase, SessionPhase::Consensus);
        let d = s.decompose_consensus().unwrap();
        let total: f64 = d.slices.values().map(|x| x.prb_share).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(d.slices[&SliceClass::Urllc].owner.as_deref(), Some("b"));
    }

    #[test]
    fn off_menu_selection_is_flagged() {
        let mut s = session();
        s.publish_offers(OffersPayload { offers: offers(), short_front: false, shutdown: false, front_size: 3 }).unwrap();
        select(&mut s, "a", 99);
        assert!(!s.selections["a"].valid);
        select(&mut s, "b", 99);
        select(&mut s, "c", 99);
        assert_eq!(s.unanimous_selection(), None);
    }

    #[test]
    fn split_rounds_until_forced() {
        let mut s = session();
        s.publish_offers(OffersPayload { offers: offers(), short_front: false, shutdown: false, front_size: 3 }).unwrap();
        loop {
            select(&mut s, "a", 1);
            select(&mut s, "b", 2);
            select(&mut s, "c", 2);
            match s.step_round() {
                RoundOutcome::NextRound(_) => continue,
                RoundOutcome::Consensus { forced, offer_id } => {
                    assert!(forced);
                    assert_eq!(offer_id, 1);
                    break;
                }
                RoundOutcome::Aborted => panic!("aborted"),
            }
        }
        assert_eq!(s.round, DEFAULT_MAX_ROUNDS);
    }

    #[test]
    fn empty_agent_set_aborts() {
        let mut s = SessionState::new("s", vec![], 10);
        assert_eq!(s.step_round(), RoundOutcome::Aborted);
        assert_eq!(s.phase, SessionPhase::Aborted);
    }

    #[test]
    fn empty_offer_list_aborts() {
        let mut s = session();
        let err = s.publish_offers(OffersPayload { offers: vec![], short_front: true, shutdown: false, front_size: 0 });
        assert_eq!(err, Err(ProtocolError::NoOffers));
        assert_eq!(s.phase, SessionPhase::Aborted);
    }

    #[test]
    fn round_regression_rejected() {
        let mut s = session();
        s.publish_offers(OffersPayload { offers: offers(), short_front: false, shutdown: false, front_size: 3 }).unwrap();
        s.record_selection("a", SelectionPayload { offer_id: 1, rationale: String::new(), abstained: false }, 3)
            .unwrap();
        let err = s.record_selection("a", SelectionPayload { offer_id: 1, rationale: String::new(), abstained: false }, 2);
        assert_eq!(err, Err(ProtocolError::RoundRegression { got: 2, current: 3 }));
    }

    #[test]
    fn influence_is_capped() {
        let mut s = session();
        s.set_influence("a", 5.0).unwrap();
        assert_eq!(s.influence_of("a"), 2.0);
        s.set_influence("a", 0.0).unwrap();
        assert!(s.influence_of("a") > 0.0);
    }
}
