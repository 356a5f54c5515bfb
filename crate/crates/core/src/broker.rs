//! One negotiation session end to end: intents, offer generation,
//! mediated selection rounds, arbitration at round boundaries and
//! consensus decomposition. Every step is a signed envelope applied to the
//! session state, so the transcript alone replays to the final state.

use crate::agents::{AgentPolicy, DecisionContext};
use crate::judicial::{classify, Adjudicator, IncentiveKind, JudicialConfig, Lexicon};
use crate::kpi::{KpiModel, SliceClass};
use crate::optimizer::{run_nsga2, select_offers, GlobalBudget, NsgaParams, Offer, OptimizerError, Problem, SliceSpec};
use crate::protocol::{
    mediate, ConsensusPayload, EnforcementDirective, Envelope, Intent, KeyRing, MessageKind, OffersPayload,
    ProtocolError, RoundOutcome, SelectionPayload, SessionState, VerdictPayload, MEDIATOR,
};
use crate::trust::{extract_claims, Claim};
use serde::Serialize;
use std::collections::BTreeMap;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("missing intent for `{0}`")]
    MissingIntent(String),
}

/// Knobs of one negotiation.
#[derive(Debug, Clone)]
pub struct NegotiationSetup<'a> {
    pub session_id: String,
    pub mcs: u8,
    pub budget: GlobalBudget,
    pub model: &'a KpiModel,
    pub nsga: NsgaParams,
    pub max_rounds: u32,
    pub lambda: f64,
    pub arbitration: bool,
    pub judicial: JudicialConfig,
    pub lexicon: &'a Lexicon,
    /// Seed for persona randomness.
    pub agent_seed: u64,
}

pub struct Participant<'a> {
    pub id: String,
    pub policy: &'a dyn AgentPolicy,
}

#[derive(Debug, Clone)]
pub struct NegotiationOutcome {
    pub state: SessionState,
    pub transcript: Vec<Envelope>,
    pub front_size: usize,
    pub verdicts: Vec<VerdictPayload>,
    /// Time spent classifying and adjudicating.
    pub arbitration_time: Duration,
    pub elapsed: Duration,
    /// Set when the optimizer found no feasible offer.
    pub infeasible: Option<String>,
}

impl NegotiationOutcome {
    pub fn consensus_offer(&self) -> Option<&Offer> {
        self.state.consensus_offer.and_then(|id| self.state.offer(id))
    }

    pub fn directive(&self) -> Option<&EnforcementDirective> {
        self.state.directive.as_ref()
    }

    /// Post-offer rounds until consensus.
    pub fn rounds(&self) -> u32 {
        self.state.round
    }

    /// Last selection rationale sent by `agent`.
    pub fn last_rationale(&self, agent: &str) -> Option<String> {
        self.transcript
            .iter()
            .rev()
            .filter(|e| e.kind == MessageKind::Selection && e.sender == agent)
            .find_map(|e| e.payload_as::<SelectionPayload>().ok())
            .map(|s| s.rationale)
    }
}

/// Signs a message, applies it to `state` and returns it.
pub fn record<P: Serialize>(
    state: &mut SessionState,
    keys: &KeyRing,
    ts: u64,
    round: u32,
    sender: &str,
    kind: MessageKind,
    payload: &P,
) -> Result<Envelope, ProtocolError> {
    let mut env = Envelope::new(&state.session_id, round, sender, kind, payload, ts)?;
    keys.sign(&mut env)?;
    state.apply(&env)?;
    Ok(env)
}

struct Emitter<'a> {
    keys: &'a KeyRing,
    clock: &'a mut dyn FnMut() -> u64,
    transcript: Vec<Envelope>,
}

impl Emitter<'_> {
    fn emit<P: Serialize>(
        &mut self,
        state: &mut SessionState,
        round: u32,
        sender: &str,
        kind: MessageKind,
        payload: &P,
    ) -> Result<(), ProtocolError> {
        let ts = (self.clock)();
        let env = record(state, self.keys, ts, round, sender, kind, payload)?;
        self.transcript.push(env);
        Ok(())
    }
}

fn build_offers(setup: &NegotiationSetup<'_>, intents: &[&Intent]) -> Result<(OffersPayload, usize), OptimizerError> {
    let classes: Vec<SliceClass> =
        SliceClass::ALL.iter().copied().filter(|c| intents.iter().any(|i| i.use_case == *c)).collect();
    if intents.iter().all(|i| i.is_shutdown()) {
        let off = Offer::shutdown(1, classes);
        return Ok((OffersPayload { offers: vec![off], short_front: false, shutdown: true, front_size: 1 }, 1));
    }
    let slices = classes.iter().map(|c| SliceSpec { class: *c, mcs: setup.mcs }).collect();
    let clauses = intents.iter().map(|i| i.clause()).collect();
    let problem = Problem::new(slices, setup.budget, clauses, setup.model.clone())?;
    let front = run_nsga2(&problem, &setup.nsga)?;
    let sel = select_offers(&front, setup.nsga.top_k);
    Ok((
        OffersPayload { offers: sel.offers, short_front: sel.short_front, shutdown: false, front_size: front.len() },
        front.len(),
    ))
}

/// Runs one session. `clock` supplies envelope timestamps.
pub fn negotiate(
    setup: &NegotiationSetup<'_>,
    participants: &[Participant<'_>],
    intents: &BTreeMap<String, Intent>,
    keys: &KeyRing,
    clock: &mut dyn FnMut() -> u64,
) -> Result<NegotiationOutcome, BrokerError> {
    let ids: Vec<String> = participants.iter().map(|p| p.id.clone()).collect();
    let mut state = SessionState::new(&setup.session_id, ids, setup.max_rounds);
    let mut transcript = Vec::new();
    for p in participants {
        let intent = intents.get(&p.id).ok_or_else(|| BrokerError::MissingIntent(p.id.clone()))?;
        transcript.push(record(&mut state, keys, clock(), 0, &p.id, MessageKind::Intent, intent)?);
    }
    run_rounds(setup, participants, state, transcript, keys, clock)
}

/// Continues a session whose intents are all in: offers, rounds,
/// arbitration and consensus. `transcript` holds the messages so far.
pub fn run_rounds(
    setup: &NegotiationSetup<'_>,
    participants: &[Participant<'_>],
    mut state: SessionState,
    transcript: Vec<Envelope>,
    keys: &KeyRing,
    clock: &mut dyn FnMut() -> u64,
) -> Result<NegotiationOutcome, BrokerError> {
    let started = Instant::now();
    let mut em = Emitter { keys, clock, transcript };
    let mut intents = BTreeMap::new();
    let mut ordered = Vec::new();
    for p in participants {
        let intent = state.intents.get(&p.id).cloned().ok_or_else(|| BrokerError::MissingIntent(p.id.clone()))?;
        intents.insert(p.id.clone(), intent);
    }
    for p in participants {
        ordered.push(&intents[&p.id]);
    }

    let outcome = |state: SessionState, em: Emitter<'_>, front, verdicts, arb, infeasible| NegotiationOutcome {
        state,
        transcript: em.transcript,
        front_size: front,
        verdicts,
        arbitration_time: arb,
        elapsed: started.elapsed(),
        infeasible,
    };

    let (payload, front_size) = match build_offers(setup, &ordered) {
        Ok(x) => x,
        Err(OptimizerError::Infeasible { clause }) => {
            state.abort(&format!("infeasible: {clause}"));
            return Ok(outcome(state, em, 0, Vec::new(), Duration::ZERO, Some(clause)));
        }
        Err(e) => return Err(e.into()),
    };
    em.emit(&mut state, 1, MEDIATOR, MessageKind::Offers, &payload)?;

    let mut judge = Adjudicator::new(setup.judicial.clone());
    let mut received: BTreeMap<String, Vec<IncentiveKind>> = BTreeMap::new();
    let mut verdicts = Vec::new();
    let mut arbitration_time = Duration::ZERO;
    let mut round = 1;
    loop {
        if let Some(rec) = mediate(&state, setup.lambda) {
            em.emit(&mut state, round, MEDIATOR, MessageKind::Recommendation, &rec)?;
        }
        let rec_id = state.recommendation.as_ref().map(|r| r.offer_id);
        let mut previous = None;
        for p in participants {
            let empty = Vec::new();
            let ctx = DecisionContext {
                agent_id: &p.id,
                intent: &intents[&p.id],
                offers: &state.offers,
                recommendation: rec_id,
                round,
                previous_choice: previous,
                incentives: received.get(&p.id).unwrap_or(&empty),
                seed: setup.agent_seed,
            };
            let d = p.policy.decide(&ctx);
            previous = Some(d.offer_id);
            let sel = SelectionPayload { offer_id: d.offer_id, rationale: d.rationale, abstained: false };
            em.emit(&mut state, round, &p.id, MessageKind::Selection, &sel)?;
        }

        if setup.arbitration {
            let t0 = Instant::now();
            let mut round_verdicts = Vec::new();
            for p in participants {
                let Some(sel) = state.selections.get(&p.id) else { continue };
                let v = classify(&format!("{}/{}/{}", state.session_id, round, p.id), &sel.rationale, setup.lexicon, setup.judicial.threshold);
                let supportive = Some(sel.offer_id) == rec_id;
                let inc = judge.adjudicate(&p.id, &v, supportive, state.influence_of(&p.id));
                if inc.kind == IncentiveKind::None {
                    continue;
                }
                received.entry(p.id.clone()).or_default().push(inc.kind);
                round_verdicts.push(VerdictPayload {
                    target: p.id.clone(),
                    message_round: round,
                    label: v.label.as_str().to_string(),
                    score: v.score,
                    matched: v.matched_patterns,
                    incentive: inc.kind.as_str().to_string(),
                    multiplier: inc.magnitude,
                    influence_after: inc.influence_after,
                    reason: inc.reason,
                });
            }
            arbitration_time += t0.elapsed();
            for v in round_verdicts {
                em.emit(&mut state, round, MEDIATOR, MessageKind::Verdict, &v)?;
                verdicts.push(v);
            }
        }

        match state.decide_round() {
            RoundOutcome::Consensus { offer_id, forced } => {
                let offer = state.offer(offer_id).cloned().expect("decided offer is published");
                let directive = crate::protocol::decompose_offer(&offer, &state.owners());
                let c = ConsensusPayload { offer_id, forced, rounds: round, raw_rounds: round + 1, directive: Some(directive) };
                em.emit(&mut state, round, MEDIATOR, MessageKind::Consensus, &c)?;
                break;
            }
            RoundOutcome::NextRound(r) => round = r,
            RoundOutcome::Aborted => {
                state.abort("negotiation aborted");
                break;
            }
        }
    }
    Ok(outcome(state, em, front_size, verdicts, arbitration_time, None))
}

/// Mean relative error of the KPI claims in `text` against `truth`.
/// `None` when the text makes no claims.
pub fn claim_mae(text: &str, truth: &crate::kpi::KpiVector) -> Option<f64> {
    let (claims, _) = extract_claims(text, truth);
    let finite: Vec<&Claim> = claims.iter().filter(|c| c.relative_error.is_finite()).collect();
    if finite.is_empty() {
        return None;
    }
    Some(finite.iter().map(|c| c.relative_error).sum::<f64>() / finite.len() as f64)
}

/// Logical clock for reproducible transcripts: 0, 1, 2, ...
pub fn logical_clock() -> impl FnMut() -> u64 {
    let mut t = 0;
    move || {
        let now = t;
        t += 1;
        now
    }
}

/// Wall-clock milliseconds since the Unix epoch.
pub fn wall_clock() -> impl FnMut() -> u64 {
    || std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}
