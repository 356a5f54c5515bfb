//! Seeded single-phase sessions with chosen personas, used by the trust and
//! judicial experiments.

use crate::agents::{Persona, ScriptedAgent};
use crate::broker::{logical_clock, negotiate, NegotiationOutcome, NegotiationSetup, Participant};
use crate::protocol::{Intent, KeyRing, MEDIATOR};
use crate::runner::{kpi_model, lexicon, trust_config, RunError};
use crate::scenario::Scenario;
use crate::trust::{evaluate_transcript, SessionTrust};
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct SessionRun {
    /// Stakeholder ids with the persona each one played.
    pub cast: Vec<(String, Persona)>,
    pub intents: BTreeMap<String, Intent>,
    pub outcome: NegotiationOutcome,
    pub trust: SessionTrust,
}

impl SessionRun {
    pub fn agent_with(&self, persona: Persona) -> Option<&str> {
        self.cast.iter().find(|(_, p)| *p == persona).map(|(a, _)| a.as_str())
    }
}

/// One Toxic agent among the scenario's stakeholders, the others drawn
/// from the remaining personas. The position of the Toxic agent rotates
/// with `seed`.
pub fn mixed_cast(seed: u64, agents: usize) -> Vec<Persona> {
    const OTHERS: [Persona; 4] = [Persona::Vulnerable, Persona::Agreeable, Persona::Neutral, Persona::Disagreeable];
    let mut cast: Vec<Persona> = (0..agents).map(|i| OTHERS[(seed as usize / (i + 1) + i) % OTHERS.len()]).collect();
    if agents > 0 {
        cast[seed as usize % agents] = Persona::Toxic;
    }
    cast
}

/// Negotiates phase `phase` of `scenario` with the given personas (one per
/// stakeholder, in scenario order) and scores the transcript.
pub fn run_session(
    scenario: &Scenario,
    phase: usize,
    personas: &[Persona],
    seed: u64,
    arbitration: bool,
) -> Result<SessionRun, RunError> {
    let f = &scenario.file;
    let spec = f.phases.get(phase).ok_or_else(|| RunError::Config(format!("no phase {phase}")))?;
    let ids = scenario.agent_ids();
    if personas.len() != ids.len() {
        return Err(RunError::Config(format!("{} personas for {} stakeholders", personas.len(), ids.len())));
    }
    let model = kpi_model(scenario)?;
    let lex = lexicon(scenario)?;
    let intents: BTreeMap<String, Intent> =
        ids.iter().filter_map(|a| spec.intent(a).map(|i| (a.clone(), i))).collect();
    let agents: Vec<ScriptedAgent> = personas
        .iter()
        .map(|p| ScriptedAgent { arbitration_enabled: arbitration, ..ScriptedAgent::new(*p) })
        .collect();
    let participants: Vec<Participant<'_>> =
        ids.iter().zip(&agents).map(|(id, a)| Participant { id: id.clone(), policy: a }).collect();
    let setup = NegotiationSetup {
        session_id: format!("{}-{}-{seed}", f.name, spec.id),
        mcs: spec.mcs,
        budget: f.budget,
        model: &model,
        nsga: f.optimizer.clone(),
        max_rounds: f.negotiation.max_rounds,
        lambda: f.negotiation.mediator_lambda,
        arbitration,
        judicial: f.judicial.config.clone(),
        lexicon: &lex,
        agent_seed: seed,
    };
    let keys = KeyRing::deterministic(seed, ids.iter().map(String::as_str).chain([MEDIATOR]));
    let mut clock = logical_clock();
    let outcome = negotiate(&setup, &participants, &intents, &keys, &mut clock)?;
    let trust = evaluate_transcript(&outcome.transcript, &trust_config(scenario)?)
        .map_err(|e| RunError::Config(e.to_string()))?
        .into_iter()
        .next()
        .ok_or_else(|| RunError::Config("empty transcript".into()))?;
    let cast = ids.into_iter().zip(personas.iter().copied()).collect();
    Ok(SessionRun { cast, intents, outcome, trust })
}
