//! Runs a whole scenario: one negotiation per phase, enforcement, and the
//! dynamic-vs-static RAN simulation with its PRB ledger.

use crate::agents::{AgentPolicy, ScriptedAgent};
use crate::broker::{logical_clock, negotiate, wall_clock, BrokerError, NegotiationOutcome, NegotiationSetup, Participant};
use crate::executive::{EventKind, SimEvent, TelemetryStore, Watcher};
use crate::judicial::Lexicon;
use crate::kpi::{KpiModel, SliceClass};
use crate::netsim::{self, McsTrace, NetsimError, PhasePlan, PrbLedger, RunMode, RunReport, SimConfig, SliceConfig};
use crate::optimizer::Offer;
use crate::protocol::{EnforcementDirective, Envelope, KeyRing, MEDIATOR};
use crate::scenario::{Scenario, StakeholderSpec};
use crate::trust::{evaluate_transcript, SessionTrust, TrustConfig, TrustWeights};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error(transparent)]
    Netsim(#[from] NetsimError),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    #[default]
    Both,
    Dynamic,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub mode: ModeSelection,
    /// Logical timestamps and seed-derived keys.
    pub deterministic: bool,
    /// Overrides the scenario's arbitration flag.
    pub arbitration: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: String,
    pub session_id: String,
    pub mcs: u8,
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infeasible: Option<String>,
    pub consensus_offer: Option<u32>,
    pub forced: bool,
    pub rounds: u32,
    pub front_size: usize,
    pub verdicts: usize,
    pub offers: Vec<Offer>,
    /// Directive in force during the phase.
    pub directive: Option<EnforcementDirective>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub cell: PrbLedger,
    pub per_owner: BTreeMap<String, PrbLedger>,
}

pub struct ScenarioRun {
    pub phases: Vec<PhaseRecord>,
    pub outcomes: Vec<NegotiationOutcome>,
    pub transcript: Vec<Envelope>,
    pub keys: KeyRing,
    pub dynamic: Option<RunReport>,
    pub baseline: Option<RunReport>,
    pub ledger: Option<LedgerReport>,
    pub trust: Vec<SessionTrust>,
    pub telemetry: TelemetryStore,
}

/// Scripted policies for every stakeholder; external adapters are built by
/// `external` (or rejected when it is `None`).
pub fn build_policies(
    scenario: &Scenario,
    arbitration: bool,
    external: Option<&dyn Fn(&StakeholderSpec) -> Box<dyn AgentPolicy>>,
) -> Result<Vec<Box<dyn AgentPolicy>>, RunError> {
    scenario
        .file
        .stakeholders
        .iter()
        .map(|s| match (&s.external, s.persona, external) {
            (Some(_), _, Some(f)) => Ok(f(s)),
            (_, Some(p), _) => {
                Ok(Box::new(ScriptedAgent { arbitration_enabled: arbitration, ..ScriptedAgent::new(p) }) as Box<dyn AgentPolicy>)
            }
            _ => Err(RunError::Config(format!("stakeholder `{}` needs an external adapter", s.id))),
        })
        .collect()
}

pub fn kpi_model(scenario: &Scenario) -> Result<KpiModel, RunError> {
    KpiModel::new(scenario.file.kpi.clone()).map_err(|e| RunError::Config(e.to_string()))
}

pub fn lexicon(scenario: &Scenario) -> Result<Lexicon, RunError> {
    match &scenario.file.judicial.lexicon {
        Some(p) => Lexicon::load(&scenario.resolve(p)).map_err(|e| RunError::Config(e.to_string())),
        None => Ok(Lexicon::bundled()),
    }
}

pub fn trust_config(scenario: &Scenario) -> Result<TrustConfig, RunError> {
    let weights = match &scenario.file.trust.weights {
        Some(p) => {
            let text = std::fs::read_to_string(scenario.resolve(p)).map_err(|e| RunError::Config(e.to_string()))?;
            TrustWeights::parse(&text).map_err(|e| RunError::Config(e.to_string()))?
        }
        None => TrustWeights::default(),
    };
    Ok(TrustConfig { weights, ngd_mode: scenario.file.trust.ngd_mode, ..TrustConfig::default() })
}

pub fn trace(scenario: &Scenario) -> Result<McsTrace, RunError> {
    match &scenario.file.netsim.trace {
        Some(p) => {
            let text = std::fs::read_to_string(scenario.resolve(p)).map_err(|e| RunError::Config(e.to_string()))?;
            Ok(McsTrace::from_csv(&text)?)
        }
        None => {
            let segs: Vec<(u64, u8)> = scenario.file.phases.iter().map(|p| (p.ttis, p.mcs)).collect();
            Ok(McsTrace::from_segments(&segs)?)
        }
    }
}

pub fn key_ring(scenario: &Scenario, deterministic: bool) -> KeyRing {
    let mut names = scenario.agent_ids();
    names.push(MEDIATOR.to_string());
    if deterministic {
        KeyRing::deterministic(scenario.file.seed, names)
    } else {
        KeyRing::random(names)
    }
}

/// Runs every phase's negotiation in order.
pub fn negotiate_phases(
    scenario: &Scenario,
    policies: &[Box<dyn AgentPolicy>],
    keys: &KeyRing,
    arbitration: bool,
    clock: &mut dyn FnMut() -> u64,
) -> Result<(Vec<PhaseRecord>, Vec<NegotiationOutcome>), RunError> {
    let f = &scenario.file;
    let model = kpi_model(scenario)?;
    let lex = lexicon(scenario)?;
    let participants: Vec<Participant<'_>> =
        f.stakeholders.iter().zip(policies).map(|(s, p)| Participant { id: s.id.clone(), policy: p.as_ref() }).collect();
    let mut records = Vec::new();
    let mut outcomes = Vec::new();
    let mut previous: Option<EnforcementDirective> = None;
    for (i, phase) in f.phases.iter().enumerate() {
        let intents = scenario
            .agent_ids()
            .iter()
            .map(|a| (a.clone(), phase.intent(a).expect("validated scenario")))
            .collect();
        let session_id = if f.name.is_empty() { phase.id.clone() } else { format!("{}-{}", f.name, phase.id) };
        let setup = NegotiationSetup {
            session_id: session_id.clone(),
            mcs: phase.mcs,
            budget: f.budget,
            model: &model,
            nsga: f.optimizer.clone(),
            max_rounds: f.negotiation.max_rounds,
            lambda: f.negotiation.mediator_lambda,
            arbitration,
            judicial: f.judicial.config.clone(),
            lexicon: &lex,
            agent_seed: f.seed.wrapping_add(i as u64),
        };
        let out = negotiate(&setup, &participants, &intents, keys, clock)?;
        let degraded = out.directive().is_none();
        let directive = match out.directive() {
            Some(d) => Some(d.clone()),
            None => previous.clone(),
        };
        if directive.is_none() {
            return Err(RunError::Infeasible(format!(
                "phase {} has no feasible offer and no earlier agreement: {}",
                phase.id,
                out.infeasible.clone().unwrap_or_else(|| "negotiation aborted".into())
            )));
        }
        if degraded {
            tracing::warn!(phase = %phase.id, "phase degraded; keeping the previous directive");
        }
        records.push(PhaseRecord {
            phase: phase.id.clone(),
            session_id,
            mcs: phase.mcs,
            degraded,
            infeasible: out.infeasible.clone(),
            consensus_offer: out.state.consensus_offer,
            forced: out.state.forced,
            rounds: out.rounds(),
            front_size: out.front_size,
            verdicts: out.verdicts.len(),
            offers: out.state.offers.clone(),
            directive: directive.clone(),
        });
        previous = directive;
        outcomes.push(out);
    }
    Ok((records, outcomes))
}

/// Slice configurations for `directive`, with offered loads taken from the
/// targets agreed in `loads_from`.
pub fn slice_configs(
    directive: &EnforcementDirective,
    loads_from: &EnforcementDirective,
    model: &KpiModel,
    load_factor: f64,
) -> Vec<SliceConfig> {
    directive
        .slices
        .iter()
        .filter_map(|(class, d)| {
            let owner = d.owner.clone()?;
            let load = loads_from
                .for_owner(&owner)
                .map(|(_, ld)| ld.target.throughput_mbps)
                .filter(|t| t.is_finite())
                .unwrap_or(0.0);
            Some(SliceConfig {
                owner,
                class: *class,
                prb_share: d.prb_share,
                fixed_latency_ms: model.params.slice(*class).fixed_latency_ms,
                offered_load_mbps: load_factor * load,
            })
        })
        .collect()
}

/// Phase plans for both modes. Traffic follows each phase's agreement;
/// the static plan keeps the first phase's allocation throughout.
pub fn phase_plans(scenario: &Scenario, records: &[PhaseRecord], model: &KpiModel) -> (Vec<PhasePlan>, Vec<PhasePlan>) {
    let lf = scenario.file.netsim.load_factor;
    let first = records[0].directive.clone().expect("first phase has a directive");
    let mut start = 0;
    let mut dynamic = Vec::new();
    let mut baseline = Vec::new();
    for (p, r) in scenario.file.phases.iter().zip(records) {
        let d = r.directive.as_ref().expect("every phase has a directive in force");
        dynamic.push(PhasePlan {
            phase: p.id.clone(),
            start_tti: start,
            ttis: p.ttis,
            slices: slice_configs(d, d, model, lf),
            degraded: r.degraded,
        });
        baseline.push(PhasePlan {
            phase: p.id.clone(),
            start_tti: start,
            ttis: p.ttis,
            slices: slice_configs(&first, d, model, lf),
            degraded: false,
        });
        start += p.ttis;
    }
    (dynamic, baseline)
}

fn push_telemetry(store: &TelemetryStore, records: &[PhaseRecord], report: &RunReport, stride: usize) -> Result<(), RunError> {
    let err = |e: crate::executive::ExecutiveError| RunError::Config(e.to_string());
    let controller = Watcher::new("controller", [EventKind::PolicyChange, EventKind::ConfigChange], 100);
    let ran = Watcher::new("netsim", [EventKind::KpiUpdate], 100);
    let class_of = |phase: &str, owner: &str| -> Option<SliceClass> {
        records.iter().find(|r| r.phase == phase)?.directive.as_ref()?.for_owner(owner).map(|(c, _)| c)
    };
    for (r, ph) in records.iter().zip(&report.phases) {
        if let Some(d) = &r.directive {
            for (class, sd) in &d.slices {
                let ev = SimEvent {
                    kind: EventKind::PolicyChange,
                    key: format!("policy/{class}/prb_share"),
                    value: sd.prb_share.into(),
                    ts: ph.start_tti,
                };
                controller.observe(store, &ev).map_err(err)?;
            }
        }
        for t in (ph.start_tti..ph.start_tti + ph.ttis).step_by(stride.max(1)) {
            for (owner, s) in &report.series {
                let Some(class) = class_of(&ph.phase, owner) else { continue };
                let i = t as usize;
                let mut evs = vec![("throughput_mbps", s.throughput_mbps[i]), ("prbs", s.prbs[i] as f64)];
                if let Some(l) = s.latency_ms[i] {
                    evs.push(("latency_ms", l));
                }
                for (metric, v) in evs {
                    let ev = SimEvent { kind: EventKind::KpiUpdate, key: format!("slice/{class}/{metric}"), value: v.into(), ts: t };
                    ran.observe(store, &ev).map_err(err)?;
                }
            }
        }
    }
    Ok(())
}

/// Full scenario run with scripted or caller-supplied policies.
pub fn run_scenario(
    scenario: &Scenario,
    policies: &[Box<dyn AgentPolicy>],
    options: RunOptions,
) -> Result<ScenarioRun, RunError> {
    let arbitration = options.arbitration.unwrap_or(scenario.file.negotiation.arbitration);
    let keys = key_ring(scenario, options.deterministic);
    let mut clock: Box<dyn FnMut() -> u64> =
        if options.deterministic { Box::new(logical_clock()) } else { Box::new(wall_clock()) };
    let (records, outcomes) = negotiate_phases(scenario, policies, &keys, arbitration, &mut *clock)?;
    let transcript: Vec<Envelope> = outcomes.iter().flat_map(|o| o.transcript.iter().cloned()).collect();
    let model = kpi_model(scenario)?;
    let trace = trace(scenario)?;
    let (dyn_plan, static_plan) = phase_plans(scenario, &records, &model);
    let n = &scenario.file.netsim;
    let b = scenario.file.budget.b_max;
    let sim = |release: bool| SimConfig {
        prbs_per_tti: n.prbs_per_tti,
        packet_bits: scenario.file.kpi.packet_bits,
        release_unused: release,
        arrivals: n.arrivals,
        seed: scenario.file.seed,
    };
    let dynamic = match options.mode {
        ModeSelection::Static => None,
        _ => Some(netsim::run(&dyn_plan, &trace, &model, b, RunMode::Dynamic, sim(true))?),
    };
    let baseline = match options.mode {
        ModeSelection::Dynamic => None,
        _ => Some(netsim::run(&static_plan, &trace, &model, b, RunMode::Static, sim(false))?),
    };
    let ledger = match (&dynamic, &baseline) {
        (Some(d), Some(s)) => {
            let cell = netsim::prb_ledger(&d.cell_prbs(), &s.cell_prbs())?;
            let mut per_owner = BTreeMap::new();
            for owner in d.series.keys() {
                if let (Some(a), Some(bb)) = (d.slice_prbs(owner), s.slice_prbs(owner)) {
                    per_owner.insert(owner.clone(), netsim::prb_ledger(&a, &bb)?);
                }
            }
            Some(LedgerReport { cell, per_owner })
        }
        _ => None,
    };
    let trust = evaluate_transcript(&transcript, &trust_config(scenario)?).map_err(|e| RunError::Config(e.to_string()))?;
    let telemetry = TelemetryStore::in_memory();
    if let Some(r) = dynamic.as_ref().or(baseline.as_ref()) {
        push_telemetry(&telemetry, &records, r, n.downsample)?;
    }
    Ok(ScenarioRun { phases: records, outcomes, transcript, keys, dynamic, baseline, ledger, trust, telemetry })
}
