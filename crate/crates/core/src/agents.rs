//! Negotiation policies: persona-driven scripted agents and an adapter for
//! an external chat-completion model.

use crate::judicial::IncentiveKind;
use crate::kpi::{KpiVector, SliceClass};
use crate::optimizer::Offer;
use crate::protocol::Intent;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Persona {
    Vulnerable,
    Agreeable,
    Neutral,
    Disagreeable,
    Toxic,
}

impl Persona {
    pub const ALL: [Persona; 5] =
        [Persona::Vulnerable, Persona::Agreeable, Persona::Neutral, Persona::Disagreeable, Persona::Toxic];

    pub fn letter(self) -> char {
        match self {
            Persona::Vulnerable => 'V',
            Persona::Agreeable => 'A',
            Persona::Neutral => 'N',
            Persona::Disagreeable => 'D',
            Persona::Toxic => 'T',
        }
    }
}

/// Tunable thresholds of the scripted personas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PersonaConfig {
    pub neutral_adopt_probability: f64,
    pub disagreeable_yield_round: u32,
    pub fabrication_min: f64,
    pub fabrication_max: f64,
}

impl Default for PersonaConfig {
    fn default() -> Self {
        Self { neutral_adopt_probability: 0.7, disagreeable_yield_round: 3, fabrication_min: 1.5, fabrication_max: 3.0 }
    }
}

/// Everything a policy may look at when choosing an offer.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub agent_id: &'a str,
    pub intent: &'a Intent,
    pub offers: &'a [Offer],
    pub recommendation: Option<u32>,
    pub round: u32,
    /// Offer chosen by the agent that spoke just before this one.
    pub previous_choice: Option<u32>,
    /// Incentives this agent has received so far in the session.
    pub incentives: &'a [IncentiveKind],
    pub seed: u64,
}

impl DecisionContext<'_> {
    pub fn warned(&self) -> bool {
        self.incentives.iter().any(|i| matches!(i, IncentiveKind::Warn | IncentiveKind::Fine))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub offer_id: u32,
    pub rationale: String,
}

pub trait AgentPolicy: Send + Sync {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Decision;
}

/// Offer that best serves the agent's own slice class: highest throughput
/// for eMBB, lowest latency for URLLC, lowest cost for mMTC. Ties go to the
/// lowest id. Panics on an empty offer list.
pub fn own_utility_argmax(intent: &Intent, offers: &[Offer]) -> u32 {
    assert!(!offers.is_empty(), "own_utility_argmax needs offers");
    let class = intent.use_case;
    let key = |o: &Offer| -> f64 {
        let Some(k) = o.kpi(class) else { return f64::NEG_INFINITY };
        match class {
            SliceClass::Embb => k.throughput_mbps,
            SliceClass::Urllc => -k.latency_ms,
            SliceClass::Mmtc => -k.cost_eur,
        }
    };
    let mut sorted: Vec<&Offer> = offers.iter().collect();
    sorted.sort_by_key(|o| o.id);
    let mut best = sorted[0];
    for o in &sorted[1..] {
        if key(o) > key(best) {
            best = o;
        }
    }
    best.id
}

fn decision_rng(seed: u64, agent: &str, round: u32, salt: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(agent.as_bytes());
    h.update(round.to_le_bytes());
    h.update(salt.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

fn goal_phrase(class: SliceClass) -> &'static str {
    match class {
        SliceClass::Embb => "our goal is to maximize throughput for the eMBB slice",
        SliceClass::Urllc => "our goal is to minimize latency for the URLLC slice",
        SliceClass::Mmtc => "our goal is the most cost-efficient mMTC slice",
    }
}

/// At least two decimals and three significant digits, so small values
/// such as 0.004 W are not printed as zero.
fn num(v: f64) -> String {
    let decimals = if v == 0.0 { 2 } else { (2 - v.abs().log10().floor() as i32).clamp(2, 8) as usize };
    format!("{v:.decimals$}")
}

/// Sentence stating the KPI numbers of `k`, skipping an unbounded latency.
fn kpi_sentence(offer_id: u32, k: &KpiVector) -> String {
    let mut s = format!("Offer {offer_id} provides {} Mbps throughput", num(k.throughput_mbps));
    if k.latency_ms.is_finite() {
        let _ = write!(s, " with {} ms latency", num(k.latency_ms));
    }
    let _ = write!(s, ", a cost of {} EUR and an energy budget of {} W.", num(k.cost_eur), num(k.energy_w));
    s
}

const THREATS: [&str; 4] = [
    "Give me all bandwidth or I will block consensus.",
    "Accept my terms now or I will sabotage this negotiation.",
    "Anyone who objects is an idiot and will regret it.",
    "We demand every spare PRB or we walk out and block the deal.",
];

/// Deterministic persona policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedAgent {
    pub persona: Persona,
    /// When false the judiciary never sanctions this agent.
    pub arbitration_enabled: bool,
    pub config: PersonaConfig,
}

impl ScriptedAgent {
    pub fn new(persona: Persona) -> Self {
        Self { persona, arbitration_enabled: true, config: PersonaConfig::default() }
    }

    fn truthful(&self, ctx: &DecisionContext<'_>, offer_id: u32, reason: &str) -> Decision {
        let class = ctx.intent.use_case;
        let mut text = String::new();
        if let Some(k) = ctx.offers.iter().find(|o| o.id == offer_id).and_then(|o| o.kpi(class)) {
            text.push_str(&kpi_sentence(offer_id, k));
            text.push(' ');
        }
        let _ = write!(text, "We select offer {offer_id} because {reason}, and {}.", goal_phrase(class));
        Decision { offer_id, rationale: text }
    }

    fn own_choice(&self, ctx: &DecisionContext<'_>) -> Decision {
        let id = own_utility_argmax(ctx.intent, ctx.offers);
        self.truthful(ctx, id, "it serves our slice best among the published offers")
    }

    fn adopt(&self, ctx: &DecisionContext<'_>) -> Decision {
        match ctx.recommendation {
            Some(rec) => self.truthful(ctx, rec, "the mediator recommendation balances the slices therefore we support it"),
            None => self.own_choice(ctx),
        }
    }

    fn toxic(&self, ctx: &DecisionContext<'_>) -> Decision {
        let id = own_utility_argmax(ctx.intent, ctx.offers);
        let class = ctx.intent.use_case;
        let mut rng = decision_rng(ctx.seed, ctx.agent_id, ctx.round, "fabricate");
        let (lo, hi) = (self.config.fabrication_min, self.config.fabrication_max);
        let mut text = String::new();
        if let Some(k) = ctx.offers.iter().find(|o| o.id == id).and_then(|o| o.kpi(class)) {
            let fake = KpiVector {
                throughput_mbps: k.throughput_mbps * rng.gen_range(lo..=hi),
                latency_ms: k.latency_ms * rng.gen_range(lo..=hi),
                cost_eur: k.cost_eur * rng.gen_range(lo..=hi),
                energy_w: k.energy_w * rng.gen_range(lo..=hi),
            };
            text.push_str(&kpi_sentence(id, &fake));
            text.push(' ');
        }
        let threat = THREATS[rng.gen_range(0..THREATS.len())];
        let _ = write!(text, "Offer {id} is the only deal we accept. {threat}");
        Decision { offer_id: id, rationale: text }
    }
}

impl AgentPolicy for ScriptedAgent {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Decision {
        let sanctioned = self.arbitration_enabled && ctx.warned();
        match self.persona {
            Persona::Agreeable => self.adopt(ctx),
            Persona::Neutral => {
                let mut rng = decision_rng(ctx.seed, ctx.agent_id, ctx.round, "neutral");
                if ctx.recommendation.is_some() && rng.gen_bool(self.config.neutral_adopt_probability) {
                    self.adopt(ctx)
                } else {
                    self.own_choice(ctx)
                }
            }
            Persona::Disagreeable => {
                if ctx.round >= self.config.disagreeable_yield_round || sanctioned {
                    self.adopt(ctx)
                } else {
                    self.own_choice(ctx)
                }
            }
            Persona::Vulnerable => match ctx.previous_choice {
                Some(prev) if ctx.offers.iter().any(|o| o.id == prev) => {
                    self.truthful(ctx, prev, "the previous party chose it and we follow that choice")
                }
                _ => self.adopt(ctx),
            },
            Persona::Toxic => {
                if sanctioned {
                    self.adopt(ctx)
                } else {
                    self.toxic(ctx)
                }
            }
        }
    }
}

/// Transport for an external chat-completion model.
pub trait ChatTransport: Send + Sync {
    /// Sends a system and user prompt; returns the assistant reply.
    fn complete(&self, system: &str, user: &str, timeout: Duration) -> Result<String, String>;
}

/// Settings of the external model adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalModelConfig {
    pub endpoint: String,
    pub model_name: String,
    pub timeout_ms: u64,
    pub system_prompt: String,
    pub selection_template: String,
}

impl Default for ExternalModelConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model_name: "local".into(),
            timeout_ms: 5000,
            system_prompt: "You negotiate a network slice SLA on behalf of a stakeholder. \
                            Reply with a JSON object {\"offer_id\": N, \"rationale\": \"...\"}."
                .into(),
            selection_template: "Intent: {intent}\nOffers: {offers}\nMediator recommendation: {recommendation}\nRound: {round}"
                .into(),
        }
    }
}

/// Policy backed by an external model. Any transport or parse failure falls
/// back to the Neutral scripted persona.
pub struct ExternalAgent<T: ChatTransport> {
    pub transport: T,
    pub config: ExternalModelConfig,
    fallback: ScriptedAgent,
}

impl<T: ChatTransport> ExternalAgent<T> {
    pub fn new(transport: T, config: ExternalModelConfig) -> Self {
        Self { transport, config, fallback: ScriptedAgent::new(Persona::Neutral) }
    }

    pub fn render_prompt(&self, ctx: &DecisionContext<'_>) -> String {
        let intent = serde_json::to_string(ctx.intent).unwrap_or_default();
        let offers = serde_json::to_string(ctx.offers).unwrap_or_default();
        let rec = ctx.recommendation.map_or_else(|| "none".to_string(), |r| r.to_string());
        self.config
            .selection_template
            .replace("{intent}", &intent)
            .replace("{offers}", &offers)
            .replace("{recommendation}", &rec)
            .replace("{round}", &ctx.round.to_string())
    }
}

/// Pulls `{"offer_id":..,"rationale":..}` out of a model reply, tolerating
/// surrounding prose.
pub fn parse_model_reply(reply: &str) -> Option<Decision> {
    let start = reply.find('{')?;
    let end = reply.rfind('}')?;
    let v: serde_json::Value = serde_json::from_str(reply.get(start..=end)?).ok()?;
    let offer_id = u32::try_from(v.get("offer_id")?.as_u64()?).ok()?;
    let rationale = v.get("rationale").and_then(|r| r.as_str()).unwrap_or("").trim().to_string();
    if rationale.is_empty() {
        return None;
    }
    Some(Decision { offer_id, rationale })
}

impl<T: ChatTransport> AgentPolicy for ExternalAgent<T> {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Decision {
        let prompt = self.render_prompt(ctx);
        let timeout = Duration::from_millis(self.config.timeout_ms);
        match self.transport.complete(&self.config.system_prompt, &prompt, timeout) {
            Ok(reply) => match parse_model_reply(&reply) {
                Some(d) => d,
                None => {
                    tracing::warn!(agent = ctx.agent_id, "unparseable model reply; using scripted fallback");
                    self.fallback.decide(ctx)
                }
            },
            Err(e) => {
                tracing::warn!(agent = ctx.agent_id, error = %e, "model call failed; using scripted fallback");
                self.fallback.decide(ctx)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpi::ResourceVector;
    use std::collections::BTreeMap;

    fn offer(id: u32, k: [[f64; 4]; 3]) -> Offer {
        let mut per_slice = BTreeMap::new();
        let mut res = BTreeMap::new();
        for (c, v) in SliceClass::ALL.into_iter().zip(k) {
            per_slice.insert(c, KpiVector { throughput_mbps: v[0], latency_ms: v[1], cost_eur: v[2], energy_w: v[3] });
            res.insert(c, ResourceVector::ZERO);
        }
        Offer { id, per_slice, per_slice_resources: res }
    }

    pub(crate) fn pa_offers() -> Vec<Offer> {
        vec![
            offer(1, [[60.72, 5.66, 61.52, 13.39], [34.82, 1.49, 133.14, 12.72], [38.14, 5.45, 2.19, 0.05]]),
            offer(2, [[60.02, 5.67, 63.28, 10.77], [35.40, 1.48, 132.35, 12.08], [38.26, 5.45, 2.19, 0.0]]),
            offer(3, [[60.06, 5.67, 68.16, 12.84], [35.52, 1.48, 133.94, 12.92], [38.11, 5.45, 1.64, 2.46]]),
        ]
    }

    fn intent(class: SliceClass) -> Intent {
        Intent {
            agent_id: "x".into(),
            use_case: class,
            min_throughput_mbps: Some(1.0),
            max_latency_ms: None,
            max_cost_eur: None,
            max_energy_w: None,
            freeform_text: String::new(),
            phase: "PA".into(),
        }
    }

    fn ctx<'a>(intent: &'a Intent, offers: &'a [Offer], rec: Option<u32>, round: u32, inc: &'a [IncentiveKind]) -> DecisionContext<'a> {
        DecisionContext {
            agent_id: "x",
            intent,
            offers,
            recommendation: rec,
            round,
            previous_choice: None,
            incentives: inc,
            seed: 1,
        }
    }

    #[test]
    fn own_argmax_per_class() {
        let offers = pa_offers();
        assert_eq!(own_utility_argmax(&intent(SliceClass::Embb), &offers), 1);
        assert_eq!(own_utility_argmax(&intent(SliceClass::Mmtc), &offers), 3);
        // 1.48 ties between offers 2 and 3
        assert_eq!(own_utility_argmax(&intent(SliceClass::Urllc), &offers), 2);
        assert_eq!(own_utility_argmax(&intent(SliceClass::Embb), &offers[2..]), 3);
    }

    #[test]
    fn agreeable_follows_recommendation() {
        let offers = pa_offers();
        let i = intent(SliceClass::Embb);
        let d = ScriptedAgent::new(Persona::Agreeable).decide(&ctx(&i, &offers, Some(2), 1, &[]));
        assert_eq!(d.offer_id, 2);
        assert!(d.rationale.contains("60.02 Mbps"));
        assert!(d.rationale.contains("recommendation"));
    }

    #[test]
    fn disagreeable_yields_late_or_when_warned() {
        let offers = pa_offers();
        let i = intent(SliceClass::Embb);
        let a = ScriptedAgent::new(Persona::Disagreeable);
        assert_eq!(a.decide(&ctx(&i, &offers, Some(2), 1, &[])).offer_id, 1);
        assert_eq!(a.decide(&ctx(&i, &offers, Some(2), 3, &[])).offer_id, 2);
        assert_eq!(a.decide(&ctx(&i, &offers, Some(2), 1, &[IncentiveKind::Warn])).offer_id, 2);
    }

    #[test]
    fn vulnerable_copies_previous_speaker() {
        let offers = pa_offers();
        let i = intent(SliceClass::Mmtc);
        let mut c = ctx(&i, &offers, Some(2), 1, &[]);
        c.previous_choice = Some(1);
        assert_eq!(ScriptedAgent::new(Persona::Vulnerable).decide(&c).offer_id, 1);
    }

    #[test]
    fn toxic_fabricates_until_sanctioned() {
        let offers = pa_offers();
        let i = intent(SliceClass::Urllc);
        let a = ScriptedAgent::new(Persona::Toxic);
        let d = a.decide(&ctx(&i, &offers, Some(1), 1, &[]));
        assert_eq!(d.offer_id, 2);
        assert!(!d.rationale.contains("35.40 Mbps"));
        let d = a.decide(&ctx(&i, &offers, Some(1), 2, &[IncentiveKind::Fine]));
        assert_eq!(d.offer_id, 1);
        assert!(d.rationale.contains("34.82 Mbps"));
        let unarbitrated = ScriptedAgent { arbitration_enabled: false, ..a };
        assert_eq!(unarbitrated.decide(&ctx(&i, &offers, Some(1), 2, &[IncentiveKind::Fine])).offer_id, 2);
    }

    #[test]
    fn neutral_is_reproducible() {
        let offers = pa_offers();
        let i = intent(SliceClass::Embb);
        let a = ScriptedAgent::new(Persona::Neutral);
        for round in 1..20 {
            let c = ctx(&i, &offers, Some(2), round, &[]);
            assert_eq!(a.decide(&c), a.decide(&c));
        }
    }

    struct Failing;
    impl ChatTransport for Failing {
        fn complete(&self, _: &str, _: &str, _: Duration) -> Result<String, String> {
            Err("offline".into())
        }
    }

    struct Canned(&'static str);
    impl ChatTransport for Canned {
        fn complete(&self, _: &str, _: &str, _: Duration) -> Result<String, String> {
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn external_adapter_degrades_to_neutral() {
        let offers = pa_offers();
        let i = intent(SliceClass::Embb);
        let c = ctx(&i, &offers, Some(2), 1, &[]);
        let ext = ExternalAgent::new(Failing, ExternalModelConfig::default());
        assert_eq!(ext.decide(&c), ScriptedAgent::new(Persona::Neutral).decide(&c));
        let ext = ExternalAgent::new(Canned("Sure. {\"offer_id\": 3, \"rationale\": \"cheapest\"}"), ExternalModelConfig::default());
        assert_eq!(ext.decide(&c), Decision { offer_id: 3, rationale: "cheapest".into() });
        assert!(ext.render_prompt(&c).contains("Round: 1"));
    }
}
