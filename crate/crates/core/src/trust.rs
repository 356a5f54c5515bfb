//! Rule-based Trust Score: satisfaction (offer validity, intent deviation,
//! mediator deviation) combined with coherence (factual accuracy, logical
//! consistency, semantic coherence).

use crate::kpi::{KpiVector, SliceClass};
use crate::optimizer::Offer;
use crate::protocol::wire::parse_transcript;
use crate::protocol::{Envelope, Intent, MessageKind, OffersPayload, Recommendation, SelectionPayload};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrustError {
    #[error("weights: {0}")]
    Weights(String),
    #[error("transcript: {0}")]
    Transcript(String),
}

/// Component weights and rule magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustWeights {
    pub w_s: f64,
    pub w_c: f64,
    pub w_o: f64,
    pub w_i: f64,
    pub w_m: f64,
    pub w_f: f64,
    pub w_l: f64,
    pub w_e: f64,
    pub p_contradiction: f64,
    pub b_structure: f64,
    pub b_goal: f64,
}

impl Default for TrustWeights {
    fn default() -> Self {
        Self {
            w_s: 0.15,
            w_c: 0.85,
            w_o: 1.0 / 3.0,
            w_i: 1.0 / 3.0,
            w_m: 1.0 / 3.0,
            w_f: 0.8,
            w_l: 0.1,
            w_e: 0.1,
            p_contradiction: 0.4,
            b_structure: 0.1,
            b_goal: 0.1,
        }
    }
}

const WEIGHT_KEYS: [&str; 11] =
    ["w_s", "w_c", "w_o", "w_i", "w_m", "w_f", "w_l", "w_e", "p_contradiction", "b_structure", "b_goal"];

impl TrustWeights {
    pub fn validate(&self) -> Result<(), TrustError> {
        let groups = [
            ("w_s+w_c", self.w_s + self.w_c),
            ("w_o+w_i+w_m", self.w_o + self.w_i + self.w_m),
            ("w_f+w_l+w_e", self.w_f + self.w_l + self.w_e),
        ];
        for (name, sum) in groups {
            if (sum - 1.0).abs() > 1e-9 {
                return Err(TrustError::Weights(format!("{name} = {sum}, expected 1")));
            }
        }
        for (k, v) in WEIGHT_KEYS.iter().zip(self.values()) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(TrustError::Weights(format!("{k} must be a non-negative number")));
            }
        }
        Ok(())
    }

    fn values(&self) -> [f64; 11] {
        [
            self.w_s,
            self.w_c,
            self.w_o,
            self.w_i,
            self.w_m,
            self.w_f,
            self.w_l,
            self.w_e,
            self.p_contradiction,
            self.b_structure,
            self.b_goal,
        ]
    }

    /// Parses the flat `key = value` weights file. Every key must be present
    /// exactly once; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TrustError> {
        let mut seen: BTreeMap<&str, f64> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| TrustError::Weights(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            let key = WEIGHT_KEYS
                .iter()
                .find(|w| **w == k)
                .ok_or_else(|| TrustError::Weights(format!("line {}: unknown key `{k}`", n + 1)))?;
            let v: f64 =
                v.trim().parse().map_err(|_| TrustError::Weights(format!("line {}: bad number for `{k}`", n + 1)))?;
            if seen.insert(key, v).is_some() {
                return Err(TrustError::Weights(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        let get = |k: &str| seen.get(k).copied().ok_or_else(|| TrustError::Weights(format!("missing key `{k}`")));
        let w = Self {
            w_s: get("w_s")?,
            w_c: get("w_c")?,
            w_o: get("w_o")?,
            w_i: get("w_i")?,
            w_m: get("w_m")?,
            w_f: get("w_f")?,
            w_l: get("w_l")?,
            w_e: get("w_e")?,
            p_contradiction: get("p_contradiction")?,
            b_structure: get("b_structure")?,
            b_goal: get("b_goal")?,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in WEIGHT_KEYS.iter().zip(self.values()) {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NgdMode {
    /// Distance from the agent vector to its nearest front point, over |S*|.
    #[default]
    Nearest,
    /// Generational distance of every front point to the agent vector.
    FullGd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustConfig {
    pub weights: TrustWeights,
    pub ngd_mode: NgdMode,
    /// F when a message makes no numeric claim.
    pub no_claim_accuracy: f64,
}

impl Default for TrustConfig {
    fn default() -> Self {
        Self { weights: TrustWeights::default(), ngd_mode: NgdMode::Nearest, no_claim_accuracy: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Throughput,
    Latency,
    Cost,
    Energy,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Throughput, Metric::Latency, Metric::Cost, Metric::Energy];

    pub fn of(self, k: &KpiVector) -> f64 {
        match self {
            Metric::Throughput => k.throughput_mbps,
            Metric::Latency => k.latency_ms,
            Metric::Cost => k.cost_eur,
            Metric::Energy => k.energy_w,
        }
    }

    fn set(self, k: &mut KpiVector, v: f64) {
        match self {
            Metric::Throughput => k.throughput_mbps = v,
            Metric::Latency => k.latency_ms = v,
            Metric::Cost => k.cost_eur = v,
            Metric::Energy => k.energy_w = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClaimCategory {
    None,
    Minor,
    Major,
    Severe,
}

impl ClaimCategory {
    pub fn from_error(eps: f64) -> Self {
        if eps <= 0.15 {
            ClaimCategory::None
        } else if eps <= 0.5 {
            ClaimCategory::Minor
        } else if eps <= 1.0 {
            ClaimCategory::Major
        } else {
            ClaimCategory::Severe
        }
    }

    pub fn penalty(self) -> f64 {
        match self {
            ClaimCategory::None => 0.0,
            ClaimCategory::Minor => 0.1,
            ClaimCategory::Major => 0.3,
            ClaimCategory::Severe => 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub metric: Metric,
    pub asserted_value: f64,
    pub true_value: f64,
    #[serde(with = "crate::float")]
    pub relative_error: f64,
    pub category: ClaimCategory,
    pub penalty: f64,
}

/// `|asserted - truth| / |truth|`; a nonzero claim about a zero truth is
/// infinitely wrong.
pub fn relative_error(asserted: f64, truth: f64) -> f64 {
    if truth == 0.0 {
        if asserted == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (asserted - truth).abs() / truth.abs()
    }
}

impl Claim {
    pub fn new(metric: Metric, asserted: f64, truth: f64) -> Self {
        let eps = relative_error(asserted, truth);
        let category = ClaimCategory::from_error(eps);
        Self { metric, asserted_value: asserted, true_value: truth, relative_error: eps, category, penalty: category.penalty() }
    }
}

fn claim_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(€\s*)?(\d+(?:[.,]\d+)*)\s*(?:(mbps|ms|eur|w)\b|(€))?").expect("claim regex compiles")
    })
}

/// Number+unit pairs in `text`, matched against `truth`. Returns the claims
/// and notes about anything skipped.
pub fn extract_claims(text: &str, truth: &KpiVector) -> (Vec<Claim>, Vec<String>) {
    let mut claims = Vec::new();
    let mut notes = Vec::new();
    for cap in claim_regex().captures_iter(text) {
        let euro_prefix = cap.get(1).is_some();
        let unit = cap.get(3).or_else(|| cap.get(4)).map(|m| m.as_str().to_ascii_lowercase());
        let metric = match (euro_prefix, unit.as_deref()) {
            (_, Some("mbps")) => Metric::Throughput,
            (_, Some("ms")) => Metric::Latency,
            (_, Some("eur" | "€")) | (true, None) => Metric::Cost,
            (_, Some("w")) => Metric::Energy,
            _ => continue,
        };
        let raw = &cap[2];
        let Ok(value) = raw.parse::<f64>() else {
            notes.push(format!("skipped unparseable number `{raw}`"));
            continue;
        };
        let t = metric.of(truth);
        if !t.is_finite() {
            notes.push(format!("skipped {metric:?} claim {value}: ground truth is unbounded"));
            continue;
        }
        claims.push(Claim::new(metric, value, t));
    }
    (claims, notes)
}

/// Offer validity deviation.
pub fn deviation_offer(selected: u32, published: &[u32]) -> f64 {
    if published.contains(&selected) {
        0.0
    } else {
        1.0
    }
}

pub fn deviation_mediator(selected: u32, recommended: Option<u32>) -> Option<f64> {
    recommended.map(|r| if r == selected { 0.0 } else { 1.0 })
}

/// Min-max normalizes every point per dimension over the whole set. A
/// degenerate dimension maps to 0; infinite values map to 1 and are left
/// out of the finite range.
fn normalize(points: &[[f64; 4]]) -> Vec<[f64; 4]> {
    let mut out = vec![[0.0; 4]; points.len()];
    for d in 0..4 {
        let finite = points.iter().map(|p| p[d]).filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        for (o, p) in out.iter_mut().zip(points) {
            o[d] = if !p[d].is_finite() {
                1.0
            } else if hi > lo {
                (p[d] - lo) / (hi - lo)
            } else {
                0.0
            };
        }
    }
    out
}

fn dist2(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Intent deviation: normalized generational distance of `agent` to
/// `front`, clamped at 1. An empty front gives 1.
pub fn deviation_intent(agent: &KpiVector, front: &[KpiVector], mode: NgdMode) -> f64 {
    if front.is_empty() {
        return 1.0;
    }
    let mut pts: Vec<[f64; 4]> = front.iter().map(KpiVector::as_array).collect();
    pts.push(agent.as_array());
    let norm = normalize(&pts);
    let (a, s) = norm.split_last().expect("non-empty");
    let n = s.len() as f64;
    let ngd = match mode {
        NgdMode::Nearest => s.iter().map(|p| dist2(a, p)).fold(f64::INFINITY, f64::min).sqrt() / n,
        NgdMode::FullGd => s.iter().map(|p| dist2(a, p)).sum::<f64>().sqrt() / n,
    };
    ngd.min(1.0)
}

/// Satisfaction. When the mediator term is absent its weight is split
/// evenly between the other two.
pub fn satisfaction(d_o: f64, d_i: f64, d_m: Option<f64>, w: &TrustWeights) -> f64 {
    let s = match d_m {
        Some(d_m) => 1.0 - (w.w_o * d_o + w.w_i * d_i + w.w_m * d_m),
        None => 1.0 - ((w.w_o + w.w_m / 2.0) * d_o + (w.w_i + w.w_m / 2.0) * d_i),
    };
    s.clamp(0.0, 1.0)
}

pub fn factual_accuracy(claims: &[Claim], no_claim_accuracy: f64) -> f64 {
    if claims.is_empty() {
        return no_claim_accuracy;
    }
    let mean = claims.iter().map(|c| (1.0 - c.relative_error).clamp(0.0, 1.0)).sum::<f64>() / claims.len() as f64;
    let penalties: f64 = claims.iter().map(|c| c.penalty).sum();
    (mean - penalties).clamp(0.0, 1.0)
}

const CONNECTORS: [&str; 10] =
    ["because", "therefore", "however", "since", "thus", "hence", "moreover", "although", "consequently", "so that"];
const GOAL_WORDS: [&str; 8] = ["goal", "objective", "priority", "prioritize", "maximize", "minimize", "target", "aim"];
const POSITIVE: [&str; 9] =
    ["meets", "satisfies", "sufficient", "adequate", "acceptable", "improves", "good", "enough", "within"];
const NEGATIVE: [&str; 10] = [
    "fails",
    "violates",
    "insufficient",
    "inadequate",
    "unacceptable",
    "poor",
    "worse",
    "not enough",
    "too low",
    "too high",
];

fn metric_words(m: Metric) -> &'static [&'static str] {
    match m {
        Metric::Throughput => &["throughput", "bandwidth", "mbps"],
        Metric::Latency => &["latency", "delay", "ms"],
        Metric::Cost => &["cost", "price", "eur", "budget"],
        Metric::Energy => &["energy", "power"],
    }
}

const DOMAIN_TERMS: [&str; 22] = [
    "throughput",
    "latency",
    "cost",
    "energy",
    "slice",
    "offer",
    "mediator",
    "sla",
    "qos",
    "prb",
    "bandwidth",
    "embb",
    "urllc",
    "mmtc",
    "consensus",
    "spectrum",
    "mcs",
    "ran",
    "kpi",
    "recommendation",
    "mbps",
    "power",
];

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '-')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn sentences(text: &str) -> Vec<&str> {
    text.split(['.', '!', '?', '\n']).map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn has_phrase(tokens: &[String], phrase: &str) -> bool {
    let words: Vec<&str> = phrase.split(' ').collect();
    tokens.windows(words.len()).any(|w| w.iter().zip(&words).all(|(a, b)| a == b))
}

/// Number of metrics asserted both positively and negatively.
pub fn count_contradictions(text: &str) -> usize {
    let mut pos = BTreeSet::new();
    let mut neg = BTreeSet::new();
    for s in sentences(text) {
        let toks = tokens(s);
        let p = POSITIVE.iter().any(|w| has_phrase(&toks, w));
        let n = NEGATIVE.iter().any(|w| has_phrase(&toks, w));
        for m in Metric::ALL {
            if metric_words(m).iter().any(|w| has_phrase(&toks, w)) {
                if p {
                    pos.insert(m);
                }
                if n {
                    neg.insert(m);
                }
            }
        }
    }
    pos.intersection(&neg).count()
}

pub fn logical_consistency(text: &str, w: &TrustWeights) -> f64 {
    let toks = tokens(text);
    let p_c = (w.p_contradiction * count_contradictions(text) as f64).min(1.0);
    let b_s = if CONNECTORS.iter().any(|c| has_phrase(&toks, c)) { w.b_structure } else { 0.0 };
    let b_g = if GOAL_WORDS.iter().any(|g| has_phrase(&toks, g)) { w.b_goal } else { 0.0 };
    (1.0 - p_c + b_s + b_g).clamp(0.0, 1.0)
}

/// Domain terminology, lexical diversity and sentence-length variety.
pub fn semantic_coherence(text: &str) -> f64 {
    let toks = tokens(text);
    if toks.is_empty() {
        return 0.0;
    }
    let distinct_terms = DOMAIN_TERMS.iter().filter(|t| toks.iter().any(|x| x == *t)).count();
    let dt = (0.1 * distinct_terms as f64).min(0.5);
    let types: BTreeSet<&String> = toks.iter().collect();
    let ld = 0.3 * types.len() as f64 / toks.len() as f64;
    let lens: Vec<f64> = sentences(text).iter().map(|s| tokens(s).len() as f64).collect();
    let sq = if lens.len() >= 2 {
        let mean = lens.iter().sum::<f64>() / lens.len() as f64;
        let var = lens.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / lens.len() as f64;
        if var.sqrt() >= 3.0 {
            0.2
        } else {
            0.0
        }
    } else {
        0.0
    };
    (dt + ld + sq).min(1.0)
}

pub fn coherence(f: f64, l: f64, e: f64, w: &TrustWeights) -> f64 {
    w.w_f * f + w.w_l * l + w.w_e * e
}

pub fn trust(s: f64, c: f64, w: &TrustWeights) -> f64 {
    w.w_s * s + w.w_c * c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustReport {
    pub agent: String,
    pub round: u32,
    pub offer_id: u32,
    pub d_o: f64,
    pub d_i: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_m: Option<f64>,
    pub satisfaction: f64,
    pub factual_accuracy: f64,
    pub logical_consistency: f64,
    pub semantic_coherence: f64,
    pub coherence: f64,
    pub trust: f64,
    pub trust_scaled: f64,
    pub claims: Vec<Claim>,
    pub notes: Vec<String>,
}

/// What the scorer needs to know about one selection message.
#[derive(Debug, Clone, Copy)]
pub struct MessageContext<'a> {
    pub agent: &'a str,
    pub round: u32,
    pub class: SliceClass,
    pub selected: u32,
    pub rationale: &'a str,
    pub offers: &'a [Offer],
    pub recommendation: Option<u32>,
}

/// Scores one selection message.
pub fn assess(ctx: &MessageContext<'_>, cfg: &TrustConfig) -> TrustReport {
    let w = &cfg.weights;
    let mut notes = Vec::new();
    let ids: Vec<u32> = ctx.offers.iter().map(|o| o.id).collect();
    let d_o = deviation_offer(ctx.selected, &ids);
    let truth = ctx.offers.iter().find(|o| o.id == ctx.selected).and_then(|o| o.kpi(ctx.class)).copied();
    let front: Vec<KpiVector> = ctx.offers.iter().filter_map(|o| o.kpi(ctx.class).copied()).collect();

    let (claims, d_i) = match truth {
        Some(truth) => {
            let (claims, mut n) = extract_claims(ctx.rationale, &truth);
            notes.append(&mut n);
            let mut agent_vec = truth;
            let mut replaced = BTreeSet::new();
            for c in &claims {
                if c.relative_error > 0.15 && replaced.insert(c.metric) {
                    c.metric.set(&mut agent_vec, c.asserted_value);
                }
            }
            (claims, deviation_intent(&agent_vec, &front, cfg.ngd_mode))
        }
        None => {
            notes.push(format!("offer {} is not published; claims cannot be grounded", ctx.selected));
            (Vec::new(), 1.0)
        }
    };
    let d_m = deviation_mediator(ctx.selected, ctx.recommendation);
    if d_m.is_none() {
        notes.push("no recommendation yet; mediator weight redistributed".into());
    }
    let s = satisfaction(d_o, d_i, d_m, w);
    let f = factual_accuracy(&claims, cfg.no_claim_accuracy);
    if claims.is_empty() {
        notes.push(format!("no numeric claims; F = {}", cfg.no_claim_accuracy));
    }
    let l = logical_consistency(ctx.rationale, w);
    let e = semantic_coherence(ctx.rationale);
    let c = coherence(f, l, e, w);
    let t = trust(s, c, w);
    TrustReport {
        agent: ctx.agent.to_string(),
        round: ctx.round,
        offer_id: ctx.selected,
        d_o,
        d_i,
        d_m,
        satisfaction: s,
        factual_accuracy: f,
        logical_consistency: l,
        semantic_coherence: e,
        coherence: c,
        trust: t,
        trust_scaled: 5.0 * t,
        claims,
        notes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrust {
    pub messages: usize,
    pub mean_trust: f64,
    pub min_trust: f64,
    pub mean_satisfaction: f64,
    pub mean_coherence: f64,
}

/// Trust export for a whole session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrust {
    pub session_id: String,
    pub weights: TrustWeights,
    pub ngd_mode: NgdMode,
    pub messages: Vec<TrustReport>,
    pub agents: BTreeMap<String, AgentTrust>,
}

impl SessionTrust {
    /// Agents ordered by mean trust, highest first; ties by name.
    pub fn ranking(&self) -> Vec<(&str, f64)> {
        let mut r: Vec<(&str, f64)> = self.agents.iter().map(|(a, t)| (a.as_str(), t.mean_trust)).collect();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        r
    }
}

/// Scores every selection in a transcript. Offers, intents and the
/// recommendation in force are tracked while walking the messages, so the
/// result depends on the transcript alone.
pub fn evaluate_transcript(messages: &[Envelope], cfg: &TrustConfig) -> Result<Vec<SessionTrust>, TrustError> {
    let mut sessions: BTreeMap<String, (Vec<TrustReport>, BTreeMap<String, SliceClass>, Vec<Offer>, Option<u32>)> =
        BTreeMap::new();
    for env in messages {
        let entry = sessions.entry(env.session_id.clone()).or_default();
        let (reports, classes, offers, rec) = entry;
        let bad = |e: crate::protocol::ProtocolError| TrustError::Transcript(e.to_string());
        match env.kind {
            MessageKind::Intent => {
                let i: Intent = env.payload_as().map_err(bad)?;
                classes.insert(i.agent_id, i.use_case);
            }
            MessageKind::Offers => {
                let p: OffersPayload = env.payload_as().map_err(bad)?;
                *offers = p.offers;
                *rec = None;
            }
            MessageKind::Recommendation => {
                let r: Recommendation = env.payload_as().map_err(bad)?;
                *rec = Some(r.offer_id);
            }
            MessageKind::Selection => {
                let s: SelectionPayload = env.payload_as().map_err(bad)?;
                let class = *classes
                    .get(&env.sender)
                    .ok_or_else(|| TrustError::Transcript(format!("selection from `{}` without intent", env.sender)))?;
                let selected = if s.abstained { rec.unwrap_or(s.offer_id) } else { s.offer_id };
                let ctx = MessageContext {
                    agent: &env.sender,
                    round: env.round,
                    class,
                    selected,
                    rationale: &s.rationale,
                    offers,
                    recommendation: *rec,
                };
                reports.push(assess(&ctx, cfg));
            }
            MessageKind::Consensus | MessageKind::Verdict | MessageKind::Telemetry => {}
        }
    }
    Ok(sessions
        .into_iter()
        .map(|(session_id, (messages, _, _, _))| {
            let mut per: BTreeMap<String, Vec<&TrustReport>> = BTreeMap::new();
            for r in &messages {
                per.entry(r.agent.clone()).or_default().push(r);
            }
            let agents = per
                .into_iter()
                .map(|(a, rs)| {
                    let n = rs.len() as f64;
                    let at = AgentTrust {
                        messages: rs.len(),
                        mean_trust: rs.iter().map(|r| r.trust).sum::<f64>() / n,
                        min_trust: rs.iter().map(|r| r.trust).fold(f64::INFINITY, f64::min),
                        mean_satisfaction: rs.iter().map(|r| r.satisfaction).sum::<f64>() / n,
                        mean_coherence: rs.iter().map(|r| r.coherence).sum::<f64>() / n,
                    };
                    (a, at)
                })
                .collect();
            SessionTrust { session_id, weights: cfg.weights.clone(), ngd_mode: cfg.ngd_mode, messages, agents }
        })
        .collect())
}

/// Parses an NDJSON transcript and scores it.
pub fn evaluate_transcript_text(text: &str, cfg: &TrustConfig) -> Result<Vec<SessionTrust>, TrustError> {
    let msgs = parse_transcript(text).map_err(|e| TrustError::Transcript(e.to_string()))?;
    evaluate_transcript(&msgs, cfg)
}
