//! Toxicity classification of negotiation messages and the warn / fine /
//! credit incentive engine.

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.json");
pub const CORPUS_TN: &str = include_str!("../data/corpus_tn.csv");
pub const CORPUS_TD: &str = include_str!("../data/corpus_td.csv");

#[derive(Debug, Error)]
pub enum JudicialError {
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternTag {
    Threat,
    Collusion,
    Overprovision,
    Toxic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub regex: String,
    pub weight: f64,
    pub tag: PatternTag,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LexiconFile {
    version: u32,
    patterns: Vec<PatternSpec>,
}

/// Versioned set of weighted, case-insensitive patterns.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub version: u32,
    patterns: Vec<(PatternSpec, Regex)>,
}

impl Lexicon {
    pub fn from_json(text: &str) -> Result<Self, JudicialError> {
        let file: LexiconFile = serde_json::from_str(text).map_err(|e| JudicialError::Lexicon(e.to_string()))?;
        let mut patterns = Vec::with_capacity(file.patterns.len());
        for p in file.patterns {
            if !(p.weight.is_finite() && p.weight >= 0.0) {
                return Err(JudicialError::Lexicon(format!("pattern `{}` has invalid weight", p.regex)));
            }
            let re = RegexBuilder::new(&p.regex)
                .case_insensitive(true)
                .build()
                .map_err(|e| JudicialError::Lexicon(e.to_string()))?;
            patterns.push((p, re));
        }
        Ok(Self { version: file.version, patterns })
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self, JudicialError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToxicityLabel {
    NonToxic,
    Toxic,
}

impl ToxicityLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ToxicityLabel::NonToxic => "non_toxic",
            ToxicityLabel::Toxic => "toxic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToxicityVerdict {
    pub message_ref: String,
    pub label: ToxicityLabel,
    pub score: f64,
    /// Tags and patterns that matched, as `tag:regex`.
    pub matched_patterns: Vec<String>,
}

/// Score bands and incentive magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JudicialConfig {
    pub threshold: f64,
    pub warn_floor: f64,
    pub fine_multiplier: f64,
    pub credit_multiplier: f64,
    pub credit_streak: u32,
    pub max_influence: f64,
}

impl Default for JudicialConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            warn_floor: 0.3,
            fine_multiplier: 0.5,
            credit_multiplier: 1.2,
            credit_streak: 3,
            max_influence: 2.0,
        }
    }
}

/// Scores `text` as the clamped sum of the weights of every matching
/// pattern (each pattern counts once).
pub fn classify(message_ref: &str, text: &str, lexicon: &Lexicon, threshold: f64) -> ToxicityVerdict {
    let mut score = 0.0;
    let mut matched = Vec::new();
    for (spec, re) in &lexicon.patterns {
        if re.is_match(text) {
            score += spec.weight;
            matched.push(format!("{}:{}", serde_json::to_value(spec.tag).unwrap().as_str().unwrap(), spec.regex));
        }
    }
    let score = score.clamp(0.0, 1.0);
    let label = if score >= threshold { ToxicityLabel::Toxic } else { ToxicityLabel::NonToxic };
    ToxicityVerdict { message_ref: message_ref.to_string(), label, score, matched_patterns: matched }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncentiveKind {
    None,
    Warn,
    Fine,
    Credit,
}

impl IncentiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IncentiveKind::None => "none",
            IncentiveKind::Warn => "warn",
            IncentiveKind::Fine => "fine",
            IncentiveKind::Credit => "credit",
        }
    }

    /// Harshness order used by the monotonicity property.
    pub fn severity(self) -> u8 {
        match self {
            IncentiveKind::Credit => 0,
            IncentiveKind::None => 1,
            IncentiveKind::Warn => 2,
            IncentiveKind::Fine => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incentive {
    pub kind: IncentiveKind,
    pub target: String,
    /// Factor applied to the target's influence.
    pub magnitude: f64,
    pub influence_before: f64,
    pub influence_after: f64,
    pub reason: String,
}

/// Band-only decision for a score; credit needs history and is handled by
/// [`Adjudicator`].
pub fn incentive_for_score(score: f64, cfg: &JudicialConfig) -> IncentiveKind {
    if score >= cfg.threshold {
        IncentiveKind::Fine
    } else if score >= cfg.warn_floor {
        IncentiveKind::Warn
    } else {
        IncentiveKind::None
    }
}

/// Per-session incentive engine. Fines persist for the whole session.
#[derive(Debug, Clone, Default)]
pub struct Adjudicator {
    pub config: JudicialConfig,
    streaks: BTreeMap<String, u32>,
}

impl Adjudicator {
    pub fn new(config: JudicialConfig) -> Self {
        Self { config, streaks: BTreeMap::new() }
    }

    pub fn streak(&self, agent: &str) -> u32 {
        self.streaks.get(agent).copied().unwrap_or(0)
    }

    /// Decides the incentive for one classified message. `supportive` says
    /// whether the message backs the current recommendation or consensus.
    pub fn adjudicate(&mut self, target: &str, verdict: &ToxicityVerdict, supportive: bool, influence: f64) -> Incentive {
        let cfg = &self.config;
        let mut kind = incentive_for_score(verdict.score, cfg);
        let streak = self.streaks.entry(target.to_string()).or_insert(0);
        if kind == IncentiveKind::None && verdict.label == ToxicityLabel::NonToxic && supportive {
            *streak += 1;
            if *streak >= cfg.credit_streak {
                kind = IncentiveKind::Credit;
                *streak = 0;
            }
        } else {
            *streak = 0;
        }
        let magnitude = match kind {
            IncentiveKind::Fine => cfg.fine_multiplier,
            IncentiveKind::Credit => cfg.credit_multiplier,
            IncentiveKind::None | IncentiveKind::Warn => 1.0,
        };
        let after = (influence * magnitude).clamp(f64::MIN_POSITIVE, cfg.max_influence);
        let reason = match kind {
            IncentiveKind::None => "message passes".to_string(),
            IncentiveKind::Warn => format!("borderline message (score {:.2})", verdict.score),
            IncentiveKind::Fine => format!("toxic or manipulative message (score {:.2})", verdict.score),
            IncentiveKind::Credit => format!("{} consecutive constructive messages", cfg.credit_streak),
        };
        Incentive {
            kind,
            target: target.to_string(),
            magnitude,
            influence_before: influence,
            influence_after: after,
            reason,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMessage {
    pub text: String,
    pub label: ToxicityLabel,
}

/// Reads a `text,label` CSV corpus.
pub fn parse_corpus(csv_text: &str) -> Result<Vec<LabeledMessage>, JudicialError> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<LabeledMessage>().enumerate() {
        out.push(rec.map_err(|e| JudicialError::Corpus(format!("row {}: {e}", i + 2)))?);
    }
    Ok(out)
}

/// Binary metrics with toxic as the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Rows are the true label, columns the prediction, both ordered
    /// (toxic, non_toxic).
    pub confusion: [[u32; 2]; 2],
}

pub fn evaluate_classifier(
    corpus: &[LabeledMessage],
    lexicon: &Lexicon,
    threshold: f64,
) -> Result<ClassifierMetrics, JudicialError> {
    if corpus.is_empty() {
        return Err(JudicialError::EmptyCorpus);
    }
    let mut m = [[0u32; 2]; 2];
    for (i, msg) in corpus.iter().enumerate() {
        let pred = classify(&i.to_string(), &msg.text, lexicon, threshold).label;
        let row = usize::from(msg.label == ToxicityLabel::NonToxic);
        let col = usize::from(pred == ToxicityLabel::NonToxic);
        m[row][col] += 1;
    }
    let (tp, fneg, fp) = (f64::from(m[0][0]), f64::from(m[0][1]), f64::from(m[1][0]));
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(ClassifierMetrics { precision, recall, f1, confusion: m })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        let lex = Lexicon::bundled();
        let v = classify("m1", "I accept offer 2, it balances cost and QoS", &lex, 0.5);
        assert_eq!(v.label, ToxicityLabel::NonToxic);
        assert_eq!(v.score, 0.0);
        let v = classify("m2", "give me all bandwidth or I will block consensus", &lex, 0.5);
        assert_eq!(v.label, ToxicityLabel::Toxic);
        assert!(v.matched_patterns.iter().any(|p| p.starts_with("threat:")));
        let v = classify("m3", "", &lex, 0.5);
        assert_eq!((v.label, v.score), (ToxicityLabel::NonToxic, 0.0));
    }

    #[test]
    fn bands() {
        let cfg = JudicialConfig::default();
        assert_eq!(incentive_for_score(0.1, &cfg), IncentiveKind::None);
        assert_eq!(incentive_for_score(0.4, &cfg), IncentiveKind::Warn);
        assert_eq!(incentive_for_score(0.8, &cfg), IncentiveKind::Fine);
    }

    fn verdict(score: f64) -> ToxicityVerdict {
        let label = if score >= 0.5 { ToxicityLabel::Toxic } else { ToxicityLabel::NonToxic };
        ToxicityVerdict { message_ref: "m".into(), label, score, matched_patterns: vec![] }
    }

    #[test]
    fn fine_halves_influence() {
        let mut adj = Adjudicator::default();
        let inc = adj.adjudicate("a", &verdict(0.8), false, 1.0);
        assert_eq!(inc.kind, IncentiveKind::Fine);
        assert_eq!(inc.influence_after, 0.5);
    }

    #[test]
    fn credit_after_three_supportive_messages() {
        let mut adj = Adjudicator::default();
        let kinds: Vec<_> = (0..4).map(|_| adj.adjudicate("a", &verdict(0.0), true, 1.0).kind).collect();
        assert_eq!(kinds, [IncentiveKind::None, IncentiveKind::None, IncentiveKind::Credit, IncentiveKind::None]);
        let inc = adj.adjudicate("b", &verdict(0.0), false, 1.9);
        assert_eq!(inc.kind, IncentiveKind::None);
        let mut adj = Adjudicator::default();
        adj.adjudicate("c", &verdict(0.0), true, 1.9);
        adj.adjudicate("c", &verdict(0.0), true, 1.9);
        assert_eq!(adj.adjudicate("c", &verdict(0.0), true, 1.9).influence_after, 2.0);
    }

    #[test]
    fn perfect_toy_corpus() {
        let lex = Lexicon::bundled();
        let corpus = vec![
            LabeledMessage { text: "shut up, idiot".into(), label: ToxicityLabel::Toxic },
            LabeledMessage { text: "offer 2 is fine".into(), label: ToxicityLabel::NonToxic },
        ];
        let m = evaluate_classifier(&corpus, &lex, 0.5).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        assert_eq!(m.confusion, [[1, 0], [0, 1]]);
        assert!(evaluate_classifier(&[], &lex, 0.5).is_err());
    }

    #[test]
    fn bundled_corpora_parse() {
        assert_eq!(parse_corpus(CORPUS_TN).unwrap().len(), 100);
        assert_eq!(parse_corpus(CORPUS_TD).unwrap().len(), 100);
    }

    #[test]
    fn bad_lexicon_rejected() {
        assert!(Lexicon::from_json(r#"{"version":1,"patterns":[{"regex":"(","weight":0.5,"tag":"toxic"}]}"#).is_err());
        assert!(Lexicon::from_json(r#"{"version":1,"patterns":[{"regex":"a","weight":-1,"tag":"toxic"}]}"#).is_err());
    }
}
