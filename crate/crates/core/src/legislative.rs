//! Compliance retrieval: clause corpus, BM25 ranking and a Q&A accuracy
//! harness. Answers are the retrieved clause text with its citation.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, RwLock};
use thiserror::Error;

#[path = "legislative_bundle.rs"]
mod bundle;

const BUNDLED_MANIFEST: &str = include_str!("../data/legislative/manifest.json");
const BUNDLED_QA: &str = include_str!("../data/legislative/qa.csv");

#[derive(Debug, Error, PartialEq)]
pub enum LegislativeError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("duplicate clause id `{0}`")]
    DuplicateId(String),
    #[error("clause `{0}` has empty text")]
    EmptyText(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("precedent `{0}` lacks operator approval")]
    NotApproved(String),
    #[error("unknown clause `{0}` referenced by QA item")]
    UnknownAnswer(String),
    #[error("corpus: {0}")]
    Corpus(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub id: String,
    pub source_doc: String,
    pub section: String,
    pub text: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub question: String,
    pub answer_clause_id: String,
    #[serde(default)]
    pub answer_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

const STOPWORDS: [&str; 40] = [
    "a", "an", "and", "any", "are", "as", "at", "be", "by", "can", "do", "does", "each", "for", "from", "how", "in",
    "is", "it", "its", "may", "must", "of", "on", "or", "per", "shall", "that", "the", "this", "to", "what", "when",
    "which", "who", "with", "within", "under", "into", "much",
];

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Doc {
    clause: Clause,
    tf: HashMap<String, u32>,
    len: u64,
}

/// Immutable BM25 index.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    params: Bm25Params,
    docs: Vec<Doc>,
    df: HashMap<String, u32>,
    total_len: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub score: f64,
    pub source_doc: String,
    pub section: String,
    pub text: String,
}

impl RetrievalIndex {
    pub fn build(corpus: Vec<Clause>, params: Bm25Params) -> Result<Self, LegislativeError> {
        if corpus.is_empty() {
            return Err(LegislativeError::EmptyCorpus);
        }
        let mut idx = Self { params, docs: Vec::new(), df: HashMap::new(), total_len: 0 };
        for c in corpus {
            idx.insert(c)?;
        }
        Ok(idx)
    }

    fn insert(&mut self, clause: Clause) -> Result<(), LegislativeError> {
        if self.docs.iter().any(|d| d.clause.id == clause.id) {
            return Err(LegislativeError::DuplicateId(clause.id));
        }
        if clause.text.trim().is_empty() {
            return Err(LegislativeError::EmptyText(clause.id));
        }
        let toks = tokenize(&clause.text);
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in &toks {
            *tf.entry(t.clone()).or_default() += 1;
        }
        for t in tf.keys() {
            *self.df.entry(t.clone()).or_default() += 1;
        }
        self.total_len += toks.len() as u64;
        self.docs.push(Doc { clause, tf, len: toks.len() as u64 });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn clause(&self, id: &str) -> Option<&Clause> {
        self.docs.iter().find(|d| d.clause.id == id).map(|d| &d.clause)
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = f64::from(self.df.get(term).copied().unwrap_or(0));
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn score(&self, doc: &Doc, terms: &BTreeSet<String>) -> f64 {
        let avgdl = self.total_len as f64 / self.docs.len() as f64;
        let Bm25Params { k1, b } = self.params;
        terms
            .iter()
            .map(|t| {
                let f = f64::from(doc.tf.get(t).copied().unwrap_or(0));
                if f == 0.0 {
                    return 0.0;
                }
                let norm = if avgdl > 0.0 { doc.len as f64 / avgdl } else { 0.0 };
                self.idf(t) * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * norm))
            })
            .sum()
    }

    /// The `k` best clauses, score descending, ties by id.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<Hit>, LegislativeError> {
        if k == 0 {
            return Err(LegislativeError::ZeroK);
        }
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let mut scored: Vec<(f64, &Doc)> = self.docs.iter().map(|d| (self.score(d, &terms), d)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.clause.id.cmp(&b.1.clause.id)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(score, d)| Hit {
                id: d.clause.id.clone(),
                score,
                source_doc: d.clause.source_doc.clone(),
                section: d.clause.section.clone(),
                text: d.clause.text.clone(),
            })
            .collect())
    }

    /// New index version with `clause` appended. Requires explicit operator
    /// approval.
    pub fn append_precedent(&self, clause: Clause, approved: bool) -> Result<Self, LegislativeError> {
        if !approved {
            return Err(LegislativeError::NotApproved(clause.id));
        }
        let mut next = self.clone();
        next.insert(clause)?;
        Ok(next)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaMiss {
    pub question: String,
    pub expected: String,
    pub got: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub misses: Vec<QaMiss>,
    /// Questions counted wrong because they were empty.
    pub flagged: Vec<usize>,
}

/// Top-1 accuracy of `index` on `qa`.
pub fn evaluate_qa(index: &RetrievalIndex, qa: &[QaItem]) -> QaReport {
    let mut correct = 0;
    let mut misses = Vec::new();
    let mut flagged = Vec::new();
    for (i, item) in qa.iter().enumerate() {
        if item.question.trim().is_empty() {
            flagged.push(i);
            misses.push(QaMiss { question: String::new(), expected: item.answer_clause_id.clone(), got: None });
            continue;
        }
        let got = index.retrieve(&item.question, 1).ok().and_then(|h| h.into_iter().next()).map(|h| h.id);
        if got.as_deref() == Some(item.answer_clause_id.as_str()) {
            correct += 1;
        } else {
            misses.push(QaMiss { question: item.question.clone(), expected: item.answer_clause_id.clone(), got });
        }
    }
    let accuracy = if qa.is_empty() { 0.0 } else { correct as f64 / qa.len() as f64 };
    QaReport { total: qa.len(), correct, accuracy, misses, flagged }
}

#[derive(Debug, Clone, Deserialize)]
struct ManifestEntry {
    id: String,
    source: String,
    section: String,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    file: Option<String>,
}

fn clauses_from_manifest(
    manifest: &str,
    mut text_of: impl FnMut(&ManifestEntry) -> Result<String, LegislativeError>,
) -> Result<Vec<Clause>, LegislativeError> {
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(manifest).map_err(|e| LegislativeError::Corpus(format!("manifest: {e}")))?;
    entries
        .iter()
        .map(|e| {
            Ok(Clause {
                id: e.id.clone(),
                source_doc: e.source.clone(),
                section: e.section.clone(),
                text: text_of(e)?.trim().to_string(),
                tags: e.tags.clone(),
            })
        })
        .collect()
}

/// Reads `manifest.json` plus one text file per clause (`clauses/<id>.txt`
/// unless the entry names a `file`).
pub fn load_corpus(dir: &Path) -> Result<Vec<Clause>, LegislativeError> {
    let manifest = std::fs::read_to_string(dir.join("manifest.json"))
        .map_err(|e| LegislativeError::Corpus(format!("{}: {e}", dir.join("manifest.json").display())))?;
    clauses_from_manifest(&manifest, |e| {
        let rel = e.file.clone().unwrap_or_else(|| format!("clauses/{}.txt", e.id));
        std::fs::read_to_string(dir.join(&rel)).map_err(|err| LegislativeError::Corpus(format!("{rel}: {err}")))
    })
}

pub fn parse_qa(csv_text: &str, corpus: &[Clause]) -> Result<Vec<QaItem>, LegislativeError> {
    let by_id: BTreeMap<&str, &Clause> = corpus.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| LegislativeError::Corpus(format!("qa: {e}")))?;
        let question = rec.get(0).unwrap_or("").to_string();
        let id = rec.get(1).unwrap_or("").trim().to_string();
        let clause = by_id.get(id.as_str()).ok_or_else(|| LegislativeError::UnknownAnswer(id.clone()))?;
        out.push(QaItem { question, answer_clause_id: id, answer_text: clause.text.clone() });
    }
    Ok(out)
}

pub fn bundled_corpus() -> Vec<Clause> {
    let texts: BTreeMap<&str, &str> = bundle::CLAUSE_TEXTS.iter().copied().collect();
    clauses_from_manifest(BUNDLED_MANIFEST, |e| {
        texts.get(e.id.as_str()).map(|t| t.to_string()).ok_or_else(|| LegislativeError::Corpus(e.id.clone()))
    })
    .expect("bundled corpus is valid")
}

pub fn bundled_qa() -> Vec<QaItem> {
    parse_qa(BUNDLED_QA, &bundled_corpus()).expect("bundled QA is valid")
}

/// Current index version; appends swap in a new version atomically.
#[derive(Debug)]
pub struct Legislature {
    current: RwLock<Arc<RetrievalIndex>>,
}

impl Legislature {
    pub fn new(index: RetrievalIndex) -> Self {
        Self { current: RwLock::new(Arc::new(index)) }
    }

    pub fn index(&self) -> Arc<RetrievalIndex> {
        self.current.read().expect("index lock").clone()
    }

    pub fn append_precedent(&self, clause: Clause, approved: bool) -> Result<(), LegislativeError> {
        let mut guard = self.current.write().expect("index lock");
        let next = guard.append_precedent(clause, approved)?;
        *guard = Arc::new(next);
        Ok(())
    }
}
