//! Telemetry store: watchers push records (push path), the mediator and
//! operators query them (pull path).
//!
//! The index lives behind `RwLock<Arc<_>>`. Readers clone the `Arc` and
//! query without holding the lock; a writer mutates in place unless a reader
//! still holds the previous version, in which case it copies first.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExecutiveError {
    #[error("seq conflict for source `{source_id}`: got {got}, last {last}")]
    Conflict { source_id: String, got: u64, last: u64 },
    #[error("invalid key `{0}`")]
    InvalidKey(String),
    #[error("malformed pattern `{0}`")]
    Pattern(String),
    #[error("log: {0}")]
    Log(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TelemetryValue {
    Number(f64),
    Text(String),
}

impl TelemetryValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            TelemetryValue::Number(v) => Some(*v),
            TelemetryValue::Text(_) => None,
        }
    }
}

impl From<f64> for TelemetryValue {
    fn from(v: f64) -> Self {
        TelemetryValue::Number(v)
    }
}

impl From<&str> for TelemetryValue {
    fn from(v: &str) -> Self {
        TelemetryValue::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub key: String,
    pub value: TelemetryValue,
    pub ts: u64,
    pub source: String,
    pub seq: u64,
    /// Global version assigned by the store; 0 before the push.
    #[serde(default)]
    pub version: u64,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty() && key.split('/').all(|s| !s.is_empty() && !s.contains('*'))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Index {
    pub version: u64,
    by_key: BTreeMap<String, Vec<Arc<TelemetryRecord>>>,
    last_seq: BTreeMap<String, u64>,
}

impl Index {
    fn apply(&mut self, rec: TelemetryRecord) -> Result<u64, ExecutiveError> {
        if !valid_key(&rec.key) {
            return Err(ExecutiveError::InvalidKey(rec.key));
        }
        if let Some(&last) = self.last_seq.get(&rec.source) {
            if rec.seq <= last {
                return Err(ExecutiveError::Conflict { source_id: rec.source, got: rec.seq, last });
            }
        }
        self.version += 1;
        let rec = TelemetryRecord { version: self.version, ..rec };
        self.last_seq.insert(rec.source.clone(), rec.seq);
        self.by_key.entry(rec.key.clone()).or_default().push(Arc::new(rec));
        Ok(self.version)
    }

    pub fn len(&self) -> usize {
        self.by_key.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }

    pub fn latest(&self, key: &str) -> Option<&TelemetryRecord> {
        self.by_key.get(key).and_then(|v| v.last()).map(|r| r.as_ref())
    }

    pub fn records(&self) -> impl Iterator<Item = &TelemetryRecord> {
        self.by_key.values().flatten().map(|r| r.as_ref())
    }

    pub fn query(&self, q: &Query) -> Result<Vec<QueryRow>, ExecutiveError> {
        let pattern = KeyPattern::parse(&q.pattern)?;
        let mut out = Vec::new();
        for (key, series) in &self.by_key {
            if !pattern.matches(key) {
                continue;
            }
            let window: Vec<&TelemetryRecord> = series
                .iter()
                .map(|r| r.as_ref())
                .filter(|r| q.from_ts.map_or(true, |f| r.ts >= f) && q.to_ts.map_or(true, |t| r.ts <= t))
                .collect();
            let Some(last) = window.iter().max_by_key(|r| r.version) else { continue };
            let value = match q.aggregation {
                Aggregation::Latest => Some(last.value.clone()),
                agg => {
                    let nums: Vec<f64> = window.iter().filter_map(|r| r.value.as_f64()).collect();
                    if nums.is_empty() {
                        None
                    } else {
                        Some(TelemetryValue::Number(match agg {
                            Aggregation::Mean => nums.iter().sum::<f64>() / nums.len() as f64,
                            Aggregation::Max => nums.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                            Aggregation::Min => nums.iter().copied().fold(f64::INFINITY, f64::min),
                            Aggregation::Latest => unreachable!(),
                        }))
                    }
                }
            };
            if let Some(value) = value {
                out.push(QueryRow { key: key.clone(), value, ts: last.ts, count: window.len() });
            }
        }
        Ok(out)
    }
}

/// `/`-separated key pattern; `*` matches exactly one segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPattern(Vec<Option<String>>);

impl KeyPattern {
    pub fn parse(p: &str) -> Result<Self, ExecutiveError> {
        if p.is_empty() {
            return Err(ExecutiveError::Pattern(p.to_string()));
        }
        let mut segs = Vec::new();
        for s in p.split('/') {
            if s == "*" {
                segs.push(None);
            } else if s.is_empty() || s.contains('*') {
                return Err(ExecutiveError::Pattern(p.to_string()));
            } else {
                segs.push(Some(s.to_string()));
            }
        }
        Ok(Self(segs))
    }

    pub fn matches(&self, key: &str) -> bool {
        let parts: Vec<&str> = key.split('/').collect();
        parts.len() == self.0.len() && self.0.iter().zip(parts).all(|(p, k)| p.as_deref().map_or(true, |p| p == k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Latest,
    Mean,
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Query {
    pub pattern: String,
    #[serde(default)]
    pub from_ts: Option<u64>,
    #[serde(default)]
    pub to_ts: Option<u64>,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl Query {
    pub fn latest(pattern: &str) -> Self {
        Self { pattern: pattern.to_string(), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub key: String,
    pub value: TelemetryValue,
    pub ts: u64,
    /// Records aggregated.
    pub count: usize,
}

/// Consistent view of several keys at one store version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u64,
    pub values: BTreeMap<String, TelemetryRecord>,
}

struct Writer {
    log: Option<File>,
}

/// Append-log backed telemetry store.
pub struct TelemetryStore {
    index: RwLock<Arc<Index>>,
    writer: Mutex<Writer>,
    log_path: Option<PathBuf>,
}

impl std::fmt::Debug for TelemetryStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TelemetryStore").field("version", &self.current().version).field("log", &self.log_path).finish()
    }
}

impl Default for TelemetryStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl TelemetryStore {
    pub fn in_memory() -> Self {
        Self { index: RwLock::new(Arc::new(Index::default())), writer: Mutex::new(Writer { log: None }), log_path: None }
    }

    /// Opens (or creates) a store persisted at `path`, replaying any
    /// existing log first.
    pub fn open(path: &Path) -> Result<Self, ExecutiveError> {
        let index = if path.exists() { Self::replay_file(path)? } else { Index::default() };
        let log = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            index: RwLock::new(Arc::new(index)),
            writer: Mutex::new(Writer { log: Some(log) }),
            log_path: Some(path.to_path_buf()),
        })
    }

    /// Rebuilds an index from NDJSON log lines.
    pub fn replay<R: BufRead>(reader: R) -> Result<Index, ExecutiveError> {
        let mut index = Index::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TelemetryRecord =
                serde_json::from_str(&line).map_err(|e| ExecutiveError::Log(format!("line {}: {e}", n + 1)))?;
            index.apply(rec)?;
        }
        Ok(index)
    }

    pub fn replay_file(path: &Path) -> Result<Index, ExecutiveError> {
        Self::replay(BufReader::new(File::open(path)?))
    }

    /// Current version of the index; cheap and lock-free after the clone.
    pub fn current(&self) -> Arc<Index> {
        self.index.read().expect("index lock").clone()
    }

    /// Appends a record. Once this returns, queries see it.
    pub fn push(&self, rec: TelemetryRecord) -> Result<u64, ExecutiveError> {
        let mut writer = self.writer.lock().expect("writer lock");
        {
            let guard = self.index.read().expect("index lock");
            if !valid_key(&rec.key) {
                return Err(ExecutiveError::InvalidKey(rec.key));
            }
            if let Some(&last) = guard.last_seq.get(&rec.source) {
                if rec.seq <= last {
                    return Err(ExecutiveError::Conflict { source_id: rec.source, got: rec.seq, last });
                }
            }
        }
        if let Some(log) = writer.log.as_mut() {
            let line = serde_json::to_string(&TelemetryRecord { version: 0, ..rec.clone() })
                .map_err(|e| ExecutiveError::Log(e.to_string()))?;
            writeln!(log, "{line}")?;
            log.flush()?;
        }
        let mut guard = self.index.write().expect("index lock");
        Arc::make_mut(&mut guard).apply(rec)
    }

    pub fn query(&self, q: &Query) -> Result<Vec<QueryRow>, ExecutiveError> {
        self.current().query(q)
    }

    pub fn snapshot<S: AsRef<str>>(&self, keys: &[S]) -> Snapshot {
        let index = self.current();
        let values = keys
            .iter()
            .filter_map(|k| index.latest(k.as_ref()).map(|r| (k.as_ref().to_string(), r.clone())))
            .collect();
        Snapshot { version: index.version, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    KpiUpdate,
    ConfigChange,
    PolicyChange,
}

/// Something the simulator or controller reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub kind: EventKind,
    pub key: String,
    pub value: TelemetryValue,
    pub ts: u64,
}

/// Push-path producer with its own monotone sequence.
#[derive(Debug)]
pub struct Watcher {
    pub id: String,
    pub subscription: BTreeSet<EventKind>,
    pub budget_ms: u64,
    next_seq: AtomicU64,
}

impl Watcher {
    pub fn new(id: &str, subscription: impl IntoIterator<Item = EventKind>, budget_ms: u64) -> Self {
        Self { id: id.to_string(), subscription: subscription.into_iter().collect(), budget_ms, next_seq: AtomicU64::new(1) }
    }

    /// Pushes one record for a subscribed event; ignores the rest.
    pub fn observe(&self, store: &TelemetryStore, ev: &SimEvent) -> Result<Option<u64>, ExecutiveError> {
        if !self.subscription.contains(&ev.kind) {
            return Ok(None);
        }
        let seq = self.next_seq.fetch_add(1, Ordering::SeqCst);
        let rec = TelemetryRecord {
            key: ev.key.clone(),
            value: ev.value.clone(),
            ts: ev.ts,
            source: self.id.clone(),
            seq,
            version: 0,
        };
        store.push(rec).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(key: &str, v: f64, src: &str, seq: u64, ts: u64) -> TelemetryRecord {
        TelemetryRecord { key: key.into(), value: v.into(), ts, source: src.into(), seq, version: 0 }
    }

    #[test]
    fn latest_and_conflict() {
        let s = TelemetryStore::in_memory();
        assert!(s.query(&Query::latest("slice/*/latency_ms")).unwrap().is_empty());
        s.push(rec("slice/URLLC/latency_ms", 1.2, "w", 1, 10)).unwrap();
        s.push(rec("slice/URLLC/latency_ms", 1.48, "w", 2, 11)).unwrap();
        let rows = s.query(&Query::latest("slice/URLLC/latency_ms")).unwrap();
        assert_eq!(rows[0].value, TelemetryValue::Number(1.48));
        assert!(matches!(s.push(rec("slice/URLLC/latency_ms", 9.0, "w", 2, 12)), Err(ExecutiveError::Conflict { .. })));
    }

    #[test]
    fn mean_over_window() {
        let s = TelemetryStore::in_memory();
        for (i, v) in [1.0, 2.0, 3.0].into_iter().enumerate() {
            s.push(rec("slice/eMBB/throughput_mbps", v, "w", i as u64 + 1, 100 + i as u64)).unwrap();
        }
        s.push(rec("slice/eMBB/throughput_mbps", 50.0, "w", 9, 500)).unwrap();
        let q = Query {
            pattern: "slice/*/throughput_mbps".into(),
            from_ts: Some(100),
            to_ts: Some(102),
            aggregation: Aggregation::Mean,
        };
        let rows = s.query(&q).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].value, TelemetryValue::Number(2.0));
        assert_eq!(rows[0].count, 3);
    }

    #[test]
    fn patterns() {
        assert!(KeyPattern::parse("").is_err());
        assert!(KeyPattern::parse("slice//x").is_err());
        assert!(KeyPattern::parse("sl*ce/x").is_err());
        let p = KeyPattern::parse("slice/*/latency_ms").unwrap();
        assert!(p.matches("slice/eMBB/latency_ms"));
        assert!(!p.matches("slice/eMBB/latency_ms/p99"));
        assert!(!p.matches("cell/eMBB/latency_ms"));
    }

    #[test]
    fn snapshot_of_keys() {
        let s = TelemetryStore::in_memory();
        assert!(s.snapshot::<&str>(&[]).values.is_empty());
        s.push(rec("a/x", 1.0, "w1", 1, 1)).unwrap();
        s.push(rec("b/y", 2.0, "w2", 1, 1)).unwrap();
        let snap = s.snapshot(&["a/x", "b/y", "c/z"]);
        assert_eq!(snap.values.len(), 2);
        assert_eq!(snap.version, 2);
    }

    #[test]
    fn watcher_filters_by_subscription() {
        let s = TelemetryStore::in_memory();
        let w = Watcher::new("kpi", [EventKind::KpiUpdate], 100);
        let ev = SimEvent { kind: EventKind::KpiUpdate, key: "slice/eMBB/throughput_mbps".into(), value: 60.0.into(), ts: 1 };
        assert_eq!(w.observe(&s, &ev).unwrap(), Some(1));
        let cfg = SimEvent { kind: EventKind::ConfigChange, ..ev };
        assert_eq!(w.observe(&s, &cfg).unwrap(), None);
    }

    #[test]
    fn invalid_key_rejected() {
        let s = TelemetryStore::in_memory();
        assert!(matches!(s.push(rec("a//b", 1.0, "w", 1, 1)), Err(ExecutiveError::InvalidKey(_))));
    }
}
