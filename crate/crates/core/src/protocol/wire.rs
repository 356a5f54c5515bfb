//! Signed NDJSON envelopes.
//!
//! The signature is HMAC-SHA256 over the canonical serialization of the
//! envelope with the `sig` field removed: UTF-8, keys sorted ascending, no
//! whitespace, numbers in shortest round-trip form.

use super::ProtocolError;
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageKind {
    Intent,
    Offers,
    Selection,
    Recommendation,
    Consensus,
    Verdict,
    /// Simulator KPIs of an enforced directive; no effect on session state.
    Telemetry,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Intent => "intent",
            MessageKind::Offers => "offers",
            MessageKind::Selection => "selection",
            MessageKind::Recommendation => "recommendation",
            MessageKind::Consensus => "consensus",
            MessageKind::Verdict => "verdict",
            MessageKind::Telemetry => "telemetry",
        }
    }
}

/// One wire message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub session_id: String,
    pub round: u32,
    pub sender: String,
    pub kind: MessageKind,
    pub payload: Value,
    pub ts: u64,
    #[serde(default)]
    pub sig: String,
}

/// Serializes `v` canonically. Object keys are emitted in ascending byte
/// order regardless of how the map stores them.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push(':');
                write_canonical(&map[k.as_str()], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        other => {
            let _ = write!(out, "{other}");
        }
    }
}

impl Envelope {
    /// Builds an unsigned envelope around a serializable payload.
    pub fn new<P: Serialize>(
        session_id: &str,
        round: u32,
        sender: &str,
        kind: MessageKind,
        payload: &P,
        ts: u64,
    ) -> Result<Self, ProtocolError> {
        let payload = serde_json::to_value(payload).map_err(|e| ProtocolError::Payload(e.to_string()))?;
        Ok(Self { session_id: session_id.to_string(), round, sender: sender.to_string(), kind, payload, ts, sig: String::new() })
    }

    /// Canonical bytes covered by the signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut v = serde_json::to_value(self).expect("envelope serializes");
        if let Value::Object(map) = &mut v {
            map.remove("sig");
        }
        canonical_json(&v).into_bytes()
    }

    /// One NDJSON line (canonical, without trailing newline).
    pub fn to_line(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("envelope serializes"))
    }

    pub fn from_line(line: &str) -> Result<Self, ProtocolError> {
        serde_json::from_str(line).map_err(|e| ProtocolError::Payload(e.to_string()))
    }

    pub fn payload_as<T: for<'de> Deserialize<'de>>(&self) -> Result<T, ProtocolError> {
        serde_json::from_value(self.payload.clone()).map_err(|e| ProtocolError::Payload(e.to_string()))
    }
}

/// Parses an NDJSON transcript, skipping blank lines.
pub fn parse_transcript(text: &str) -> Result<Vec<Envelope>, ProtocolError> {
    text.lines().filter(|l| !l.trim().is_empty()).map(Envelope::from_line).collect()
}

/// Renders envelopes as NDJSON with a trailing newline per message.
pub fn render_transcript(messages: &[Envelope]) -> String {
    let mut out = String::new();
    for m in messages {
        out.push_str(&m.to_line());
        out.push('\n');
    }
    out
}

/// Per-participant HMAC keys.
#[derive(Clone, Default, PartialEq)]
pub struct KeyRing {
    keys: BTreeMap<String, [u8; 32]>,
}

impl std::fmt::Debug for KeyRing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyRing").field("participants", &self.keys.keys().collect::<Vec<_>>()).finish()
    }
}

impl KeyRing {
    pub fn new() -> Self {
        Self::default()
    }

    /// Key derived from `(seed, participant)`; used in deterministic runs.
    pub fn derive_key(seed: u64, participant: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"srb-session-key\0");
        h.update(seed.to_le_bytes());
        h.update(participant.as_bytes());
        h.finalize().into()
    }

    pub fn deterministic(seed: u64, participants: impl IntoIterator<Item = impl AsRef<str>>) -> Self {
        let mut ring = Self::new();
        for p in participants {
            ring.insert(p.as_ref(), Self::derive_key(seed, p.as_ref()));
        }
        ring
    }

    pub fn random(participants: impl IntoIterator<Item = impl AsRef<str>>) -> Self {
        use rand::RngCore;
        let mut ring = Self::new();
        for p in participants {
            let mut k = [0u8; 32];
            rand::thread_rng().fill_bytes(&mut k);
            ring.insert(p.as_ref(), k);
        }
        ring
    }

    pub fn insert(&mut self, participant: &str, key: [u8; 32]) {
        self.keys.insert(participant.to_string(), key);
    }

    pub fn key(&self, participant: &str) -> Option<&[u8; 32]> {
        self.keys.get(participant)
    }

    pub fn key_hex(&self, participant: &str) -> Option<String> {
        self.key(participant).map(hex::encode)
    }

    /// Participant whose key matches `hex_key`, if any.
    pub fn participant_for(&self, hex_key: &str) -> Option<&str> {
        let bytes = hex::decode(hex_key.trim()).ok()?;
        self.keys.iter().find(|(_, k)| k.as_slice() == bytes.as_slice()).map(|(p, _)| p.as_str())
    }

    pub fn participants(&self) -> impl Iterator<Item = &str> {
        self.keys.keys().map(String::as_str)
    }

    pub fn sign(&self, env: &mut Envelope) -> Result<(), ProtocolError> {
        let key = self.key(&env.sender).ok_or_else(|| ProtocolError::MissingKey(env.sender.clone()))?;
        let mut mac = HmacSha256::new_from_slice(key).expect("HMAC accepts any key length");
        mac.update(&env.signing_bytes());
        env.sig = hex::encode(mac.finalize().into_bytes());
        Ok(())
    }

    pub fn verify(&self, env: &Envelope) -> Result<(), ProtocolError> {
        let key = self.key(&env.sender).ok_or_else(|| ProtocolError::MissingKey(env.sender.clone()))?;
        let sig = hex::decode(&env.sig).map_err(|_| ProtocolError::BadSignature(env.sender.clone()))?;
        let mut mac = HmacSha256::new_from_slice(key).expect("HMAC accepts any key length");
        mac.update(&env.signing_bytes());
        mac.verify_slice(&sig).map_err(|_| ProtocolError::BadSignature(env.sender.clone()))
    }
}
