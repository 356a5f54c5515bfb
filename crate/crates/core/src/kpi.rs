//! Slice KPI models: spectral-efficiency throughput, M/M/1 latency, linear
//! cost and power-as-energy, plus the four-component objective vector the
//! optimizer minimizes.
//!
//! Units are fixed throughout: bandwidth in MHz, throughput in Mbps, latency
//! in milliseconds, cost in EUR, energy in W.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use thiserror::Error;

const BUNDLED_MCS_TABLE: &str = include_str!("../data/mcs_table.csv");

/// Number of entries in an MCS table (indices 0..=28).
pub const MCS_ENTRIES: usize = 29;

#[derive(Debug, Error, PartialEq)]
pub enum KpiError {
    #[error("unknown MCS index {0}")]
    UnknownMcs(u8),
    #[error("invalid MCS table: {0}")]
    InvalidTable(String),
    #[error("invalid KPI parameter: {0}")]
    InvalidParam(String),
}

/// The three 5G service slice classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SliceClass {
    #[serde(rename = "eMBB")]
    Embb,
    #[serde(rename = "URLLC")]
    Urllc,
    #[serde(rename = "mMTC")]
    Mmtc,
}

impl SliceClass {
    pub const ALL: [SliceClass; 3] = [SliceClass::Embb, SliceClass::Urllc, SliceClass::Mmtc];

    pub fn as_str(self) -> &'static str {
        match self {
            SliceClass::Embb => "eMBB",
            SliceClass::Urllc => "URLLC",
            SliceClass::Mmtc => "mMTC",
        }
    }
}

impl fmt::Display for SliceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SliceClass {
    type Err = KpiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "embb" => Ok(SliceClass::Embb),
            "urllc" => Ok(SliceClass::Urllc),
            "mmtc" => Ok(SliceClass::Mmtc),
            _ => Err(KpiError::InvalidParam(format!("unknown slice class `{s}`"))),
        }
    }
}

/// Per-slice resource quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResourceVector {
    pub bandwidth_mhz: f64,
    pub compute_cycles: f64,
    pub power_w: f64,
    pub storage_mb: f64,
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector {
        bandwidth_mhz: 0.0,
        compute_cycles: 0.0,
        power_w: 0.0,
        storage_mb: 0.0,
    };

    pub fn new(bandwidth_mhz: f64, compute_cycles: f64, power_w: f64, storage_mb: f64) -> Self {
        Self { bandwidth_mhz, compute_cycles, power_w, storage_mb }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.bandwidth_mhz, self.compute_cycles, self.power_w, self.storage_mb]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: u8,
    pub modulation_order: u8,
    pub coding_rate: f64,
}

impl McsEntry {
    pub fn spectral_efficiency(&self) -> f64 {
        self.modulation_order as f64 * self.coding_rate
    }
}

/// A 29-entry modulation-and-coding table.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

#[derive(Deserialize)]
struct McsRow {
    index: u8,
    q: u8,
    r: f64,
}

impl McsTable {
    /// Parses a CSV with header `index,q,r`.
    pub fn from_csv(text: &str) -> Result<Self, KpiError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| KpiError::InvalidTable(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["index", "q", "r"] {
            return Err(KpiError::InvalidTable(format!(
                "expected header `index,q,r`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::with_capacity(MCS_ENTRIES);
        for row in rdr.deserialize::<McsRow>() {
            let row = row.map_err(|e| KpiError::InvalidTable(e.to_string()))?;
            entries.push(McsEntry { index: row.index, modulation_order: row.q, coding_rate: row.r });
        }
        Self::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<McsEntry>) -> Result<Self, KpiError> {
        if entries.len() != MCS_ENTRIES {
            return Err(KpiError::InvalidTable(format!(
                "expected {MCS_ENTRIES} rows, got {}",
                entries.len()
            )));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.index as usize != i {
                return Err(KpiError::InvalidTable(format!("row {i} carries index {}", e.index)));
            }
            if !(e.coding_rate > 0.0 && e.coding_rate <= 1.0) || e.modulation_order == 0 {
                return Err(KpiError::InvalidTable(format!("row {i} has invalid (q, r)")));
            }
        }
        for w in entries.windows(2) {
            if w[1].spectral_efficiency() < w[0].spectral_efficiency() {
                return Err(KpiError::InvalidTable(format!(
                    "spectral efficiency decreases at index {}",
                    w[1].index
                )));
            }
        }
        Ok(Self { entries })
    }

    /// The table shipped with the crate.
    pub fn bundled() -> &'static McsTable {
        static TABLE: OnceLock<McsTable> = OnceLock::new();
        TABLE.get_or_init(|| McsTable::from_csv(BUNDLED_MCS_TABLE).expect("bundled MCS table is valid"))
    }

    pub fn entry(&self, index: u8) -> Result<&McsEntry, KpiError> {
        self.entries.get(index as usize).ok_or(KpiError::UnknownMcs(index))
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }
}

/// Throughput, latency, cost and energy of one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpiVector {
    pub throughput_mbps: f64,
    #[serde(with = "crate::float")]
    pub latency_ms: f64,
    pub cost_eur: f64,
    pub energy_w: f64,
}

impl KpiVector {
    pub const SHUTDOWN: KpiVector = KpiVector {
        throughput_mbps: 0.0,
        latency_ms: f64::INFINITY,
        cost_eur: 0.0,
        energy_w: 0.0,
    };

    pub fn as_array(&self) -> [f64; 4] {
        [self.throughput_mbps, self.latency_ms, self.cost_eur, self.energy_w]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceParams {
    pub fixed_latency_ms: f64,
    pub load_ratio: f64,
}

impl Default for SliceParams {
    fn default() -> Self {
        Self { fixed_latency_ms: 1.0, load_ratio: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KpiModelParams {
    pub kappa: f64,
    pub packet_bits: u32,
    pub alpha_cost: f64,
    /// Post-formula throughput clamp; `None` disables it.
    pub cell_capacity_mbps: Option<f64>,
    pub slices: BTreeMap<SliceClass, SliceParams>,
}

impl Default for KpiModelParams {
    fn default() -> Self {
        Self {
            kappa: 0.86,
            packet_bits: 1500 * 8,
            alpha_cost: 1.0,
            cell_capacity_mbps: Some(133.7),
            slices: SliceClass::ALL.iter().map(|c| (*c, SliceParams::default())).collect(),
        }
    }
}

impl KpiModelParams {
    pub fn slice(&self, class: SliceClass) -> SliceParams {
        self.slices.get(&class).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), KpiError> {
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(KpiError::InvalidParam(format!("kappa {} outside (0,1]", self.kappa)));
        }
        if self.packet_bits == 0 {
            return Err(KpiError::InvalidParam("packet_bits must be positive".into()));
        }
        if !(self.alpha_cost.is_finite() && self.alpha_cost >= 0.0) {
            return Err(KpiError::InvalidParam("alpha_cost must be finite and non-negative".into()));
        }
        if let Some(cap) = self.cell_capacity_mbps {
            if !(cap > 0.0) {
                return Err(KpiError::InvalidParam("cell_capacity_mbps must be positive".into()));
            }
        }
        for (class, p) in &self.slices {
            if !(p.load_ratio > 0.0 && p.load_ratio < 1.0) {
                return Err(KpiError::InvalidParam(format!(
                    "{class} load_ratio {} outside (0,1)",
                    p.load_ratio
                )));
            }
            if !(p.fixed_latency_ms.is_finite() && p.fixed_latency_ms >= 0.0) {
                return Err(KpiError::InvalidParam(format!("{class} fixed_latency_ms invalid")));
            }
        }
        Ok(())
    }
}

/// One slice's decision: class, MCS and resources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceAllocation {
    pub class: SliceClass,
    pub mcs: u8,
    pub resources: ResourceVector,
}

/// KPI model bound to a parameter set and an MCS table.
#[derive(Debug, Clone)]
pub struct KpiModel {
    pub params: KpiModelParams,
    table: McsTable,
}

impl KpiModel {
    pub fn new(params: KpiModelParams) -> Result<Self, KpiError> {
        Self::with_table(params, McsTable::bundled().clone())
    }

    pub fn with_table(params: KpiModelParams, table: McsTable) -> Result<Self, KpiError> {
        params.validate()?;
        Ok(Self { params, table })
    }

    pub fn table(&self) -> &McsTable {
        &self.table
    }

    /// `kappa * Q_m * R_m * b`, clamped to the cell capacity when one is set.
    pub fn throughput(&self, bandwidth_mhz: f64, mcs: u8) -> Result<f64, KpiError> {
        let entry = self.table.entry(mcs)?;
        let raw = self.params.kappa * entry.spectral_efficiency() * bandwidth_mhz.max(0.0);
        Ok(match self.params.cell_capacity_mbps {
            Some(cap) => raw.min(cap),
            None => raw,
        })
    }

    /// Fixed component plus M/M/1 sojourn, in ms. Infinite when the slice
    /// has no bandwidth or the queue is unstable.
    pub fn latency(&self, bandwidth_mhz: f64, mcs: u8, class: SliceClass) -> Result<f64, KpiError> {
        let slice = self.params.slice(class);
        let t = self.throughput(bandwidth_mhz, mcs)?;
        if bandwidth_mhz <= 0.0 || t <= 0.0 || slice.load_ratio >= 1.0 {
            return Ok(f64::INFINITY);
        }
        // Mbps -> bit/s (x1e6), divided by packet size -> packets/s.
        let mu = t * 1e6 / self.params.packet_bits as f64;
        // 1/(mu(1-rho)) is in seconds; x1e3 -> ms.
        Ok(slice.fixed_latency_ms + 1e3 / (mu * (1.0 - slice.load_ratio)))
    }

    pub fn cost(&self, compute_cycles: f64, storage_mb: f64) -> f64 {
        self.params.alpha_cost * (compute_cycles + storage_mb)
    }

    pub fn energy(&self, power_w: f64) -> f64 {
        power_w
    }

    pub fn evaluate(&self, alloc: &SliceAllocation) -> Result<KpiVector, KpiError> {
        let r = &alloc.resources;
        Ok(KpiVector {
            throughput_mbps: self.throughput(r.bandwidth_mhz, alloc.mcs)?,
            latency_ms: self.latency(r.bandwidth_mhz, alloc.mcs, alloc.class)?,
            cost_eur: self.cost(r.compute_cycles, r.storage_mb),
            energy_w: self.energy(r.power_w),
        })
    }

    /// `(-sum T, sum L, sum C, sum E)`, all to be minimized.
    pub fn objective_vector(&self, allocs: &[SliceAllocation]) -> Result<[f64; 4], KpiError> {
        let kpis = allocs.iter().map(|a| self.evaluate(a)).collect::<Result<Vec<_>, _>>()?;
        Ok(objectives_from_kpis(kpis.iter()))
    }
}

/// Aggregates per-slice KPI vectors into the minimization vector.
pub fn objectives_from_kpis<'a>(kpis: impl IntoIterator<Item = &'a KpiVector>) -> [f64; 4] {
    let mut out = [0.0; 4];
    for k in kpis {
        out[0] -= k.throughput_mbps;
        out[1] += k.latency_ms;
        out[2] += k.cost_eur;
        out[3] += k.energy_w;
    }
    out
}
