//! TTI-level RAN slice simulator: MCS traces, PRB allocation from
//! enforcement directives, FIFO queues per slice and PRB accounting.

use crate::kpi::{KpiError, KpiModel, SliceClass};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use thiserror::Error;

pub const DEFAULT_PRBS_PER_TTI: u32 = 106;

#[derive(Debug, Error, PartialEq)]
pub enum NetsimError {
    #[error("trace: {0}")]
    Trace(String),
    #[error("script: {0}")]
    Script(String),
    #[error("ledger runs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Kpi(#[from] KpiError),
}

/// Channel quality over time as `(tti, mcs)` points; the MCS holds until
/// the next point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsTrace {
    pub points: Vec<(u64, u8)>,
}

impl McsTrace {
    pub fn new(points: Vec<(u64, u8)>) -> Result<Self, NetsimError> {
        if points.is_empty() {
            return Err(NetsimError::Trace("empty trace".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(NetsimError::Trace(format!("tti {} does not increase after {}", w[1].0, w[0].0)));
            }
        }
        if let Some((tti, mcs)) = points.iter().find(|p| p.1 > 28) {
            return Err(NetsimError::Trace(format!("mcs {mcs} at tti {tti} outside 0..=28")));
        }
        Ok(Self { points })
    }

    /// Parses a `tti,mcs` CSV with header.
    pub fn from_csv(text: &str) -> Result<Self, NetsimError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut points = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| NetsimError::Trace(e.to_string()))?;
            let field = |n: usize| rec.get(n).unwrap_or("").trim().to_string();
            let tti = field(0).parse::<u64>().map_err(|e| NetsimError::Trace(format!("row {}: tti: {e}", i + 1)))?;
            let mcs = field(1).parse::<u8>().map_err(|e| NetsimError::Trace(format!("row {}: mcs: {e}", i + 1)))?;
            points.push((tti, mcs));
        }
        Self::new(points)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tti,mcs\n");
        for (t, m) in &self.points {
            let _ = writeln!(out, "{t},{m}");
        }
        out
    }

    /// One point per TTI built from `(length, mcs)` segments.
    pub fn from_segments(segments: &[(u64, u8)]) -> Result<Self, NetsimError> {
        let mut points = Vec::new();
        let mut t = 0;
        for &(len, mcs) in segments {
            for _ in 0..len {
                points.push((t, mcs));
                t += 1;
            }
        }
        Self::new(points)
    }

    pub fn mcs_at(&self, tti: u64) -> u8 {
        let idx = self.points.partition_point(|p| p.0 <= tti);
        if idx == 0 {
            self.points[0].1
        } else {
            self.points[idx - 1].1
        }
    }
}

/// Integer split of `total` proportional to `shares` (largest remainder,
/// ties to the lower index). Shares summing below 1 leave PRBs unassigned.
pub fn largest_remainder(shares: &[f64], total: u32) -> Vec<u32> {
    let sum: f64 = shares.iter().map(|s| s.max(0.0)).sum();
    let target = if sum > 1.0 { total as f64 } else { (total as f64 * sum).round() };
    let exact: Vec<f64> = shares
        .iter()
        .map(|s| if sum > 0.0 { s.max(0.0) / sum * target } else { 0.0 })
        .collect();
    let mut out: Vec<u32> = exact.iter().map(|x| x.floor() as u32).collect();
    let mut left = target as u32 - out.iter().sum::<u32>().min(target as u32);
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for i in order {
        if left == 0 {
            break;
        }
        if exact[i] > 0.0 {
            out[i] += 1;
            left -= 1;
        }
    }
    out
}

/// What one slice receives for a phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceConfig {
    pub owner: String,
    pub class: SliceClass,
    pub prb_share: f64,
    pub fixed_latency_ms: f64,
    pub offered_load_mbps: f64,
}

#[derive(Debug, Clone)]
struct Packet {
    arrival_ms: f64,
    remaining_bits: f64,
}

#[derive(Debug, Clone)]
pub struct SliceState {
    pub config: SliceConfig,
    pub prbs: u32,
    queue: VecDeque<Packet>,
    next_arrival_ms: f64,
    pub served_bits: f64,
    pub prbs_used: u64,
    /// Packets discarded when the slice was switched off.
    pub dropped: u64,
}

impl SliceState {
    pub fn backlog(&self) -> usize {
        self.queue.len()
    }
}

/// Packet arrival process of the offered load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrivals {
    /// Evenly spaced packets (constant bit rate).
    #[default]
    Cbr,
    /// Exponential inter-arrival times.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub prbs_per_tti: u32,
    pub packet_bits: u32,
    /// Count only PRBs carrying traffic; otherwise every allocated PRB.
    pub release_unused: bool,
    pub arrivals: Arrivals,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            prbs_per_tti: DEFAULT_PRBS_PER_TTI,
            packet_bits: 12_000,
            release_unused: true,
            arrivals: Arrivals::Cbr,
            seed: 1,
        }
    }
}

/// Per-slice outcome of one TTI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceSample {
    pub throughput_mbps: f64,
    pub latency_ms: Option<f64>,
    pub prbs: u32,
}

#[derive(Debug, Clone)]
pub struct CellState {
    pub config: SimConfig,
    pub tti: u64,
    pub slices: Vec<SliceState>,
    rng: ChaCha8Rng,
}

impl CellState {
    pub fn new(config: SimConfig) -> Self {
        Self { config, tti: 0, slices: Vec::new(), rng: ChaCha8Rng::seed_from_u64(config.seed) }
    }

    /// Installs a new set of slice configurations between two TTIs. Queues
    /// and counters of owners present before and after are kept.
    pub fn apply(&mut self, configs: &[SliceConfig]) -> Result<(), NetsimError> {
        let total: f64 = configs.iter().map(|c| c.prb_share).sum();
        if configs.iter().any(|c| !(c.prb_share >= 0.0) || !(c.offered_load_mbps >= 0.0)) || total > 1.0 + 1e-9 {
            return Err(NetsimError::Script(format!("shares must be non-negative and sum to at most 1 (got {total})")));
        }
        let prbs = largest_remainder(&configs.iter().map(|c| c.prb_share).collect::<Vec<_>>(), self.config.prbs_per_tti);
        let now = self.tti as f64;
        let mut old: BTreeMap<String, SliceState> = self.slices.drain(..).map(|s| (s.config.owner.clone(), s)).collect();
        for (c, p) in configs.iter().zip(prbs) {
            let mut s = old.remove(&c.owner).unwrap_or(SliceState {
                config: c.clone(),
                prbs: 0,
                queue: VecDeque::new(),
                next_arrival_ms: f64::INFINITY,
                served_bits: 0.0,
                prbs_used: 0,
                dropped: 0,
            });
            let load_changed = s.config.offered_load_mbps != c.offered_load_mbps || s.next_arrival_ms.is_infinite();
            s.config = c.clone();
            s.prbs = p;
            if p == 0 && c.offered_load_mbps == 0.0 {
                s.dropped += s.queue.len() as u64;
                s.queue.clear();
            }
            if load_changed {
                s.next_arrival_ms = self.draw_arrival(now, c.offered_load_mbps);
            }
            self.slices.push(s);
        }
        Ok(())
    }

    fn draw_arrival(&mut self, from: f64, load_mbps: f64) -> f64 {
        let rate = load_mbps * 1000.0 / self.config.packet_bits as f64;
        if rate <= 0.0 {
            return f64::INFINITY;
        }
        match self.config.arrivals {
            Arrivals::Cbr => from + 1.0 / rate,
            Arrivals::Poisson => from + Exp::new(rate).expect("positive rate").sample(&mut self.rng),
        }
    }
}

/// Advances the cell by one TTI at `mcs`, where the whole cell carries
/// `cell_capacity_mbps`.
pub fn step_tti(state: &mut CellState, cell_capacity_mbps: f64) -> Vec<SliceSample> {
    let end = state.tti as f64 + 1.0;
    let bits_per_prb = cell_capacity_mbps.max(0.0) * 1000.0 / state.config.prbs_per_tti as f64;
    let packet_bits = state.config.packet_bits as f64;
    let release = state.config.release_unused;
    let mut out = Vec::with_capacity(state.slices.len());
    for i in 0..state.slices.len() {
        while state.slices[i].next_arrival_ms < end {
            let t = state.slices[i].next_arrival_ms;
            state.slices[i].queue.push_back(Packet { arrival_ms: t, remaining_bits: packet_bits });
            let load = state.slices[i].config.offered_load_mbps;
            state.slices[i].next_arrival_ms = state.draw_arrival(t, load);
        }
        let s = &mut state.slices[i];
        let hol = s.queue.front().map(|p| end - p.arrival_ms);
        let mut budget = s.prbs as f64 * bits_per_prb;
        let mut served = 0.0;
        while budget > 0.0 {
            let Some(p) = s.queue.front_mut() else { break };
            let take = p.remaining_bits.min(budget);
            p.remaining_bits -= take;
            budget -= take;
            served += take;
            if p.remaining_bits <= 1e-9 {
                s.queue.pop_front();
            }
        }
        let needed = if bits_per_prb > 0.0 { ((served / bits_per_prb) - 1e-9).ceil().max(0.0) as u32 } else { 0 };
        let counted = if release { needed.min(s.prbs) } else { s.prbs };
        s.served_bits += served;
        s.prbs_used += counted as u64;
        out.push(SliceSample {
            throughput_mbps: served / 1000.0,
            latency_ms: hol.map(|h| h + s.config.fixed_latency_ms),
            prbs: counted,
        });
    }
    state.tti += 1;
    out
}

/// One phase of a run: a TTI range and the slice configuration in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phase: String,
    pub start_tti: u64,
    pub ttis: u64,
    pub slices: Vec<SliceConfig>,
    #[serde(default)]
    pub degraded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Dynamic,
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSeries {
    pub throughput_mbps: Vec<f64>,
    pub latency_ms: Vec<Option<f64>>,
    pub prbs: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePhaseSummary {
    pub class: SliceClass,
    pub prb_share: f64,
    pub offered_load_mbps: f64,
    pub mean_throughput_mbps: f64,
    #[serde(with = "crate::float::option")]
    pub median_latency_ms: Option<f64>,
    pub prbs_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: String,
    pub start_tti: u64,
    pub ttis: u64,
    pub degraded: bool,
    pub slices: BTreeMap<String, SlicePhaseSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: RunMode,
    pub ttis: u64,
    pub mcs: Vec<u8>,
    pub series: BTreeMap<String, SliceSeries>,
    pub phases: Vec<PhaseSummary>,
}

pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Runs contiguous phases over `trace`. Cell capacity per TTI is the KPI
/// model's throughput for `cell_bandwidth_mhz` at the trace MCS.
pub fn run(
    phases: &[PhasePlan],
    trace: &McsTrace,
    model: &KpiModel,
    cell_bandwidth_mhz: f64,
    mode: RunMode,
    config: SimConfig,
) -> Result<RunReport, NetsimError> {
    let mut expected = phases.first().map_or(0, |p| p.start_tti);
    for p in phases {
        if p.start_tti != expected {
            return Err(NetsimError::Script(format!("phase {} starts at {} not {expected}", p.phase, p.start_tti)));
        }
        expected += p.ttis;
    }
    let owners: Vec<String> = {
        let mut v: Vec<String> = phases.iter().flat_map(|p| p.slices.iter().map(|s| s.owner.clone())).collect();
        v.sort();
        v.dedup();
        v
    };
    let mut series: BTreeMap<String, SliceSeries> = owners
        .iter()
        .map(|o| (o.clone(), SliceSeries { throughput_mbps: vec![], latency_ms: vec![], prbs: vec![] }))
        .collect();
    let mut cell = CellState::new(config);
    cell.tti = phases.first().map_or(0, |p| p.start_tti);
    let mut mcs_series = Vec::new();
    let mut summaries = Vec::new();
    for p in phases {
        cell.apply(&p.slices)?;
        let from = series.values().next().map_or(0, |s| s.prbs.len());
        for _ in 0..p.ttis {
            let mcs = trace.mcs_at(cell.tti);
            let cap = model.throughput(cell_bandwidth_mhz, mcs)?;
            mcs_series.push(mcs);
            let samples = step_tti(&mut cell, cap);
            for o in &owners {
                let sample = cell
                    .slices
                    .iter()
                    .zip(&samples)
                    .find(|(s, _)| &s.config.owner == o)
                    .map(|(_, x)| *x)
                    .unwrap_or(SliceSample { throughput_mbps: 0.0, latency_ms: None, prbs: 0 });
                let s = series.get_mut(o).expect("owner series");
                s.throughput_mbps.push(sample.throughput_mbps);
                s.latency_ms.push(sample.latency_ms);
                s.prbs.push(sample.prbs);
            }
        }
        let slices = p
            .slices
            .iter()
            .map(|c| {
                let s = &series[&c.owner];
                let n = p.ttis.max(1) as f64;
                (
                    c.owner.clone(),
                    SlicePhaseSummary {
                        class: c.class,
                        prb_share: c.prb_share,
                        offered_load_mbps: c.offered_load_mbps,
                        mean_throughput_mbps: s.throughput_mbps[from..].iter().sum::<f64>() / n,
                        median_latency_ms: median(s.latency_ms[from..].iter().flatten().copied()),
                        prbs_total: s.prbs[from..].iter().map(|&x| x as u64).sum(),
                    },
                )
            })
            .collect();
        summaries.push(PhaseSummary {
            phase: p.phase.clone(),
            start_tti: p.start_tti,
            ttis: p.ttis,
            degraded: p.degraded,
            slices,
        });
    }
    Ok(RunReport { mode, ttis: mcs_series.len() as u64, mcs: mcs_series, series, phases: summaries })
}

impl RunReport {
    /// Total PRBs per TTI over all slices.
    pub fn cell_prbs(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.ttis as usize];
        for s in self.series.values() {
            for (o, p) in out.iter_mut().zip(&s.prbs) {
                *o += *p as u64;
            }
        }
        out
    }

    pub fn slice_prbs(&self, owner: &str) -> Option<Vec<u64>> {
        self.series.get(owner).map(|s| s.prbs.iter().map(|&p| p as u64).collect())
    }

    pub fn phase(&self, id: &str) -> Option<&PhaseSummary> {
        self.phases.iter().find(|p| p.phase == id)
    }

    /// Copy with every series keeping one sample in `stride`.
    pub fn downsampled(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let pick = |len: usize| (0..len).step_by(stride);
        let mut r = self.clone();
        r.mcs = pick(self.mcs.len()).map(|i| self.mcs[i]).collect();
        for (o, s) in &self.series {
            let d = r.series.get_mut(o).expect("same owners");
            d.throughput_mbps = pick(s.throughput_mbps.len()).map(|i| s.throughput_mbps[i]).collect();
            d.latency_ms = pick(s.latency_ms.len()).map(|i| s.latency_ms[i]).collect();
            d.prbs = pick(s.prbs.len()).map(|i| s.prbs[i]).collect();
        }
        r
    }

    /// Long-format CSV: `tti,mcs,owner,throughput_mbps,latency_ms,prbs`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tti,mcs,owner,throughput_mbps,latency_ms,prbs\n");
        for t in 0..self.ttis as usize {
            for (o, s) in &self.series {
                let lat = s.latency_ms[t].map(|l| format!("{l}")).unwrap_or_default();
                let _ = writeln!(out, "{t},{},{o},{},{lat},{}", self.mcs[t], s.throughput_mbps[t], s.prbs[t]);
            }
        }
        out
    }
}

/// PRB savings of a dynamic run against a static baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrbLedger {
    pub saved: u64,
    pub added: u64,
    pub static_total: u64,
    pub dynamic_total: u64,
    pub net_percent: f64,
}

pub fn prb_ledger(dynamic: &[u64], baseline: &[u64]) -> Result<PrbLedger, NetsimError> {
    if dynamic.len() != baseline.len() {
        return Err(NetsimError::LengthMismatch(dynamic.len(), baseline.len()));
    }
    let (mut saved, mut added) = (0u64, 0u64);
    for (&d, &s) in dynamic.iter().zip(baseline) {
        saved += s.saturating_sub(d);
        added += d.saturating_sub(s);
    }
    let static_total: u64 = baseline.iter().sum();
    let dynamic_total: u64 = dynamic.iter().sum();
    let net_percent =
        if static_total > 0 { (saved as f64 - added as f64) / static_total as f64 * 100.0 } else { 0.0 };
    Ok(PrbLedger { saved, added, static_total, dynamic_total, net_percent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpi::KpiModelParams;

    fn slice(owner: &str, share: f64, load: f64) -> SliceConfig {
        SliceConfig {
            owner: owner.into(),
            class: SliceClass::Embb,
            prb_share: share,
            fixed_latency_ms: 2.0,
            offered_load_mbps: load,
        }
    }

    #[test]
    fn largest_remainder_sums() {
        assert_eq!(largest_remainder(&[0.449, 0.265, 0.286], 106), vec![48, 28, 30]);
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.0, 0.0], 106), vec![0, 0]);
        assert_eq!(largest_remainder(&[0.25], 106), vec![27]);
    }

    #[test]
    fn trace_validation_and_lookup() {
        assert!(McsTrace::new(vec![]).is_err());
        assert!(McsTrace::new(vec![(0, 28), (0, 7)]).is_err());
        assert!(McsTrace::new(vec![(0, 29)]).is_err());
        let t = McsTrace::from_csv("tti,mcs\n0,28\n10,7\n").unwrap();
        assert_eq!((t.mcs_at(9), t.mcs_at(10), t.mcs_at(500)), (28, 7, 7));
        assert_eq!(McsTrace::from_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn zero_share_serves_nothing_and_queue_grows() {
        let mut cell = CellState::new(SimConfig::default());
        cell.apply(&[slice("a", 0.0, 20.0)]).unwrap();
        for _ in 0..50 {
            let s = step_tti(&mut cell, 100.0);
            assert_eq!(s[0].throughput_mbps, 0.0);
        }
        assert!(cell.slices[0].backlog() > 50);
    }

    #[test]
    fn underload_latency_near_one_tti_plus_fixed() {
        let mut cell = CellState::new(SimConfig::default());
        cell.apply(&[slice("a", 1.0, 10.0)]).unwrap();
        let lat: Vec<f64> = (0..2000).filter_map(|_| step_tti(&mut cell, 100.0)[0].latency_ms).collect();
        let m = median(lat).unwrap();
        assert!(m > 2.0 && m <= 3.0, "{m}");
    }

    #[test]
    fn shares_over_one_rejected() {
        let mut cell = CellState::new(SimConfig::default());
        assert!(cell.apply(&[slice("a", 0.7, 1.0), slice("b", 0.4, 1.0)]).is_err());
    }

    #[test]
    fn static_counts_allocation_dynamic_counts_need() {
        let model = KpiModel::new(KpiModelParams::default()).unwrap();
        let trace = McsTrace::from_segments(&[(100, 28)]).unwrap();
        let plan = [PhasePlan { phase: "A".into(), start_tti: 0, ttis: 100, slices: vec![slice("a", 0.5, 5.0)], degraded: false }];
        let st = run(&plan, &trace, &model, 20.0, RunMode::Static, SimConfig { release_unused: false, ..Default::default() }).unwrap();
        let dy = run(&plan, &trace, &model, 20.0, RunMode::Dynamic, SimConfig::default()).unwrap();
        assert!(st.series["a"].prbs.iter().all(|&p| p == 53));
        assert!(dy.series["a"].prbs.iter().sum::<u32>() < 53 * 100);
        assert_eq!(st.series["a"].throughput_mbps, dy.series["a"].throughput_mbps);
        let l = prb_ledger(&dy.cell_prbs(), &st.cell_prbs()).unwrap();
        assert_eq!(l.added, 0);
        assert_eq!(l.saved, l.static_total - l.dynamic_total);
    }

    #[test]
    fn ledger_examples() {
        let a = vec![10, 10, 10];
        assert_eq!(prb_ledger(&a, &a).unwrap().net_percent, 0.0);
        assert_eq!(prb_ledger(&[5, 5, 5], &a).unwrap().net_percent, 50.0);
        let l = prb_ledger(&[12, 4], &[10, 10]).unwrap();
        assert_eq!((l.saved, l.added), (6, 2));
        assert!(prb_ledger(&[1], &a).is_err());
    }

    #[test]
    fn non_contiguous_script_rejected() {
        let model = KpiModel::new(KpiModelParams::default()).unwrap();
        let trace = McsTrace::from_segments(&[(10, 28)]).unwrap();
        let p = |s| PhasePlan { phase: "x".into(), start_tti: s, ttis: 5, slices: vec![], degraded: false };
        assert!(run(&[p(0), p(6)], &trace, &model, 20.0, RunMode::Dynamic, SimConfig::default()).is_err());
    }
}
