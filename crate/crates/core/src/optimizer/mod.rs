//! Multi-objective search for SLA offers.
//!
//! [`run_nsga2`] explores per-slice resource allocations under global
//! budgets and per-slice SLA clauses and returns the feasible non-dominated
//! set as [`Offer`]s. [`exhaustive`] enumerates discretized instances and is
//! used to cross-check the search on small problems.

mod nsga2;
mod sorting;

pub mod exhaustive;
pub mod hypervolume;

pub use nsga2::{evaluate, repair, run_nsga2, Individual};
pub use sorting::{crowding_distance, dominates, non_dominated_sort};

use crate::kpi::{KpiError, KpiModel, KpiVector, ResourceVector, SliceAllocation, SliceClass};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("infeasible scenario: {clause}")]
    Infeasible { clause: String },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Kpi(#[from] KpiError),
}

/// System-wide resource limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalBudget {
    pub b_max: f64,
    pub c_max: f64,
    pub p_max: f64,
    pub s_max: f64,
}

impl GlobalBudget {
    pub fn as_array(&self) -> [f64; 4] {
        [self.b_max, self.c_max, self.p_max, self.s_max]
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.as_array().iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(OptimizerError::InvalidProblem(format!("budgets must be positive and finite: {self:?}")))
        }
    }
}

/// Slice-specific SLA bounds. Absent bounds are unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaClause {
    pub slice: SliceClass,
    #[serde(default, with = "crate::float::option", skip_serializing_if = "Option::is_none")]
    pub min_throughput_mbps: Option<f64>,
    #[serde(default, with = "crate::float::option", skip_serializing_if = "Option::is_none")]
    pub max_latency_ms: Option<f64>,
    #[serde(default, with = "crate::float::option", skip_serializing_if = "Option::is_none")]
    pub max_cost_eur: Option<f64>,
    #[serde(default, with = "crate::float::option", skip_serializing_if = "Option::is_none")]
    pub max_energy_w: Option<f64>,
}

/// One violated bound, e.g. `eMBB min_throughput_mbps 60 (achieved 59.00)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub slice: SliceClass,
    pub bound: &'static str,
    pub limit: f64,
    pub achieved: f64,
}

impl Violation {
    /// Relative size of the violation; unbounded latency counts as a large
    /// constant so it still orders against finite violations.
    pub fn magnitude(&self) -> f64 {
        if !self.achieved.is_finite() {
            return 1e3;
        }
        let scale = self.limit.abs().max(1.0);
        (self.achieved - self.limit).abs() / scale
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} (achieved {:.2})", self.slice, self.bound, self.limit, self.achieved)
    }
}

impl SlaClause {
    pub fn unbounded(slice: SliceClass) -> Self {
        Self { slice, min_throughput_mbps: None, max_latency_ms: None, max_cost_eur: None, max_energy_w: None }
    }

    pub fn has_bounds(&self) -> bool {
        self.min_throughput_mbps.is_some()
            || self.max_latency_ms.is_some()
            || self.max_cost_eur.is_some()
            || self.max_energy_w.is_some()
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        if !self.has_bounds() {
            return Err(OptimizerError::InvalidProblem(format!("{} clause has no bounds", self.slice)));
        }
        for v in [self.min_throughput_mbps, self.max_latency_ms, self.max_cost_eur, self.max_energy_w]
            .into_iter()
            .flatten()
        {
            if v.is_nan() || v < 0.0 {
                return Err(OptimizerError::InvalidProblem(format!(
                    "{} clause has a negative or NaN bound",
                    self.slice
                )));
            }
        }
        Ok(())
    }

    /// All bounds of this clause that `kpi` violates, in declaration order.
    pub fn violations(&self, kpi: &KpiVector) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |bound, limit, achieved| {
            out.push(Violation { slice: self.slice, bound, limit, achieved });
        };
        if let Some(t) = self.min_throughput_mbps {
            if kpi.throughput_mbps < t {
                push("min_throughput_mbps", t, kpi.throughput_mbps);
            }
        }
        if let Some(l) = self.max_latency_ms {
            if kpi.latency_ms > l {
                push("max_latency_ms", l, kpi.latency_ms);
            }
        }
        if let Some(c) = self.max_cost_eur {
            if kpi.cost_eur > c {
                push("max_cost_eur", c, kpi.cost_eur);
            }
        }
        if let Some(e) = self.max_energy_w {
            if kpi.energy_w > e {
                push("max_energy_w", e, kpi.energy_w);
            }
        }
        out
    }

    pub fn satisfied_by(&self, kpi: &KpiVector) -> bool {
        self.violations(kpi).is_empty()
    }
}

/// One slice of the decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub class: SliceClass,
    pub mcs: u8,
}

/// A complete optimization instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub slices: Vec<SliceSpec>,
    pub budget: GlobalBudget,
    pub clauses: Vec<SlaClause>,
    pub model: KpiModel,
}

impl Problem {
    pub fn new(
        slices: Vec<SliceSpec>,
        budget: GlobalBudget,
        clauses: Vec<SlaClause>,
        model: KpiModel,
    ) -> Result<Self, OptimizerError> {
        budget.validate()?;
        if slices.is_empty() {
            return Err(OptimizerError::InvalidProblem("no slices".into()));
        }
        for (i, s) in slices.iter().enumerate() {
            if slices[..i].iter().any(|o| o.class == s.class) {
                return Err(OptimizerError::InvalidProblem(format!("slice class {} repeated", s.class)));
            }
            model.table().entry(s.mcs)?;
        }
        for c in &clauses {
            c.validate()?;
            if !slices.iter().any(|s| s.class == c.slice) {
                return Err(OptimizerError::InvalidProblem(format!(
                    "clause references absent slice {}",
                    c.slice
                )));
            }
        }
        Ok(Self { slices, budget, clauses, model })
    }

    pub fn gene_count(&self) -> usize {
        self.slices.len() * 4
    }

    pub fn allocations(&self, genes: &[f64]) -> Vec<SliceAllocation> {
        self.slices
            .iter()
            .enumerate()
            .map(|(i, s)| SliceAllocation {
                class: s.class,
                mcs: s.mcs,
                resources: ResourceVector::from_array([
                    genes[4 * i],
                    genes[4 * i + 1],
                    genes[4 * i + 2],
                    genes[4 * i + 3],
                ]),
            })
            .collect()
    }

    pub fn kpis(&self, genes: &[f64]) -> Result<Vec<(SliceAllocation, KpiVector)>, KpiError> {
        self.allocations(genes)
            .into_iter()
            .map(|a| self.model.evaluate(&a).map(|k| (a, k)))
            .collect()
    }

    /// Every violated clause bound for the given per-slice KPIs.
    pub fn violations(&self, kpis: &[(SliceAllocation, KpiVector)]) -> Vec<Violation> {
        let mut out = Vec::new();
        for clause in &self.clauses {
            if let Some((_, k)) = kpis.iter().find(|(a, _)| a.class == clause.slice) {
                out.extend(clause.violations(k));
            }
        }
        out
    }

    /// Genes that sum above budget in some dimension (with float slack).
    pub fn within_budget(&self, genes: &[f64]) -> bool {
        let budget = self.budget.as_array();
        (0..4).all(|d| {
            let sum: f64 = (0..self.slices.len()).map(|i| genes[4 * i + d]).sum();
            sum <= budget[d] * (1.0 + 1e-12) + 1e-12
        })
    }
}

/// Hyper-parameters of the evolutionary search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NsgaParams {
    pub population: usize,
    pub generations: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    /// Gaussian mutation sigma per resource dimension (b, c, p, s), as a
    /// fraction of that dimension's budget.
    pub mutation_sigma: [f64; 4],
    pub top_k: usize,
    pub rng_seed: u64,
    /// Restrict genes to `n` evenly spaced values in `[0, budget]`.
    pub grid_points: Option<usize>,
}

impl Default for NsgaParams {
    fn default() -> Self {
        Self {
            population: 60,
            generations: 80,
            p_crossover: 0.9,
            p_mutation: 0.1,
            mutation_sigma: [0.05; 4],
            top_k: 3,
            rng_seed: 0x5eed,
            grid_points: None,
        }
    }
}

impl NsgaParams {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: &str| Err(OptimizerError::InvalidProblem(m.to_string()));
        if self.population < 2 || self.population % 2 != 0 {
            return bad("population must be even and at least 2");
        }
        if !(0.0..=1.0).contains(&self.p_crossover) || !(0.0..=1.0).contains(&self.p_mutation) {
            return bad("probabilities must lie in [0,1]");
        }
        if self.mutation_sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return bad("mutation_sigma must be finite and non-negative");
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        if matches!(self.grid_points, Some(n) if n < 2) {
            return bad("grid_points must be at least 2");
        }
        Ok(())
    }
}

/// A concrete SLA proposal: KPIs and the resources behind them, per slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub id: u32,
    #[serde(rename = "slices")]
    pub per_slice: BTreeMap<SliceClass, KpiVector>,
    #[serde(rename = "resources")]
    pub per_slice_resources: BTreeMap<SliceClass, ResourceVector>,
}

impl Offer {
    /// The all-zero offer used when stakeholders request a RAN shutdown.
    pub fn shutdown(id: u32, classes: impl IntoIterator<Item = SliceClass>) -> Self {
        let classes: Vec<_> = classes.into_iter().collect();
        Self {
            id,
            per_slice: classes.iter().map(|c| (*c, KpiVector::SHUTDOWN)).collect(),
            per_slice_resources: classes.iter().map(|c| (*c, ResourceVector::ZERO)).collect(),
        }
    }

    pub fn objectives(&self) -> [f64; 4] {
        crate::kpi::objectives_from_kpis(self.per_slice.values())
    }

    pub fn total_energy(&self) -> f64 {
        self.per_slice.values().map(|k| k.energy_w).sum()
    }

    pub fn kpi(&self, class: SliceClass) -> Option<&KpiVector> {
        self.per_slice.get(&class)
    }
}

/// Wire form of an offer list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferExport {
    pub offers: Vec<Offer>,
}

/// The non-dominated result of a search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub offers: Vec<Offer>,
    /// Crowding distance of each offer within the front (same order).
    #[serde(skip)]
    pub crowding: Vec<f64>,
    pub generations: usize,
    pub evaluations: usize,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.offers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offers.is_empty()
    }
}

/// Outcome of [`select_offers`].
#[derive(Debug, Clone, PartialEq)]
pub struct OfferSelection {
    /// Selected offers, renumbered `1..=k` in presentation order.
    pub offers: Vec<Offer>,
    /// Front ids of the selected offers, same order.
    pub source_ids: Vec<u32>,
    /// Set when the front held fewer than `k` offers.
    pub short_front: bool,
}

/// Picks the `k` offers with the largest crowding distance (ties go to the
/// lower front id) and renumbers them for presentation.
pub fn select_offers(front: &ParetoFront, k: usize) -> OfferSelection {
    let mut order: Vec<usize> = (0..front.offers.len()).collect();
    let crowd = |i: usize| front.crowding.get(i).copied().unwrap_or(0.0);
    order.sort_by(|&a, &b| {
        crowd(b)
            .partial_cmp(&crowd(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(front.offers[a].id.cmp(&front.offers[b].id))
    });
    let short_front = front.offers.len() < k;
    if short_front {
        tracing::warn!(front = front.offers.len(), k, "Pareto front shorter than requested offer count");
    }
    let chosen: Vec<usize> = order.into_iter().take(k).collect();
    let source_ids = chosen.iter().map(|&i| front.offers[i].id).collect();
    let offers = chosen
        .iter()
        .enumerate()
        .map(|(n, &i)| Offer { id: n as u32 + 1, ..front.offers[i].clone() })
        .collect();
    OfferSelection { offers, source_ids, short_front }
}
