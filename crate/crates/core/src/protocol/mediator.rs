use super::SessionState;
use crate::kpi::SliceClass;
use crate::optimizer::Offer;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// The mediator's pick for the current round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub offer_id: u32,
    pub rationale: String,
    /// Weighted score per offer id.
    pub scores: BTreeMap<u32, f64>,
    /// Per-agent utility of the recommended offer.
    pub utilities: BTreeMap<String, f64>,
}

/// How well `offer` serves a stakeholder of class `class`, relative to the
/// other published offers. eMBB looks at throughput, URLLC at latency and
/// mMTC at cost; the result lies in `[0, 1]`.
pub fn utility(class: SliceClass, offer: &Offer, offers: &[Offer]) -> f64 {
    let Some(k) = offer.kpi(class) else { return 0.0 };
    let column = || offers.iter().filter_map(|o| o.kpi(class));
    match class {
        SliceClass::Embb => {
            let t_max = column().map(|k| k.throughput_mbps).fold(0.0, f64::max);
            if t_max > 0.0 {
                k.throughput_mbps / t_max
            } else {
                0.0
            }
        }
        SliceClass::Urllc => {
            let l_min = column().map(|k| k.latency_ms).fold(f64::INFINITY, f64::min);
            if k.latency_ms.is_finite() && l_min.is_finite() && k.latency_ms > 0.0 {
                l_min / k.latency_ms
            } else {
                0.0
            }
        }
        SliceClass::Mmtc => {
            if k.cost_eur <= 0.0 {
                return 1.0;
            }
            let c_min = column().map(|k| k.cost_eur).fold(f64::INFINITY, f64::min);
            c_min / k.cost_eur
        }
    }
}

/// Recommends the offer maximizing the influence-weighted utility sum minus
/// `lambda` times the offer's energy relative to the most energy-hungry
/// offer. Influences are used as shares of their total, so scaling every
/// influence by the same factor leaves the pick unchanged. When the current
/// round's selections already agree on a published offer, that offer is
/// recommended. Ties go to the lowest id. `None` when no offers exist.
pub fn mediate(state: &SessionState, lambda: f64) -> Option<Recommendation> {
    let offers = &state.offers;
    if offers.is_empty() {
        return None;
    }
    let agents: Vec<(&str, SliceClass, f64)> = state
        .agents
        .iter()
        .filter_map(|a| {
            let intent = state.intents.get(a)?;
            Some((a.as_str(), intent.use_case, state.influence_of(a)))
        })
        .collect();
    let total_influence: f64 = agents.iter().map(|a| a.2).sum();
    let e_max = offers.iter().map(Offer::total_energy).fold(0.0, f64::max);

    let mut scores = BTreeMap::new();
    for offer in offers {
        let mut s = 0.0;
        if total_influence > 0.0 {
            for (_, class, infl) in &agents {
                s += infl / total_influence * utility(*class, offer, offers);
            }
        }
        if e_max > 0.0 {
            s -= lambda * offer.total_energy() / e_max;
        }
        scores.insert(offer.id, s);
    }

    let unanimous = state.unanimous_selection();
    let best = match unanimous {
        Some(id) => id,
        None => {
            let mut best = offers[0].id;
            let mut ids: Vec<u32> = offers.iter().map(|o| o.id).collect();
            ids.sort_unstable();
            for id in ids {
                if scores[&id] > scores[&best] || (scores[&id] == scores[&best] && id < best) {
                    best = id;
                }
            }
            best
        }
    };
    let winner = offers.iter().find(|o| o.id == best).expect("winner is published");
    let utilities: BTreeMap<String, f64> =
        agents.iter().map(|(a, class, _)| (a.to_string(), utility(*class, winner, offers))).collect();

    let mut rationale = if unanimous.is_some() {
        format!("All parties already select offer {best}; recommending it.")
    } else {
        format!(
            "Offer {best} gives the best balance between stakeholder objectives with a total energy of {:.2} W.",
            winner.total_energy()
        )
    };
    rationale.push_str(" Utilities:");
    for (a, u) in &utilities {
        let _ = write!(rationale, " {a}={u:.3}");
    }
    rationale.push('.');
    Some(Recommendation { offer_id: best, rationale, scores, utilities })
}
