use crate::kpi::{KpiVector, SliceClass};
use crate::optimizer::Offer;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Resource policy for one slice, derived from the agreed offer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceDirective {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    /// Fraction of the cell's PRBs, `b_i / sum(b)`.
    pub prb_share: f64,
    pub bandwidth_mhz: f64,
    pub compute_cycles: f64,
    pub power_w: f64,
    pub storage_mb: f64,
    /// KPIs the offer promised for this slice.
    pub target: KpiVector,
}

/// What the RAN controller receives once a consensus is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnforcementDirective {
    pub offer_id: u32,
    pub slices: BTreeMap<SliceClass, SliceDirective>,
}

impl EnforcementDirective {
    /// True when every slice is switched off.
    pub fn is_off(&self) -> bool {
        self.slices.values().all(|s| s.prb_share == 0.0)
    }

    pub fn for_owner(&self, owner: &str) -> Option<(SliceClass, &SliceDirective)> {
        self.slices.iter().find(|(_, d)| d.owner.as_deref() == Some(owner)).map(|(c, d)| (*c, d))
    }
}

/// Splits `offer` into per-slice policies. PRB shares sum to 1 unless the
/// offer allocates no bandwidth at all, in which case every share is 0.
pub fn decompose_offer(offer: &Offer, owners: &BTreeMap<SliceClass, String>) -> EnforcementDirective {
    let total_b: f64 = offer.per_slice_resources.values().map(|r| r.bandwidth_mhz).sum();
    let slices = offer
        .per_slice
        .iter()
        .map(|(class, kpi)| {
            let r = offer.per_slice_resources.get(class).copied().unwrap_or_default();
            let share = if total_b > 0.0 { r.bandwidth_mhz / total_b } else { 0.0 };
            (
                *class,
                SliceDirective {
                    owner: owners.get(class).cloned(),
                    prb_share: share,
                    bandwidth_mhz: r.bandwidth_mhz,
                    compute_cycles: r.compute_cycles,
                    power_w: r.power_w,
                    storage_mb: r.storage_mb,
                    target: *kpi,
                },
            )
        })
        .collect();
    EnforcementDirective { offer_id: offer.id, slices }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kpi::ResourceVector;

    #[test]
    fn zero_offer_gives_zero_directive() {
        let off = Offer::shutdown(1, SliceClass::ALL);
        let d = decompose_offer(&off, &BTreeMap::new());
        assert!(d.is_off());
        assert!(d.slices.values().all(|s| s.power_w == 0.0 && s.target.latency_ms.is_infinite()));
    }

    #[test]
    fn single_slice_gets_everything() {
        let mut off = Offer::shutdown(1, [SliceClass::Embb]);
        off.per_slice_resources.insert(SliceClass::Embb, ResourceVector::new(5.0, 0.0, 0.0, 0.0));
        let owners = BTreeMap::from([(SliceClass::Embb, "a".to_string())]);
        let d = decompose_offer(&off, &owners);
        assert_eq!(d.slices[&SliceClass::Embb].prb_share, 1.0);
        assert_eq!(d.for_owner("a").unwrap().0, SliceClass::Embb);
    }
}
