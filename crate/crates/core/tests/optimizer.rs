use proptest::prelude::*;
use srb_core::kpi::{KpiModel, KpiModelParams, SliceClass};
use srb_core::optimizer::{
    exhaustive::exhaustive_front, hypervolume::hypervolume, repair, run_nsga2, select_offers, GlobalBudget, NsgaParams, Problem, SlaClause,
    SliceSpec,
};
use srb_core::scenario::Scenario;
use std::time::{Duration, Instant};

fn pa_problem() -> (Problem, NsgaParams) {
    let s = Scenario::bundled();
    let model = KpiModel::new(s.file.kpi.clone()).unwrap();
    let pa = &s.file.phases[0];
    let intents: Vec<_> = s.agent_ids().iter().map(|a| pa.intent(a).unwrap()).collect();
    let slices = SliceClass::ALL.iter().map(|c| SliceSpec { class: *c, mcs: pa.mcs }).collect();
    let clauses = intents.iter().map(|i| i.clause()).collect();
    (Problem::new(slices, s.file.budget, clauses, model).unwrap(), s.file.optimizer.clone())
}

#[test]
fn pa_front_is_feasible_and_sized() {
    let (problem, params) = pa_problem();
    let t0 = Instant::now();
    let front = run_nsga2(&problem, &params).unwrap();
    let took = t0.elapsed();
    assert!(took < Duration::from_secs(10), "{took:?}");
    assert!((10..=60).contains(&front.len()), "front size {}", front.len());
    let budget = problem.budget.as_array();
    for offer in &front.offers {
        for clause in &problem.clauses {
            let k = offer.kpi(clause.slice).unwrap();
            assert!(clause.satisfied_by(k), "offer {} breaks {:?}: {:?}", offer.id, clause, k);
        }
        let mut used = [0.0; 4];
        for r in offer.per_slice_resources.values() {
            for (u, x) in used.iter_mut().zip(r.as_array()) {
                *u += x;
            }
        }
        for d in 0..4 {
            assert!(used[d] <= budget[d] * (1.0 + 1e-9), "dimension {d}: {} > {}", used[d], budget[d]);
        }
        let total: f64 = offer.per_slice.values().map(|k| k.throughput_mbps).sum();
        assert!(total <= 133.7 + 1e-9);
    }
}

#[test]
fn search_is_deterministic() {
    let (problem, params) = pa_problem();
    let a = run_nsga2(&problem, &params).unwrap();
    let b = run_nsga2(&problem, &params).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn selection_presents_three_renumbered_offers() {
    let (problem, params) = pa_problem();
    let front = run_nsga2(&problem, &params).unwrap();
    let sel = select_offers(&front, 3);
    assert!(!sel.short_front);
    assert_eq!(sel.offers.iter().map(|o| o.id).collect::<Vec<_>>(), [1, 2, 3]);
    for (o, src) in sel.offers.iter().zip(&sel.source_ids) {
        let orig = front.offers.iter().find(|f| f.id == *src).unwrap();
        assert_eq!(o.per_slice, orig.per_slice);
    }
    let mut ids = sel.source_ids.clone();
    ids.dedup();
    assert_eq!(ids.len(), 3);
}

fn toy() -> Problem {
    let model = KpiModel::new(KpiModelParams { cell_capacity_mbps: None, ..Default::default() }).unwrap();
    let budget = GlobalBudget { b_max: 20.0, c_max: 10.0, p_max: 10.0, s_max: 20.0 };
    let slices = vec![SliceSpec { class: SliceClass::Embb, mcs: 28 }, SliceSpec { class: SliceClass::Urllc, mcs: 4 }];
    let clauses = vec![
        SlaClause { min_throughput_mbps: Some(5.0), ..SlaClause::unbounded(SliceClass::Embb) },
        SlaClause { min_throughput_mbps: Some(2.0), ..SlaClause::unbounded(SliceClass::Urllc) },
    ];
    Problem::new(slices, budget, clauses, model).unwrap()
}

#[test]
fn toy_front_reaches_oracle_hypervolume() {
    let problem = toy();
    let t0 = Instant::now();
    let oracle = exhaustive_front(&problem, 5).unwrap();
    let oracle_time = t0.elapsed();
    assert!(oracle_time < Duration::from_secs(5), "{oracle_time:?}");
    let params = NsgaParams { population: 100, generations: 150, grid_points: Some(5), rng_seed: 7, ..Default::default() };
    let front = run_nsga2(&problem, &params).unwrap();

    let oracle_pts: Vec<[f64; 4]> = oracle.iter().map(|p| p.objectives).collect();
    let found: Vec<[f64; 4]> = front.offers.iter().map(|o| o.objectives()).collect();
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for p in &oracle_pts {
        for d in 0..4 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let norm = |p: &[f64; 4]| -> Vec<f64> { (0..4).map(|d| (p[d] - lo[d]) / (hi[d] - lo[d]).max(1e-12)).collect() };
    let reference = [1.1; 4];
    let hv_oracle = hypervolume(&oracle_pts.iter().map(norm).collect::<Vec<_>>(), &reference);
    let hv_found = hypervolume(&found.iter().map(norm).collect::<Vec<_>>(), &reference);
    println!("oracle {} points in {oracle_time:?}, hv {hv_oracle:.4}; nsga {} points, hv {hv_found:.4}", oracle.len(), found.len());
    assert!(hv_found >= 0.95 * hv_oracle, "{hv_found} < 0.95 * {hv_oracle}");
}

proptest! {
    #[test]
    fn repair_lands_within_budget(genes in prop::collection::vec(0.0f64..100.0, 12)) {
        let budget = GlobalBudget { b_max: 27.33, c_max: 30.0, p_max: 25.0, s_max: 80.0 };
        let out = repair(&genes, &budget);
        let limits = budget.as_array();
        for d in 0..4 {
            let sum: f64 = (0..3).map(|i| out[4 * i + d]).sum();
            prop_assert!(sum <= limits[d] * (1.0 + 1e-12));
            let before: f64 = (0..3).map(|i| genes[4 * i + d]).sum();
            if before <= limits[d] {
                for i in 0..3 {
                    prop_assert_eq!(out[4 * i + d], genes[4 * i + d]);
                }
            }
        }
        prop_assert!(out.iter().all(|x| *x >= 0.0));
    }
}
