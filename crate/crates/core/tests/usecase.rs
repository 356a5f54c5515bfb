use srb_core::runner::{build_policies, run_scenario, RunOptions};
use srb_core::scenario::Scenario;
use std::time::{Duration, Instant};

#[test]
fn bundled_use_case() {
    let s = Scenario::bundled();
    let policies = build_policies(&s, true, None).unwrap();
    let t0 = Instant::now();
    let run = run_scenario(&s, &policies, RunOptions { deterministic: true, ..Default::default() }).unwrap();
    assert!(t0.elapsed() < Duration::from_secs(60));

    let ids: Vec<&str> = run.phases.iter().map(|p| p.phase.as_str()).collect();
    assert_eq!(ids, ["PA", "PB", "PC", "PD"]);
    for p in &run.phases {
        assert!(p.consensus_offer.is_some(), "{}", p.phase);
        assert_eq!(p.rounds, 1);
    }
    assert!(run.phases[2].directive.as_ref().unwrap().is_off());

    let dynamic = run.dynamic.as_ref().unwrap();
    let baseline = run.baseline.as_ref().unwrap();
    assert_eq!(dynamic.ttis, s.total_ttis());
    let fo = |phase: &str| dynamic.phase(phase).unwrap().slices["factory-ops"].mean_throughput_mbps;
    let rise = fo("PD") / fo("PA") - 1.0;
    println!("factory-ops throughput PA {:.2} -> PD {:.2} (+{:.1}%)", fo("PA"), fo("PD"), rise * 100.0);
    assert!(rise >= 0.5);

    let lat = |r: &srb_core::netsim::RunReport| r.phase("PD").unwrap().slices["media-flex"].median_latency_ms.unwrap();
    let reduction = 1.0 - lat(dynamic) / lat(baseline);
    println!("media-flex PD latency {:.2} ms vs static {:.2} ms ({:.1}% lower)", lat(dynamic), lat(baseline), reduction * 100.0);
    assert!(reduction >= 0.6);

    let ledger = run.ledger.as_ref().unwrap();
    let cell = &ledger.cell;
    assert_eq!(cell.static_total + cell.added, cell.dynamic_total + cell.saved);
    assert_eq!(cell.static_total, baseline.cell_prbs().iter().sum::<u64>());
    println!("PRB ledger cell {:?}", cell);
    for (owner, l) in &ledger.per_owner {
        println!("PRB ledger {owner} {l:?}");
    }

    let trust = &run.trust;
    assert_eq!(trust.len(), 4);
    assert!(run.telemetry.current().len() > 0);
}
