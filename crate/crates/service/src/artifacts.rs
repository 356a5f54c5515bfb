//! Artifact directory of a scenario run:
//!
//! ```text
//! transcript.jsonl   signed envelopes, one per line
//! offers.json        presented offers per phase
//! trust.json         per-message and per-agent trust scores
//! report.json        phase outcomes, simulator summaries, PRB ledger
//! plots/             throughput.png, latency.png, prbs.png and the
//!                    per-TTI series as dynamic.csv / static.csv
//! ```
//!
//! Runs with external model adapters also write `model_exchanges.jsonl`.

use crate::plots::{Chart, Series, PALETTE};
use serde::Serialize;
use srb_core::netsim::{PhaseSummary, RunReport, SliceSeries};
use srb_core::optimizer::Offer;
use srb_core::protocol::{render_transcript, EnforcementDirective};
use srb_core::runner::{LedgerReport, ScenarioRun};
use srb_core::scenario::Scenario;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const TRANSCRIPT: &str = "transcript.jsonl";
pub const OFFERS: &str = "offers.json";
pub const TRUST: &str = "trust.json";
pub const REPORT: &str = "report.json";
pub const PLOTS: &str = "plots";
pub const MODEL_EXCHANGES: &str = "model_exchanges.jsonl";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("plot {}: {source}", path.display())]
    Plot { path: PathBuf, source: image::ImageError },
}

#[derive(Serialize)]
struct PhaseOffers<'a> {
    phase: &'a str,
    session_id: &'a str,
    front_size: usize,
    short_front: bool,
    consensus_offer: Option<u32>,
    offers: &'a [Offer],
}

#[derive(Serialize)]
struct OffersFile<'a> {
    phases: Vec<PhaseOffers<'a>>,
}

#[derive(Serialize)]
struct PhaseOutcome<'a> {
    phase: &'a str,
    session_id: &'a str,
    mcs: u8,
    rounds: u32,
    consensus_offer: Option<u32>,
    forced: bool,
    degraded: bool,
    infeasible: Option<&'a str>,
    front_size: usize,
    verdicts: usize,
    directive: Option<&'a EnforcementDirective>,
}

#[derive(Serialize)]
struct SimSection<'a> {
    ttis: u64,
    stride: usize,
    phases: &'a [PhaseSummary],
    mcs: Vec<u8>,
    series: BTreeMap<&'a str, SliceSeries>,
}

#[derive(Serialize)]
struct TrustSummary<'a> {
    session_id: &'a str,
    ranking: Vec<(&'a str, f64)>,
}

#[derive(Serialize)]
struct PlotLegend {
    file: String,
    /// Owner to `#rrggbb`; the static baseline is dashed in the same colour.
    colors: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Report<'a> {
    report_version: u32,
    scenario: &'a str,
    seed: u64,
    deterministic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<u128>,
    phases: Vec<PhaseOutcome<'a>>,
    dynamic: Option<SimSection<'a>>,
    #[serde(rename = "static")]
    baseline: Option<SimSection<'a>>,
    ledger: Option<&'a LedgerReport>,
    trust: Vec<TrustSummary<'a>>,
    plots: Vec<PlotLegend>,
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ArtifactError> {
    std::fs::write(path, bytes).map_err(|source| ArtifactError::Io { path: path.to_path_buf(), source })
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>, ArtifactError> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

fn sim_section(r: &RunReport, stride: usize) -> SimSection<'_> {
    let down = r.downsampled(stride);
    SimSection {
        ttis: r.ttis,
        stride: stride.max(1),
        phases: &r.phases,
        mcs: down.mcs.clone(),
        series: r.series.keys().map(|k| (k.as_str(), down.series[k].clone())).collect(),
    }
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Mean of the finite values in each window of `stride` samples.
fn window_mean(values: &[Option<f64>], stride: usize) -> Vec<Option<f64>> {
    values
        .chunks(stride.max(1))
        .map(|w| {
            let v: Vec<f64> = w.iter().flatten().copied().filter(|x| x.is_finite()).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

fn plots(dir: &Path, run: &ScenarioRun, stride: usize) -> Result<Vec<PlotLegend>, ArtifactError> {
    let reports: Vec<(RunReport, bool)> = [(&run.dynamic, false), (&run.baseline, true)]
        .into_iter()
        .filter_map(|(r, dashed)| r.as_ref().map(|r| (r.clone(), dashed)))
        .collect();
    let Some((first, _)) = reports.first() else { return Ok(Vec::new()) };
    let owners: Vec<String> = first.series.keys().cloned().collect();
    let colors: BTreeMap<String, String> =
        owners.iter().enumerate().map(|(i, o)| (o.clone(), hex(PALETTE[i % PALETTE.len()]))).collect();
    let dividers: Vec<usize> = first.phases.iter().skip(1).map(|p| p.start_tti as usize / stride.max(1)).collect();
    let plot_dir = dir.join(PLOTS);
    std::fs::create_dir_all(&plot_dir).map_err(|source| ArtifactError::Io { path: plot_dir.clone(), source })?;
    for (r, name) in [(&run.dynamic, "dynamic.csv"), (&run.baseline, "static.csv")] {
        if let Some(r) = r {
            write(&plot_dir.join(name), r.to_csv().as_bytes())?;
        }
    }

    let collect = |f: &dyn Fn(&SliceSeries) -> Vec<Option<f64>>| -> Vec<Vec<Option<f64>>> {
        reports.iter().flat_map(|(r, _)| owners.iter().map(|o| window_mean(&f(&r.series[o]), stride))).collect()
    };
    let throughput = collect(&|s| s.throughput_mbps.iter().map(|v| Some(*v)).collect());
    let latency = collect(&|s| s.latency_ms.clone());
    let prbs = collect(&|s| s.prbs.iter().map(|v| Some(f64::from(*v))).collect());

    let mut legends = Vec::new();
    for (name, data) in [("throughput.png", &throughput), ("latency.png", &latency), ("prbs.png", &prbs)] {
        let series = data
            .iter()
            .enumerate()
            .map(|(i, values)| Series {
                values,
                dashed: reports[i / owners.len().max(1)].1,
                color: PALETTE[(i % owners.len().max(1)) % PALETTE.len()],
            })
            .collect();
        let chart = Chart { width: 900, height: 360, series, dividers: dividers.clone() };
        let path = plot_dir.join(name);
        chart.save(&path).map_err(|source| ArtifactError::Plot { path: path.clone(), source })?;
        legends.push(PlotLegend { file: format!("{PLOTS}/{name}"), colors: colors.clone() });
    }
    Ok(legends)
}

/// Writes every artifact of `run` into `dir`. `elapsed` is recorded only
/// for non-deterministic runs.
pub fn write_run(
    dir: &Path,
    scenario: &Scenario,
    run: &ScenarioRun,
    deterministic: bool,
    elapsed: Option<Duration>,
) -> Result<(), ArtifactError> {
    std::fs::create_dir_all(dir).map_err(|source| ArtifactError::Io { path: dir.to_path_buf(), source })?;
    write(&dir.join(TRANSCRIPT), render_transcript(&run.transcript).as_bytes())?;

    let offers = OffersFile {
        phases: run
            .phases
            .iter()
            .zip(&run.outcomes)
            .map(|(p, o)| PhaseOffers {
                phase: &p.phase,
                session_id: &p.session_id,
                front_size: p.front_size,
                short_front: o.state.short_front,
                consensus_offer: p.consensus_offer,
                offers: &p.offers,
            })
            .collect(),
    };
    write(&dir.join(OFFERS), &json(&offers)?)?;
    write(&dir.join(TRUST), &json(&run.trust)?)?;

    write_report(dir, scenario, run, deterministic, elapsed)
}

fn write_report(
    dir: &Path,
    scenario: &Scenario,
    run: &ScenarioRun,
    deterministic: bool,
    elapsed: Option<Duration>,
) -> Result<(), ArtifactError> {
    let stride = scenario.file.netsim.downsample.max(1);
    let legends = plots(dir, run, stride)?;
    let report = Report {
        report_version: REPORT_VERSION,
        scenario: &scenario.file.name,
        seed: scenario.file.seed,
        deterministic,
        elapsed_ms: if deterministic { None } else { elapsed.map(|d| d.as_millis()) },
        phases: run
            .phases
            .iter()
            .map(|p| PhaseOutcome {
                phase: &p.phase,
                session_id: &p.session_id,
                mcs: p.mcs,
                rounds: p.rounds,
                consensus_offer: p.consensus_offer,
                forced: p.forced,
                degraded: p.degraded,
                infeasible: p.infeasible.as_deref(),
                front_size: p.front_size,
                verdicts: p.verdicts,
                directive: p.directive.as_ref(),
            })
            .collect(),
        dynamic: run.dynamic.as_ref().map(|r| sim_section(r, stride)),
        baseline: run.baseline.as_ref().map(|r| sim_section(r, stride)),
        ledger: run.ledger.as_ref(),
        trust: run.trust.iter().map(|t| TrustSummary { session_id: &t.session_id, ranking: t.ranking() }).collect(),
        plots: legends,
    };
    write(&dir.join(REPORT), &json(&report)?)
}

/// Simulator outputs only: report.json and plots/.
pub fn write_simulation(dir: &Path, scenario: &Scenario, run: &ScenarioRun) -> Result<(), ArtifactError> {
    std::fs::create_dir_all(dir).map_err(|source| ArtifactError::Io { path: dir.to_path_buf(), source })?;
    write_report(dir, scenario, run, true, None)
}
