//! Core of the slice marketplace broker: KPI models, offer optimization,
//! negotiation protocol, scripted agents, trust scoring, arbitration,
//! telemetry, RAN simulation and compliance retrieval.

pub mod float;
pub mod kpi;
pub mod optimizer;
pub mod protocol;
pub mod agents;
pub mod judicial;
pub mod trust;
pub mod executive;
pub mod legislative;
pub mod netsim;
pub mod broker;
pub mod scenario;
pub mod runner;
pub mod experiments;
