//! Command line runner, artifact writer and HTTP/WebSocket session API
//! around `srb-core`.

pub mod api;
pub mod artifacts;
pub mod cli;
pub mod llm;
pub mod plots;
