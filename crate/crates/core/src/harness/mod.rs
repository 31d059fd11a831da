//! Scenario files, the seeded Monte Carlo engine and the experiments.
//!
//! Every experiment takes a validated [`ScenarioConfig`], a grid and an
//! [`Engine`], and returns a [`CurveResult`] that [`export_csv`] writes.
//! Results depend only on the configuration, the seed and the grid.

pub mod ber;
pub mod config;
pub mod engine;
pub mod pdf;
pub mod result;
pub mod scenario;
pub mod ser;
pub mod snr;

pub use ber::{run_downlink_ber, Scheme, Sweep};
pub use config::{load_scenario, parse_scenario, PhaseMode, ScenarioConfig};
pub use engine::Engine;
pub use pdf::run_pdf_fit;
pub use result::{export_csv, read_csv, CurveResult, Series};
pub use ser::{run_uplink_ser, SerMode};
pub use snr::run_output_snr;
