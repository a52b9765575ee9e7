//! Config-driven experiments: build a scenario per seed, run the learner,
//! score accepts on held-out draws and write JSON Lines records plus a CSV
//! table.

pub mod config;
pub mod record;
pub mod run;
pub mod verify;

pub use config::{RunConfig, CONFIG_VERSION};
pub use record::{RecordLine, RunOutput, RunRecord, Summary, RECORD_SCHEMA_VERSION};
pub use run::{error_bound, run_scenario};
pub use verify::{verify_output, verify_records, VerifyReport, Violation};
