//! Sweep CSV and Touchstone input, project files, and report/track output.
//!
//! The sweep CSV is long format, one row per `(L, frequency)` pair, header
//! `L_mm,freq_GHz,mag` or `L_mm,freq_GHz,mag_dB`. Project files and reports
//! are TOML; unknown keys are errors.

mod config;
mod report;
mod sweep_csv;
mod touchstone;

pub use config::{
    load_config, parse_config, save_config, AnalysisConfig, CouplingConfig, FitConfig, FixedConfig, FreeConfig,
    GridConfig, LawConfig, ModeConfig, ObjectiveName, Project, ProjectConfig, SweepConfig,
};
pub use report::{render_report, save_report, Report};
pub use sweep_csv::{
    parse_sweep_csv, read_sweep_csv, sweep_csv_string, tracks_csv_string, write_sweep_csv, write_tracks_csv,
    MagnitudeScale, SweepCsvLayout,
};
pub use touchstone::{parse_touchstone_s21, read_touchstone_s21};
