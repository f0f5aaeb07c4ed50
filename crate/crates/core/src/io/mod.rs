//! Configuration parsing, result files and run manifests.

mod config;
mod manifest;
mod output;
mod theory;

pub use config::{parse_config, CollapseConfig, RunConfig, TheoryRequest};
pub use manifest::{digest_file, unix_now, verify, CellState, CellStatus, FileDigest, Manifest, Mismatch, MANIFEST_NAME};
pub use output::{
    consistency_rep_csv, consistency_summary_csv, fmt_f64, histogram, histogram_csv, rep_csv, summary_csv,
    to_json, write_collapse, write_consistency, write_file, Format, Histogram, CONSISTENCY_REP_HEADER,
    CONSISTENCY_SUMMARY_HEADER, HISTOGRAM_BINS, HISTOGRAM_HEADER, REP_HEADER, SUMMARY_HEADER,
};
pub use theory::{theory_report, TheoryReport};
