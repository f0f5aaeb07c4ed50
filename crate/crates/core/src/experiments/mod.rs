//! Replicated experiments: collapse grids, theory comparisons and the
//! low-dimensional consistency runs.

mod collapse;
mod compare;
mod consistency;
mod grid;

pub use collapse::{
    rep_seed, run_collapse_cell, run_collapse_rep, CellResult, CellSummary, RepRecord,
};
pub use compare::{compare_theory, ComparisonRow, TheoryComparison, MIN_REPS_FOR_COMPARISON};
pub use consistency::{
    ln_variance_bound, resample, run_consistency, ConsistencyConfig, ConsistencyRep,
    ConsistencyResult, TestEstimate, TestFunction, TestSummary, MC_ORACLE_SAMPLES,
};
pub use grid::{
    fig1, fig2, preset, run_grid, ExperimentGrid, GridCell, GridOutcome, SkippedCell,
    DEFAULT_BUDGET, DEFAULT_REPS, DEFAULT_SEED, DESK_REPS_LARGEST, FIG1_D, FIG1_N, FIG2_D, FIG2_N,
};
